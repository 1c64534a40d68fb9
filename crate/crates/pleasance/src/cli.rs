//! Command line entry points.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use pleasance_core::analysis::{CorrelationKind, ParticipantResult, Report};
use pleasance_core::bt::{estimate_ilsr, estimate_mm, NormalizeOn};
use pleasance_core::protocol::build_schedule;
use pleasance_core::simulation::{run_session, CohortConfig, RunOptions};
use pleasance_core::stimulus::{default_catalog, generate_trajectory_with, StimulusId, StrokeRepeat};

use crate::bundle::write_bundle;
use crate::config::{Config, SinkKind};
use crate::error::{Error, Result};
use crate::eventlog::{log_hash, read_log, replay};
use crate::formats;
use crate::presenter::Presenter;
use crate::report::write_report_dir;
use crate::service::{self, AppState, Store};

#[derive(Debug, Parser)]
#[command(name = "pleasance", version, about = "Pairwise pleasantness experiments: sessions, estimation and analysis")]
pub struct Cli {
    /// TOML config file; `PLEASANCE_<SECTION>_<KEY>` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Ilsr,
    Mm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Repeat {
    Wrap,
    Clamp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scale {
    Log,
    Natural,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Correlation {
    Pearson,
    Spearman,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        presenter: Option<SinkKind>,
        /// Experimenter bearer token.
        #[arg(long, env = "PLEASANCE_TOKEN")]
        token: Option<String>,
    },
    /// Run synthetic participants through complete sessions.
    Simulate {
        #[arg(long, default_value_t = 10)]
        participants: usize,
        /// Rating noise sd; defaults to the calibrated cohort.
        #[arg(long)]
        noise: Option<f64>,
        /// Choice temperature; defaults to the calibrated cohort.
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit strengths to a dataset CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Ilsr)]
        method: Method,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, value_enum)]
        normalize_on: Option<Scale>,
        /// Number of items when the largest id does not appear.
        #[arg(long)]
        n_items: Option<usize>,
    },
    /// Build the comparison schedule for a ratings CSV.
    Schedule {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare before and after score tables.
    Analyze {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Correlation::Pearson)]
        correlation: Correlation,
    },
    /// Print the stimulus catalog.
    Catalog {
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export the focus trajectory of one stimulus.
    Trajectory {
        #[arg(long)]
        stimulus: StimulusId,
        #[arg(long, value_enum)]
        repeat: Option<Repeat>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay an event log, print its summary and optionally export a bundle.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

fn sink(output: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { port, bind, data_dir, presenter, token } => {
            if let Some(p) = port {
                config.service.port = p;
            }
            if let Some(b) = bind {
                config.service.bind = b;
            }
            if let Some(d) = data_dir {
                config.service.data_dir = d;
            }
            if let Some(s) = presenter {
                config.presenter.sink = s;
            }
            if token.is_some() {
                config.service.experimenter_token = token;
            }
            serve(config)
        }
        Command::Simulate { participants, noise, temperature, deterministic, seed, out } => {
            let mut cohort = CohortConfig::calibrated(participants, seed);
            if let Some(n) = noise {
                cohort.rating_noise_sd = n;
            }
            if let Some(t) = temperature {
                cohort.choice_temperature = t;
            }
            cohort.deterministic_choice = deterministic;
            let summary = simulate(&config, &cohort, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Estimate { input, output, method, alpha, tol, max_iter, normalize_on, n_items } => {
            let mut opts = config.bt.options();
            opts.alpha = alpha.unwrap_or(opts.alpha);
            opts.tol = tol.unwrap_or(opts.tol);
            opts.max_iter = max_iter.unwrap_or(opts.max_iter);
            if let Some(s) = normalize_on {
                opts.normalize_on = match s {
                    Scale::Log => NormalizeOn::Log,
                    Scale::Natural => NormalizeOn::Natural,
                };
            }
            let ds = formats::read_dataset(open(&input)?, n_items)?;
            let est = match method {
                Method::Ilsr => estimate_ilsr(&ds, &opts)?,
                Method::Mm => estimate_mm(&ds, &opts)?,
            };
            if !est.converged {
                tracing::warn!(iterations = est.iterations, "estimate did not converge");
            }
            formats::write_estimate(sink(output.as_deref())?, &est, &opts)
        }
        Command::Schedule { ratings, seed, output } => {
            let ratings = formats::read_ratings(open(&ratings)?)?;
            let schedule = build_schedule(&ratings, ratings.len(), seed, &config.schedule.protocol())?;
            formats::write_schedule(sink(output.as_deref())?, &schedule, &[])
        }
        Command::Analyze { before, after, out, correlation } => {
            let kind = match correlation {
                Correlation::Pearson => CorrelationKind::Pearson,
                Correlation::Spearman => CorrelationKind::Spearman,
            };
            let report = analyze(&formats::read_scores(open(&before)?)?, &formats::read_scores(open(&after)?)?, kind)?;
            write_report_dir(&out, &report)?;
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({
                "participants": report.participants.len(),
                "mean_r": report.mean_r(),
                "r_summary": report.r_summary,
                "mad_summary": report.mad_summary,
            }))?);
            Ok(())
        }
        Command::Catalog { format, output } => {
            let mut w = sink(output.as_deref())?;
            match format {
                Format::Csv => formats::write_catalog(w, &default_catalog()),
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &default_catalog())?;
                    writeln!(w)?;
                    Ok(())
                }
            }
        }
        Command::Trajectory { stimulus, repeat, output } => {
            let catalog = default_catalog();
            let spec = catalog
                .get(stimulus as usize)
                .ok_or_else(|| Error::Config(format!("no stimulus {stimulus} in the catalog")))?;
            let repeat = match repeat {
                Some(Repeat::Wrap) => StrokeRepeat::Wrap,
                Some(Repeat::Clamp) => StrokeRepeat::Clamp,
                None => config.stimulus.stroke_repeat,
            };
            formats::write_trajectory(sink(output.as_deref())?, &generate_trajectory_with(spec, repeat))
        }
        Command::Replay { log, bundle } => {
            let lines = read_log(&log)?;
            let state = replay(&lines)?;
            let summary = serde_json::json!({
                "session_id": state.session_id(),
                "phase": state.phase(),
                "events": state.event_log().len(),
                "remaining_trials": state.remaining_trials(),
                "log_hash": log_hash(state.event_log()),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if let Some(dir) = bundle {
                write_bundle(&dir, &state, &config.bt.options())?;
            }
            Ok(())
        }
    }
}

/// Pairs before and after tables by participant id.
pub fn analyze(before: &[(String, Vec<f64>)], after: &[(String, Vec<f64>)], kind: CorrelationKind) -> Result<Report> {
    let results = before
        .iter()
        .map(|(id, b)| {
            let a = after
                .iter()
                .find(|(other, _)| other == id)
                .ok_or_else(|| Error::Config(format!("participant {id} has no after scores")))?;
            Ok(ParticipantResult::with_correlation(id.clone(), b.clone(), a.1.clone(), kind)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::build(results)?)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SimulationSummary {
    pub participants: usize,
    pub mean_trials: f64,
    pub mean_r: f64,
    pub mean_kendall_tau: f64,
    pub out: PathBuf,
}

/// Runs `cohort` and writes one bundle per session under `out/sessions/`
/// plus the aggregate report under `out/report/`.
pub fn simulate(config: &Config, cohort: &CohortConfig, out: &Path) -> Result<SimulationSummary> {
    let options = RunOptions { protocol: config.schedule.protocol(), bt: config.bt.options() };
    let mut results = Vec::new();
    let (mut trials, mut tau) = (0.0, 0.0);
    for (i, participant) in cohort.cohort(default_catalog().len()).iter().enumerate() {
        let seed = cohort.seed.wrapping_add(i as u64);
        let run = run_session(participant, default_catalog(), seed, &options)?;
        write_bundle(&out.join("sessions").join(run.state.session_id()), &run.state, &options.bt)?;
        trials += run.state.schedule().map_or(0, |s| s.trials.len()) as f64;
        tau += pleasance_core::simulation::recovery_metrics(&participant.utilities, &run.estimate.theta)?.kendall_tau;
        results.push(run.result);
    }
    let n = results.len().max(1) as f64;
    let report = Report::build(results)?;
    write_report_dir(&out.join("report"), &report)?;
    Ok(SimulationSummary {
        participants: report.participants.len(),
        mean_trials: trials / n,
        mean_r: report.mean_r(),
        mean_kendall_tau: tau / n,
        out: out.to_path_buf(),
    })
}

fn serve(config: Config) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", config.service.bind, config.service.port)
        .parse()
        .map_err(|e| Error::Config(format!("bad bind address: {e}")))?;
    let data_dir = config.service.data_dir.clone();
    let presenter = Presenter::from_config(&config.presenter, &data_dir, config.stimulus.stroke_repeat);
    let store = Store::open(&data_dir, &config, presenter, service::system_clock())
        .map_err(|e| Error::Config(e.to_string()))?;
    let state = AppState { store: Arc::new(store), experimenter_token: config.service.experimenter_token.clone() };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(service::serve(addr, state))?;
    Ok(())
}
