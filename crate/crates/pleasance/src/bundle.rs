//! Export bundle: a directory holding everything recorded for a session.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pleasance_core::analysis::{ParticipantResult, Report};
use pleasance_core::bt::{estimate_ilsr, BtOptions, StrengthEstimate};
use pleasance_core::protocol::{Phase, SessionState};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{log_hash, write_log};
use crate::formats::{write_dataset, write_estimate, write_ratings, write_schedule};
use crate::report::write_report_dir;

/// Estimate and before/after result of a completed session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResults {
    pub session_id: String,
    pub estimate: StrengthEstimate,
    pub result: ParticipantResult,
    pub metadata: ResultsMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMeta {
    pub alpha: f64,
    pub observed_outcomes: usize,
    pub synthetic_outcomes: usize,
    /// No trial was answered; the estimate rests on implied outcomes and
    /// regularization alone.
    pub synthetic_only: bool,
    pub log_hash: String,
}

pub fn compute_results(state: &SessionState, bt: &BtOptions) -> Result<SessionResults> {
    use pleasance_core::bt::Provenance;
    let dataset = state.assemble_dataset()?;
    let estimate = estimate_ilsr(&dataset, bt)?;
    let after = estimate.normalized_scores.clone().ok_or(pleasance_core::bt::BtError::DegenerateScale)?;
    let before: Vec<f64> = state.rating_values()?.into_iter().map(f64::from).collect();
    let result = ParticipantResult::new(state.session_id(), before, after)?;
    let observed = dataset.count(Provenance::Observed);
    Ok(SessionResults {
        session_id: state.session_id().to_string(),
        estimate,
        result,
        metadata: ResultsMeta {
            alpha: bt.alpha,
            observed_outcomes: observed,
            synthetic_outcomes: dataset.count(Provenance::Synthetic),
            synthetic_only: observed == 0,
            log_hash: log_hash(state.event_log()),
        },
    })
}

/// Writes `events.jsonl`, `ratings.csv`, `schedule.csv` and, for completed
/// sessions, `dataset.csv`, `estimate.csv`, `results.json` and a `report/`
/// directory. Returns the names written.
pub fn write_bundle(dir: &Path, state: &SessionState, bt: &BtOptions) -> Result<Vec<String>> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    let mut written = vec!["events.jsonl".to_string()];
    write_log(&dir.join("events.jsonl"), state.event_log())?;
    let mut file = |name: &str| -> Result<BufWriter<File>> {
        written.push(name.to_string());
        Ok(BufWriter::new(File::create(dir.join(name))?))
    };
    write_ratings(file("ratings.csv")?, state.ratings())?;
    if let Some(schedule) = state.schedule() {
        write_schedule(file("schedule.csv")?, schedule, state.choices())?;
    }
    if state.phase() == Phase::Complete {
        let results = compute_results(state, bt)?;
        write_dataset(file("dataset.csv")?, &state.assemble_dataset()?)?;
        write_estimate(file("estimate.csv")?, &results.estimate, bt)?;
        serde_json::to_writer_pretty(file("results.json")?, &results)?;
        let report = Report::build(vec![results.result]).map_err(Error::from)?;
        write_report_dir(&dir.join("report"), &report)?;
        written.push("report".into());
    }
    Ok(written)
}

pub fn bundle_dir(root: &Path, session_id: &str) -> PathBuf {
    root.join("exports").join(session_id)
}
