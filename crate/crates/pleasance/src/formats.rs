//! CSV tables exchanged with analysis tools and other processes.

use std::io::{BufRead, BufReader, Read, Write};

use pleasance_core::analysis::{ParticipantResult, StimulusStat};
use pleasance_core::bt::{BtOptions, ComparisonDataset, Outcome, Provenance, StrengthEstimate};
use pleasance_core::protocol::{Choice, ComparisonSchedule, LikertRating};
use pleasance_core::stimulus::{FocusFrame, Pattern, StimulusId, StimulusSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn parse_err(what: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: what.to_string(), line, message: message.into() }
}

fn expect_headers<R: Read>(rdr: &mut csv::Reader<R>, what: &str, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(parse_err(what, 1, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRow {
    id: StimulusId,
    pattern: String,
    speed_mm_s: f64,
    am_hz: Option<f64>,
    lambda_mm: Option<f64>,
    d_mm: Option<f64>,
    offset_mm: Option<f64>,
    duration_s: f64,
}

const CATALOG_HEADER: [&str; 8] = ["id", "pattern", "speed_mm_s", "am_hz", "lambda_mm", "d_mm", "offset_mm", "duration_s"];

pub fn write_catalog<W: Write>(out: W, catalog: &[StimulusSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in catalog {
        w.serialize(CatalogRow {
            id: s.id,
            pattern: s.pattern.as_str().to_string(),
            speed_mm_s: s.speed_mm_s,
            am_hz: s.am_frequency_hz,
            lambda_mm: s.lm_wavelength_mm,
            d_mm: s.lm_displacement_mm,
            offset_mm: s.two_point_offset_mm,
            duration_s: s.duration_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a catalog table; path length and update rate take their standard
/// values.
pub fn read_catalog<R: Read>(input: R) -> Result<Vec<StimulusSpec>> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_headers(&mut rdr, "catalog", &CATALOG_HEADER)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CatalogRow>().enumerate() {
        let row = row?;
        let pattern =
            Pattern::parse(&row.pattern).ok_or_else(|| parse_err("catalog", i + 2, format!("unknown pattern {}", row.pattern)))?;
        let mut spec = StimulusSpec::new(row.id, pattern, row.speed_mm_s);
        spec.am_frequency_hz = row.am_hz;
        spec.lm_wavelength_mm = row.lambda_mm;
        spec.lm_displacement_mm = row.d_mm;
        spec.two_point_offset_mm = row.offset_mm;
        spec.duration_s = row.duration_s;
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(out: W, frames: &[FocusFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "focus_index", "x_mm", "y_mm", "amplitude"])?;
    for f in frames {
        for (k, focus) in f.foci.iter().enumerate() {
            w.serialize((f.t_s, k, focus.x_mm, focus.y_mm, focus.amplitude))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct OutcomeRow {
    winner_id: usize,
    loser_id: usize,
    provenance: String,
}

pub fn write_dataset<W: Write>(out: W, dataset: &ComparisonDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["winner_id", "loser_id", "provenance"])?;
    for o in dataset.outcomes() {
        w.serialize((o.winner, o.loser, o.provenance.as_str()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset over `n_items` items, or over one more than the largest
/// id seen when `n_items` is `None`.
pub fn read_dataset<R: Read>(input: R, n_items: Option<usize>) -> Result<ComparisonDataset> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_headers(&mut rdr, "dataset", &["winner_id", "loser_id", "provenance"])?;
    let mut outcomes = Vec::new();
    for (i, row) in rdr.deserialize::<OutcomeRow>().enumerate() {
        let row = row?;
        let provenance = Provenance::parse(&row.provenance)
            .ok_or_else(|| parse_err("dataset", i + 2, format!("unknown provenance {}", row.provenance)))?;
        outcomes.push(Outcome { winner: row.winner_id, loser: row.loser_id, provenance });
    }
    let n = n_items.unwrap_or_else(|| outcomes.iter().map(|o| o.winner.max(o.loser) + 1).max().unwrap_or(0));
    Ok(ComparisonDataset::from_outcomes(n, outcomes)?)
}

/// Run metadata written above the estimate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub alpha: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub item_id: usize,
    pub theta: f64,
    pub normalized_score: Option<f64>,
}

/// Writes `# key=value` metadata lines followed by the estimate table.
pub fn write_estimate<W: Write>(mut out: W, estimate: &StrengthEstimate, opts: &BtOptions) -> Result<()> {
    writeln!(out, "# alpha={}", opts.alpha)?;
    writeln!(out, "# tol={}", opts.tol)?;
    writeln!(out, "# iterations={}", estimate.iterations)?;
    writeln!(out, "# converged={}", estimate.converged)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_id", "theta", "normalized_score"])?;
    for (i, &theta) in estimate.theta.iter().enumerate() {
        let score = estimate.normalized_scores.as_ref().map(|s| s[i]);
        w.serialize((i, theta, score))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_estimate<R: Read>(input: R) -> Result<(EstimateMeta, Vec<EstimateRow>)> {
    let mut meta = EstimateMeta { alpha: f64::NAN, tol: f64::NAN, iterations: 0, converged: false };
    let mut seen = 0;
    let mut table = String::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let Some(kv) = line.strip_prefix('#') else {
            table.push_str(&line);
            table.push('\n');
            continue;
        };
        let (k, v) = kv.trim().split_once('=').ok_or_else(|| parse_err("estimate", i + 1, "expected key=value"))?;
        let bad = || parse_err("estimate", i + 1, format!("bad value for {k}"));
        match k {
            "alpha" => meta.alpha = v.parse().map_err(|_| bad())?,
            "tol" => meta.tol = v.parse().map_err(|_| bad())?,
            "iterations" => meta.iterations = v.parse().map_err(|_| bad())?,
            "converged" => meta.converged = v.parse().map_err(|_| bad())?,
            _ => continue,
        }
        seen += 1;
    }
    if seen < 4 {
        return Err(parse_err("estimate", 1, "missing metadata block"));
    }
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    expect_headers(&mut rdr, "estimate", &["item_id", "theta", "normalized_score"])?;
    let rows = rdr.deserialize().collect::<Result<Vec<EstimateRow>, _>>()?;
    Ok((meta, rows))
}

pub fn write_ratings<W: Write>(out: W, ratings: &[LikertRating]) -> Result<()> {
    let mut sorted = ratings.to_vec();
    sorted.sort_by_key(|r| r.stimulus_id);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stimulus_id", "rating", "is_anchor"])?;
    for r in sorted {
        w.serialize((r.stimulus_id, r.value, r.is_anchor))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ratings<R: Read>(input: R) -> Result<Vec<LikertRating>> {
    #[derive(Deserialize)]
    struct Row {
        stimulus_id: StimulusId,
        rating: i8,
        is_anchor: bool,
    }
    let mut rdr = csv::Reader::from_reader(input);
    expect_headers(&mut rdr, "ratings", &["stimulus_id", "rating", "is_anchor"])?;
    rdr.deserialize::<Row>()
        .map(|r| {
            let r = r?;
            Ok(LikertRating { stimulus_id: r.stimulus_id, value: r.rating, is_anchor: r.is_anchor })
        })
        .collect()
}

/// One row per trial in presentation order; `winner_id` stays empty for
/// unanswered trials.
pub fn write_schedule<W: Write>(out: W, schedule: &ComparisonSchedule, choices: &[Choice]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial_index", "id_a", "id_b", "winner_id"])?;
    for (i, t) in schedule.trials.iter().enumerate() {
        let winner = choices.get(i).map(|c| c.winner);
        w.serialize((i, t.left, t.right, winner))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub trial_index: usize,
    pub id_a: StimulusId,
    pub id_b: StimulusId,
    pub winner_id: Option<StimulusId>,
}

pub fn read_schedule<R: Read>(input: R) -> Result<Vec<ScheduleRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_headers(&mut rdr, "schedule", &["trial_index", "id_a", "id_b", "winner_id"])?;
    Ok(rdr.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Long-form score table: `participant_id,stimulus_id,score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub participant_id: String,
    pub stimulus_id: StimulusId,
    pub score: f64,
}

pub fn write_scores<W: Write>(out: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant_id", "stimulus_id", "score"])?;
    for r in rows {
        w.serialize((&r.participant_id, r.stimulus_id, r.score))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a score table into `(participant_id, scores by stimulus id)` in
/// first-appearance order. Every participant must score ids `0..n` once.
pub fn read_scores<R: Read>(input: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_headers(&mut rdr, "scores", &["participant_id", "stimulus_id", "score"])?;
    let mut out: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = row?;
        let idx = match out.iter().position(|(p, _)| *p == row.participant_id) {
            Some(idx) => idx,
            None => {
                out.push((row.participant_id.clone(), Vec::new()));
                out.len() - 1
            }
        };
        let slots = &mut out[idx].1;
        let id = row.stimulus_id as usize;
        if slots.len() <= id {
            slots.resize(id + 1, None);
        }
        if slots[id].replace(row.score).is_some() {
            return Err(parse_err("scores", i + 2, format!("duplicate stimulus {id} for {}", row.participant_id)));
        }
    }
    out.into_iter()
        .map(|(p, slots)| {
            let scores: Option<Vec<f64>> = slots.iter().copied().collect();
            scores.map(|s| (p.clone(), s)).ok_or_else(|| parse_err("scores", 0, format!("gaps in stimulus ids for {p}")))
        })
        .collect()
}

pub fn write_stimulus_stats<W: Write>(out: W, stats: &[StimulusStat]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stimulus_id", "mean", "sd"])?;
    for s in stats {
        w.serialize((s.stimulus_id, s.mean, s.sd))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_participant_stats<W: Write>(out: W, results: &[ParticipantResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant_id", "r", "mad"])?;
    for p in results {
        w.serialize((&p.participant_id, p.r, p.mad))?;
    }
    w.flush()?;
    Ok(())
}
