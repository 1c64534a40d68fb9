//! Before/after comparison statistics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} values, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("correlation is undefined for a constant vector")]
    ConstantInput,
    #[error("no participant results")]
    Empty,
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<(), AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < min {
        return Err(AnalysisError::TooShort { min, got: a.len() });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson_r(before: &[f64], after: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(before, after, 2)?;
    let (mx, my) = (mean(before), mean(after));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in before.iter().zip(after) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of tie-averaged ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, 2)?;
    pearson_r(&average_ranks(a), &average_ranks(b))
}

/// Kendall's tau-b (tie-corrected; equals tau-a without ties).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(a, b, 2)?;
    let n = a.len();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            match (da, db) {
                (0, 0) => {}
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let na = (concordant + discordant + ties_b) as f64;
    let nb = (concordant + discordant + ties_a) as f64;
    if na == 0.0 || nb == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok((concordant - discordant) as f64 / libm::sqrt(na * nb))
}

pub fn mean_absolute_difference(before: &[f64], after: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(before, after, 1)?;
    Ok(before.iter().zip(after).map(|(x, y)| libm::fabs(x - y)).sum::<f64>() / before.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

/// One participant's ratings and normalized scores, indexed by stimulus id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub participant_id: String,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub r: f64,
    pub mad: f64,
}

impl ParticipantResult {
    pub fn new(participant_id: impl Into<String>, before: Vec<f64>, after: Vec<f64>) -> Result<Self, AnalysisError> {
        Self::with_correlation(participant_id, before, after, CorrelationKind::Pearson)
    }

    pub fn with_correlation(
        participant_id: impl Into<String>,
        before: Vec<f64>,
        after: Vec<f64>,
        kind: CorrelationKind,
    ) -> Result<Self, AnalysisError> {
        let r = match kind {
            CorrelationKind::Pearson => pearson_r(&before, &after)?,
            CorrelationKind::Spearman => spearman_rho(&before, &after)?,
        };
        let mad = mean_absolute_difference(&before, &after)?;
        Ok(Self { participant_id: participant_id.into(), before, after, r, mad })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusStat {
    pub stimulus_id: usize,
    pub mean: f64,
    /// Sample standard deviation; absent with a single participant.
    pub sd: Option<f64>,
}

/// Per-stimulus mean and sample standard deviation of the `after` scores.
pub fn aggregate_stats(results: &[ParticipantResult]) -> Result<Vec<StimulusStat>, AnalysisError> {
    let first = results.first().ok_or(AnalysisError::Empty)?;
    let n_stim = first.after.len();
    for r in results {
        if r.after.len() != n_stim {
            return Err(AnalysisError::LengthMismatch { left: n_stim, right: r.after.len() });
        }
    }
    let n = results.len() as f64;
    Ok((0..n_stim)
        .map(|s| {
            let mean = results.iter().map(|r| r.after[s]).sum::<f64>() / n;
            let sd = (results.len() > 1).then(|| {
                let ss: f64 = results.iter().map(|r| (r.after[s] - mean) * (r.after[s] - mean)).sum();
                libm::sqrt(ss / (n - 1.0))
            });
            StimulusStat { stimulus_id: s, mean, sd }
        })
        .collect())
}

/// Box-plot summary with whiskers at the extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles by linear interpolation between order statistics.
pub fn five_number_summary(values: &[f64]) -> Result<FiveNumber, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::TooShort { min: 1, got: 0 });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = libm::floor(pos) as usize;
        let hi = libm::ceil(pos) as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Ok(FiveNumber { min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
}

/// Everything behind the before/after figures, ready to render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub participants: Vec<ParticipantResult>,
    pub mad_summary: FiveNumber,
    pub r_summary: FiveNumber,
    pub stimuli: Vec<StimulusStat>,
}

impl Report {
    pub fn build(results: Vec<ParticipantResult>) -> Result<Self, AnalysisError> {
        if results.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let stimuli = aggregate_stats(&results)?;
        let mads: Vec<f64> = results.iter().map(|r| r.mad).collect();
        let rs: Vec<f64> = results.iter().map(|r| r.r).collect();
        Ok(Self {
            mad_summary: five_number_summary(&mads)?,
            r_summary: five_number_summary(&rs)?,
            stimuli,
            participants: results,
        })
    }

    pub fn mean_r(&self) -> f64 {
        mean(&self.participants.iter().map(|p| p.r).collect::<Vec<_>>())
    }
}
