//! Bradley-Terry estimation from pairwise outcomes.
//!
//! Item `i` beats item `j` with probability `pi_i / (pi_i + pi_j)`. Strengths
//! are carried on the log scale, `theta_i = ln pi_i`, and always centered to
//! sum zero since the model only identifies differences.
//!
//! Two estimators maximize the same objective: the log-likelihood of the data
//! plus `alpha` pseudo-wins in each direction for every ordered pair.
//! [`estimate_ilsr`] is the spectral one (iterated stationary distributions);
//! [`estimate_mm`] is the classical minorization-maximization fixed point and
//! exists mainly to cross-check it.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ctmc_stationary;

pub type ItemId = usize;

/// Below this spread a strength vector is treated as carrying no preference.
pub const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BtError {
    #[error("at least {min} items are required, got {got}")]
    TooFewItems { min: usize, got: usize },
    #[error("item {item} out of range for {n_items} items")]
    ItemOutOfRange { item: ItemId, n_items: usize },
    #[error("item {0} cannot be compared with itself")]
    SelfComparison(ItemId),
    #[error("expected {expected} parameters, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("comparison graph is not strongly connected; components: {components:?}")]
    NotIdentifiable { components: Vec<Vec<ItemId>> },
    #[error("all strengths are equal; no preference signal to normalize")]
    DegenerateScale,
    #[error("invalid option: {0}")]
    InvalidOption(&'static str),
    #[error("stationary distribution could not be computed")]
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "observed" => Some(Provenance::Observed),
            "synthetic" => Some(Provenance::Synthetic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: ItemId,
    pub loser: ItemId,
    pub provenance: Provenance,
}

/// A multiset of pairwise outcomes over `n_items` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonDataset {
    n_items: usize,
    outcomes: Vec<Outcome>,
}

impl ComparisonDataset {
    pub fn new(n_items: usize) -> Result<Self, BtError> {
        if n_items == 0 {
            return Err(BtError::TooFewItems { min: 1, got: 0 });
        }
        Ok(Self { n_items, outcomes: Vec::new() })
    }

    pub fn from_outcomes(n_items: usize, outcomes: impl IntoIterator<Item = Outcome>) -> Result<Self, BtError> {
        let mut ds = Self::new(n_items)?;
        for o in outcomes {
            ds.push(o.winner, o.loser, o.provenance)?;
        }
        Ok(ds)
    }

    /// Observed outcomes from `(winner, loser)` pairs.
    pub fn from_pairs(n_items: usize, pairs: &[(ItemId, ItemId)]) -> Result<Self, BtError> {
        Self::from_outcomes(
            n_items,
            pairs.iter().map(|&(winner, loser)| Outcome { winner, loser, provenance: Provenance::Observed }),
        )
    }

    pub fn push(&mut self, winner: ItemId, loser: ItemId, provenance: Provenance) -> Result<(), BtError> {
        for item in [winner, loser] {
            if item >= self.n_items {
                return Err(BtError::ItemOutOfRange { item, n_items: self.n_items });
            }
        }
        if winner == loser {
            return Err(BtError::SelfComparison(winner));
        }
        self.outcomes.push(Outcome { winner, loser, provenance });
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.outcomes.iter().filter(|o| o.provenance == provenance).count()
    }

    /// Row-major `n x n` matrix; entry `(i, j)` counts wins of `i` over `j`.
    pub fn win_matrix(&self) -> Vec<f64> {
        let n = self.n_items;
        let mut w = vec![0.0; n * n];
        for o in &self.outcomes {
            w[o.winner * n + o.loser] += 1.0;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeOn {
    /// Min-max on `theta = ln pi`.
    #[default]
    Log,
    /// Min-max on `pi` itself.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtOptions {
    /// Pseudo-wins added in each direction for every ordered pair.
    pub alpha: f64,
    /// Stop once the largest change of a centered log-strength is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub normalize_on: NormalizeOn,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self { alpha: 0.01, tol: 1e-8, max_iter: 10_000, normalize_on: NormalizeOn::Log }
    }
}

impl BtOptions {
    pub fn validate(&self) -> Result<(), BtError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(BtError::InvalidOption("alpha must be finite and non-negative"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(BtError::InvalidOption("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(BtError::InvalidOption("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthEstimate {
    /// Centered log-strengths.
    pub theta: Vec<f64>,
    /// Scores on `[-3, +3]`; absent when `theta` has no spread.
    pub normalized_scores: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl StrengthEstimate {
    fn finish(theta: Vec<f64>, converged: bool, iterations: usize, on: NormalizeOn) -> Self {
        let normalized_scores = normalize_scores_on(&theta, on).ok();
        Self { theta, normalized_scores, converged, iterations }
    }

    /// `pi_i / pi_j`.
    pub fn strength_ratio(&self, i: ItemId, j: ItemId) -> f64 {
        libm::exp(self.theta[i] - self.theta[j])
    }
}

/// `exp(a) / (exp(a) + exp(b))` evaluated as a logistic of the difference.
pub fn win_probability(theta_i: f64, theta_j: f64) -> f64 {
    let d = theta_i - theta_j;
    if d >= 0.0 {
        1.0 / (1.0 + libm::exp(-d))
    } else {
        let e = libm::exp(d);
        e / (1.0 + e)
    }
}

/// `ln(win_probability(a, b))` without underflow for large gaps.
pub fn log_win_probability(theta_i: f64, theta_j: f64) -> f64 {
    let d = theta_i - theta_j;
    if d >= 0.0 {
        -libm::log1p(libm::exp(-d))
    } else {
        d - libm::log1p(libm::exp(d))
    }
}

pub fn log_likelihood(dataset: &ComparisonDataset, theta: &[f64]) -> Result<f64, BtError> {
    check_len(dataset, theta)?;
    Ok(dataset
        .outcomes
        .iter()
        .map(|o| log_win_probability(theta[o.winner], theta[o.loser]))
        .sum())
}

/// Log-likelihood plus `alpha` pseudo-wins each way on every ordered pair;
/// the objective both estimators maximize.
pub fn regularized_log_likelihood(dataset: &ComparisonDataset, theta: &[f64], alpha: f64) -> Result<f64, BtError> {
    let mut ll = log_likelihood(dataset, theta)?;
    if alpha > 0.0 {
        let n = theta.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    ll += alpha * log_win_probability(theta[i], theta[j]);
                }
            }
        }
    }
    Ok(ll)
}

fn check_len(dataset: &ComparisonDataset, theta: &[f64]) -> Result<(), BtError> {
    if theta.len() != dataset.n_items {
        return Err(BtError::LengthMismatch { expected: dataset.n_items, got: theta.len() });
    }
    Ok(())
}

/// Min-max normalizes onto `[0, 1]` and maps through `6s - 3`.
pub fn normalize_scores(theta: &[f64]) -> Result<Vec<f64>, BtError> {
    normalize_scores_on(theta, NormalizeOn::Log)
}

pub fn normalize_scores_on(theta: &[f64], on: NormalizeOn) -> Result<Vec<f64>, BtError> {
    if theta.len() < 2 {
        return Err(BtError::TooFewItems { min: 2, got: theta.len() });
    }
    let (lo, hi) = min_max(theta);
    // NaN spans fall through to the error too
    if (hi - lo).partial_cmp(&DEGENERATE_RANGE) != Some(core::cmp::Ordering::Greater) {
        return Err(BtError::DegenerateScale);
    }
    let values: Vec<f64> = match on {
        NormalizeOn::Log => theta.to_vec(),
        // dividing by the largest strength keeps exp in range
        NormalizeOn::Natural => theta.iter().map(|&t| libm::exp(t - hi)).collect(),
    };
    let (lo, hi) = min_max(&values);
    let span = hi - lo;
    Ok(values.iter().map(|&v| 6.0 * ((v - lo) / span) - 3.0).collect())
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn center(theta: &mut [f64]) {
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter_mut().for_each(|t| *t -= mean);
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max(libm::fabs(x - y)))
}

fn check_estimable(dataset: &ComparisonDataset, opts: &BtOptions) -> Result<(), BtError> {
    opts.validate()?;
    if dataset.n_items < 2 {
        return Err(BtError::TooFewItems { min: 2, got: dataset.n_items });
    }
    if opts.alpha == 0.0 {
        let c = connectivity(dataset);
        if !c.strongly_connected {
            return Err(BtError::NotIdentifiable { components: c.strong_components });
        }
    }
    Ok(())
}

/// Iterative Luce spectral ranking starting from equal strengths.
pub fn estimate_ilsr(dataset: &ComparisonDataset, opts: &BtOptions) -> Result<StrengthEstimate, BtError> {
    estimate_ilsr_from(dataset, opts, &vec![0.0; dataset.n_items])
}

/// Iterative Luce spectral ranking from the log-strengths `initial`.
///
/// Each step builds a Markov chain whose rate from `j` to `i` is
/// `(wins of i over j + alpha) / (pi_i + pi_j)` under the current strengths
/// and takes its stationary distribution as the next `pi`. The fixed point
/// satisfies the likelihood equations of the regularized objective.
pub fn estimate_ilsr_from(
    dataset: &ComparisonDataset,
    opts: &BtOptions,
    initial: &[f64],
) -> Result<StrengthEstimate, BtError> {
    check_len(dataset, initial)?;
    check_estimable(dataset, opts)?;
    let n = dataset.n_items;
    let wins = dataset.win_matrix();
    let mut theta = initial.to_vec();
    center(&mut theta);
    let mut rate = vec![0.0; n * n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let pi: Vec<f64> = theta.iter().map(|&t| libm::exp(t)).collect();
        for j in 0..n {
            for i in 0..n {
                rate[j * n + i] = if i == j { 0.0 } else { (wins[i * n + j] + opts.alpha) / (pi[i] + pi[j]) };
            }
        }
        let p = ctmc_stationary(&rate, n).ok_or(BtError::Numerical)?;
        let mut next: Vec<f64> = p.iter().map(|&x| libm::log(x)).collect();
        center(&mut next);
        let delta = max_abs_diff(&next, &theta);
        theta = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(StrengthEstimate::finish(theta, converged, iterations, opts.normalize_on))
}

/// Minorization-maximization: `pi_i <- W_i / sum_j N_ij / (pi_i + pi_j)`.
pub fn estimate_mm(dataset: &ComparisonDataset, opts: &BtOptions) -> Result<StrengthEstimate, BtError> {
    estimate_mm_inspect(dataset, opts, &vec![0.0; dataset.n_items], |_| {})
}

/// [`estimate_mm`] from `initial`, calling `inspect` with the centered
/// log-strengths after every iteration.
pub fn estimate_mm_inspect(
    dataset: &ComparisonDataset,
    opts: &BtOptions,
    initial: &[f64],
    mut inspect: impl FnMut(&[f64]),
) -> Result<StrengthEstimate, BtError> {
    check_len(dataset, initial)?;
    check_estimable(dataset, opts)?;
    let n = dataset.n_items;
    let wins = dataset.win_matrix();
    let total_wins: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| wins[i * n + j] + opts.alpha).sum())
        .collect();
    let mut theta = initial.to_vec();
    center(&mut theta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let pi: Vec<f64> = theta.iter().map(|&t| libm::exp(t)).collect();
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (wins[i * n + j] + wins[j * n + i] + 2.0 * opts.alpha) / (pi[i] + pi[j]))
                    .sum();
                libm::log(total_wins[i] / denom)
            })
            .collect();
        if next.iter().any(|t| !t.is_finite()) {
            return Err(BtError::Numerical);
        }
        center(&mut next);
        let delta = max_abs_diff(&next, &theta);
        theta = next;
        inspect(&theta);
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(StrengthEstimate::finish(theta, converged, iterations, opts.normalize_on))
}

/// Reachability structure of the comparison graph (edge loser -> winner).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub strongly_connected: bool,
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub strong_components: Vec<Vec<ItemId>>,
    pub weak_components: Vec<Vec<ItemId>>,
}

pub fn is_connected(dataset: &ComparisonDataset) -> bool {
    connectivity(dataset).strongly_connected
}

/// Components via transitive closure; cubic in `n_items`, which is small here.
pub fn connectivity(dataset: &ComparisonDataset) -> Connectivity {
    let n = dataset.n_items;
    let mut directed = vec![false; n * n];
    let mut undirected = vec![false; n * n];
    for i in 0..n {
        directed[i * n + i] = true;
        undirected[i * n + i] = true;
    }
    for o in &dataset.outcomes {
        directed[o.loser * n + o.winner] = true;
        undirected[o.loser * n + o.winner] = true;
        undirected[o.winner * n + o.loser] = true;
    }
    close(&mut directed, n);
    close(&mut undirected, n);
    let strong_components = components(n, |i, j| directed[i * n + j] && directed[j * n + i]);
    let weak_components = components(n, |i, j| undirected[i * n + j]);
    Connectivity { strongly_connected: strong_components.len() == 1, strong_components, weak_components }
}

fn close(reach: &mut [bool], n: usize) {
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
}

fn components(n: usize, same: impl Fn(usize, usize) -> bool) -> Vec<Vec<ItemId>> {
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let comp: Vec<ItemId> = (i..n).filter(|&j| !assigned[j] && same(i, j)).collect();
        for &j in &comp {
            assigned[j] = true;
        }
        out.push(comp);
    }
    out
}
