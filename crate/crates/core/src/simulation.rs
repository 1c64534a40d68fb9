//! Synthetic participants with latent utilities, used to drive complete
//! sessions and check what the reduced comparison budget recovers.
//!
//! A participant forms one noisy impression `u_i + e_i` of each stimulus
//! during the pre-evaluation, picks group extremes and anchors from those
//! impressions, and rates the rest by mapping impressions affinely onto the
//! anchor span and rounding. Forced choices then follow the Bradley-Terry
//! rule with strengths `exp(u_i / temperature)`.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, ParticipantResult};
use crate::bt::{self, BtError, BtOptions, ComparisonDataset, StrengthEstimate};
use crate::protocol::{
    self, Anchors, GroupPick, LikertRating, Millis, ProtocolConfig, ProtocolError, Response, ResponseSchema,
    SessionState, GROUP_SIZE, RATING_MAX, RATING_MIN,
};
use crate::stimulus::{StimulusId, StimulusSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid participant: {0}")]
    InvalidParticipant(&'static str),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParticipant {
    /// Latent pleasantness per stimulus id.
    pub utilities: Vec<f64>,
    pub choice_temperature: f64,
    pub rating_noise_sd: f64,
    /// Always pick the higher-utility stimulus instead of sampling.
    pub deterministic_choice: bool,
    pub seed: u64,
}

impl SyntheticParticipant {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.utilities.iter().any(|u| !u.is_finite()) {
            return Err(SimulationError::InvalidParticipant("utilities must be finite"));
        }
        if !(self.choice_temperature.is_finite() && self.choice_temperature > 0.0) {
            return Err(SimulationError::InvalidParticipant("temperature must be positive"));
        }
        if !(self.rating_noise_sd.is_finite() && self.rating_noise_sd >= 0.0) {
            return Err(SimulationError::InvalidParticipant("rating noise must be non-negative"));
        }
        Ok(())
    }
}

/// What the participant decided during the pre-evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreEvaluation {
    pub group_picks: Vec<GroupPick>,
    pub anchors: Anchors,
    /// All stimuli, anchors included, in id order.
    pub ratings: Vec<LikertRating>,
}

/// A participant together with its private random stream.
#[derive(Debug, Clone)]
pub struct SimulatedParticipant {
    spec: SyntheticParticipant,
    rng: ChaCha8Rng,
}

impl SimulatedParticipant {
    pub fn new(spec: SyntheticParticipant) -> Result<Self, SimulationError> {
        spec.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(Self { spec, rng })
    }

    pub fn spec(&self) -> &SyntheticParticipant {
        &self.spec
    }

    /// Group extremes, anchors and ratings for the given grouping.
    pub fn simulate_likert(&mut self, groups: &[[StimulusId; GROUP_SIZE]]) -> PreEvaluation {
        let n = self.spec.utilities.len();
        let noise = Normal::new(0.0, self.spec.rating_noise_sd).expect("sd validated");
        let impression: Vec<f64> = self
            .spec
            .utilities
            .iter()
            .map(|&u| if self.spec.rating_noise_sd > 0.0 { u + noise.sample(&mut self.rng) } else { u })
            .collect();
        let value = |id: &StimulusId| impression[*id as usize];
        let group_picks: Vec<GroupPick> = groups
            .iter()
            .map(|g| GroupPick { most_pleasant: first_max(g, value), most_unpleasant: last_min(g, value) })
            .collect();
        let pleasant: Vec<StimulusId> = group_picks.iter().map(|p| p.most_pleasant).collect();
        let unpleasant: Vec<StimulusId> = group_picks.iter().map(|p| p.most_unpleasant).collect();
        let anchors = Anchors { best: first_max(&pleasant, value), worst: last_min(&unpleasant, value) };
        let (hi, lo) = (impression[anchors.best as usize], impression[anchors.worst as usize]);
        let ratings = (0..n)
            .map(|i| {
                let stimulus_id = i as StimulusId;
                let (value, is_anchor) = if stimulus_id == anchors.best {
                    (RATING_MAX, true)
                } else if stimulus_id == anchors.worst {
                    (RATING_MIN, true)
                } else if hi > lo {
                    let x = -3.0 + 6.0 * (impression[i] - lo) / (hi - lo);
                    (libm::round(x).clamp(RATING_MIN as f64, RATING_MAX as f64) as i8, false)
                } else {
                    (0, false)
                };
                LikertRating { stimulus_id, value, is_anchor }
            })
            .collect();
        PreEvaluation { group_picks, anchors, ratings }
    }

    /// Winner of one forced choice.
    pub fn simulate_choice(&mut self, pair: (StimulusId, StimulusId)) -> StimulusId {
        let (a, b) = pair;
        let (ua, ub) = (self.spec.utilities[a as usize], self.spec.utilities[b as usize]);
        if self.spec.deterministic_choice {
            return if ua > ub || (ua == ub && a < b) { a } else { b };
        }
        let t = self.spec.choice_temperature;
        if self.rng.random_bool(bt::win_probability(ua / t, ub / t)) {
            a
        } else {
            b
        }
    }
}

fn first_max(ids: &[StimulusId], value: impl Fn(&StimulusId) -> f64) -> StimulusId {
    let mut best = ids[0];
    for id in &ids[1..] {
        if value(id) > value(&best) {
            best = *id;
        }
    }
    best
}

fn last_min(ids: &[StimulusId], value: impl Fn(&StimulusId) -> f64) -> StimulusId {
    let mut worst = ids[0];
    for id in &ids[1..] {
        if value(id) <= value(&worst) {
            worst = *id;
        }
    }
    worst
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub protocol: ProtocolConfig,
    pub bt: BtOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRun {
    pub state: SessionState,
    pub dataset: ComparisonDataset,
    pub estimate: StrengthEstimate,
    pub result: ParticipantResult,
}

/// Runs a whole session for `participant`: pre-evaluation, every scheduled
/// comparison, dataset assembly, estimation and before/after analysis.
pub fn run_session(
    participant: &SyntheticParticipant,
    catalog: Vec<StimulusSpec>,
    seed: u64,
    options: &RunOptions,
) -> Result<SessionRun, SimulationError> {
    let mut agent = SimulatedParticipant::new(participant.clone())?;
    if participant.utilities.len() != catalog.len() {
        return Err(SimulationError::InvalidParticipant("one utility per stimulus is required"));
    }
    let session_id = format!("sim-{seed:016x}");
    let mut clock: Millis = 0;
    let mut tick = || {
        clock += 1000;
        clock
    };
    let mut state = protocol::start_session(session_id, catalog, seed, options.protocol.clone(), tick())?;
    let pre = agent.simulate_likert(state.groups());
    loop {
        let prompt = match state.next_prompt() {
            Ok(p) => p,
            Err(ProtocolError::Finished) => break,
            Err(e) => return Err(e.into()),
        };
        let response = match prompt.response {
            ResponseSchema::ConfirmFamiliarization => Response::ConfirmFamiliarization,
            ResponseSchema::PickGroupExtremes { group_index } => {
                let pick = pre.group_picks[group_index];
                Response::GroupExtremes {
                    group_index,
                    most_pleasant: pick.most_pleasant,
                    most_unpleasant: pick.most_unpleasant,
                }
            }
            ResponseSchema::PickAnchors { .. } => Response::Anchors { best: pre.anchors.best, worst: pre.anchors.worst },
            ResponseSchema::Rating { stimulus_id, .. } => {
                Response::Rating { stimulus_id, value: pre.ratings[stimulus_id as usize].value }
            }
            ResponseSchema::ForcedChoice => {
                let pair = (prompt.stimuli[0], prompt.stimuli[1]);
                Response::Choice { pair, winner: agent.simulate_choice(pair) }
            }
        };
        state.respond(&response, tick())?;
    }
    let dataset = state.assemble_dataset()?;
    let estimate = bt::estimate_ilsr(&dataset, &options.bt)?;
    let after = estimate.normalized_scores.clone().ok_or(BtError::DegenerateScale)?;
    let before: Vec<f64> = state.rating_values()?.into_iter().map(f64::from).collect();
    let result = ParticipantResult::new(state.session_id(), before, after)?;
    Ok(SessionRun { state, dataset, estimate, result })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    /// Whether the highest true utility also has the highest estimate.
    pub top1_match: bool,
}

pub fn recovery_metrics(true_utilities: &[f64], estimated: &[f64]) -> Result<RecoveryMetrics, SimulationError> {
    let kendall_tau = analysis::kendall_tau(true_utilities, estimated)?;
    let spearman_rho = analysis::spearman_rho(true_utilities, estimated)?;
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    Ok(RecoveryMetrics { kendall_tau, spearman_rho, top1_match: argmax(true_utilities) == argmax(estimated) })
}

/// Population a synthetic cohort is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub participants: usize,
    /// Latent utilities are i.i.d. uniform on `[-w, w]`.
    pub utility_half_width: f64,
    pub rating_noise_sd: f64,
    pub choice_temperature: f64,
    pub deterministic_choice: bool,
    pub seed: u64,
}

impl CohortConfig {
    /// Settings whose rating dispersion yields about 54 trials per session
    /// on average, in the range seen with human participants (45 to 66).
    pub fn calibrated(participants: usize, seed: u64) -> Self {
        Self {
            participants,
            utility_half_width: 1.0,
            rating_noise_sd: 0.1,
            choice_temperature: 0.25,
            deterministic_choice: false,
            seed,
        }
    }

    pub fn participant(&self, index: usize, n_stimuli: usize) -> SyntheticParticipant {
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.utility_half_width;
        SyntheticParticipant {
            utilities: (0..n_stimuli).map(|_| if w > 0.0 { rng.random_range(-w..w) } else { 0.0 }).collect(),
            choice_temperature: self.choice_temperature,
            rating_noise_sd: self.rating_noise_sd,
            deterministic_choice: self.deterministic_choice,
            seed: rng.random(),
        }
    }

    pub fn cohort(&self, n_stimuli: usize) -> Vec<SyntheticParticipant> {
        (0..self.participants).map(|i| self.participant(i, n_stimuli)).collect()
    }
}
