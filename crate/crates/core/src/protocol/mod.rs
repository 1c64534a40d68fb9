//! The elicitation session: familiarization, group extremes, anchor choice,
//! seven-level rating, then forced-choice comparisons on pairs with close
//! ratings.
//!
//! A [`SessionState`] is event sourced. Every accepted input is appended to
//! its event log as an [`EventRecord`], and [`SessionState::replay`] rebuilds
//! an identical state from that log. Operations validate before mutating, so
//! a rejected input leaves the state untouched.
//!
//! Timestamps are supplied by the caller (milliseconds since the Unix epoch)
//! and only recorded, never interpreted.

mod schedule;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{build_schedule, rating_vector, ComparisonSchedule, OmittedPair, PairCounts, Trial};

use crate::bt::{ComparisonDataset, Provenance};
use crate::stimulus::{StimulusError, StimulusId, StimulusSpec};

pub const RATING_MIN: i8 = -3;
pub const RATING_MAX: i8 = 3;
pub const STIMULUS_COUNT: usize = 15;
pub const GROUP_COUNT: usize = 5;
pub const GROUP_SIZE: usize = 3;

pub type Millis = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("catalog must hold {expected} stimuli with ids 0..{expected}, got {got}")]
    CatalogSize { expected: usize, got: usize },
    #[error("catalog entry {index} has id {id}")]
    CatalogIds { index: usize, id: StimulusId },
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error("invalid protocol configuration: {0}")]
    Config(&'static str),
    #[error("expected phase {expected}, session is in {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("no group {0}")]
    NoSuchGroup(usize),
    #[error("stimulus {stimulus_id} is not in group {group_index}")]
    NotInGroup { group_index: usize, stimulus_id: StimulusId },
    #[error("group {0} already answered")]
    DuplicateResponse(usize),
    #[error("the two picks must be different stimuli")]
    SameStimulus,
    #[error("stimulus {0} is not an anchor candidate")]
    NotACandidate(StimulusId),
    #[error("rating {0} is outside -3..=3")]
    RatingOutOfRange(i8),
    #[error("stimulus {0} is already rated")]
    AlreadyRated(StimulusId),
    #[error("stimulus {0} is an anchor and cannot be rated")]
    AnchorRerated(StimulusId),
    #[error("unknown stimulus {0}")]
    UnknownStimulus(StimulusId),
    #[error("ratings missing for stimuli {missing:?}")]
    IncompleteRatings { missing: Vec<StimulusId> },
    #[error("out of order: next trial is {expected:?}, got {got:?}")]
    OutOfOrder { expected: (StimulusId, StimulusId), got: (StimulusId, StimulusId) },
    #[error("winner {winner} is not part of the pair")]
    WinnerNotInPair { winner: StimulusId },
    #[error("session is not complete: {remaining_trials} trials remaining")]
    Incomplete { remaining_trials: usize },
    #[error("session is complete; nothing left to present")]
    Finished,
    #[error("invalid event log: {0}")]
    InvalidLog(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Familiarization,
    GroupExtremes,
    AnchorSelection,
    LikertRating,
    PairwiseComparison,
    Complete,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Familiarization => "familiarization",
            Phase::GroupExtremes => "group_extremes",
            Phase::AnchorSelection => "anchor_selection",
            Phase::LikertRating => "likert_rating",
            Phase::PairwiseComparison => "pairwise_comparison",
            Phase::Complete => "complete",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Presentations per pair indexed by rating gap; gaps past the end are
    /// omitted. The default `[2, 1]` compares equal ratings twice and
    /// one-point gaps once.
    pub gap_repeats: Vec<u32>,
    /// Synthetic wins added per omitted pair.
    pub synthetic_weight: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { gap_repeats: alloc::vec![2, 1], synthetic_weight: 1 }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self.gap_repeats.first() {
            None | Some(0) => Err(ProtocolError::Config("equal ratings must be compared at least once")),
            Some(_) if self.gap_repeats.len() > 7 => Err(ProtocolError::Config("at most 7 gap levels exist")),
            Some(_) if self.synthetic_weight == 0 => Err(ProtocolError::Config("synthetic_weight must be positive")),
            Some(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertRating {
    pub stimulus_id: StimulusId,
    pub value: i8,
    pub is_anchor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPick {
    pub most_pleasant: StimulusId,
    pub most_unpleasant: StimulusId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchors {
    /// Rated +3.
    pub best: StimulusId,
    /// Rated -3.
    pub worst: StimulusId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub trial_index: usize,
    pub left: StimulusId,
    pub right: StimulusId,
    pub winner: StimulusId,
}

impl Choice {
    pub fn loser(&self) -> StimulusId {
        if self.winner == self.left {
            self.right
        } else {
            self.left
        }
    }
}

/// A participant's answer to the current prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    ConfirmFamiliarization,
    GroupExtremes { group_index: usize, most_pleasant: StimulusId, most_unpleasant: StimulusId },
    Anchors { best: StimulusId, worst: StimulusId },
    Rating { stimulus_id: StimulusId, value: i8 },
    Choice { pair: (StimulusId, StimulusId), winner: StimulusId },
    /// Asked to feel a stimulus again; logged, no effect on the protocol.
    Replay { stimulus_id: StimulusId },
}

impl Response {
    pub fn kind(&self) -> &'static str {
        match self {
            Response::ConfirmFamiliarization => "confirm_familiarization",
            Response::GroupExtremes { .. } => "group_extremes",
            Response::Anchors { .. } => "anchors",
            Response::Rating { .. } => "rating",
            Response::Choice { .. } => "choice",
            Response::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionStarted { seed: u64, config: ProtocolConfig, catalog: Vec<StimulusSpec> },
    FamiliarizationConfirmed,
    GroupExtremesRecorded { group_index: usize, most_pleasant: StimulusId, most_unpleasant: StimulusId },
    AnchorsRecorded { best: StimulusId, worst: StimulusId },
    RatingRecorded { stimulus_id: StimulusId, value: i8 },
    ChoiceRecorded { left: StimulusId, right: StimulusId, winner: StimulusId },
    StimulusReplayed { stimulus_id: StimulusId },
    /// A presentation was issued to the stimulus presenter.
    StimulusPresented { stimulus_id: StimulusId },
}

impl Event {
    pub fn event_type(&self) -> &'static str {
        match self {
            Event::SessionStarted { .. } => "session_started",
            Event::FamiliarizationConfirmed => "familiarization_confirmed",
            Event::GroupExtremesRecorded { .. } => "group_extremes_recorded",
            Event::AnchorsRecorded { .. } => "anchors_recorded",
            Event::RatingRecorded { .. } => "rating_recorded",
            Event::ChoiceRecorded { .. } => "choice_recorded",
            Event::StimulusReplayed { .. } => "stimulus_replayed",
            Event::StimulusPresented { .. } => "stimulus_presented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub timestamp: Millis,
    pub session_id: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

/// The expected shape of the next response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSchema {
    ConfirmFamiliarization,
    /// Pick the most and least pleasant of the group's three stimuli.
    PickGroupExtremes { group_index: usize },
    /// Pick the +3 anchor among `pleasant` and the -3 anchor among `unpleasant`.
    PickAnchors { pleasant: Vec<StimulusId>, unpleasant: Vec<StimulusId> },
    Rating { stimulus_id: StimulusId, min: i8, max: i8 },
    ForcedChoice,
}

/// What to present next and how to answer. Carries nothing about future
/// trials or implied outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub phase: Phase,
    /// Stimuli to present, in presentation order.
    pub stimuli: Vec<StimulusId>,
    pub response: ResponseSchema,
    /// Reference stimuli shown while rating.
    pub anchors: Option<Anchors>,
    pub progress: Progress,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum RngStream {
    Presentation = 1,
    Groups = 2,
    Schedule = 3,
}

pub(crate) fn rng_for(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    session_id: String,
    seed: u64,
    config: ProtocolConfig,
    phase: Phase,
    catalog: Vec<StimulusSpec>,
    presentation_order: Vec<StimulusId>,
    groups: Vec<[StimulusId; GROUP_SIZE]>,
    group_picks: Vec<Option<GroupPick>>,
    anchors: Option<Anchors>,
    ratings: Vec<LikertRating>,
    schedule: Option<ComparisonSchedule>,
    choices: Vec<Choice>,
    event_log: Vec<EventRecord>,
}

/// Opens a session in the familiarization phase.
pub fn start_session(
    session_id: impl Into<String>,
    catalog: Vec<StimulusSpec>,
    seed: u64,
    config: ProtocolConfig,
    at: Millis,
) -> Result<SessionState, ProtocolError> {
    let session_id = session_id.into();
    let event = Event::SessionStarted { seed, config, catalog };
    let mut state = SessionState::from_start(&session_id, &event)?;
    state.event_log.push(EventRecord { timestamp: at, session_id, event });
    Ok(state)
}

impl SessionState {
    fn from_start(session_id: &str, event: &Event) -> Result<Self, ProtocolError> {
        let Event::SessionStarted { seed, config, catalog } = event else {
            return Err(ProtocolError::InvalidLog("first event must be session_started"));
        };
        config.validate()?;
        if catalog.len() != STIMULUS_COUNT {
            return Err(ProtocolError::CatalogSize { expected: STIMULUS_COUNT, got: catalog.len() });
        }
        for (index, spec) in catalog.iter().enumerate() {
            if spec.id as usize != index {
                return Err(ProtocolError::CatalogIds { index, id: spec.id });
            }
            spec.validate()?;
        }
        let ids: Vec<StimulusId> = (0..STIMULUS_COUNT as StimulusId).collect();
        let mut presentation_order = ids.clone();
        presentation_order.shuffle(&mut rng_for(*seed, RngStream::Presentation));
        let mut shuffled = ids;
        shuffled.shuffle(&mut rng_for(*seed, RngStream::Groups));
        let groups = shuffled
            .chunks_exact(GROUP_SIZE)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Ok(Self {
            session_id: session_id.into(),
            seed: *seed,
            config: config.clone(),
            phase: Phase::Familiarization,
            catalog: catalog.clone(),
            presentation_order,
            groups,
            group_picks: alloc::vec![None; GROUP_COUNT],
            anchors: None,
            ratings: Vec::new(),
            schedule: None,
            choices: Vec::new(),
            event_log: Vec::new(),
        })
    }

    /// Rebuilds a session from its event log.
    pub fn replay(records: &[EventRecord]) -> Result<Self, ProtocolError> {
        let (first, rest) = records.split_first().ok_or(ProtocolError::InvalidLog("empty log"))?;
        let mut state = Self::from_start(&first.session_id, &first.event)?;
        state.event_log.push(first.clone());
        for record in rest {
            state.apply_record(record.clone())?;
        }
        Ok(state)
    }

    /// Validates and appends one record taken from a log.
    pub fn apply_record(&mut self, record: EventRecord) -> Result<(), ProtocolError> {
        if record.session_id != self.session_id {
            return Err(ProtocolError::InvalidLog("record belongs to another session"));
        }
        self.append(record)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn catalog(&self) -> &[StimulusSpec] {
        &self.catalog
    }
    pub fn presentation_order(&self) -> &[StimulusId] {
        &self.presentation_order
    }
    pub fn groups(&self) -> &[[StimulusId; GROUP_SIZE]] {
        &self.groups
    }
    pub fn group_picks(&self) -> &[Option<GroupPick>] {
        &self.group_picks
    }
    pub fn anchors(&self) -> Option<Anchors> {
        self.anchors
    }
    pub fn ratings(&self) -> &[LikertRating] {
        &self.ratings
    }
    pub fn schedule(&self) -> Option<&ComparisonSchedule> {
        self.schedule.as_ref()
    }
    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }
    pub fn event_log(&self) -> &[EventRecord] {
        &self.event_log
    }

    /// Most-pleasant group picks, de-duplicated, in group order.
    pub fn pleasant_candidates(&self) -> Vec<StimulusId> {
        self.candidates(|p| p.most_pleasant)
    }

    pub fn unpleasant_candidates(&self) -> Vec<StimulusId> {
        self.candidates(|p| p.most_unpleasant)
    }

    fn candidates(&self, pick: impl Fn(&GroupPick) -> StimulusId) -> Vec<StimulusId> {
        let mut out = Vec::new();
        for id in self.group_picks.iter().flatten().map(pick) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
        out
    }

    /// Ratings indexed by stimulus id; errors until every stimulus is rated.
    pub fn rating_values(&self) -> Result<Vec<i8>, ProtocolError> {
        rating_vector(&self.ratings, self.catalog.len())
    }

    pub fn remaining_trials(&self) -> usize {
        match (&self.schedule, self.phase) {
            (Some(s), _) => s.trials.len() - self.choices.len(),
            (None, Phase::Complete) => 0,
            // not scheduled yet; report the worst case
            (None, _) => {
                let most = self.config.gap_repeats.iter().copied().max().unwrap_or(0) as usize;
                let n = self.catalog.len();
                most * n * (n - 1) / 2
            }
        }
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), ProtocolError> {
        if self.phase != expected {
            return Err(ProtocolError::WrongPhase { expected, actual: self.phase });
        }
        Ok(())
    }

    fn check_id(&self, id: StimulusId) -> Result<(), ProtocolError> {
        if (id as usize) < self.catalog.len() {
            Ok(())
        } else {
            Err(ProtocolError::UnknownStimulus(id))
        }
    }

    fn record(&mut self, event: Event, at: Millis) -> Result<(), ProtocolError> {
        self.append(EventRecord { timestamp: at, session_id: self.session_id.clone(), event })
    }

    fn append(&mut self, record: EventRecord) -> Result<(), ProtocolError> {
        self.apply(&record.event)?;
        self.event_log.push(record);
        Ok(())
    }

    /// Validates `event` against the current state and applies it.
    fn apply(&mut self, event: &Event) -> Result<(), ProtocolError> {
        match *event {
            Event::SessionStarted { .. } => Err(ProtocolError::InvalidLog("session already started")),
            Event::FamiliarizationConfirmed => {
                self.expect_phase(Phase::Familiarization)?;
                self.phase = Phase::GroupExtremes;
                Ok(())
            }
            Event::GroupExtremesRecorded { group_index, most_pleasant, most_unpleasant } => {
                self.expect_phase(Phase::GroupExtremes)?;
                let group = *self.groups.get(group_index).ok_or(ProtocolError::NoSuchGroup(group_index))?;
                for stimulus_id in [most_pleasant, most_unpleasant] {
                    if !group.contains(&stimulus_id) {
                        return Err(ProtocolError::NotInGroup { group_index, stimulus_id });
                    }
                }
                if most_pleasant == most_unpleasant {
                    return Err(ProtocolError::SameStimulus);
                }
                if self.group_picks[group_index].is_some() {
                    return Err(ProtocolError::DuplicateResponse(group_index));
                }
                self.group_picks[group_index] = Some(GroupPick { most_pleasant, most_unpleasant });
                if self.group_picks.iter().all(Option::is_some) {
                    self.phase = Phase::AnchorSelection;
                }
                Ok(())
            }
            Event::AnchorsRecorded { best, worst } => {
                self.expect_phase(Phase::AnchorSelection)?;
                if best == worst {
                    return Err(ProtocolError::SameStimulus);
                }
                if !self.pleasant_candidates().contains(&best) {
                    return Err(ProtocolError::NotACandidate(best));
                }
                if !self.unpleasant_candidates().contains(&worst) {
                    return Err(ProtocolError::NotACandidate(worst));
                }
                self.anchors = Some(Anchors { best, worst });
                self.ratings.push(LikertRating { stimulus_id: best, value: RATING_MAX, is_anchor: true });
                self.ratings.push(LikertRating { stimulus_id: worst, value: RATING_MIN, is_anchor: true });
                self.phase = Phase::LikertRating;
                Ok(())
            }
            Event::RatingRecorded { stimulus_id, value } => {
                self.expect_phase(Phase::LikertRating)?;
                self.check_id(stimulus_id)?;
                if !(RATING_MIN..=RATING_MAX).contains(&value) {
                    return Err(ProtocolError::RatingOutOfRange(value));
                }
                if let Some(r) = self.ratings.iter().find(|r| r.stimulus_id == stimulus_id) {
                    return Err(if r.is_anchor {
                        ProtocolError::AnchorRerated(stimulus_id)
                    } else {
                        ProtocolError::AlreadyRated(stimulus_id)
                    });
                }
                self.ratings.push(LikertRating { stimulus_id, value, is_anchor: false });
                if self.ratings.len() == self.catalog.len() {
                    let schedule = build_schedule(&self.ratings, self.catalog.len(), self.seed, &self.config)?;
                    self.phase = if schedule.trials.is_empty() { Phase::Complete } else { Phase::PairwiseComparison };
                    self.schedule = Some(schedule);
                }
                Ok(())
            }
            Event::ChoiceRecorded { left, right, winner } => {
                self.expect_phase(Phase::PairwiseComparison)?;
                let schedule = self.schedule.as_ref().ok_or(ProtocolError::InvalidLog("no schedule"))?;
                let trial_index = self.choices.len();
                let head = schedule.trials[trial_index];
                let got = if left <= right { (left, right) } else { (right, left) };
                if got != head.pair() {
                    return Err(ProtocolError::OutOfOrder { expected: (head.left, head.right), got: (left, right) });
                }
                if !head.contains(winner) {
                    return Err(ProtocolError::WinnerNotInPair { winner });
                }
                let done = trial_index + 1 == schedule.trials.len();
                self.choices.push(Choice { trial_index, left: head.left, right: head.right, winner });
                if done {
                    self.phase = Phase::Complete;
                }
                Ok(())
            }
            Event::StimulusReplayed { stimulus_id } | Event::StimulusPresented { stimulus_id } => {
                self.check_id(stimulus_id)
            }
        }
    }

    pub fn confirm_familiarization(&mut self, at: Millis) -> Result<(), ProtocolError> {
        self.record(Event::FamiliarizationConfirmed, at)
    }

    pub fn record_group_extremes(
        &mut self,
        group_index: usize,
        most_pleasant: StimulusId,
        most_unpleasant: StimulusId,
        at: Millis,
    ) -> Result<(), ProtocolError> {
        self.record(Event::GroupExtremesRecorded { group_index, most_pleasant, most_unpleasant }, at)
    }

    pub fn record_anchors(&mut self, best: StimulusId, worst: StimulusId, at: Millis) -> Result<(), ProtocolError> {
        self.record(Event::AnchorsRecorded { best, worst }, at)
    }

    pub fn record_rating(&mut self, stimulus_id: StimulusId, value: i8, at: Millis) -> Result<(), ProtocolError> {
        self.record(Event::RatingRecorded { stimulus_id, value }, at)
    }

    /// Answers the next unanswered trial; `pair` may be given in either order.
    pub fn record_choice(
        &mut self,
        pair: (StimulusId, StimulusId),
        winner: StimulusId,
        at: Millis,
    ) -> Result<(), ProtocolError> {
        self.record(Event::ChoiceRecorded { left: pair.0, right: pair.1, winner }, at)
    }

    pub fn record_replay(&mut self, stimulus_id: StimulusId, at: Millis) -> Result<(), ProtocolError> {
        self.record(Event::StimulusReplayed { stimulus_id }, at)
    }

    pub fn record_presentation(&mut self, stimulus_id: StimulusId, at: Millis) -> Result<(), ProtocolError> {
        self.record(Event::StimulusPresented { stimulus_id }, at)
    }

    /// Routes a response to the matching operation; the response kind must
    /// fit the current phase.
    pub fn respond(&mut self, response: &Response, at: Millis) -> Result<(), ProtocolError> {
        match *response {
            Response::ConfirmFamiliarization => self.confirm_familiarization(at),
            Response::GroupExtremes { group_index, most_pleasant, most_unpleasant } => {
                self.record_group_extremes(group_index, most_pleasant, most_unpleasant, at)
            }
            Response::Anchors { best, worst } => self.record_anchors(best, worst, at),
            Response::Rating { stimulus_id, value } => self.record_rating(stimulus_id, value, at),
            Response::Choice { pair, winner } => self.record_choice(pair, winner, at),
            Response::Replay { stimulus_id } => self.record_replay(stimulus_id, at),
        }
    }

    /// The next thing to present, or [`ProtocolError::Finished`].
    pub fn next_prompt(&self) -> Result<Prompt, ProtocolError> {
        let prompt = match self.phase {
            Phase::Familiarization => Prompt {
                phase: self.phase,
                stimuli: self.presentation_order.clone(),
                response: ResponseSchema::ConfirmFamiliarization,
                anchors: None,
                progress: Progress { answered: 0, total: 1 },
            },
            Phase::GroupExtremes => {
                let group_index = self
                    .group_picks
                    .iter()
                    .position(Option::is_none)
                    .ok_or(ProtocolError::InvalidLog("all groups answered"))?;
                Prompt {
                    phase: self.phase,
                    stimuli: self.groups[group_index].to_vec(),
                    response: ResponseSchema::PickGroupExtremes { group_index },
                    anchors: None,
                    progress: Progress {
                        answered: self.group_picks.iter().flatten().count(),
                        total: GROUP_COUNT,
                    },
                }
            }
            Phase::AnchorSelection => {
                let pleasant = self.pleasant_candidates();
                let unpleasant = self.unpleasant_candidates();
                let mut stimuli = pleasant.clone();
                stimuli.extend(unpleasant.iter().copied().filter(|id| !pleasant.contains(id)));
                Prompt {
                    phase: self.phase,
                    stimuli,
                    response: ResponseSchema::PickAnchors { pleasant, unpleasant },
                    anchors: None,
                    progress: Progress { answered: 0, total: 1 },
                }
            }
            Phase::LikertRating => {
                let stimulus_id = *self
                    .presentation_order
                    .iter()
                    .find(|id| !self.ratings.iter().any(|r| r.stimulus_id == **id))
                    .ok_or(ProtocolError::InvalidLog("nothing left to rate"))?;
                let rated = self.ratings.iter().filter(|r| !r.is_anchor).count();
                Prompt {
                    phase: self.phase,
                    stimuli: alloc::vec![stimulus_id],
                    response: ResponseSchema::Rating { stimulus_id, min: RATING_MIN, max: RATING_MAX },
                    anchors: self.anchors,
                    progress: Progress { answered: rated, total: self.catalog.len() - 2 },
                }
            }
            Phase::PairwiseComparison => {
                let schedule = self.schedule.as_ref().ok_or(ProtocolError::InvalidLog("no schedule"))?;
                let head = schedule.trials[self.choices.len()];
                Prompt {
                    phase: self.phase,
                    stimuli: alloc::vec![head.left, head.right],
                    response: ResponseSchema::ForcedChoice,
                    anchors: None,
                    progress: Progress { answered: self.choices.len(), total: schedule.trials.len() },
                }
            }
            Phase::Complete => return Err(ProtocolError::Finished),
        };
        Ok(prompt)
    }

    /// Observed outcomes for every answered trial plus `synthetic_weight`
    /// implied wins for every omitted pair.
    pub fn assemble_dataset(&self) -> Result<ComparisonDataset, ProtocolError> {
        if self.phase != Phase::Complete {
            return Err(ProtocolError::Incomplete { remaining_trials: self.remaining_trials() });
        }
        let schedule = self.schedule.as_ref().ok_or(ProtocolError::InvalidLog("no schedule"))?;
        let mut ds = ComparisonDataset::new(self.catalog.len()).expect("catalog is non-empty");
        let push = |ds: &mut ComparisonDataset, w: StimulusId, l: StimulusId, p| {
            ds.push(w as usize, l as usize, p).expect("ids validated by the protocol");
        };
        for c in &self.choices {
            push(&mut ds, c.winner, c.loser(), Provenance::Observed);
        }
        for o in &schedule.omitted {
            for _ in 0..self.config.synthetic_weight {
                push(&mut ds, o.implied_winner, o.implied_loser(), Provenance::Synthetic);
            }
        }
        Ok(ds)
    }
}
