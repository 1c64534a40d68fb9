//! Rating-gap driven pair scheduling.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, LikertRating, ProtocolConfig, ProtocolError, RngStream, RATING_MAX, RATING_MIN};
use crate::stimulus::StimulusId;

/// One presentation of a pair, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub left: StimulusId,
    pub right: StimulusId,
    /// 0 for the first presentation of the pair, 1 for the second, ...
    pub repetition: u32,
}

impl Trial {
    /// The pair with the smaller id first.
    pub fn pair(&self) -> (StimulusId, StimulusId) {
        ordered(self.left, self.right)
    }

    pub fn contains(&self, id: StimulusId) -> bool {
        self.left == id || self.right == id
    }

    pub fn other(&self, id: StimulusId) -> Option<StimulusId> {
        if id == self.left {
            Some(self.right)
        } else if id == self.right {
            Some(self.left)
        } else {
            None
        }
    }
}

/// A pair never shown to the participant; its outcome is implied by ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmittedPair {
    pub pair: (StimulusId, StimulusId),
    pub implied_winner: StimulusId,
}

impl OmittedPair {
    pub fn implied_loser(&self) -> StimulusId {
        if self.implied_winner == self.pair.0 {
            self.pair.1
        } else {
            self.pair.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSchedule {
    pub trials: Vec<Trial>,
    pub omitted: Vec<OmittedPair>,
    pub seed: u64,
}

/// How the unordered pairs were classified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    /// `by_repeats[k]` is the number of pairs presented `k` times; index 0
    /// counts omitted pairs.
    pub by_repeats: Vec<usize>,
    pub total_trials: usize,
}

impl PairCounts {
    pub fn omitted(&self) -> usize {
        self.by_repeats.first().copied().unwrap_or(0)
    }

    pub fn once(&self) -> usize {
        self.by_repeats.get(1).copied().unwrap_or(0)
    }

    pub fn twice(&self) -> usize {
        self.by_repeats.get(2).copied().unwrap_or(0)
    }

    pub fn total_pairs(&self) -> usize {
        self.by_repeats.iter().sum()
    }
}

impl ComparisonSchedule {
    pub fn counts(&self) -> PairCounts {
        let mut per_pair: Vec<((StimulusId, StimulusId), u32)> = Vec::new();
        for t in &self.trials {
            match per_pair.iter_mut().find(|(p, _)| *p == t.pair()) {
                Some((_, c)) => *c += 1,
                None => per_pair.push((t.pair(), 1)),
            }
        }
        let max = per_pair.iter().map(|&(_, c)| c as usize).max().unwrap_or(0);
        let mut by_repeats = alloc::vec![0; max.max(2) + 1];
        by_repeats[0] = self.omitted.len();
        for (_, c) in per_pair {
            by_repeats[c as usize] += 1;
        }
        PairCounts { by_repeats, total_trials: self.trials.len() }
    }
}

fn ordered(a: StimulusId, b: StimulusId) -> (StimulusId, StimulusId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rating vector indexed by stimulus id, checking that `ratings` covers
/// `0..n_items` exactly once with in-range values.
pub fn rating_vector(ratings: &[LikertRating], n_items: usize) -> Result<Vec<i8>, ProtocolError> {
    let mut by_id: Vec<Option<i8>> = alloc::vec![None; n_items];
    for r in ratings {
        let slot = by_id
            .get_mut(r.stimulus_id as usize)
            .ok_or(ProtocolError::UnknownStimulus(r.stimulus_id))?;
        if !(RATING_MIN..=RATING_MAX).contains(&r.value) {
            return Err(ProtocolError::RatingOutOfRange(r.value));
        }
        if slot.replace(r.value).is_some() {
            return Err(ProtocolError::AlreadyRated(r.stimulus_id));
        }
    }
    let missing: Vec<StimulusId> = (0..n_items).filter(|&i| by_id[i].is_none()).map(|i| i as StimulusId).collect();
    if !missing.is_empty() {
        return Err(ProtocolError::IncompleteRatings { missing });
    }
    Ok(by_id.into_iter().flatten().collect())
}

/// Classifies every unordered pair by rating gap: a gap `g` is presented
/// `config.gap_repeats[g]` times and omitted when that is zero or `g` is past
/// the end of the table. Omitted pairs imply a win for the higher rating.
/// Trial order and the left/right placement inside each trial are drawn
/// from `seed`.
pub fn build_schedule(
    ratings: &[LikertRating],
    n_items: usize,
    seed: u64,
    config: &ProtocolConfig,
) -> Result<ComparisonSchedule, ProtocolError> {
    config.validate()?;
    let values = rating_vector(ratings, n_items)?;
    let mut trials = Vec::new();
    let mut omitted = Vec::new();
    for i in 0..n_items {
        for j in i + 1..n_items {
            let (a, b) = (i as StimulusId, j as StimulusId);
            let gap = (values[i] - values[j]).unsigned_abs() as usize;
            let repeats = config.gap_repeats.get(gap).copied().unwrap_or(0);
            if repeats == 0 {
                // validate() guarantees gap 0 is always compared, so ratings differ here
                let implied_winner = if values[i] > values[j] { a } else { b };
                omitted.push(OmittedPair { pair: (a, b), implied_winner });
            } else {
                trials.extend((0..repeats).map(|repetition| Trial { left: a, right: b, repetition }));
            }
        }
    }
    let mut rng = rng_for(seed, RngStream::Schedule);
    trials.shuffle(&mut rng);
    for t in trials.iter_mut() {
        if rng.random_bool(0.5) {
            core::mem::swap(&mut t.left, &mut t.right);
        }
    }
    // repetition indices follow presentation order
    let mut seen: Vec<(StimulusId, StimulusId)> = Vec::with_capacity(trials.len());
    for t in trials.iter_mut() {
        let p = t.pair();
        t.repetition = seen.iter().filter(|&&q| q == p).count() as u32;
        seen.push(p);
    }
    Ok(ComparisonSchedule { trials, omitted, seed })
}
