//! Screening of participants by their verification answers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Choice, PairId, Vote};
use crate::error::{Error, Result};

/// Correct answer of every verification pair, keyed by the pair as shown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationKey {
    answers: BTreeMap<String, Choice>,
}

impl VerificationKey {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register `pair` with its answer; the swapped presentation is added too.
    pub fn insert(&mut self, pair: &PairId, answer: Choice) {
        let swapped = match answer {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
            Choice::Tie => Choice::Tie,
        };
        self.answers.insert(pair.to_string(), answer);
        self.answers.insert(pair.swapped().to_string(), swapped);
    }

    pub fn answer(&self, pair: &PairId) -> Option<Choice> {
        self.answers.get(&pair.to_string()).copied()
    }

    pub fn len(&self) -> usize {
        self.answers.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: Vec<Vote>,
    /// Sorted ids of participants with at least one wrong verification answer.
    pub excluded_participants: Vec<String>,
    pub total_participants: usize,
    pub retained_votes: usize,
    /// Retained votes on scored (non-verification) pairs.
    pub retained_scored_votes: usize,
    pub dropped_votes: usize,
}

/// Drop every vote of any participant who answered a verification pair wrongly.
pub fn filter_participants(votes: &[Vote], key: &VerificationKey) -> Result<FilterOutcome> {
    let mut participants = BTreeSet::new();
    let mut excluded = BTreeSet::new();
    for v in votes {
        participants.insert(v.participant_id.as_str());
        if v.is_verification {
            let answer = key.answer(&v.pair_id).ok_or_else(|| Error::UnknownPair(v.pair_id.to_string()))?;
            if v.choice != answer {
                excluded.insert(v.participant_id.as_str());
            }
        }
    }
    let retained: Vec<Vote> = votes
        .iter()
        .filter(|v| !excluded.contains(v.participant_id.as_str()))
        .cloned()
        .collect();
    let retained_scored_votes = retained.iter().filter(|v| !v.is_verification).count();
    Ok(FilterOutcome {
        retained_votes: retained.len(),
        retained_scored_votes,
        dropped_votes: votes.len() - retained.len(),
        retained,
        excluded_participants: excluded.into_iter().map(str::to_owned).collect(),
        total_participants: participants.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> (VerificationKey, PairId) {
        let p = PairId::new("verify", "source", "blurred").unwrap();
        let mut k = VerificationKey::new();
        k.insert(&p, Choice::A);
        (k, p)
    }

    fn session(pid: &str, v: &PairId, wrong: usize) -> Vec<Vote> {
        let mut out: Vec<Vote> = (0..22)
            .map(|i| Vote::new(pid, PairId::new("c", format!("m{i}"), "ref").unwrap(), Choice::A, false, i))
            .collect();
        for i in 0..3 {
            let choice = if i < wrong { Choice::B } else { Choice::A };
            out.push(Vote::new(pid, v.clone(), choice, true, 100 + i as u64));
        }
        out
    }

    #[test]
    fn keeps_correct_and_drops_wrong() {
        let (k, p) = key();
        let mut votes = session("good", &p, 0);
        votes.extend(session("bad", &p, 1));
        let out = filter_participants(&votes, &k).unwrap();
        assert_eq!(out.excluded_participants, vec!["bad".to_string()]);
        assert_eq!(out.retained_votes, 25);
        assert_eq!(out.retained_scored_votes, 22);
        assert_eq!(out.dropped_votes, 25);
        assert!(out.retained.iter().all(|v| v.participant_id == "good"));
    }

    #[test]
    fn swapped_presentation_and_tie_are_checked() {
        let (k, p) = key();
        let votes = vec![
            Vote::new("x", p.swapped(), Choice::B, true, 0),
            Vote::new("y", p.clone(), Choice::Tie, true, 0),
        ];
        let out = filter_participants(&votes, &k).unwrap();
        assert_eq!(out.excluded_participants, vec!["y".to_string()]);
    }

    #[test]
    fn unknown_verification_pair() {
        let (k, _) = key();
        let v = Vote::new("x", PairId::new("c", "a", "b").unwrap(), Choice::A, true, 0);
        assert!(matches!(filter_participants(&[v], &k), Err(Error::UnknownPair(_))));
    }

    #[test]
    fn idempotent() {
        let (k, p) = key();
        let mut votes = session("a", &p, 0);
        votes.extend(session("b", &p, 2));
        votes.extend(session("c", &p, 0));
        let once = filter_participants(&votes, &k).unwrap();
        let twice = filter_participants(&once.retained, &k).unwrap();
        assert_eq!(once.retained, twice.retained);
        assert!(twice.excluded_participants.is_empty());
    }
}
