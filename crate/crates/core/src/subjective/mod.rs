//! Pairwise subjective study: vote log, participant screening,
//! Bradley-Terry abilities, per-clip rescaling and session scheduling.

mod bt;
mod filter;
mod schedule;

pub use bt::{bradley_terry_fit, log_likelihood, rescale_scores, win_matrix, AbilityFit, RescaledScores};
pub use filter::{filter_participants, FilterOutcome, VerificationKey};
pub use schedule::{schedule_pairs, ScheduleParams, SchedulePlan, SessionPlan, Slot, SlotKind, VerificationPair};

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOTE_SCHEMA: &str = "v1";

/// Two methods shown side by side on one clip; `a` is the left item.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub clip: String,
    pub a: String,
    pub b: String,
}

impl PairId {
    pub fn new(clip: impl Into<String>, a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let p = PairId {
            clip: clip.into(),
            a: a.into(),
            b: b.into(),
        };
        if p.a == p.b {
            return Err(Error::InvalidParameter(format!("pair `{p}` compares a method with itself")));
        }
        Ok(p)
    }

    /// Same pair with sides swapped.
    pub fn swapped(&self) -> PairId {
        PairId {
            clip: self.clip.clone(),
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    /// Order-independent identity.
    pub fn unordered(&self) -> PairId {
        if self.a <= self.b {
            self.clone()
        } else {
            self.swapped()
        }
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}|{}", self.clip, self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
    #[serde(rename = "TIE")]
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub schema: String,
    pub participant_id: String,
    pub pair_id: PairId,
    pub choice: Choice,
    pub is_verification: bool,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl Vote {
    pub fn new(participant_id: impl Into<String>, pair_id: PairId, choice: Choice, is_verification: bool, timestamp: u64) -> Self {
        Vote {
            schema: VOTE_SCHEMA.to_owned(),
            participant_id: participant_id.into(),
            pair_id,
            choice,
            is_verification,
            timestamp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != VOTE_SCHEMA {
            return Err(Error::InvalidParameter(format!("unsupported vote schema `{}`", self.schema)));
        }
        if self.pair_id.a == self.pair_id.b {
            return Err(Error::InvalidParameter(format!("vote on degenerate pair `{}`", self.pair_id)));
        }
        if self.participant_id.is_empty() {
            return Err(Error::InvalidParameter("vote without participant id".into()));
        }
        Ok(())
    }
}

/// Read a JSON-lines vote log. Blank lines are skipped.
pub fn read_votes(path: &Path) -> Result<Vec<Vote>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vote: Vote = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidParameter(format!("{}:{}: {e}", path.display(), n + 1)))?;
        vote.validate()?;
        out.push(vote);
    }
    Ok(out)
}

/// Write a whole vote log.
pub fn write_votes(path: &Path, votes: &[Vote]) -> Result<()> {
    let mut f = File::create(path)?;
    for v in votes {
        writeln!(f, "{}", serde_json::to_string(v)?)?;
    }
    f.sync_all()?;
    Ok(())
}

/// Append one vote and fsync.
pub fn append_vote(path: &Path, vote: &Vote) -> Result<()> {
    vote.validate()?;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(vote)?)?;
    f.sync_all()?;
    Ok(())
}
