//! The two-TP multiparty comparison protocol, its DOS-resistant Step-3
//! variant, the idealized arbiter, and the single-TP two-party baseline.

mod check;
mod proposed;
mod transcript;
mod zhang;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ghz::{GhzError, GhzSpec, MAX_PARTICLES};
use crate::photon::PhotonError;

pub use crate::party::PartyId;
pub use check::{
    arbiter_identify, comparison_result, cross_check, step3_check, CrossCheck, Liar, RoundDiagnosis,
    StateCheckReport,
};
pub use proposed::run_proposed;
pub use transcript::{
    AbortCause, Announcement, ChannelKind, Event, EventBody, Pair, PairVerdict, PreparedState, ProtocolKind,
    ProtocolTranscript, RunOutcome, Verdict, TRANSCRIPT_SCHEMA_VERSION,
};
pub use zhang::{run_zhang_baseline, ZhangConfig};

/// How P1's check positions and P2's check bases reach the other participants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Broadcast over the unauthenticated classical channels between participants.
    #[default]
    ClassicalBroadcast,
    /// Sent to TP2 and relayed to everyone over authenticated channels.
    Tp2Relay,
}

/// Parameters of one run of the two-TP protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedConfig {
    pub n: usize,
    pub m: usize,
    /// Registers sacrificed to the Step-3 state check.
    pub check_rounds: usize,
    /// Decoy photons inserted per participant sequence.
    pub decoys: usize,
    pub variant: Variant,
    /// Announce the full `R_ij` vectors alongside the verdicts.
    pub announce_results: bool,
    /// Family indices TP1 draws from; `None` means all `2^n`.
    pub state_pool: Option<Vec<u64>>,
    /// Decoy mismatches tolerated per participant before aborting.
    pub decoy_tolerance: usize,
}

impl ProposedConfig {
    /// Defaults: `m` check rounds and `2m` decoys per participant.
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            check_rounds: m,
            decoys: 2 * m,
            variant: Variant::ClassicalBroadcast,
            announce_results: false,
            state_pool: None,
            decoy_tolerance: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(2..=MAX_PARTICLES).contains(&self.n) {
            return Err(invalid("n", format!("must be in 2..={MAX_PARTICLES}")));
        }
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if self.check_rounds > self.m {
            return Err(invalid("check_rounds", "must not exceed m"));
        }
        if let Some(pool) = &self.state_pool {
            if pool.is_empty() {
                return Err(invalid("state_pool", "must not be empty"));
            }
            for &index in pool {
                GhzSpec::from_index(index, self.n).map_err(|e| invalid("state_pool", e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Registers TP1 prepares.
    pub fn registers(&self) -> usize {
        2 * self.m
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_secrets(secrets: &[BitString], n: usize, m: usize) -> Result<(), ProtocolError> {
    if secrets.len() != n {
        return Err(invalid("secrets", format!("expected {n} secrets, got {}", secrets.len())));
    }
    if let Some(s) = secrets.iter().find(|s| s.len() != m) {
        return Err(invalid("secrets", format!("secret {s} does not have m = {m} bits")));
    }
    Ok(())
}

/// Pairs `(i, j)`, `1 ≤ i < j ≤ n`.
pub fn all_pairs(n: usize) -> Vec<Pair> {
    (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect()
}

/// First `m` register positions not in `checked`.
pub(crate) fn key_positions(total: usize, checked: &[usize], m: usize) -> Vec<usize> {
    (0..total).filter(|p| !checked.contains(p)).take(m).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    State(#[from] GhzError),
    #[error(transparent)]
    Photon(#[from] PhotonError),
}
