use std::fmt;

use serde::{Deserialize, Serialize};

/// Protocol roles. Participants are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyId {
    Tp1,
    Tp2,
    /// The single third party of the two-party baseline.
    Tp,
    Participant(usize),
    Arbiter,
    /// An outside attacker.
    Eve,
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Tp1 => f.write_str("TP1"),
            PartyId::Tp2 => f.write_str("TP2"),
            PartyId::Tp => f.write_str("TP"),
            PartyId::Participant(i) => write!(f, "P{i}"),
            PartyId::Arbiter => f.write_str("arbiter"),
            PartyId::Eve => f.write_str("Eve"),
        }
    }
}
