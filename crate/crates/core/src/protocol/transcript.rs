use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ghz::{Basis, GhzSpec};
use crate::party::PartyId;
use crate::photon::{CheckReport, DecoyAnnouncement, Link};

use super::check::{CrossCheck, Liar, StateCheckReport};

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Proposed,
    ZhangBaseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identical,
    Different,
}

impl Verdict {
    pub fn from_result(r: &BitString) -> Self {
        if r.is_all_zero() {
            Verdict::Identical
        } else {
            Verdict::Different
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Verdict::Identical => Verdict::Different,
            Verdict::Different => Verdict::Identical,
        }
    }
}

/// Participant pair, 1-based, `i < j`.
pub type Pair = (usize, usize);

/// A TP's public statement about one pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub source: PartyId,
    pub pair: Pair,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<BitString>,
}

/// How a register was actually prepared by TP1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparedState {
    Ghz(GhzSpec),
    /// Unentangled Z-basis product state.
    Product(BitString),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Classical,
    Authenticated,
    Quantum,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SecretsAssigned { secrets: Vec<BitString> },
    StatesPrepared { states: Vec<PreparedState> },
    Transmission { link: Link, slots: usize, decoys: usize, tapped: bool },
    ChannelTapped { link: Link, measured: usize },
    DecoysAnnounced { participant: usize, announcements: Vec<DecoyAnnouncement> },
    DecoyResults { participant: usize, results: BitString },
    DecoyCheck { participant: usize, report: CheckReport },
    InitialStateMessage { to: PartyId, specs: Vec<GhzSpec> },
    CheckPositionsAnnounced { positions: Vec<usize>, channel: ChannelKind },
    CheckPositionsReceived { participant: usize, positions: Vec<usize>, tampered: bool },
    CheckBasesAnnounced { bases: Vec<Basis>, channel: ChannelKind },
    CheckOutcomes { participant: usize, bits: BitString },
    StateCheck { report: StateCheckReport },
    KeyMeasured { participant: usize, positions: Vec<usize>, retained: usize, key: BitString },
    ComparisonInfoSent { participant: usize, to: Vec<PartyId>, info: BitString },
    CombinedComparisonInfoSent { info: BitString },
    ComparisonComputed { pair: Pair, result: BitString },
    Announced { announcement: Announcement },
    CrossChecked { pair: Pair, result: CrossCheck },
    Arbitration { liar: Liar },
    Aborted,
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AbortCause {
    DecoyMismatch { participants: Vec<usize>, mismatches: usize },
    StateCheckMismatch { rounds: Vec<usize> },
    AnnouncementConflict { pairs: Vec<Pair> },
}

impl AbortCause {
    pub fn label(&self) -> &'static str {
        match self {
            AbortCause::DecoyMismatch { .. } => "decoy_check",
            AbortCause::StateCheckMismatch { .. } => "state_check",
            AbortCause::AnnouncementConflict { .. } => "announcement_conflict",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: usize,
    pub step: u8,
    pub actor: PartyId,
    #[serde(flatten)]
    pub body: EventBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<AbortCause>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair: Pair,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed { verdicts: Vec<PairVerdict> },
    Aborted { step: u8, cause: AbortCause },
}

/// Ordered record of one protocol run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub schema_version: u32,
    pub protocol: ProtocolKind,
    pub n: usize,
    pub m: usize,
    pub events: Vec<Event>,
    pub outcome: RunOutcome,
}

impl ProtocolTranscript {
    pub fn is_completed(&self) -> bool {
        matches!(self.outcome, RunOutcome::Completed { .. })
    }

    pub fn abort(&self) -> Option<(u8, &AbortCause)> {
        match &self.outcome {
            RunOutcome::Aborted { step, cause } => Some((*step, cause)),
            RunOutcome::Completed { .. } => None,
        }
    }

    pub fn verdicts(&self) -> &[PairVerdict] {
        match &self.outcome {
            RunOutcome::Completed { verdicts } => verdicts,
            RunOutcome::Aborted { .. } => &[],
        }
    }

    /// Bodies of events emitted by `actor`.
    pub fn by_actor(&self, actor: PartyId) -> impl Iterator<Item = &EventBody> {
        self.events.iter().filter(move |e| e.actor == actor).map(|e| &e.body)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Event log under construction.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    events: Vec<Event>,
    last_step: u8,
}

impl Recorder {
    pub(crate) fn push(&mut self, step: u8, actor: PartyId, body: EventBody) {
        debug_assert!(step >= self.last_step, "events must be recorded in step order");
        self.last_step = step;
        let seq = self.events.len();
        self.events.push(Event { seq, step, actor, body, cause: None });
    }

    /// Records the abort event and returns the matching outcome.
    pub(crate) fn abort(&mut self, step: u8, actor: PartyId, cause: AbortCause) -> RunOutcome {
        debug_assert!(step >= self.last_step, "events must be recorded in step order");
        self.last_step = step;
        let seq = self.events.len();
        self.events.push(Event { seq, step, actor, body: EventBody::Aborted, cause: Some(cause.clone()) });
        RunOutcome::Aborted { step, cause }
    }

    pub(crate) fn finish(self, protocol: ProtocolKind, n: usize, m: usize, outcome: RunOutcome) -> ProtocolTranscript {
        ProtocolTranscript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            protocol,
            n,
            m,
            events: self.events,
            outcome,
        }
    }
}
