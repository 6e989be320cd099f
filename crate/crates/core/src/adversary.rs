//! Attack strategies attached to protocol hook points.
//!
//! A run consults exactly one [`Adversary`]. Every hook has a pass-through
//! default, so an inactive hook draws no randomness and leaves the run
//! bit-for-bit identical to an honest one.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ghz::{Basis, Eigenstate, GhzSpec, SharedRegister};
use crate::party::PartyId;
use crate::photon::{disturb_slot, ChannelTap, Link, PhotonSlot, RegisterStore};
use crate::protocol::{EventBody, Pair, PreparedState, ProtocolTranscript, Verdict};

/// What TP1 actually sends out, and what it tells TP2 it sent.
#[derive(Clone, Debug)]
pub struct Tp1Preparation {
    pub registers: Vec<SharedRegister>,
    pub states: Vec<PreparedState>,
    pub claimed: Vec<GhzSpec>,
}

impl Tp1Preparation {
    pub fn faithful(specs: &[GhzSpec]) -> Self {
        Self {
            registers: specs.iter().map(SharedRegister::from_spec).collect(),
            states: specs.iter().map(|s| PreparedState::Ghz(*s)).collect(),
            claimed: specs.to_vec(),
        }
    }
}

/// Hook points a run offers to an attacker.
pub trait Adversary {
    fn kind(&self) -> &'static str;

    /// Party the attack is attributed to in transcripts.
    fn actor(&self) -> PartyId {
        PartyId::Eve
    }

    /// TP1 role override for Step 1.
    fn prepare_states(&mut self, _honest: &[GhzSpec], _rng: &mut dyn RngCore) -> Option<Tp1Preparation> {
        None
    }

    /// Called when the initial states become known to TP2.
    fn learn_initial_states(&mut self, _claimed: &[GhzSpec]) {}

    fn tap(&mut self, _link: Link) -> Option<&mut dyn ChannelTap> {
        None
    }

    /// Rewrites P1's check positions as seen by the other participants.
    fn tamper_positions(
        &mut self,
        _announced: &[usize],
        _registers: usize,
        _rng: &mut dyn RngCore,
    ) -> Option<Vec<usize>> {
        None
    }

    fn observe_key(&mut self, _participant: usize, _positions: &[usize], _key: &BitString) {}

    fn announce(&mut self, _tp: PartyId, _pair: Pair, honest: Verdict) -> Verdict {
        honest
    }

    /// The attacker's guess at a victim's secret from its own records plus
    /// public traffic.
    fn guess_secret(&self, _view: &PublicView) -> Option<SecretGuess> {
        None
    }
}

/// No attack.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdversary;

impl Adversary for NoAdversary {
    fn kind(&self) -> &'static str {
        "none"
    }
}

/// Everything broadcast or sent over authenticated (public-content) channels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PublicView {
    pub n: usize,
    pub m: usize,
    pub registers: usize,
    pub decoy_positions: BTreeMap<usize, Vec<usize>>,
    pub check_positions: Vec<usize>,
    pub key_positions: Vec<usize>,
    pub comparison_info: BTreeMap<usize, BitString>,
}

impl PublicView {
    pub fn from_transcript(t: &ProtocolTranscript) -> Self {
        let mut view = PublicView { n: t.n, m: t.m, ..Default::default() };
        for e in &t.events {
            match &e.body {
                EventBody::StatesPrepared { states } => view.registers = states.len(),
                EventBody::DecoysAnnounced { participant, announcements } => {
                    view.decoy_positions.insert(*participant, announcements.iter().map(|a| a.position).collect());
                }
                EventBody::CheckPositionsAnnounced { positions, .. } => view.check_positions = positions.clone(),
                EventBody::ComparisonInfoSent { participant, info, .. } => {
                    view.comparison_info.insert(*participant, info.clone());
                }
                _ => {}
            }
        }
        view.key_positions =
            (0..view.registers).filter(|p| !view.check_positions.contains(p)).take(view.m).collect();
        view
    }

    /// Register carried by each slot of a participant's sequence, once the
    /// decoy positions are public.
    pub fn slot_registers(&self, participant: usize, slots: usize) -> Vec<Option<usize>> {
        let decoys = self.decoy_positions.get(&participant).map(Vec::as_slice).unwrap_or(&[]);
        let mut rank = 0;
        (0..slots)
            .map(|s| {
                if decoys.binary_search(&s).is_ok() {
                    None
                } else {
                    rank += 1;
                    Some(rank - 1)
                }
            })
            .collect()
    }
}

/// Per-bit guesses at a victim's secret; `None` where the attacker has nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretGuess {
    pub victim: usize,
    pub bits: Vec<Option<bool>>,
}

impl SecretGuess {
    /// `(guessed, correct)` against the true secret.
    pub fn score(&self, secret: &BitString) -> (u64, u64) {
        let mut guessed = 0;
        let mut correct = 0;
        for (k, g) in self.bits.iter().enumerate() {
            if let Some(b) = g {
                guessed += 1;
                correct += u64::from(*b == secret.get(k));
            }
        }
        (guessed, correct)
    }
}

/// Result of one attacked run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub detected: bool,
    pub detection_step: Option<u8>,
    /// Fraction of guessed victim bits that were right, in undetected runs.
    pub guess_accuracy: Option<f64>,
    pub guessed_bits: u64,
    pub correct_bits: u64,
}

pub fn assess(t: &ProtocolTranscript, adversary: &dyn Adversary, secrets: &[BitString]) -> AttackOutcome {
    let detection_step = t.abort().map(|(step, _)| step);
    let (guessed_bits, correct_bits) = if detection_step.is_none() {
        adversary
            .guess_secret(&PublicView::from_transcript(t))
            .map(|g| g.score(&secrets[g.victim - 1]))
            .unwrap_or((0, 0))
    } else {
        (0, 0)
    };
    AttackOutcome {
        detected: detection_step.is_some(),
        detection_step,
        guess_accuracy: (guessed_bits > 0).then(|| correct_bits as f64 / guessed_bits as f64),
        guessed_bits,
        correct_bits,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapRecord {
    pub participant: usize,
    pub slot: usize,
    pub basis: Basis,
    pub bit: bool,
}

/// Measures every passing slot in a uniformly random basis and forwards the
/// collapsed photon. Used both by an outsider and by TP2.
#[derive(Clone, Debug)]
pub struct InterceptResend {
    actor: PartyId,
    links: Vec<usize>,
    victim: usize,
    records: Vec<TapRecord>,
    slots_seen: BTreeMap<usize, usize>,
}

impl InterceptResend {
    pub fn new(actor: PartyId, links: Vec<usize>, victim: Option<usize>) -> Self {
        let victim = victim.unwrap_or_else(|| links.first().copied().unwrap_or(1));
        Self { actor, links, victim, records: Vec::new(), slots_seen: BTreeMap::new() }
    }

    pub fn records(&self) -> &[TapRecord] {
        &self.records
    }
}

impl ChannelTap for InterceptResend {
    fn on_transit(&mut self, link: Link, slots: &mut [PhotonSlot], store: &mut RegisterStore, rng: &mut dyn RngCore) {
        let PartyId::Participant(participant) = link.to else { return };
        self.slots_seen.insert(participant, slots.len());
        for (slot, photon) in slots.iter_mut().enumerate() {
            let basis = Basis::random(rng);
            let bit = disturb_slot(photon, store, basis, rng).expect("slots in transit are unconsumed");
            self.records.push(TapRecord { participant, slot, basis, bit });
        }
    }
}

impl Adversary for InterceptResend {
    fn kind(&self) -> &'static str {
        if self.actor == PartyId::Tp2 {
            "tp2_intercept"
        } else {
            "eve_intercept_resend"
        }
    }

    fn actor(&self) -> PartyId {
        self.actor
    }

    fn tap(&mut self, link: Link) -> Option<&mut dyn ChannelTap> {
        match link.to {
            PartyId::Participant(i) if self.links.contains(&i) => Some(self),
            _ => None,
        }
    }

    /// The victim's Z outcome equals the intercepted bit whenever the
    /// attacker happened to measure that carrier in Z, so the guess is
    /// `bit ⊕ C_v` for every intercepted key register.
    fn guess_secret(&self, view: &PublicView) -> Option<SecretGuess> {
        let info = view.comparison_info.get(&self.victim)?;
        let slots = *self.slots_seen.get(&self.victim)?;
        let by_slot = view.slot_registers(self.victim, slots);
        let mut per_register = vec![None; view.registers];
        for r in self.records.iter().filter(|r| r.participant == self.victim) {
            if let Some(Some(register)) = by_slot.get(r.slot) {
                per_register[*register] = Some(r.bit);
            }
        }
        let bits = view
            .key_positions
            .iter()
            .enumerate()
            .map(|(k, &p)| per_register.get(p).copied().flatten().map(|b| b ^ info.get(k)))
            .collect();
        Some(SecretGuess { victim: self.victim, bits })
    }
}

/// What a dishonest TP1 really prepares.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FakePreparation {
    /// `|0…0⟩` on every register.
    AllZero,
    /// A fixed Z-basis product state on every register.
    Product { bits: BitString },
    /// A different family member on every register.
    Spec { index: u64 },
}

impl Default for FakePreparation {
    fn default() -> Self {
        FakePreparation::AllZero
    }
}

/// TP1 distributes a fake preparation, reports a fixed claimed spec to TP2
/// and reads secrets off `C_i` using the key bits it expects.
#[derive(Clone, Debug)]
pub struct FakeInitialState {
    n: usize,
    truth: FakePreparation,
    claimed: GhzSpec,
    victim: usize,
}

impl FakeInitialState {
    fn truth_register(&self) -> (SharedRegister, PreparedState) {
        match &self.truth {
            FakePreparation::AllZero => {
                let bits = BitString::zeros(self.n);
                (product(&bits), PreparedState::Product(bits))
            }
            FakePreparation::Product { bits } => (product(bits), PreparedState::Product(bits.clone())),
            FakePreparation::Spec { index } => {
                let spec = GhzSpec::from_index(*index, self.n).expect("validated at build time");
                (SharedRegister::from_spec(&spec), PreparedState::Ghz(spec))
            }
        }
    }

    /// TP1's expectation of the victim's Z outcome on every register.
    fn expected_key_bit(&self) -> bool {
        match &self.truth {
            FakePreparation::AllZero => false,
            FakePreparation::Product { bits } => bits.get(self.victim - 1),
            FakePreparation::Spec { index } => GhzSpec::from_index(*index, self.n)
                .expect("validated at build time")
                .q_bit(self.victim - 1),
        }
    }
}

fn product(bits: &BitString) -> SharedRegister {
    let states: Vec<Eigenstate> = bits.iter().map(|b| Eigenstate::new(Basis::Z, b)).collect();
    SharedRegister::product(&states)
}

impl Adversary for FakeInitialState {
    fn kind(&self) -> &'static str {
        "tp1_fake_initial_state"
    }

    fn actor(&self) -> PartyId {
        PartyId::Tp1
    }

    fn prepare_states(&mut self, honest: &[GhzSpec], _rng: &mut dyn RngCore) -> Option<Tp1Preparation> {
        let (register, state) = self.truth_register();
        Some(Tp1Preparation {
            registers: vec![register; honest.len()],
            states: vec![state; honest.len()],
            claimed: vec![self.claimed; honest.len()],
        })
    }

    fn guess_secret(&self, view: &PublicView) -> Option<SecretGuess> {
        let info = view.comparison_info.get(&self.victim)?;
        let k = self.expected_key_bit();
        Some(SecretGuess { victim: self.victim, bits: info.iter().map(|c| Some(c ^ k)).collect() })
    }
}

/// One TP flips its verdicts.
#[derive(Clone, Debug)]
pub struct FakeResult {
    tp: PartyId,
    pairs: Option<Vec<Pair>>,
}

impl Adversary for FakeResult {
    fn kind(&self) -> &'static str {
        if self.tp == PartyId::Tp1 {
            "tp1_fake_result"
        } else {
            "tp2_fake_result"
        }
    }

    fn actor(&self) -> PartyId {
        self.tp
    }

    /// The baseline's single TP is addressed by either kind.
    fn announce(&mut self, tp: PartyId, pair: Pair, honest: Verdict) -> Verdict {
        let ours = tp == self.tp || tp == PartyId::Tp;
        let chosen = self.pairs.as_ref().map_or(true, |p| p.contains(&pair));
        if ours && chosen {
            honest.flipped()
        } else {
            honest
        }
    }
}

/// A participant follows the protocol and then guesses a victim's key from
/// its own: `K_v = K_a ⊕ T_av`. Without the initial states `T_av` is unknown
/// and guessed as 0; the counterfactual mode hands the attacker the states.
#[derive(Clone, Debug)]
pub struct ParticipantInfer {
    attacker: usize,
    victim: usize,
    knows_initial_state: bool,
    specs: Option<Vec<GhzSpec>>,
    own: Option<(Vec<usize>, BitString)>,
}

impl Adversary for ParticipantInfer {
    fn kind(&self) -> &'static str {
        "participant_infer"
    }

    fn actor(&self) -> PartyId {
        PartyId::Participant(self.attacker)
    }

    fn learn_initial_states(&mut self, claimed: &[GhzSpec]) {
        if self.knows_initial_state {
            self.specs = Some(claimed.to_vec());
        }
    }

    fn observe_key(&mut self, participant: usize, positions: &[usize], key: &BitString) {
        if participant == self.attacker {
            self.own = Some((positions.to_vec(), key.clone()));
        }
    }

    fn guess_secret(&self, view: &PublicView) -> Option<SecretGuess> {
        let (positions, key) = self.own.as_ref()?;
        let info = view.comparison_info.get(&self.victim)?;
        let bits = positions
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let t = match &self.specs {
                    Some(specs) => specs[p].q_bit(self.attacker - 1) ^ specs[p].q_bit(self.victim - 1),
                    None => false,
                };
                Some(key.get(k) ^ t ^ info.get(k))
            })
            .collect();
        Some(SecretGuess { victim: self.victim, bits })
    }
}

/// Outsider on the participants' classical channel who rewrites P1's check
/// positions, each to a distinct uniformly random unannounced register.
#[derive(Clone, Debug)]
pub struct PositionTamper {
    count: Option<usize>,
}

impl Adversary for PositionTamper {
    fn kind(&self) -> &'static str {
        "classical_position_tamper"
    }

    fn tamper_positions(&mut self, announced: &[usize], registers: usize, rng: &mut dyn RngCore) -> Option<Vec<usize>> {
        let count = self.count.unwrap_or(announced.len()).min(announced.len());
        let outside: Vec<usize> = (0..registers).filter(|p| !announced.contains(p)).collect();
        let count = count.min(outside.len());
        let ordinals = index::sample(rng, announced.len(), count);
        let targets = index::sample(rng, outside.len(), count);
        let mut out = announced.to_vec();
        for (k, t) in ordinals.iter().zip(targets.iter()) {
            out[k] = outside[t];
        }
        Some(out)
    }
}

/// Attack selection as it appears in scenario documents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryStrategy {
    #[default]
    None,
    EveInterceptResend(TapParams),
    Tp1FakeInitialState(FakeStateParams),
    Tp1FakeResult(FlipParams),
    Tp2FakeResult(FlipParams),
    Tp2Intercept(TapParams),
    ParticipantInfer(InferParams),
    ClassicalPositionTamper(TamperParams),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapParams {
    /// Participants whose incoming link is tapped.
    #[serde(default = "first_link")]
    pub links: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub victim: Option<usize>,
}

fn first_link() -> Vec<usize> {
    vec![1]
}

impl Default for TapParams {
    fn default() -> Self {
        Self { links: first_link(), victim: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeStateParams {
    #[serde(default)]
    pub preparation: FakePreparation,
    #[serde(default = "psi1")]
    pub claimed_index: u64,
    #[serde(default = "first_participant")]
    pub victim: usize,
}

fn psi1() -> u64 {
    1
}

fn first_participant() -> usize {
    1
}

impl Default for FakeStateParams {
    fn default() -> Self {
        Self { preparation: FakePreparation::AllZero, claimed_index: 1, victim: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipParams {
    /// Pairs whose verdict is flipped; all pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<Pair>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferParams {
    pub attacker: usize,
    pub victim: usize,
    #[serde(default)]
    pub knows_initial_state: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperParams {
    /// How many announced positions to rewrite; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("adversary parameter `{field}`: {reason}")]
pub struct AdversaryError {
    pub field: String,
    pub reason: String,
}

fn bad(field: &str, reason: impl Into<String>) -> AdversaryError {
    AdversaryError { field: field.into(), reason: reason.into() }
}

fn check_participant(field: &str, p: usize, n: usize) -> Result<(), AdversaryError> {
    if (1..=n).contains(&p) {
        Ok(())
    } else {
        Err(bad(field, format!("participant {p} outside 1..={n}")))
    }
}

impl AdversaryStrategy {
    pub fn kind(&self) -> &'static str {
        match self {
            AdversaryStrategy::None => "none",
            AdversaryStrategy::EveInterceptResend(_) => "eve_intercept_resend",
            AdversaryStrategy::Tp1FakeInitialState(_) => "tp1_fake_initial_state",
            AdversaryStrategy::Tp1FakeResult(_) => "tp1_fake_result",
            AdversaryStrategy::Tp2FakeResult(_) => "tp2_fake_result",
            AdversaryStrategy::Tp2Intercept(_) => "tp2_intercept",
            AdversaryStrategy::ParticipantInfer(_) => "participant_infer",
            AdversaryStrategy::ClassicalPositionTamper(_) => "classical_position_tamper",
        }
    }

    /// Checks parameters against the participant count.
    pub fn validate(&self, n: usize) -> Result<(), AdversaryError> {
        match self {
            AdversaryStrategy::None | AdversaryStrategy::ClassicalPositionTamper(_) => Ok(()),
            AdversaryStrategy::EveInterceptResend(p) | AdversaryStrategy::Tp2Intercept(p) => {
                if p.links.is_empty() {
                    return Err(bad("links", "at least one link must be tapped"));
                }
                for &l in &p.links {
                    check_participant("links", l, n)?;
                }
                if let Some(v) = p.victim {
                    check_participant("victim", v, n)?;
                    if !p.links.contains(&v) {
                        return Err(bad("victim", "victim's link must be tapped"));
                    }
                }
                Ok(())
            }
            AdversaryStrategy::Tp1FakeInitialState(p) => {
                GhzSpec::from_index(p.claimed_index, n).map_err(|e| bad("claimed_index", e.to_string()))?;
                check_participant("victim", p.victim, n)?;
                match &p.preparation {
                    FakePreparation::AllZero => Ok(()),
                    FakePreparation::Product { bits } if bits.len() == n => Ok(()),
                    FakePreparation::Product { .. } => Err(bad("preparation.bits", format!("expected {n} bits"))),
                    FakePreparation::Spec { index } => GhzSpec::from_index(*index, n)
                        .map(|_| ())
                        .map_err(|e| bad("preparation.index", e.to_string())),
                }
            }
            AdversaryStrategy::Tp1FakeResult(p) | AdversaryStrategy::Tp2FakeResult(p) => {
                for &(i, j) in p.pairs.iter().flatten() {
                    check_participant("pairs", i, n)?;
                    check_participant("pairs", j, n)?;
                    if i >= j {
                        return Err(bad("pairs", format!("pair ({i}, {j}) must have i < j")));
                    }
                }
                Ok(())
            }
            AdversaryStrategy::ParticipantInfer(p) => {
                check_participant("attacker", p.attacker, n)?;
                check_participant("victim", p.victim, n)
            }
        }
    }

    /// Fresh per-trial attacker state.
    pub fn build(&self, n: usize) -> Result<Box<dyn Adversary>, AdversaryError> {
        self.validate(n)?;
        Ok(match self.clone() {
            AdversaryStrategy::None => Box::new(NoAdversary),
            AdversaryStrategy::EveInterceptResend(p) => Box::new(InterceptResend::new(PartyId::Eve, p.links, p.victim)),
            AdversaryStrategy::Tp2Intercept(p) => Box::new(InterceptResend::new(PartyId::Tp2, p.links, p.victim)),
            AdversaryStrategy::Tp1FakeInitialState(p) => Box::new(FakeInitialState {
                n,
                truth: p.preparation,
                claimed: GhzSpec::from_index(p.claimed_index, n).expect("validated"),
                victim: p.victim,
            }),
            AdversaryStrategy::Tp1FakeResult(p) => Box::new(FakeResult { tp: PartyId::Tp1, pairs: p.pairs }),
            AdversaryStrategy::Tp2FakeResult(p) => Box::new(FakeResult { tp: PartyId::Tp2, pairs: p.pairs }),
            AdversaryStrategy::ParticipantInfer(p) => Box::new(ParticipantInfer {
                attacker: p.attacker,
                victim: p.victim,
                knows_initial_state: p.knows_initial_state,
                specs: None,
                own: None,
            }),
            AdversaryStrategy::ClassicalPositionTamper(p) => Box::new(PositionTamper { count: p.count }),
        })
    }

    /// Taps attached per run (0 for strategies that do not touch quantum links).
    pub fn tapped_links(&self) -> usize {
        match self {
            AdversaryStrategy::EveInterceptResend(p) | AdversaryStrategy::Tp2Intercept(p) => p.links.len(),
            _ => 0,
        }
    }
}

/// Intercept detection is driven by one fair coin per photon; a helper used
/// by tests that need the raw mechanism without a protocol around it.
pub fn intercept_decoys<R: Rng + ?Sized>(decoys: &mut [crate::photon::DecoyState], rng: &mut R) {
    for d in decoys {
        let basis = Basis::random(rng);
        crate::photon::measure_decoy(d, basis, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_proposed, run_zhang_baseline, ProposedConfig, Variant, ZhangConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn secrets(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<BitString> {
        (0..n).map(|_| BitString::random(m, rng)).collect()
    }

    #[test]
    fn strategy_json_shapes() {
        let s: AdversaryStrategy = serde_json::from_str(r#"{"kind":"none"}"#).unwrap();
        assert_eq!(s, AdversaryStrategy::None);
        let s: AdversaryStrategy =
            serde_json::from_str(r#"{"kind":"eve_intercept_resend","params":{"links":[2]}}"#).unwrap();
        assert_eq!(s, AdversaryStrategy::EveInterceptResend(TapParams { links: vec![2], victim: None }));
        let s: AdversaryStrategy = serde_json::from_str(
            r#"{"kind":"tp1_fake_initial_state","params":{"preparation":{"type":"all_zero"},"claimed_index":1}}"#,
        )
        .unwrap();
        assert_eq!(s.kind(), "tp1_fake_initial_state");
        assert!(serde_json::from_str::<AdversaryStrategy>(r#"{"kind":"tp1_fake_result","params":{"pairz":[]}}"#).is_err());
        assert!(serde_json::from_str::<AdversaryStrategy>(r#"{"kind":"teleport"}"#).is_err());
        let round = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AdversaryStrategy>(&round).unwrap(), s);
    }

    #[test]
    fn validation_names_fields() {
        let s = AdversaryStrategy::ParticipantInfer(InferParams { attacker: 4, victim: 1, knows_initial_state: false });
        assert_eq!(s.validate(3).unwrap_err().field, "attacker");
        let s = AdversaryStrategy::EveInterceptResend(TapParams { links: vec![1], victim: Some(2) });
        assert_eq!(s.validate(3).unwrap_err().field, "victim");
        let s = AdversaryStrategy::Tp1FakeResult(FlipParams { pairs: Some(vec![(2, 1)]) });
        assert_eq!(s.validate(3).unwrap_err().field, "pairs");
    }

    #[test]
    fn fake_result_conflicts_in_proposed_and_passes_in_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for strategy in [
            AdversaryStrategy::Tp1FakeResult(FlipParams::default()),
            AdversaryStrategy::Tp2FakeResult(FlipParams::default()),
        ] {
            let cfg = ProposedConfig::new(3, 4);
            for _ in 0..20 {
                let s = secrets(3, 4, &mut rng);
                let mut adv = strategy.build(3).unwrap();
                let t = run_proposed(&cfg, &s, adv.as_mut(), &mut rng).unwrap();
                assert_eq!(t.abort().map(|(step, c)| (step, c.label())), Some((7, "announcement_conflict")));
                let liar = t.events.iter().find_map(|e| match &e.body {
                    EventBody::Arbitration { liar } => Some(*liar),
                    _ => None,
                });
                let expected = if strategy.kind() == "tp1_fake_result" {
                    crate::protocol::Liar::Tp1
                } else {
                    crate::protocol::Liar::Tp2
                };
                assert_eq!(liar, Some(expected));
            }
            let zcfg = ZhangConfig::new(4);
            for _ in 0..20 {
                let s = secrets(2, 4, &mut rng);
                let mut adv = strategy.build(2).unwrap();
                let t = run_zhang_baseline(&zcfg, &s, adv.as_mut(), &mut rng).unwrap();
                assert!(t.is_completed());
                let truth = if s[0] == s[1] { Verdict::Identical } else { Verdict::Different };
                assert_eq!(t.verdicts()[0].verdict, truth.flipped());
            }
        }
    }

    #[test]
    fn inactive_adversary_is_bit_identical_to_honest() {
        // participant_infer only watches, so the run must replay exactly.
        let cfg = ProposedConfig::new(4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let s = secrets(4, 6, &mut rng);
        let honest = run_proposed(&cfg, &s, &mut NoAdversary, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut watcher = AdversaryStrategy::ParticipantInfer(InferParams { attacker: 1, victim: 2, knows_initial_state: true })
            .build(4)
            .unwrap();
        let watched = run_proposed(&cfg, &s, watcher.as_mut(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(honest, watched);
    }

    #[test]
    fn participant_infer_modes() {
        let cfg = ProposedConfig::new(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for (params, expect_perfect) in [
            (InferParams { attacker: 1, victim: 2, knows_initial_state: true }, true),
            (InferParams { attacker: 2, victim: 2, knows_initial_state: false }, true),
        ] {
            for _ in 0..10 {
                let s = secrets(3, 8, &mut rng);
                let mut adv = AdversaryStrategy::ParticipantInfer(params.clone()).build(3).unwrap();
                let t = run_proposed(&cfg, &s, adv.as_mut(), &mut rng).unwrap();
                let out = assess(&t, adv.as_ref(), &s);
                assert_eq!(out.guessed_bits, 8);
                assert_eq!(out.guess_accuracy == Some(1.0), expect_perfect);
            }
        }
    }

    #[test]
    fn tamper_has_no_effect_under_relay() {
        let mut cfg = ProposedConfig::new(3, 6);
        cfg.variant = Variant::Tp2Relay;
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..50 {
            let s = secrets(3, 6, &mut rng);
            let mut adv = AdversaryStrategy::ClassicalPositionTamper(TamperParams::default()).build(3).unwrap();
            let t = run_proposed(&cfg, &s, adv.as_mut(), &mut rng).unwrap();
            assert!(t.is_completed());
        }
    }

    #[test]
    fn tamper_rewrites_to_unannounced_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let mut t = PositionTamper { count: Some(2) };
        let announced = vec![1, 4, 6];
        for _ in 0..100 {
            let out = t.tamper_positions(&announced, 10, &mut rng).unwrap();
            assert_eq!(out.len(), 3);
            let moved: Vec<_> = out.iter().zip(&announced).filter(|(a, b)| a != b).map(|(a, _)| *a).collect();
            assert_eq!(moved.len(), 2);
            assert!(moved.iter().all(|p| !announced.contains(p)));
            assert_ne!(moved[0], moved[1]);
        }
    }

    #[test]
    fn eve_without_decoys_or_checks_goes_unnoticed() {
        let mut cfg = ProposedConfig::new(3, 4);
        cfg.decoys = 0;
        cfg.check_rounds = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for _ in 0..20 {
            let s = secrets(3, 4, &mut rng);
            let mut adv = AdversaryStrategy::Tp2Intercept(TapParams::default()).build(3).unwrap();
            let t = run_proposed(&cfg, &s, adv.as_mut(), &mut rng).unwrap();
            assert!(t.is_completed());
            assert_eq!(assess(&t, adv.as_ref(), &s).guessed_bits, 4);
        }
    }

    #[test]
    fn public_view_slot_mapping() {
        let mut view = PublicView::default();
        view.decoy_positions.insert(1, vec![0, 3]);
        assert_eq!(view.slot_registers(1, 5), vec![None, Some(0), Some(1), None, Some(2)]);
    }
}
