//! Decoy photons, quantum channels with attacker taps, and the public
//! discussion that checks decoys for disturbance.

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::ghz::{Basis, Eigenstate, GhzError, SharedRegister};
use crate::party::PartyId;

/// The four single-photon decoy states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyState {
    Zero,
    One,
    Plus,
    Minus,
}

impl DecoyState {
    pub const ALL: [DecoyState; 4] = [DecoyState::Zero, DecoyState::One, DecoyState::Plus, DecoyState::Minus];

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.gen_range(0..4)]
    }

    pub fn basis(self) -> Basis {
        match self {
            DecoyState::Zero | DecoyState::One => Basis::Z,
            DecoyState::Plus | DecoyState::Minus => Basis::X,
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, DecoyState::One | DecoyState::Minus)
    }

    pub fn from_eigenstate(e: Eigenstate) -> Self {
        match (e.basis, e.bit) {
            (Basis::Z, false) => DecoyState::Zero,
            (Basis::Z, true) => DecoyState::One,
            (Basis::X, false) => DecoyState::Plus,
            (Basis::X, true) => DecoyState::Minus,
        }
    }

    pub fn eigenstate(self) -> Eigenstate {
        Eigenstate::new(self.basis(), self.bit())
    }
}

/// `l` independent uniform decoys.
pub fn generate_decoys<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Vec<DecoyState> {
    (0..l).map(|_| DecoyState::random(rng)).collect()
}

/// Measures a decoy as currently prepared. A wrong basis yields a fair coin
/// and re-prepares the photon in the measured state.
pub fn measure_decoy<R: Rng + ?Sized>(decoy: &mut DecoyState, basis: Basis, rng: &mut R) -> bool {
    let mut e = decoy.eigenstate();
    let bit = e.measure(basis, rng);
    *decoy = DecoyState::from_eigenstate(e);
    bit
}

/// One transmissible quantum unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonSlot {
    Decoy(DecoyState),
    /// Particle `particle` of shared register `register`.
    Carrier { register: usize, particle: usize },
}

/// Inserts `decoys` at a uniformly random set of positions, keeping the
/// carriers in order. Returns the merged sequence and the (ascending,
/// 0-based) decoy positions.
pub fn interleave<R: Rng + ?Sized>(
    carriers: Vec<PhotonSlot>,
    decoys: Vec<DecoyState>,
    rng: &mut R,
) -> (Vec<PhotonSlot>, Vec<usize>) {
    let total = carriers.len() + decoys.len();
    let mut positions = index::sample(rng, total, decoys.len()).into_vec();
    positions.sort_unstable();
    let mut merged = Vec::with_capacity(total);
    let mut carriers = carriers.into_iter();
    let mut decoys = decoys.into_iter();
    let mut next = positions.iter().peekable();
    for slot in 0..total {
        if next.peek() == Some(&&slot) {
            next.next();
            merged.push(PhotonSlot::Decoy(decoys.next().expect("decoy count")));
        } else {
            merged.push(carriers.next().expect("carrier count"));
        }
    }
    (merged, positions)
}

/// All shared registers of one protocol run.
#[derive(Clone, Debug, Default)]
pub struct RegisterStore {
    registers: Vec<SharedRegister>,
}

impl RegisterStore {
    pub fn new(registers: Vec<SharedRegister>) -> Self {
        Self { registers }
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn get(&self, register: usize) -> &SharedRegister {
        &self.registers[register]
    }

    pub fn get_mut(&mut self, register: usize) -> &mut SharedRegister {
        &mut self.registers[register]
    }
}

/// Measures whatever occupies a slot without consuming it (what an
/// intercept-resend attacker does). Returns the observed bit.
pub fn disturb_slot<R: Rng + ?Sized>(
    slot: &mut PhotonSlot,
    store: &mut RegisterStore,
    basis: Basis,
    rng: &mut R,
) -> Result<bool, GhzError> {
    match slot {
        PhotonSlot::Decoy(d) => Ok(measure_decoy(d, basis, rng)),
        PhotonSlot::Carrier { register, particle } => store.get_mut(*register).disturb(*particle, basis, rng),
    }
}

/// A directed quantum link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: PartyId,
    pub to: PartyId,
}

/// Attacker hook invoked on every transmission over a tapped channel.
pub trait ChannelTap {
    fn on_transit(
        &mut self,
        link: Link,
        slots: &mut [PhotonSlot],
        store: &mut RegisterStore,
        rng: &mut dyn RngCore,
    );
}

/// A quantum channel with an ordered list of taps. Without taps slots are
/// delivered untouched.
pub struct QuantumChannel<'a> {
    link: Link,
    taps: Vec<&'a mut dyn ChannelTap>,
}

impl<'a> QuantumChannel<'a> {
    pub fn new(link: Link) -> Self {
        Self { link, taps: Vec::new() }
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn add_tap(&mut self, tap: &'a mut dyn ChannelTap) {
        self.taps.push(tap);
    }

    pub fn is_tapped(&self) -> bool {
        !self.taps.is_empty()
    }

    pub fn transmit(&mut self, slots: &mut [PhotonSlot], store: &mut RegisterStore, rng: &mut dyn RngCore) {
        for tap in self.taps.iter_mut() {
            tap.on_transit(self.link, slots, store, rng);
        }
    }
}

/// Sender's public statement about one decoy: where it is and which basis
/// to measure it in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyAnnouncement {
    pub position: usize,
    pub basis: Basis,
}

pub fn announce_decoys(positions: &[usize], decoys: &[DecoyState]) -> Vec<DecoyAnnouncement> {
    positions
        .iter()
        .zip(decoys)
        .map(|(&position, d)| DecoyAnnouncement { position, basis: d.basis() })
        .collect()
}

/// Receiver side of the discussion: measures each announced slot in the
/// announced basis.
pub fn measure_announced<R: Rng + ?Sized>(
    slots: &mut [PhotonSlot],
    announcements: &[DecoyAnnouncement],
    rng: &mut R,
) -> Result<Vec<bool>, PhotonError> {
    announcements
        .iter()
        .map(|a| match slots.get_mut(a.position) {
            Some(PhotonSlot::Decoy(d)) => Ok(measure_decoy(d, a.basis, rng)),
            _ => Err(PhotonError::NotADecoy(a.position)),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub checked: usize,
    pub mismatches: usize,
}

/// Compares receiver results against the sender's preparations. Passes iff
/// every decoy matches.
pub fn public_discussion(
    announcements: &[DecoyAnnouncement],
    results: &[bool],
    expected: &[DecoyState],
) -> Result<CheckReport, PhotonError> {
    if announcements.len() != results.len() || results.len() != expected.len() {
        return Err(PhotonError::Misaligned {
            announcements: announcements.len(),
            results: results.len(),
            expected: expected.len(),
        });
    }
    let mut mismatches = 0;
    for ((a, r), e) in announcements.iter().zip(results).zip(expected) {
        if a.basis != e.basis() {
            return Err(PhotonError::BasisMismatch(a.position));
        }
        if *r != e.bit() {
            mismatches += 1;
        }
    }
    Ok(CheckReport { passed: mismatches == 0, checked: results.len(), mismatches })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PhotonError {
    #[error("misaligned discussion: {announcements} announcements, {results} results, {expected} expected states")]
    Misaligned { announcements: usize, results: usize, expected: usize },
    #[error("announced basis at position {0} differs from the preparation basis")]
    BasisMismatch(usize),
    #[error("slot {0} does not hold a decoy")]
    NotADecoy(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn decoy_generation() {
        let mut r = rng(1);
        assert!(generate_decoys(0, &mut r).is_empty());
        let l = 400_000;
        let decoys = generate_decoys(l, &mut r);
        let sigma = (0.25f64 * 0.75 / l as f64).sqrt();
        for state in DecoyState::ALL {
            let f = decoys.iter().filter(|d| **d == state).count() as f64 / l as f64;
            assert!((f - 0.25).abs() <= 3.0 * sigma, "{state:?} frequency {f}");
        }
    }

    #[test]
    fn decoy_measurement() {
        let mut r = rng(2);
        for _ in 0..100 {
            let mut one = DecoyState::One;
            assert!(measure_decoy(&mut one, Basis::Z, &mut r));
            let mut plus = DecoyState::Plus;
            assert!(!measure_decoy(&mut plus, Basis::X, &mut r));
        }
        let trials = 20_000;
        let ones = (0..trials)
            .filter(|_| measure_decoy(&mut DecoyState::Zero, Basis::X, &mut r))
            .count();
        assert!((ones as f64 / trials as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn wrong_basis_then_correct_basis_mismatches_half() {
        let mut r = rng(3);
        let trials = 20_000;
        let mut mismatch = 0;
        for _ in 0..trials {
            let mut d = DecoyState::Minus;
            measure_decoy(&mut d, Basis::Z, &mut r);
            if !measure_decoy(&mut d, Basis::X, &mut r) {
                mismatch += 1;
            }
        }
        assert!((mismatch as f64 / trials as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn interleave_examples() {
        let mut r = rng(4);
        let (merged, pos) = interleave(vec![], vec![DecoyState::Plus], &mut r);
        assert_eq!(merged, vec![PhotonSlot::Decoy(DecoyState::Plus)]);
        assert_eq!(pos, vec![0]);

        let m = 8;
        let carriers: Vec<_> = (0..2 * m).map(|k| PhotonSlot::Carrier { register: k, particle: 1 }).collect();
        let decoys = generate_decoys(2 * m, &mut r);
        let (merged, pos) = interleave(carriers.clone(), decoys.clone(), &mut r);
        assert_eq!(merged.len(), 4 * m);
        let kept: Vec<_> = merged.iter().filter(|s| matches!(s, PhotonSlot::Carrier { .. })).copied().collect();
        assert_eq!(kept, carriers);
        let placed: Vec<_> = pos.iter().map(|&p| merged[p]).collect();
        assert_eq!(placed, decoys.into_iter().map(PhotonSlot::Decoy).collect::<Vec<_>>());
    }

    #[test]
    fn untapped_channel_passes_discussion() {
        let mut r = rng(5);
        let link = Link { from: PartyId::Tp1, to: PartyId::Participant(1) };
        for l in [0, 1, 7, 64] {
            let decoys = generate_decoys(l, &mut r);
            let (mut slots, pos) = interleave(vec![], decoys.clone(), &mut r);
            let mut store = RegisterStore::default();
            QuantumChannel::new(link).transmit(&mut slots, &mut store, &mut r);
            let ann = announce_decoys(&pos, &decoys);
            let results = measure_announced(&mut slots, &ann, &mut r).unwrap();
            let report = public_discussion(&ann, &results, &decoys).unwrap();
            assert!(report.passed);
            assert_eq!(report.mismatches, 0);
        }
    }

    #[test]
    fn discussion_contract_errors() {
        let ann = [DecoyAnnouncement { position: 0, basis: Basis::Z }];
        assert!(matches!(
            public_discussion(&ann, &[], &[DecoyState::Zero]),
            Err(PhotonError::Misaligned { .. })
        ));
        assert!(matches!(
            public_discussion(&ann, &[false], &[DecoyState::Plus]),
            Err(PhotonError::BasisMismatch(0))
        ));
    }
}
