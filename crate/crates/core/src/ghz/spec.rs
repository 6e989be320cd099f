use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GhzError;

/// Largest register the simulator accepts.
pub const MAX_PARTICLES: usize = 20;

/// Single-qubit measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// Computational basis {|0⟩, |1⟩}.
    Z,
    /// Hadamard basis {|+⟩, |−⟩}; bit 0 is |+⟩ and bit 1 is |−⟩.
    X,
}

impl Basis {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            Basis::X
        } else {
            Basis::Z
        }
    }

    /// Symbol for an outcome bit in this basis.
    pub fn symbol(self, bit: bool) -> char {
        match (self, bit) {
            (Basis::Z, false) => '0',
            (Basis::Z, true) => '1',
            (Basis::X, false) => '+',
            (Basis::X, true) => '-',
        }
    }
}

/// One member of the n-particle GHZ family
/// `(|q⟩ + (−1)^Δ |q̄⟩)/√2` with the first bit of `q` fixed to 0.
///
/// Particles are indexed from 0. Bit `k` of the internal mask is `q` for
/// particle `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct GhzSpec {
    n: usize,
    q: u32,
    delta: bool,
}

impl GhzSpec {
    /// Builds a spec from its per-particle bits. The first bit must be 0.
    pub fn new(q: &[bool], delta: bool) -> Result<Self, GhzError> {
        let n = q.len();
        check_particle_count(n)?;
        if q[0] {
            return Err(GhzError::InvalidSpec("first bit of q must be 0".into()));
        }
        let mask = q
            .iter()
            .enumerate()
            .fold(0u32, |acc, (k, b)| acc | (u32::from(*b) << k));
        Ok(Self { n, q: mask, delta })
    }

    /// Canonical bijection from the 1-based family index `i ∈ 1..=2^n`:
    /// with `c = i − 1`, `Δ = c mod 2` and `(q₂..qₙ)` the big-endian bits of `⌊c/2⌋`.
    pub fn from_index(index: u64, n: usize) -> Result<Self, GhzError> {
        check_particle_count(n)?;
        let count = 1u64 << n;
        if index == 0 || index > count {
            return Err(GhzError::IndexOutOfRange { index, n });
        }
        let c = index - 1;
        let delta = c & 1 == 1;
        let tail = c >> 1;
        let mut q = 0u32;
        for k in 1..n {
            if (tail >> (n - 1 - k)) & 1 == 1 {
                q |= 1 << k;
            }
        }
        Ok(Self { n, q, delta })
    }

    /// Inverse of [`GhzSpec::from_index`].
    pub fn index(&self) -> u64 {
        let mut tail = 0u64;
        for k in 1..self.n {
            tail = (tail << 1) | u64::from(self.q_bit(k));
        }
        (tail << 1 | u64::from(self.delta)) + 1
    }

    /// Uniformly random member of the family.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, GhzError> {
        check_particle_count(n)?;
        Self::from_index(rng.gen_range(1..=(1u64 << n)), n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> bool {
        self.delta
    }

    pub fn q_bit(&self, particle: usize) -> bool {
        (self.q >> particle) & 1 == 1
    }

    pub fn q_bits(&self) -> Vec<bool> {
        (0..self.n).map(|k| self.q_bit(k)).collect()
    }

    pub(crate) fn q_mask(&self) -> u32 {
        self.q
    }

    fn full_mask(&self) -> u32 {
        ((1u64 << self.n) - 1) as u32
    }

    /// `q_i ⊕ q_j`, the fixed XOR of two particles' Z outcomes.
    pub fn t_xor(&self, i: usize, j: usize) -> Result<bool, GhzError> {
        self.check_particle(i)?;
        self.check_particle(j)?;
        Ok(self.q_bit(i) ^ self.q_bit(j))
    }

    /// Expansion in the X basis: every sign pattern whose minus-count parity
    /// equals Δ, each with sign `(−1)^δ`, `δ` the XOR of `q` over the minus
    /// positions. Terms are ordered as strings with `+` before `−`, particle 0
    /// leftmost. Each amplitude has magnitude `2^{−(n−1)/2}`.
    pub fn x_expansion(&self) -> Vec<XTerm> {
        let n = self.n;
        (0..(1u32 << n))
            .map(|v| {
                // particle 0 is the most significant digit of `v`
                (0..n).fold(0u32, |acc, k| acc | (((v >> (n - 1 - k)) & 1) << k))
            })
            .filter(|minus| (minus.count_ones() & 1 == 1) == self.delta)
            .map(|minus| XTerm {
                n,
                minus,
                negative: (minus & self.q).count_ones() & 1 == 1,
            })
            .collect()
    }

    /// Whether the joint Z outcome over all particles is `q` or `q̄`.
    pub fn z_consistent(&self, outcome_mask: u32) -> bool {
        outcome_mask == self.q || outcome_mask == self.q ^ self.full_mask()
    }

    /// Whether the joint X outcome over all particles has minus-parity Δ.
    pub fn x_consistent(&self, minus_mask: u32) -> bool {
        (minus_mask.count_ones() & 1 == 1) == self.delta
    }

    /// True when the two specs agree (up to global complement) on every
    /// particle except `skip`.
    pub fn agrees_except(&self, other: &GhzSpec, skip: usize) -> bool {
        if self.n != other.n {
            return false;
        }
        let keep = self.full_mask() & !(1u32 << skip);
        let diff = (self.q ^ other.q) & keep;
        diff == 0 || diff == keep
    }

    pub(crate) fn check_particle(&self, particle: usize) -> Result<(), GhzError> {
        if particle < self.n {
            Ok(())
        } else {
            Err(GhzError::ParticleOutOfRange { particle, n: self.n })
        }
    }
}

impl fmt::Display for GhzSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q: String = (0..self.n).map(|k| if self.q_bit(k) { '1' } else { '0' }).collect();
        let qbar: String = (0..self.n).map(|k| if self.q_bit(k) { '0' } else { '1' }).collect();
        let sign = if self.delta { '-' } else { '+' };
        write!(f, "Psi{}=(|{q}>{sign}|{qbar}>)/sqrt2", self.index())
    }
}

pub(crate) fn check_particle_count(n: usize) -> Result<(), GhzError> {
    if (2..=MAX_PARTICLES).contains(&n) {
        Ok(())
    } else {
        Err(GhzError::ParticleCount(n))
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    index: u64,
    n: usize,
    q: String,
    delta: u8,
}

impl From<GhzSpec> for SpecRepr {
    fn from(s: GhzSpec) -> Self {
        SpecRepr {
            index: s.index(),
            n: s.n,
            q: s.q_bits().iter().map(|b| if *b { '1' } else { '0' }).collect(),
            delta: u8::from(s.delta),
        }
    }
}

impl TryFrom<SpecRepr> for GhzSpec {
    type Error = GhzError;

    fn try_from(r: SpecRepr) -> Result<Self, Self::Error> {
        let spec = GhzSpec::from_index(r.index, r.n)?;
        let q: Vec<bool> = r.q.chars().map(|c| c == '1').collect();
        if q != spec.q_bits() || r.delta != u8::from(spec.delta) {
            return Err(GhzError::InvalidSpec(format!(
                "index {} does not match q={} delta={}",
                r.index, r.q, r.delta
            )));
        }
        Ok(spec)
    }
}

/// One term of a GHZ state's X-basis expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XTerm {
    n: usize,
    minus: u32,
    negative: bool,
}

impl XTerm {
    /// Bit `k` set means particle `k` is `|−⟩`.
    pub fn minus_mask(&self) -> u32 {
        self.minus
    }

    pub fn minus_count(&self) -> u32 {
        self.minus.count_ones()
    }

    /// `+1` or `−1`.
    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    /// Signs as text, e.g. `"+--"`.
    pub fn xstring(&self) -> String {
        (0..self.n)
            .map(|k| if (self.minus >> k) & 1 == 1 { '-' } else { '+' })
            .collect()
    }
}

/// Measurement record: particle index to outcome bit, in a single basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub basis: Basis,
    pub bits: BTreeMap<usize, bool>,
}

impl Outcome {
    pub fn new(basis: Basis) -> Self {
        Self { basis, bits: BTreeMap::new() }
    }

    pub fn get(&self, particle: usize) -> Option<bool> {
        self.bits.get(&particle).copied()
    }

    /// Outcome bits packed as a mask over particle indices.
    pub fn mask(&self) -> u32 {
        self.bits
            .iter()
            .filter(|(_, b)| **b)
            .fold(0u32, |acc, (k, _)| acc | 1 << k)
    }

    /// Rendered as ket text in ascending particle order, e.g. `"+-+"` or `"010"`.
    pub fn symbols(&self) -> String {
        self.bits.values().map(|b| self.basis.symbol(*b)).collect()
    }
}

pub(crate) fn validate_positions(n: usize, positions: &[usize]) -> Result<(), GhzError> {
    if positions.is_empty() {
        return Err(GhzError::EmptySelection);
    }
    let mut seen = 0u32;
    for &p in positions {
        if p >= n {
            return Err(GhzError::ParticleOutOfRange { particle: p, n });
        }
        if seen & (1 << p) != 0 {
            return Err(GhzError::DuplicateParticle(p));
        }
        seen |= 1 << p;
    }
    Ok(())
}

/// Samples one joint measurement of `positions` on a fresh copy of `spec`
/// using the closed-form marginals of the family:
///
/// * Z basis: `q` or its complement on the chosen particles, each with probability ½.
/// * X basis on every particle: uniform over sign strings with minus-parity Δ.
/// * X basis on a proper subset: independent uniform bits.
pub fn sample_measurement<R: Rng + ?Sized>(
    spec: &GhzSpec,
    positions: &[usize],
    basis: Basis,
    rng: &mut R,
) -> Result<Outcome, GhzError> {
    validate_positions(spec.n, positions)?;
    let mut out = Outcome::new(basis);
    match basis {
        Basis::Z => {
            let flip = rng.gen::<bool>();
            for &p in positions {
                out.bits.insert(p, spec.q_bit(p) ^ flip);
            }
        }
        Basis::X if positions.len() == spec.n => {
            let mut parity = false;
            let (last, rest) = positions.split_last().expect("nonempty");
            for &p in rest {
                let b = rng.gen::<bool>();
                parity ^= b;
                out.bits.insert(p, b);
            }
            out.bits.insert(*last, parity ^ spec.delta);
        }
        Basis::X => {
            for &p in positions {
                out.bits.insert(p, rng.gen::<bool>());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn index_examples() {
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        assert_eq!(psi1.q_bits(), bits("000"));
        assert!(!psi1.delta());

        let psi5 = GhzSpec::from_index(5, 3).unwrap();
        assert_eq!(psi5.q_bits(), bits("010"));
        assert!(!psi5.delta());

        let psi7 = GhzSpec::from_index(7, 4).unwrap();
        assert_eq!(psi7.q_bits(), bits("0011"));
        assert!(!psi7.delta());

        let minus = GhzSpec::from_index(2, 2).unwrap();
        assert_eq!(minus.q_bits(), bits("00"));
        assert!(minus.delta());
    }

    #[test]
    fn index_range_errors() {
        assert!(matches!(GhzSpec::from_index(0, 3), Err(GhzError::IndexOutOfRange { .. })));
        assert!(matches!(GhzSpec::from_index(9, 3), Err(GhzError::IndexOutOfRange { .. })));
        assert!(matches!(GhzSpec::from_index(1, 1), Err(GhzError::ParticleCount(1))));
        assert!(matches!(GhzSpec::from_index(1, 21), Err(GhzError::ParticleCount(21))));
        assert!(GhzSpec::from_index(1 << 20, 20).is_ok());
        assert!(GhzSpec::new(&bits("100"), false).is_err());
    }

    #[test]
    fn t_xor_examples() {
        let psi7 = GhzSpec::from_index(7, 4).unwrap();
        assert!(!psi7.t_xor(0, 1).unwrap());
        assert!(psi7.t_xor(1, 3).unwrap());
        for k in 0..4 {
            assert!(!psi7.t_xor(k, k).unwrap());
        }
        assert!(psi7.t_xor(0, 4).is_err());
    }

    #[test]
    fn x_expansion_psi5_and_psi1() {
        let render = |s: &GhzSpec| -> Vec<(String, i8)> {
            s.x_expansion().iter().map(|t| (t.xstring(), t.sign())).collect()
        };
        let psi5 = GhzSpec::from_index(5, 3).unwrap();
        assert_eq!(
            render(&psi5),
            vec![("+++".into(), 1), ("+--".into(), -1), ("-+-".into(), 1), ("--+".into(), -1)]
        );
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        assert_eq!(
            render(&psi1),
            vec![("+++".into(), 1), ("+--".into(), 1), ("-+-".into(), 1), ("--+".into(), 1)]
        );
        let bell = GhzSpec::from_index(1, 2).unwrap();
        assert_eq!(render(&bell), vec![("++".into(), 1), ("--".into(), 1)]);
    }

    #[test]
    fn consistency_predicates() {
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        assert!(psi1.z_consistent(0b000));
        assert!(psi1.z_consistent(0b111));
        assert!(!psi1.z_consistent(0b010));
        assert!(psi1.x_consistent(0b110));
        assert!(!psi1.x_consistent(0b001));
    }

    #[test]
    fn agreement_off_one_particle() {
        // Ψ1 = 000/111 and Ψ7 = 011/100 agree up to complement off particle 0.
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        let psi7 = GhzSpec::from_index(7, 3).unwrap();
        let psi3 = GhzSpec::from_index(3, 3).unwrap();
        assert!(psi1.agrees_except(&psi7, 0));
        assert!(psi1.agrees_except(&psi1, 0));
        assert!(!psi1.agrees_except(&psi3, 0));
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let s = GhzSpec::from_index(6, 3).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<GhzSpec>(&json).unwrap(), s);
        let bad = r#"{"index":6,"n":3,"q":"000","delta":1}"#;
        assert!(serde_json::from_str::<GhzSpec>(bad).is_err());
    }

    #[test]
    fn sampler_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        for _ in 0..200 {
            let z = sample_measurement(&psi1, &[0, 1, 2], Basis::Z, &mut rng).unwrap();
            assert!(matches!(z.symbols().as_str(), "000" | "111"));
            let x = sample_measurement(&psi1, &[0, 1, 2], Basis::X, &mut rng).unwrap();
            assert!(matches!(x.symbols().as_str(), "+++" | "+--" | "-+-" | "--+"));
        }
        assert!(matches!(
            sample_measurement(&psi1, &[], Basis::Z, &mut rng),
            Err(GhzError::EmptySelection)
        ));
        assert!(matches!(
            sample_measurement(&psi1, &[1, 1], Basis::Z, &mut rng),
            Err(GhzError::DuplicateParticle(1))
        ));
    }
}
