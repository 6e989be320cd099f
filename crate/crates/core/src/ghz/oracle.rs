//! Brute-force statevector reference for the GHZ family.
//!
//! Every amplitude reachable from a family member by Hadamards is an integer
//! multiple of `2^{-k/2}`, so the state is held as integer numerators over a
//! shared power of √2 and Born probabilities are exact integer weights.

use std::collections::BTreeMap;

use rand::Rng;

use super::spec::{validate_positions, Basis, GhzSpec, Outcome};
use super::GhzError;

/// Largest register the dense oracle will build.
pub const ORACLE_MAX_PARTICLES: usize = 12;

/// Dense state: amplitude of basis index `b` is `numerators[b] / √2^half_exp`,
/// with bit `k` of `b` holding particle `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateVector {
    n: usize,
    numerators: Vec<i64>,
    half_exp: u32,
}

impl StateVector {
    pub fn from_spec(spec: &GhzSpec) -> Result<Self, GhzError> {
        let n = spec.n();
        if n > ORACLE_MAX_PARTICLES {
            return Err(GhzError::OracleCapacity(n));
        }
        let mut numerators = vec![0i64; 1 << n];
        let q = spec.q_mask() as usize;
        let qbar = q ^ ((1 << n) - 1);
        numerators[q] = 1;
        numerators[qbar] = if spec.delta() { -1 } else { 1 };
        Ok(Self { n, numerators, half_exp: 1 })
    }

    pub fn from_raw(n: usize, numerators: Vec<i64>, half_exp: u32) -> Result<Self, GhzError> {
        if n > ORACLE_MAX_PARTICLES {
            return Err(GhzError::OracleCapacity(n));
        }
        assert_eq!(numerators.len(), 1 << n, "numerator count must be 2^n");
        let mut sv = Self { n, numerators, half_exp };
        sv.reduce();
        Ok(sv)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(numerator, half_exp)` of basis index `b`.
    pub fn amplitude(&self, b: usize) -> (i64, u32) {
        (self.numerators[b], self.half_exp)
    }

    pub fn hadamard(&mut self, particle: usize) {
        let bit = 1usize << particle;
        for b in 0..self.numerators.len() {
            if b & bit == 0 {
                let a0 = self.numerators[b];
                let a1 = self.numerators[b | bit];
                self.numerators[b] = a0 + a1;
                self.numerators[b | bit] = a0 - a1;
            }
        }
        self.half_exp += 1;
        self.reduce();
    }

    fn reduce(&mut self) {
        while self.half_exp >= 2 && self.numerators.iter().all(|a| a % 2 == 0) {
            self.numerators.iter_mut().for_each(|a| *a /= 2);
            self.half_exp -= 2;
        }
    }

    /// Sum of squared numerators; equals `2^half_exp` for a normalized state.
    pub fn norm_weight(&self) -> u128 {
        self.numerators.iter().map(|a| (a * a) as u128).sum()
    }

    /// Exact Born weights of the joint outcome on `positions`, after rotating
    /// each listed particle into its basis. Index bit `t` of the result is the
    /// outcome of `positions[t]`. Returns the weights and their total.
    pub fn marginal_weights(&self, positions: &[usize], bases: &[Basis]) -> (Vec<u128>, u128) {
        assert_eq!(positions.len(), bases.len());
        let mut rotated = self.clone();
        for (&p, &b) in positions.iter().zip(bases) {
            if b == Basis::X {
                rotated.hadamard(p);
            }
        }
        let mut weights = vec![0u128; 1 << positions.len()];
        for (b, a) in rotated.numerators.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            let pattern = positions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (t, &p)| acc | (((b >> p) & 1) << t));
            weights[pattern] += (a * a) as u128;
        }
        let total = rotated.norm_weight();
        (weights, total)
    }
}

/// Exact distribution of a measurement of `positions` (one basis per
/// position, mixed bases allowed). Pattern bit `t` is `positions[t]`.
pub fn oracle_distribution(
    spec: &GhzSpec,
    positions: &[usize],
    bases: &[Basis],
) -> Result<Vec<f64>, GhzError> {
    validate_positions(spec.n(), positions)?;
    let sv = StateVector::from_spec(spec)?;
    let (weights, total) = sv.marginal_weights(positions, bases);
    Ok(weights.iter().map(|w| *w as f64 / total as f64).collect())
}

/// Samples the joint outcome from the exact Born distribution of the dense
/// state. Distributionally identical to [`super::sample_measurement`].
pub fn oracle_sample<R: Rng + ?Sized>(
    spec: &GhzSpec,
    positions: &[usize],
    basis: Basis,
    rng: &mut R,
) -> Result<Outcome, GhzError> {
    let bases = vec![basis; positions.len()];
    let bits = oracle_sample_mixed(spec, positions, &bases, rng)?;
    Ok(Outcome { basis, bits })
}

/// Mixed-basis variant of [`oracle_sample`].
pub fn oracle_sample_mixed<R: Rng + ?Sized>(
    spec: &GhzSpec,
    positions: &[usize],
    bases: &[Basis],
    rng: &mut R,
) -> Result<BTreeMap<usize, bool>, GhzError> {
    validate_positions(spec.n(), positions)?;
    let sampler = OracleSampler::new(spec, positions, bases)?;
    Ok(sampler.sample(rng))
}

/// Precomputed cumulative weights for repeated oracle draws.
#[derive(Clone, Debug)]
pub struct OracleSampler {
    positions: Vec<usize>,
    cumulative: Vec<u128>,
}

impl OracleSampler {
    pub fn new(spec: &GhzSpec, positions: &[usize], bases: &[Basis]) -> Result<Self, GhzError> {
        validate_positions(spec.n(), positions)?;
        let sv = StateVector::from_spec(spec)?;
        let mut acc = 0u128;
        let (weights, _) = sv.marginal_weights(positions, bases);
        let cumulative = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { positions: positions.to_vec(), cumulative })
    }

    /// Returns the outcome pattern index (bit `t` is `positions[t]`).
    pub fn sample_pattern<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let r = rng.gen_range(0..total);
        self.cumulative.partition_point(|c| *c <= r)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<usize, bool> {
        let pattern = self.sample_pattern(rng);
        self.positions
            .iter()
            .enumerate()
            .map(|(t, &p)| (p, (pattern >> t) & 1 == 1))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_error() {
        let spec = GhzSpec::from_index(1, 13).unwrap();
        assert!(matches!(StateVector::from_spec(&spec), Err(GhzError::OracleCapacity(13))));
    }

    #[test]
    fn bell_states_in_z() {
        // (|00⟩+|11⟩)/√2 and (|01⟩−|10⟩)/√2
        let phi = GhzSpec::from_index(1, 2).unwrap();
        let psi = GhzSpec::from_index(4, 2).unwrap();
        let d = oracle_distribution(&phi, &[0, 1], &[Basis::Z, Basis::Z]).unwrap();
        assert_eq!(d, vec![0.5, 0.0, 0.0, 0.5]);
        let d = oracle_distribution(&psi, &[0, 1], &[Basis::Z, Basis::Z]).unwrap();
        assert_eq!(d, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn two_qubit_x_expansion() {
        // (|00⟩+|11⟩)/√2 = (|++⟩+|−−⟩)/√2
        let phi = GhzSpec::from_index(1, 2).unwrap();
        let mut sv = StateVector::from_spec(&phi).unwrap();
        sv.hadamard(0);
        sv.hadamard(1);
        assert_eq!(sv.amplitude(0b00), (1, 1));
        assert_eq!(sv.amplitude(0b11), (1, 1));
        assert_eq!(sv.amplitude(0b01).0, 0);
        assert_eq!(sv.amplitude(0b10).0, 0);
    }

    #[test]
    fn partial_x_marginal_is_uniform() {
        let psi1 = GhzSpec::from_index(1, 3).unwrap();
        let d = oracle_distribution(&psi1, &[1, 2], &[Basis::X, Basis::X]).unwrap();
        assert_eq!(d, vec![0.25; 4]);
    }

    #[test]
    fn marginal_weights_sum_to_norm() {
        for index in 1..=8 {
            let spec = GhzSpec::from_index(index, 3).unwrap();
            let sv = StateVector::from_spec(&spec).unwrap();
            let (w, total) = sv.marginal_weights(&[2, 0], &[Basis::X, Basis::Z]);
            assert_eq!(w.iter().sum::<u128>(), total);
            assert!(total.is_power_of_two());
            assert_eq!(sv.norm_weight(), 2);
        }
    }
}
