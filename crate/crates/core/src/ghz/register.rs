use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::{validate_positions, Basis, GhzSpec, Outcome};
use super::GhzError;

/// A single-qubit basis eigenstate: `|0⟩, |1⟩` (Z) or `|+⟩, |−⟩` (X).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Eigenstate {
    pub basis: Basis,
    pub bit: bool,
}

impl Eigenstate {
    pub const fn new(basis: Basis, bit: bool) -> Self {
        Self { basis, bit }
    }

    /// Projective measurement. A matching basis returns the prepared bit;
    /// otherwise the result is a fair coin and the state collapses to it.
    pub fn measure<R: Rng + ?Sized>(&mut self, basis: Basis, rng: &mut R) -> bool {
        if basis != self.basis {
            *self = Eigenstate::new(basis, rng.gen());
        }
        self.bit
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Particle {
    Entangled,
    Single(Eigenstate),
    Consumed,
}

/// Entangled remainder `(|q⟩ + (−1)^Δ|q̄⟩)/√2` over the particles in `members`.
/// Always has at least two members.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Group {
    members: u32,
    q: u32,
    delta: bool,
}

/// Mutable quantum state of one n-particle register as its particles travel
/// through the protocol.
///
/// The state is always a GHZ-type group over some particles times single-qubit
/// eigenstates on the rest, which is closed under Z and X measurements:
///
/// * Z on a group member collapses the whole group to `q` or `q̄`.
/// * X on a group member gives a fair bit `x`, removes the member and
///   updates `Δ ← Δ ⊕ x`; a lone survivor is the X eigenstate `Δ`.
///
/// Measurements either consume a particle ([`SharedRegister::measure`]) or
/// leave it in transit in the collapsed state ([`SharedRegister::disturb`]).
#[derive(Clone, Debug)]
pub struct SharedRegister {
    particles: Vec<Particle>,
    group: Option<Group>,
}

impl SharedRegister {
    pub fn from_spec(spec: &GhzSpec) -> Self {
        let n = spec.n();
        Self {
            particles: vec![Particle::Entangled; n],
            group: Some(Group {
                members: ((1u64 << n) - 1) as u32,
                q: spec.q_mask(),
                delta: spec.delta(),
            }),
        }
    }

    /// Unentangled register, one eigenstate per particle.
    pub fn product(states: &[Eigenstate]) -> Self {
        Self {
            particles: states.iter().map(|s| Particle::Single(*s)).collect(),
            group: None,
        }
    }

    pub fn n(&self) -> usize {
        self.particles.len()
    }

    pub fn is_consumed(&self, particle: usize) -> bool {
        matches!(self.particles.get(particle), Some(Particle::Consumed))
    }

    /// Whether any entanglement remains.
    pub fn is_entangled(&self) -> bool {
        self.group.is_some()
    }

    /// Measures and consumes `positions`, all in `basis`.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        positions: &[usize],
        basis: Basis,
        rng: &mut R,
    ) -> Result<Outcome, GhzError> {
        validate_positions(self.n(), positions)?;
        if let Some(&p) = positions.iter().find(|&&p| self.is_consumed(p)) {
            return Err(GhzError::AlreadyConsumed(p));
        }
        let mut out = Outcome::new(basis);
        for &p in positions {
            let bit = self.measure_in_place(p, basis, rng);
            self.particles[p] = Particle::Consumed;
            out.bits.insert(p, bit);
        }
        Ok(out)
    }

    /// Measures one particle without consuming it; it stays in the
    /// post-measurement eigenstate, as after an intercept-and-resend.
    pub fn disturb<R: Rng + ?Sized>(
        &mut self,
        particle: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<bool, GhzError> {
        if particle >= self.n() {
            return Err(GhzError::ParticleOutOfRange { particle, n: self.n() });
        }
        if self.is_consumed(particle) {
            return Err(GhzError::AlreadyConsumed(particle));
        }
        Ok(self.measure_in_place(particle, basis, rng))
    }

    fn measure_in_place<R: Rng + ?Sized>(&mut self, p: usize, basis: Basis, rng: &mut R) -> bool {
        match self.particles[p] {
            Particle::Single(mut s) => {
                let bit = s.measure(basis, rng);
                self.particles[p] = Particle::Single(s);
                bit
            }
            Particle::Entangled => {
                let group = self.group.take().expect("entangled particle without a group");
                match basis {
                    Basis::Z => {
                        let bit: bool = rng.gen();
                        let flip = bit ^ ((group.q >> p) & 1 == 1);
                        for k in members(group.members) {
                            let qk = (group.q >> k) & 1 == 1;
                            self.particles[k] = Particle::Single(Eigenstate::new(Basis::Z, qk ^ flip));
                        }
                        bit
                    }
                    Basis::X => {
                        let bit: bool = rng.gen();
                        self.particles[p] = Particle::Single(Eigenstate::new(Basis::X, bit));
                        let rest = group.members & !(1 << p);
                        let delta = group.delta ^ bit;
                        if rest.count_ones() == 1 {
                            let last = rest.trailing_zeros() as usize;
                            self.particles[last] = Particle::Single(Eigenstate::new(Basis::X, delta));
                        } else {
                            self.group = Some(Group { members: rest, q: group.q, delta });
                        }
                        bit
                    }
                }
            }
            Particle::Consumed => unreachable!("consumption is checked by callers"),
        }
    }
}

fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |k| (mask >> k) & 1 == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn consumed_particle_cannot_be_remeasured() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut reg = SharedRegister::from_spec(&GhzSpec::from_index(1, 3).unwrap());
        reg.measure(&[1], Basis::Z, &mut rng).unwrap();
        assert!(matches!(
            reg.measure(&[0, 1], Basis::Z, &mut rng),
            Err(GhzError::AlreadyConsumed(1))
        ));
        assert!(matches!(reg.disturb(1, Basis::X, &mut rng), Err(GhzError::AlreadyConsumed(1))));
        // the failed call consumed nothing
        assert!(!reg.is_consumed(0));
    }

    #[test]
    fn sequential_z_matches_t_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = GhzSpec::from_index(7, 4).unwrap();
        for _ in 0..500 {
            let mut reg = SharedRegister::from_spec(&spec);
            let a = reg.measure(&[3], Basis::Z, &mut rng).unwrap().get(3).unwrap();
            let b = reg.measure(&[1], Basis::Z, &mut rng).unwrap().get(1).unwrap();
            assert_eq!(a ^ b, spec.t_xor(1, 3).unwrap());
        }
    }

    #[test]
    fn sequential_x_parity_is_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for index in 1..=16 {
            let spec = GhzSpec::from_index(index, 4).unwrap();
            for _ in 0..100 {
                let mut reg = SharedRegister::from_spec(&spec);
                let mut parity = false;
                for p in [2, 0, 3, 1] {
                    parity ^= reg.measure(&[p], Basis::X, &mut rng).unwrap().get(p).unwrap();
                }
                assert_eq!(parity, spec.delta());
            }
        }
    }

    #[test]
    fn z_disturbance_breaks_x_parity_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = GhzSpec::from_index(1, 3).unwrap();
        let trials = 20_000;
        let mut bad = 0;
        for _ in 0..trials {
            let mut reg = SharedRegister::from_spec(&spec);
            reg.disturb(1, Basis::Z, &mut rng).unwrap();
            assert!(!reg.is_entangled());
            let out = reg.measure(&[0, 1, 2], Basis::X, &mut rng).unwrap();
            if !spec.x_consistent(out.mask()) {
                bad += 1;
            }
        }
        let rate = bad as f64 / trials as f64;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn product_register_measures_as_prepared() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let zero = Eigenstate::new(Basis::Z, false);
        let mut reg = SharedRegister::product(&[zero, zero, zero]);
        let out = reg.measure(&[0, 1, 2], Basis::Z, &mut rng).unwrap();
        assert_eq!(out.symbols(), "000");
    }

    #[test]
    fn eigenstate_measurement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut plus = Eigenstate::new(Basis::X, false);
        for _ in 0..50 {
            assert!(!plus.measure(Basis::X, &mut rng));
        }
        let mut one = Eigenstate::new(Basis::Z, true);
        one.measure(Basis::X, &mut rng);
        assert_eq!(one.basis, Basis::X);
    }
}
