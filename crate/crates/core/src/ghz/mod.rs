//! The n-particle GHZ family used as the comparison resource: closed-form
//! algebra and sampling, a stateful register for particles in flight, and a
//! dense statevector oracle for cross-checking both.

mod oracle;
mod register;
mod spec;

pub use oracle::{
    oracle_distribution, oracle_sample, oracle_sample_mixed, OracleSampler, StateVector,
    ORACLE_MAX_PARTICLES,
};
pub use register::{Eigenstate, SharedRegister};
pub use spec::{sample_measurement, Basis, GhzSpec, Outcome, XTerm, MAX_PARTICLES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GhzError {
    #[error("particle count {0} outside supported range 2..=20")]
    ParticleCount(usize),
    #[error("family index {index} out of range 1..=2^{n}")]
    IndexOutOfRange { index: u64, n: usize },
    #[error("particle {particle} out of range for a {n}-particle register")]
    ParticleOutOfRange { particle: usize, n: usize },
    #[error("particle {0} listed twice")]
    DuplicateParticle(usize),
    #[error("no particles selected")]
    EmptySelection,
    #[error("particle {0} was already measured")]
    AlreadyConsumed(usize),
    #[error("statevector oracle supports at most 12 particles, got {0}")]
    OracleCapacity(usize),
    #[error("invalid GHZ spec: {0}")]
    InvalidSpec(String),
}
