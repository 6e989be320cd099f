//! Simulation and attack analysis for multiparty quantum private comparison
//! with two individually dishonest third parties.
//!
//! * [`ghz`]: the GHZ state family, its sampling rules and a statevector oracle.
//! * [`photon`]: decoy photons, quantum channels with taps, eavesdropper checks.
//! * [`protocol`]: the seven-step two-TP protocol and the single-TP baseline.
//! * [`adversary`]: pluggable attack strategies.
//! * [`harness`]: seeded Monte Carlo runs, statistics and the acceptance battery.
//! * [`config`]: the JSON scenario document.

pub mod adversary;
pub mod bits;
pub mod config;
pub mod ghz;
pub mod harness;
pub mod party;
pub mod photon;
pub mod protocol;

pub use bits::BitString;
