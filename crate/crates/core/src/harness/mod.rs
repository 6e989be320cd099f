//! Seeded Monte Carlo runner.
//!
//! Trial `t` of a scenario with root seed `s` draws everything from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `t`. Streams are
//! independent, so results do not depend on how trials are scheduled.

mod stats;
pub mod suite;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{assess, AdversaryError, AdversaryStrategy, AttackOutcome, FakePreparation};
use crate::bits::BitString;
use crate::ghz::GhzSpec;
use crate::protocol::{
    run_proposed, run_zhang_baseline, ProposedConfig, ProtocolError, ProtocolKind, ProtocolTranscript, Variant,
    ZhangConfig,
};

pub use stats::{metrics_from_csv, metrics_to_csv, wilson, Metric, Tally, TrialStats, WILSON_Z};
pub use suite::{run_suite, SuiteReport, SuiteRow, SUITES};

/// How secrets are chosen for each trial.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SecretsRepr", into = "SecretsRepr")]
pub enum SecretPolicy {
    /// The same vectors every trial.
    Explicit { values: Vec<BitString> },
    #[default]
    Uniform,
    /// One uniform secret shared by everyone.
    ForcedEqual,
    /// Uniform, redrawn until pairwise distinct.
    ForcedUnequal,
    /// Uniform, then each participant after the first copies a uniformly
    /// chosen earlier one with probability ½, so both verdicts occur often.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyName {
    Explicit,
    Uniform,
    ForcedEqual,
    ForcedUnequal,
    Mixed,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretsRepr {
    policy: PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<BitString>>,
}

impl TryFrom<SecretsRepr> for SecretPolicy {
    type Error = String;

    fn try_from(r: SecretsRepr) -> Result<Self, String> {
        match (r.policy, r.values) {
            (PolicyName::Explicit, Some(values)) => Ok(SecretPolicy::Explicit { values }),
            (PolicyName::Explicit, None) => Err("policy `explicit` needs `values`".into()),
            (_, Some(_)) => Err("`values` is only allowed with policy `explicit`".into()),
            (PolicyName::Uniform, None) => Ok(SecretPolicy::Uniform),
            (PolicyName::ForcedEqual, None) => Ok(SecretPolicy::ForcedEqual),
            (PolicyName::ForcedUnequal, None) => Ok(SecretPolicy::ForcedUnequal),
            (PolicyName::Mixed, None) => Ok(SecretPolicy::Mixed),
        }
    }
}

impl From<SecretPolicy> for SecretsRepr {
    fn from(p: SecretPolicy) -> Self {
        let (policy, values) = match p {
            SecretPolicy::Explicit { values } => (PolicyName::Explicit, Some(values)),
            SecretPolicy::Uniform => (PolicyName::Uniform, None),
            SecretPolicy::ForcedEqual => (PolicyName::ForcedEqual, None),
            SecretPolicy::ForcedUnequal => (PolicyName::ForcedUnequal, None),
            SecretPolicy::Mixed => (PolicyName::Mixed, None),
        };
        SecretsRepr { policy, values }
    }
}

impl SecretPolicy {
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, m: usize, rng: &mut R) -> Vec<BitString> {
        match self {
            SecretPolicy::Explicit { values } => values.clone(),
            SecretPolicy::Uniform => (0..n).map(|_| BitString::random(m, rng)).collect(),
            SecretPolicy::ForcedEqual => vec![BitString::random(m, rng); n],
            SecretPolicy::ForcedUnequal => loop {
                let s: Vec<BitString> = (0..n).map(|_| BitString::random(m, rng)).collect();
                if s.iter().enumerate().all(|(i, a)| s[..i].iter().all(|b| a != b)) {
                    break s;
                }
            },
            SecretPolicy::Mixed => {
                let mut s: Vec<BitString> = (0..n).map(|_| BitString::random(m, rng)).collect();
                for i in 1..n {
                    if rng.gen::<bool>() {
                        s[i] = s[..i].choose(rng).expect("nonempty prefix").clone();
                    }
                }
                s
            }
        }
    }

    fn validate(&self, n: usize, m: usize) -> Result<(), HarnessError> {
        match self {
            SecretPolicy::Explicit { values } => {
                if values.len() != n {
                    return Err(HarnessError::invalid("secrets.values", format!("expected {n} secrets, got {}", values.len())));
                }
                if let Some(v) = values.iter().find(|v| v.len() != m) {
                    return Err(HarnessError::invalid("secrets.values", format!("secret {v} does not have {m} bits")));
                }
                Ok(())
            }
            SecretPolicy::ForcedUnequal if m < 64 && (1u64 << m) < n as u64 => {
                Err(HarnessError::invalid("secrets.policy", format!("{n} distinct {m}-bit secrets do not exist")))
            }
            _ => Ok(()),
        }
    }
}

/// One experiment: a protocol configuration, an attack, a secret policy and
/// a trial budget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub m: usize,
    pub check_rounds: usize,
    pub decoys: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub announce_results: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_pool: Option<Vec<u64>>,
    #[serde(default)]
    pub decoy_tolerance: usize,
    #[serde(default)]
    pub adversary: AdversaryStrategy,
    #[serde(default)]
    pub secrets: SecretPolicy,
    pub trials: u64,
    pub seed: u64,
}

impl Scenario {
    /// Honest two-TP run with the protocol's default budgets.
    pub fn proposed(n: usize, m: usize) -> Self {
        let cfg = ProposedConfig::new(n, m);
        Self {
            protocol: ProtocolKind::Proposed,
            n,
            m,
            check_rounds: cfg.check_rounds,
            decoys: cfg.decoys,
            variant: cfg.variant,
            announce_results: false,
            state_pool: None,
            decoy_tolerance: 0,
            adversary: AdversaryStrategy::None,
            secrets: SecretPolicy::Uniform,
            trials: 1,
            seed: 0,
        }
    }

    pub fn zhang(m: usize) -> Self {
        let cfg = ZhangConfig::new(m);
        Self {
            protocol: ProtocolKind::ZhangBaseline,
            check_rounds: cfg.check_rounds,
            decoys: cfg.decoys,
            ..Self::proposed(2, m)
        }
    }

    pub fn with_adversary(mut self, adversary: AdversaryStrategy) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_trials(mut self, trials: u64, seed: u64) -> Self {
        self.trials = trials;
        self.seed = seed;
        self
    }

    pub fn proposed_config(&self) -> ProposedConfig {
        ProposedConfig {
            n: self.n,
            m: self.m,
            check_rounds: self.check_rounds,
            decoys: self.decoys,
            variant: self.variant,
            announce_results: self.announce_results,
            state_pool: self.state_pool.clone(),
            decoy_tolerance: self.decoy_tolerance,
        }
    }

    pub fn zhang_config(&self) -> ZhangConfig {
        ZhangConfig {
            m: self.m,
            check_rounds: self.check_rounds,
            decoys: self.decoys,
            announce_results: self.announce_results,
            decoy_tolerance: self.decoy_tolerance,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::invalid("trials", "must be at least 1"));
        }
        match self.protocol {
            ProtocolKind::Proposed => self.proposed_config().validate()?,
            ProtocolKind::ZhangBaseline => {
                if self.n != 2 {
                    return Err(HarnessError::invalid("n", "the baseline compares exactly two participants"));
                }
                if self.m == 0 {
                    return Err(HarnessError::invalid("m", "must be at least 1"));
                }
                if self.state_pool.is_some() {
                    return Err(HarnessError::invalid("state_pool", "not used by the baseline"));
                }
                if matches!(
                    self.adversary,
                    AdversaryStrategy::Tp2Intercept(_)
                        | AdversaryStrategy::ClassicalPositionTamper(_)
                        | AdversaryStrategy::Tp1FakeInitialState(_)
                ) {
                    return Err(HarnessError::invalid(
                        "adversary.kind",
                        format!("`{}` has no counterpart in the baseline", self.adversary.kind()),
                    ));
                }
            }
        }
        self.adversary.validate(self.n)?;
        self.secrets.validate(self.n, self.m)
    }

    /// Closed-form values the metrics of this scenario should reproduce.
    pub fn targets(&self) -> Vec<(&'static str, f64)> {
        let mut t = Vec::new();
        let passive = matches!(self.adversary, AdversaryStrategy::None | AdversaryStrategy::ParticipantInfer(_));
        if passive {
            t.push(("detection", 0.0));
            t.push(("verdict_correctness", 1.0));
            t.push(("result_exactness", 1.0));
        }
        match &self.adversary {
            AdversaryStrategy::EveInterceptResend(p) | AdversaryStrategy::Tp2Intercept(p) => {
                let exposed = (p.links.len() * self.decoys) as u64;
                t.push(("detection_decoy", closed_form("intercept_detection", exposed).expect("known kind")));
                t.push(("guess_accuracy", 0.5));
            }
            AdversaryStrategy::Tp1FakeInitialState(p) => {
                let claimed = GhzSpec::from_index(p.claimed_index, self.n);
                let product_bits = match &p.preparation {
                    FakePreparation::AllZero => Some(BitString::zeros(self.n)),
                    FakePreparation::Product { bits } => Some(bits.clone()),
                    FakePreparation::Spec { .. } => None,
                };
                if let (Ok(spec), Some(bits)) = (claimed, product_bits) {
                    let mask = bits.iter().enumerate().fold(0u32, |acc, (k, b)| acc | (u32::from(b) << k));
                    if spec.z_consistent(mask) {
                        t.push((
                            "detection_state_check",
                            closed_form("fake_state_detection", self.check_rounds as u64).expect("known kind"),
                        ));
                        t.push(("x_check_failure", 0.5));
                        t.push(("z_check_failure", 0.0));
                    }
                }
            }
            AdversaryStrategy::Tp1FakeResult(_) | AdversaryStrategy::Tp2FakeResult(_) => match self.protocol {
                ProtocolKind::Proposed => t.push(("detection_conflict", 1.0)),
                ProtocolKind::ZhangBaseline => t.push(("detection", 0.0)),
            },
            AdversaryStrategy::ParticipantInfer(p) => {
                let perfect = p.knows_initial_state || p.attacker == p.victim;
                t.push(("guess_accuracy", if perfect { 1.0 } else { 0.5 }));
            }
            AdversaryStrategy::ClassicalPositionTamper(p) => match self.variant {
                Variant::Tp2Relay => {
                    t.push(("detection", 0.0));
                    t.push(("verdict_correctness", 1.0));
                }
                Variant::ClassicalBroadcast if self.style_matched_pool() => {
                    let l = p.count.unwrap_or(self.check_rounds).min(self.check_rounds) as u64;
                    let target = closed_form("tamper_detection", l).expect("known kind");
                    t.push(("detection_state_check", target));
                    t.push(("detection_given_distinct_specs", target));
                    t.push(("tampered_check_failure", 0.5));
                }
                Variant::ClassicalBroadcast => {}
            },
            AdversaryStrategy::None => {}
        }
        t
    }

    /// Every pool pair has the same Z pattern on participants 2..n up to
    /// complement, which makes a swapped check fail with probability ½ in
    /// either basis.
    fn style_matched_pool(&self) -> bool {
        let Some(pool) = &self.state_pool else { return false };
        let specs: Vec<GhzSpec> = pool.iter().filter_map(|&i| GhzSpec::from_index(i, self.n).ok()).collect();
        specs.iter().all(|a| specs.iter().all(|b| a.agrees_except(b, 0)))
    }
}

/// Everything produced by one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRun {
    pub secrets: Vec<BitString>,
    pub transcript: ProtocolTranscript,
    pub attack: AttackOutcome,
}

/// Random stream of trial `trial` under root seed `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs trial `trial` of `s` without validating the scenario first.
pub fn run_trial(s: &Scenario, trial: u64) -> Result<TrialRun, HarnessError> {
    let mut rng = trial_rng(s.seed, trial);
    let secrets = s.secrets.draw(s.n, s.m, &mut rng);
    let mut adversary = s.adversary.build(s.n)?;
    let rng: &mut dyn RngCore = &mut rng;
    let transcript = match s.protocol {
        ProtocolKind::Proposed => run_proposed(&s.proposed_config(), &secrets, adversary.as_mut(), rng)?,
        ProtocolKind::ZhangBaseline => run_zhang_baseline(&s.zhang_config(), &secrets, adversary.as_mut(), rng)?,
    };
    let attack = assess(&transcript, adversary.as_ref(), &secrets);
    Ok(TrialRun { secrets, transcript, attack })
}

/// Runs every trial of `s` on at most `jobs` threads.
pub fn run_scenario(s: &Scenario, jobs: usize) -> Result<TrialStats, HarnessError> {
    s.validate()?;
    let tally = with_pool(jobs, || {
        (0..s.trials)
            .into_par_iter()
            .map(|t| run_trial(s, t).map(|run| Tally::observe(&run)))
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    })??;
    Ok(TrialStats::new(s.clone(), tally))
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

/// Closed-form detection probabilities.
///
/// * `intercept_detection`: `1 − (3/4)^l` for `l` intercepted decoys.
/// * `tamper_detection`: `1 − (1/2)^l` for `l` swapped check positions.
/// * `fake_state_detection`: `1 − (3/4)^l` for `l` checks of a product
///   state claimed as a GHZ state.
pub fn closed_form(kind: &str, l: u64) -> Result<f64, HarnessError> {
    let base: f64 = match kind {
        "intercept_detection" | "fake_state_detection" => 0.75,
        "tamper_detection" => 0.5,
        other => return Err(HarnessError::UnknownClosedForm(other.to_string())),
    };
    let exp = i32::try_from(l).unwrap_or(i32::MAX);
    Ok(1.0 - base.powi(exp))
}

pub const CLOSED_FORMS: &[&str] = &["intercept_detection", "tamper_detection", "fake_state_detection"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },
    #[error("unknown closed form `{0}` (known: intercept_detection, tamper_detection, fake_state_detection)")]
    UnknownClosedForm(String),
    #[error("unknown suite `{0}` (available: paper_tables)")]
    UnknownSuite(String),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        HarnessError::InvalidScenario { field: field.into(), reason: reason.into() }
    }

    /// Offending field for configuration-level errors.
    pub fn field(&self) -> Option<String> {
        match self {
            HarnessError::InvalidScenario { field, .. } => Some(field.clone()),
            HarnessError::Adversary(e) => Some(format!("adversary.params.{}", e.field)),
            HarnessError::Protocol(ProtocolError::InvalidParameter { name, .. }) => Some((*name).to_string()),
            _ => None,
        }
    }

    /// Whether the error stems from the scenario rather than from running it.
    pub fn is_config_error(&self) -> bool {
        self.field().is_some() || matches!(self, HarnessError::UnknownClosedForm(_) | HarnessError::UnknownSuite(_))
    }
}
