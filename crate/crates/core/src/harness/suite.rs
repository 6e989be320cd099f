//! Built-in experiment batteries.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    AdversaryStrategy, FakePreparation, FakeStateParams, FlipParams, InferParams, TamperParams, TapParams,
};
use crate::ghz::{sample_measurement, Basis, GhzSpec, OracleSampler, SharedRegister};
use crate::protocol::Variant;

use super::{closed_form, run_scenario, trial_rng, with_pool, HarnessError, Metric, Scenario, SecretPolicy, TrialStats};

pub const SUITES: &[&str] = &["paper_tables"];

/// Samples per distribution in the sampler/oracle comparison.
pub const TV_SAMPLES: u64 = 100_000;
pub const TV_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub criterion: u8,
    pub name: String,
    pub metric: String,
    pub estimate: f64,
    pub target: f64,
    /// Allowed absolute deviation from the target.
    pub tolerance: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub trials: u64,
    pub pass: bool,
}

impl SuiteRow {
    fn from_metric(criterion: u8, name: impl Into<String>, m: &Metric, target: f64) -> Self {
        let tolerance = 3.0 * (target * (1.0 - target) / m.trials as f64).sqrt();
        SuiteRow {
            criterion,
            name: name.into(),
            metric: m.name.clone(),
            estimate: m.estimate,
            target,
            tolerance,
            ci_low: Some(m.ci_low),
            ci_high: Some(m.ci_high),
            trials: m.trials,
            pass: (m.estimate - target).abs() <= tolerance + 1e-12,
        }
    }

    /// Rows whose estimate must stay at or below `bound`.
    fn at_most(criterion: u8, name: impl Into<String>, metric: &str, estimate: f64, bound: f64, trials: u64) -> Self {
        SuiteRow {
            criterion,
            name: name.into(),
            metric: metric.into(),
            estimate,
            target: 0.0,
            tolerance: bound,
            ci_low: None,
            ci_high: None,
            trials,
            pass: estimate <= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Pass/fail per criterion number.
    pub fn criteria(&self) -> Vec<(u8, bool)> {
        let mut out: Vec<(u8, bool)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(c, _)| *c == r.criterion) {
                Some((_, pass)) => *pass &= r.pass,
                None => out.push((r.criterion, r.pass)),
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Runtime(e.to_string()))
    }

    pub fn from_csv(suite: &str, seed: u64, text: &str) -> Result<Self, HarnessError> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<SuiteRow>, _>>()
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        Ok(SuiteReport { suite: suite.into(), seed, rows })
    }

    /// Fixed-width pass/fail table.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<3} {:<44} {:<31} {:>10} {:>10} {:>10} {:>23} {:>7}  {}\n",
            "#", "row", "metric", "estimate", "target", "tolerance", "95% CI", "trials", "result"
        );
        for r in &self.rows {
            let ci = match (r.ci_low, r.ci_high) {
                (Some(lo), Some(hi)) => format!("[{lo:.6}, {hi:.6}]"),
                _ => "-".into(),
            };
            out += &format!(
                "{:<3} {:<44} {:<31} {:>10.6} {:>10.6} {:>10.6} {:>23} {:>7}  {}\n",
                r.criterion,
                r.name,
                r.metric,
                r.estimate,
                r.target,
                r.tolerance,
                ci,
                r.trials,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        for (c, pass) in self.criteria() {
            out += &format!("criterion {c}: {}\n", if pass { "PASS" } else { "FAIL" });
        }
        out
    }
}

pub fn run_suite(name: &str, seed: u64, jobs: usize) -> Result<SuiteReport, HarnessError> {
    match name {
        "paper_tables" => paper_tables(seed, jobs),
        other => Err(HarnessError::UnknownSuite(other.to_string())),
    }
}

/// Root seed of the `k`-th experiment in a suite.
fn derive_seed(seed: u64, k: u64) -> u64 {
    trial_rng(seed, (1 << 48) | k).next_u64()
}

struct Battery {
    seed: u64,
    jobs: usize,
    next: u64,
    rows: Vec<SuiteRow>,
}

impl Battery {
    fn run(&mut self, s: Scenario, trials: u64) -> Result<TrialStats, HarnessError> {
        let seed = derive_seed(self.seed, self.next);
        self.next += 1;
        run_scenario(&s.with_trials(trials, seed), self.jobs)
    }

    fn row(&mut self, criterion: u8, name: String, stats: &TrialStats, metric: &str, target: f64) -> Result<(), HarnessError> {
        let m = stats
            .metric(metric)
            .ok_or_else(|| HarnessError::Runtime(format!("{name}: no `{metric}` observations")))?;
        self.rows.push(SuiteRow::from_metric(criterion, name, m, target));
        Ok(())
    }
}

/// Honest correctness: every pair's `R_ij` equals `M_i ⊕ M_j` and every
/// verdict is right.
pub fn honest_scenario(n: usize) -> Scenario {
    Scenario { secrets: SecretPolicy::Mixed, ..Scenario::proposed(n, 16) }
}

/// Intercept-resend on P1's link with `l` decoys per sequence.
pub fn intercept_scenario(l: usize) -> Scenario {
    Scenario { decoys: l, ..Scenario::proposed(3, 4) }
        .with_adversary(AdversaryStrategy::EveInterceptResend(TapParams { links: vec![1], victim: None }))
}

/// TP1 sends `|000⟩` everywhere and claims Ψ1, checked on `c` registers.
pub fn fake_state_scenario(c: usize) -> Scenario {
    Scenario { check_rounds: c, ..Scenario::proposed(3, 16) }.with_adversary(AdversaryStrategy::Tp1FakeInitialState(
        FakeStateParams { preparation: FakePreparation::AllZero, claimed_index: 1, victim: 1 },
    ))
}

/// Ψ1-vs-Ψ7 registers (`|000⟩+|111⟩`, `|011⟩+|100⟩`), `l` of 8 checks swapped.
pub fn tamper_scenario(l: usize, variant: Variant) -> Scenario {
    Scenario { check_rounds: 8, variant, state_pool: Some(vec![1, 7]), ..Scenario::proposed(3, 8) }
        .with_adversary(AdversaryStrategy::ClassicalPositionTamper(TamperParams { count: Some(l) }))
}

pub fn infer_scenario(knows_initial_state: bool) -> Scenario {
    Scenario::proposed(3, 16).with_adversary(AdversaryStrategy::ParticipantInfer(InferParams {
        attacker: 1,
        victim: 2,
        knows_initial_state,
    }))
}

/// TP2 intercepts P2's link with detection switched off, so every run is
/// an undetected run.
pub fn tp2_intercept_scenario() -> Scenario {
    Scenario { decoys: 0, check_rounds: 0, ..Scenario::proposed(3, 16) }
        .with_adversary(AdversaryStrategy::Tp2Intercept(TapParams { links: vec![2], victim: Some(2) }))
}

/// Every (spec, position subset, basis assignment) with `n ≤ 4`.
pub fn tv_cases() -> Vec<(GhzSpec, Vec<usize>, Vec<Basis>)> {
    let mut cases = Vec::new();
    for n in 2..=4usize {
        for index in 1..=(1u64 << n) {
            let spec = GhzSpec::from_index(index, n).expect("index in range");
            for subset in 1u32..(1 << n) {
                let positions: Vec<usize> = (0..n).filter(|p| subset & (1 << p) != 0).collect();
                for assign in 0u32..(1 << positions.len()) {
                    let bases = (0..positions.len())
                        .map(|t| if assign & (1 << t) != 0 { Basis::X } else { Basis::Z })
                        .collect();
                    cases.push((spec, positions.clone(), bases));
                }
            }
        }
    }
    cases
}

/// Draws one joint outcome the way the simulator does: the closed-form
/// sampler for a single basis, sequential collapse on a register otherwise.
/// Pattern bit `t` is `positions[t]`.
pub fn simulator_pattern(spec: &GhzSpec, positions: &[usize], bases: &[Basis], rng: &mut ChaCha8Rng) -> usize {
    let pattern = |get: &dyn Fn(usize) -> bool| {
        positions.iter().enumerate().fold(0usize, |acc, (t, &p)| acc | (usize::from(get(p)) << t))
    };
    if bases.iter().all(|b| *b == bases[0]) {
        let out = sample_measurement(spec, positions, bases[0], rng).expect("valid case");
        pattern(&|p| out.get(p).expect("measured"))
    } else {
        let mut reg = SharedRegister::from_spec(spec);
        let bits: Vec<bool> = positions
            .iter()
            .zip(bases)
            .map(|(&p, &b)| reg.measure(&[p], b, rng).expect("fresh particle").get(p).expect("measured"))
            .collect();
        bits.iter().enumerate().fold(0usize, |acc, (t, &b)| acc | (usize::from(b) << t))
    }
}

/// Total variation distance between two histograms of equal mass.
pub fn tv_distance(a: &[u64], b: &[u64], samples: u64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / (2.0 * samples as f64)
}

/// Largest sampler/oracle distance over [`tv_cases`], `samples` draws each.
pub fn max_tv_distance(seed: u64, samples: u64, jobs: usize) -> Result<(f64, usize), HarnessError> {
    let cases = tv_cases();
    let distances: Vec<f64> = with_pool(jobs, || {
        cases
            .par_iter()
            .enumerate()
            .map(|(k, (spec, positions, bases))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let oracle = OracleSampler::new(spec, positions, bases).expect("n ≤ 4");
                let mut sim = vec![0u64; 1 << positions.len()];
                let mut ora = vec![0u64; 1 << positions.len()];
                for _ in 0..samples {
                    sim[simulator_pattern(spec, positions, bases, &mut rng)] += 1;
                    ora[oracle.sample_pattern(&mut rng)] += 1;
                }
                tv_distance(&sim, &ora, samples)
            })
            .collect()
    })?;
    Ok((distances.iter().copied().fold(0.0, f64::max), cases.len()))
}

fn expansion_failures() -> u64 {
    // Sign strings with + before −, particle 1 leftmost.
    let expected: [(u64, usize, &[(&str, i8)]); 3] = [
        (1, 3, &[("+++", 1), ("+--", 1), ("-+-", 1), ("--+", 1)]),
        (5, 3, &[("+++", 1), ("+--", -1), ("-+-", 1), ("--+", -1)]),
        (
            7,
            4,
            &[
                ("++++", 1),
                ("++--", 1),
                ("+-+-", -1),
                ("+--+", -1),
                ("-++-", -1),
                ("-+-+", -1),
                ("--++", 1),
                ("----", 1),
            ],
        ),
    ];
    let mut failures = 0;
    for (index, n, terms) in expected {
        let spec = GhzSpec::from_index(index, n).expect("index in range");
        let got: Vec<(String, i8)> = spec.x_expansion().iter().map(|t| (t.xstring(), t.sign())).collect();
        let want: Vec<(String, i8)> = terms.iter().map(|(s, g)| (s.to_string(), *g)).collect();
        failures += u64::from(got != want);
    }
    for n in 2..=8usize {
        for index in 1..=(1u64 << n) {
            let spec = GhzSpec::from_index(index, n).expect("index in range");
            for term in spec.x_expansion() {
                failures += u64::from((term.minus_count() % 2 == 1) != spec.delta());
                let delta = (0..n).filter(|p| term.minus_mask() & (1 << p) != 0).fold(false, |d, p| d ^ spec.q_bit(p));
                failures += u64::from((term.sign() == -1) != delta);
            }
            failures += u64::from(spec.x_expansion().len() != 1 << (n - 1));
        }
    }
    failures
}

fn round_trip_failures() -> (u64, u64) {
    let mut checked = 0;
    let mut failures = 0;
    for n in 2..=10usize {
        for index in 1..=(1u64 << n) {
            checked += 1;
            let spec = GhzSpec::from_index(index, n).expect("index in range");
            let rebuilt = GhzSpec::new(&spec.q_bits(), spec.delta()).expect("valid q");
            failures += u64::from(spec.index() != index || rebuilt != spec || spec.q_bit(0));
        }
        failures += u64::from(GhzSpec::from_index(0, n).is_ok() || GhzSpec::from_index((1 << n) + 1, n).is_ok());
    }
    (failures, checked)
}

fn t_xor_failures(seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut samples = 0;
    for n in 2..=5usize {
        for index in 1..=(1u64 << n) {
            let spec = GhzSpec::from_index(index, n).expect("index in range");
            let all: Vec<usize> = (0..n).collect();
            for _ in 0..10_000 / (1u64 << n) + 1 {
                samples += 1;
                let mut reg = SharedRegister::from_spec(&spec);
                let out = reg.measure(&all, Basis::Z, &mut rng).expect("fresh register");
                for i in 0..n {
                    for j in 0..n {
                        let seen = out.get(i).expect("measured") ^ out.get(j).expect("measured");
                        failures += u64::from(seen != spec.t_xor(i, j).expect("in range"));
                    }
                }
            }
        }
    }
    (failures, samples)
}

/// The acceptance battery: one or more rows per criterion.
pub fn paper_tables(seed: u64, jobs: usize) -> Result<SuiteReport, HarnessError> {
    let mut b = Battery { seed, jobs, next: 0, rows: Vec::new() };

    for n in 2..=5 {
        let stats = b.run(honest_scenario(n), 1000)?;
        b.row(1, format!("honest n={n} m=16 results"), &stats, "result_exactness", 1.0)?;
        b.row(1, format!("honest n={n} m=16 verdicts"), &stats, "verdict_correctness", 1.0)?;
    }

    for l in [1, 5, 10, 20] {
        let stats = b.run(intercept_scenario(l), 10_000)?;
        let target = closed_form("intercept_detection", l as u64)?;
        b.row(2, format!("intercept-resend one link l={l}"), &stats, "detection_decoy", target)?;
    }

    for (name, strategy) in [
        ("tp1 flips", AdversaryStrategy::Tp1FakeResult(FlipParams::default())),
        ("tp2 flips", AdversaryStrategy::Tp2FakeResult(FlipParams::default())),
    ] {
        let stats = b.run(Scenario::proposed(3, 8).with_adversary(strategy), 1000)?;
        b.row(3, format!("proposed {name}"), &stats, "detection_conflict", 1.0)?;
    }
    let stats = b.run(Scenario::zhang(8).with_adversary(AdversaryStrategy::Tp1FakeResult(FlipParams::default())), 1000)?;
    b.row(3, "baseline tp flips".into(), &stats, "detection", 0.0)?;

    for c in [4, 8, 16] {
        let stats = b.run(fake_state_scenario(c), 10_000)?;
        b.row(4, format!("fake |000> claimed Psi1 c={c}"), &stats, "detection_state_check", closed_form("fake_state_detection", c as u64)?)?;
        b.row(4, format!("fake |000> claimed Psi1 c={c} per X check"), &stats, "x_check_failure", 0.5)?;
    }

    for l in [1, 4, 8] {
        let stats = b.run(tamper_scenario(l, Variant::ClassicalBroadcast), 10_000)?;
        let target = closed_form("tamper_detection", l as u64)?;
        b.row(5, format!("position tamper l={l}"), &stats, "detection_state_check", target)?;
        b.row(5, format!("position tamper l={l} distinct specs"), &stats, "detection_given_distinct_specs", target)?;
    }
    let stats = b.run(tamper_scenario(8, Variant::Tp2Relay), 1000)?;
    b.row(5, "position tamper under tp2 relay".into(), &stats, "completion", 1.0)?;

    let stats = b.run(infer_scenario(false), 625)?;
    b.row(6, "participant infers without initial state".into(), &stats, "guess_accuracy", 0.5)?;
    let stats = b.run(infer_scenario(true), 625)?;
    b.row(6, "participant infers with initial state".into(), &stats, "guess_accuracy", 1.0)?;
    let stats = b.run(tp2_intercept_scenario(), 625)?;
    b.row(6, "tp2 intercepts, undetected runs".into(), &stats, "guess_accuracy", 0.5)?;

    let tv_seed = derive_seed(seed, b.next);
    b.next += 1;
    let (tv, cases) = max_tv_distance(tv_seed, TV_SAMPLES, jobs)?;
    b.rows.push(SuiteRow::at_most(7, format!("sampler vs oracle, {cases} cases"), "max_tv_distance", tv, TV_THRESHOLD, TV_SAMPLES));

    let (failures, checked) = round_trip_failures();
    b.rows.push(SuiteRow::at_most(8, "index round trip n<=10", "failures", failures as f64, 0.0, checked));
    b.rows.push(SuiteRow::at_most(8, "x expansion parity and signs", "failures", expansion_failures() as f64, 0.0, 3));
    let (failures, samples) = t_xor_failures(derive_seed(seed, b.next));
    b.next += 1;
    b.rows.push(SuiteRow::at_most(8, "t_xor vs sampled Z outcomes", "failures", failures as f64, 0.0, samples));

    let probe = intercept_scenario(5).with_trials(2000, derive_seed(seed, b.next));
    let serial = run_scenario(&probe, 1)?;
    let parallel = run_scenario(&probe, jobs.max(2))?;
    let differs = serial.to_json().map_err(|e| HarnessError::Runtime(e.to_string()))?
        != parallel.to_json().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    b.rows.push(SuiteRow::at_most(9, "jobs=1 vs parallel stats", "mismatches", f64::from(u8::from(differs)), 0.0, 2000));

    Ok(SuiteReport { suite: "paper_tables".into(), seed, rows: b.rows })
}
