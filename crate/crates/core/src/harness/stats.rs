use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ghz::{Basis, GhzSpec};
use crate::protocol::{EventBody, Liar, Verdict};

use super::{HarnessError, Scenario, TrialRun};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).clamp(0.0, 1.0).min(p), (center + half).clamp(0.0, 1.0).max(p))
}

/// Raw counters. Merging is a field-wise sum, so any grouping of trials
/// gives the same totals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub completed: u64,
    pub aborted: u64,
    pub detections_by_step: BTreeMap<u8, u64>,
    pub detections_by_cause: BTreeMap<String, u64>,
    /// Pair verdicts in completed runs, and how many matched the secrets.
    pub pairs: u64,
    pub verdicts_correct: u64,
    /// TP-side `R_ij` computations, and how many equalled `M_i ⊕ M_j`.
    pub results_computed: u64,
    pub results_exact: u64,
    pub arbitrations: BTreeMap<String, u64>,
    pub x_checks: u64,
    pub x_check_failures: u64,
    pub z_checks: u64,
    pub z_check_failures: u64,
    pub tampered_checks: u64,
    pub tampered_check_failures: u64,
    /// Runs whose every tampered check swapped in a register with a different spec.
    pub distinct_spec_runs: u64,
    pub distinct_spec_detections: u64,
    pub guessed_bits: u64,
    pub correct_bits: u64,
}

fn bump<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, by: u64) {
    *map.entry(key).or_default() += by;
}

impl Tally {
    pub fn observe(run: &TrialRun) -> Self {
        let t = &run.transcript;
        let secrets = &run.secrets;
        let mut tally = Tally { trials: 1, ..Default::default() };
        let mut state_check_abort = false;
        match t.abort() {
            None => tally.completed = 1,
            Some((step, cause)) => {
                tally.aborted = 1;
                bump(&mut tally.detections_by_step, step, 1);
                bump(&mut tally.detections_by_cause, cause.label().to_string(), 1);
                state_check_abort = cause.label() == "state_check";
            }
        }
        let truth = |(i, j): (usize, usize)| {
            if secrets[i - 1] == secrets[j - 1] {
                Verdict::Identical
            } else {
                Verdict::Different
            }
        };
        for v in t.verdicts() {
            tally.pairs += 1;
            tally.verdicts_correct += u64::from(v.verdict == truth(v.pair));
        }

        let mut claimed: Vec<GhzSpec> = Vec::new();
        let mut announced: Vec<usize> = Vec::new();
        let mut received: Option<Vec<usize>> = None;
        let mut report = None;
        for e in &t.events {
            match &e.body {
                EventBody::ComparisonComputed { pair, result } => {
                    tally.results_computed += 1;
                    let expected = &secrets[pair.0 - 1] ^ &secrets[pair.1 - 1];
                    tally.results_exact += u64::from(*result == expected);
                }
                EventBody::Arbitration { liar } => {
                    let label = match liar {
                        Liar::None => "none",
                        Liar::Tp1 => "tp1",
                        Liar::Tp2 => "tp2",
                        Liar::Both => "both",
                    };
                    bump(&mut tally.arbitrations, label.to_string(), 1);
                }
                EventBody::InitialStateMessage { specs, .. } => claimed = specs.clone(),
                EventBody::CheckPositionsAnnounced { positions, .. } => announced = positions.clone(),
                EventBody::CheckPositionsReceived { positions, tampered: true, .. } if received.is_none() => {
                    received = Some(positions.clone());
                }
                EventBody::StateCheck { report: r } => report = Some(r),
                _ => {}
            }
        }

        if let Some(report) = report {
            for r in &report.rounds {
                let (checks, failures) = match r.basis {
                    Basis::X => (&mut tally.x_checks, &mut tally.x_check_failures),
                    Basis::Z => (&mut tally.z_checks, &mut tally.z_check_failures),
                };
                *checks += 1;
                *failures += u64::from(!r.consistent);
            }
            if let Some(received) = received {
                let mut all_distinct = true;
                let mut any = false;
                for (k, r) in report.rounds.iter().enumerate() {
                    let (a, b) = (announced[k], received[k]);
                    if a == b {
                        continue;
                    }
                    any = true;
                    tally.tampered_checks += 1;
                    tally.tampered_check_failures += u64::from(!r.consistent);
                    all_distinct &= claimed.get(a) != claimed.get(b);
                }
                if any && all_distinct {
                    tally.distinct_spec_runs = 1;
                    tally.distinct_spec_detections = u64::from(state_check_abort);
                }
            }
        }

        tally.guessed_bits = run.attack.guessed_bits;
        tally.correct_bits = run.attack.correct_bits;
        tally
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.completed += other.completed;
        self.aborted += other.aborted;
        for (k, v) in other.detections_by_step {
            bump(&mut self.detections_by_step, k, v);
        }
        for (k, v) in other.detections_by_cause {
            bump(&mut self.detections_by_cause, k, v);
        }
        for (k, v) in other.arbitrations {
            bump(&mut self.arbitrations, k, v);
        }
        self.pairs += other.pairs;
        self.verdicts_correct += other.verdicts_correct;
        self.results_computed += other.results_computed;
        self.results_exact += other.results_exact;
        self.x_checks += other.x_checks;
        self.x_check_failures += other.x_check_failures;
        self.z_checks += other.z_checks;
        self.z_check_failures += other.z_check_failures;
        self.tampered_checks += other.tampered_checks;
        self.tampered_check_failures += other.tampered_check_failures;
        self.distinct_spec_runs += other.distinct_spec_runs;
        self.distinct_spec_detections += other.distinct_spec_detections;
        self.guessed_bits += other.guessed_bits;
        self.correct_bits += other.correct_bits;
        self
    }

    fn cause(&self, label: &str) -> u64 {
        self.detections_by_cause.get(label).copied().unwrap_or(0)
    }
}

/// One estimated proportion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: Option<f64>,
    /// Denominator of the estimate.
    pub trials: u64,
}

impl Metric {
    pub fn from_counts(name: &str, k: u64, n: u64, target: Option<f64>) -> Self {
        let (ci_low, ci_high) = wilson(k, n);
        Metric { name: name.to_string(), estimate: k as f64 / n as f64, ci_low, ci_high, target, trials: n }
    }

    /// Three binomial standard deviations at the target.
    pub fn tolerance(&self) -> Option<f64> {
        self.target.map(|t| 3.0 * (t * (1.0 - t) / self.trials as f64).sqrt())
    }

    pub fn agrees(&self) -> Option<bool> {
        let (t, tol) = (self.target?, self.tolerance()?);
        Some((self.estimate - t).abs() <= tol + 1e-12)
    }
}

/// Aggregated result of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub scenario: Scenario,
    pub counts: Tally,
    pub metrics: Vec<Metric>,
}

impl TrialStats {
    pub fn new(scenario: Scenario, counts: Tally) -> Self {
        let targets = scenario.targets();
        let target = |name: &str| targets.iter().find(|(n, _)| *n == name).map(|(_, t)| *t);
        let c = &counts;
        let rows: [(&str, u64, u64); 13] = [
            ("completion", c.completed, c.trials),
            ("detection", c.aborted, c.trials),
            ("detection_decoy", c.cause("decoy_check"), c.trials),
            ("detection_state_check", c.cause("state_check"), c.trials),
            ("detection_conflict", c.cause("announcement_conflict"), c.trials),
            ("verdict_correctness", c.verdicts_correct, c.pairs),
            ("result_exactness", c.results_exact, c.results_computed),
            ("guess_accuracy", c.correct_bits, c.guessed_bits),
            ("x_check_failure", c.x_check_failures, c.x_checks),
            ("z_check_failure", c.z_check_failures, c.z_checks),
            ("tampered_check_failure", c.tampered_check_failures, c.tampered_checks),
            ("detection_given_distinct_specs", c.distinct_spec_detections, c.distinct_spec_runs),
            ("arbiter_named_a_liar", c.arbitrations.iter().filter(|(k, _)| *k != "none").map(|(_, v)| v).sum(), c.arbitrations.values().sum()),
        ];
        let metrics = rows
            .iter()
            .filter(|(_, _, n)| *n > 0)
            .map(|&(name, k, n)| Metric::from_counts(name, k, n, target(name)))
            .collect();
        TrialStats { scenario, counts, metrics }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// One row per metric: `name,estimate,ci_low,ci_high,target,trials`.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        metrics_to_csv(&self.metrics)
    }
}

pub fn metrics_to_csv(metrics: &[Metric]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(m).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Runtime(e.to_string()))
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<Metric>, HarnessError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<Metric>, _>>()
        .map_err(|e| HarnessError::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 10), (9437, 10000), (1, 1)] {
            let (lo, hi) = wilson(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}: {lo} {p} {hi}");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
        let (lo, hi) = wilson(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn merge_is_order_free() {
        let mut a = Tally { trials: 2, completed: 1, aborted: 1, ..Default::default() };
        a.detections_by_step.insert(2, 1);
        let mut b = Tally { trials: 3, completed: 3, guessed_bits: 4, correct_bits: 2, ..Default::default() };
        b.arbitrations.insert("tp1".into(), 1);
        let c = Tally { trials: 1, aborted: 1, ..Default::default() };
        let left = a.clone().merge(b.clone()).merge(c.clone());
        let right = c.merge(b).merge(a);
        assert_eq!(left, right);
        assert_eq!(left.completed + left.aborted, left.trials);
    }

    #[test]
    fn tolerance_is_three_sigma() {
        let m = Metric::from_counts("x", 2600, 10_000, Some(0.25));
        assert!((m.tolerance().unwrap() - 3.0 * (0.25f64 * 0.75 / 10_000.0).sqrt()).abs() < 1e-15);
        assert_eq!(m.agrees(), Some(true));
        let exact = Metric::from_counts("y", 999, 1000, Some(1.0));
        assert_eq!(exact.agrees(), Some(false));
    }

    #[test]
    fn csv_round_trip() {
        let ms = vec![
            Metric::from_counts("a", 1, 3, Some(0.25)),
            Metric::from_counts("b", 7, 7, None),
        ];
        let text = metrics_to_csv(&ms).unwrap();
        assert!(text.starts_with("name,estimate,ci_low,ci_high,target,trials\n"));
        assert_eq!(metrics_from_csv(&text).unwrap(), ms);
    }
}
