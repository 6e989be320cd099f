use proptest::prelude::*;
use qpc_core::adversary::AdversaryStrategy;
use qpc_core::config::ConfigDocument;
use qpc_core::ghz::{sample_measurement, Basis, GhzSpec};
use qpc_core::harness::{run_trial, Scenario, SecretPolicy, Tally};
use qpc_core::protocol::ProtocolTranscript;
use qpc_core::BitString;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec() -> impl Strategy<Value = GhzSpec> {
    (2usize..=12).prop_flat_map(|n| (1u64..=(1 << n)).prop_map(move |i| GhzSpec::from_index(i, n).unwrap()))
}

fn tally_of(n: usize, m: usize, seed: u64, trial: u64) -> Tally {
    let s = Scenario::proposed(n, m).with_trials(1, seed);
    Tally::observe(&run_trial(&s, trial).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trips(spec in spec()) {
        let back = GhzSpec::from_index(spec.index(), spec.n()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert!(!spec.q_bit(0));
        prop_assert_eq!(GhzSpec::new(&spec.q_bits(), spec.delta()).unwrap(), spec);
    }

    #[test]
    fn x_terms_have_delta_parity(spec in spec()) {
        let terms = spec.x_expansion();
        prop_assert_eq!(terms.len(), 1 << (spec.n() - 1));
        for t in terms {
            prop_assert_eq!(t.minus_count() % 2 == 1, spec.delta());
            let delta = (0..spec.n()).filter(|&p| t.minus_mask() >> p & 1 == 1).fold(false, |acc, p| acc ^ spec.q_bit(p));
            prop_assert_eq!(t.sign(), if delta { -1 } else { 1 });
            prop_assert!(spec.x_consistent(t.minus_mask()));
        }
    }

    #[test]
    fn z_samples_respect_t_xor(spec in spec(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<usize> = (0..spec.n()).collect();
        let out = sample_measurement(&spec, &all, Basis::Z, &mut rng).unwrap();
        prop_assert!(spec.z_consistent(out.mask()));
        for i in 0..spec.n() {
            for j in 0..spec.n() {
                prop_assert_eq!(out.get(i).unwrap() ^ out.get(j).unwrap(), spec.t_xor(i, j).unwrap());
            }
        }
    }

    #[test]
    fn x_samples_have_delta_parity(spec in spec(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<usize> = (0..spec.n()).collect();
        let out = sample_measurement(&spec, &all, Basis::X, &mut rng).unwrap();
        prop_assert_eq!(out.mask().count_ones() % 2 == 1, spec.delta());
    }

    #[test]
    fn bitstring_xor(a in prop::collection::vec(any::<bool>(), 0..64), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = BitString::from(a);
        let y = BitString::random(x.len(), &mut rng);
        let z = &x ^ &y;
        prop_assert_eq!(&(&z ^ &y), &x);
        prop_assert!((&x ^ &x).is_all_zero());
        prop_assert_eq!(x.to_string().parse::<BitString>().unwrap(), x);
    }

    #[test]
    fn tally_merge_commutes(seed in any::<u64>(), n in 2usize..=4) {
        let a = tally_of(n, 4, seed, 0);
        let b = tally_of(n, 4, seed, 1);
        let c = tally_of(n, 4, seed, 2);
        prop_assert_eq!(a.clone().merge(b.clone()), b.clone().merge(a.clone()));
        prop_assert_eq!(a.clone().merge(b.clone()).merge(c.clone()), a.merge(b.merge(c)));
    }

    #[test]
    fn transcript_json_round_trips(seed in any::<u64>(), n in 2usize..=4, attacked in any::<bool>()) {
        let mut s = Scenario::proposed(n, 4).with_trials(1, seed);
        if attacked {
            s = s.with_adversary(serde_json::from_str::<AdversaryStrategy>(
                r#"{"kind":"eve_intercept_resend","params":{"links":[1]}}"#).unwrap());
        }
        let t = run_trial(&s, 0).unwrap().transcript;
        prop_assert_eq!(ProtocolTranscript::from_json(&t.to_json().unwrap()).unwrap(), t);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), n in 2usize..=6, m in 3usize..=16, trials in 1u64..100) {
        let mut s = Scenario::proposed(n, m).with_trials(trials, seed);
        s.secrets = SecretPolicy::ForcedUnequal;
        let doc = ConfigDocument::from_scenario(&s);
        let text = serde_json::to_string(&doc).unwrap();
        prop_assert_eq!(ConfigDocument::parse(&text).unwrap().to_scenario(0).unwrap(), s);
    }
}
