use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, Tp1Preparation};
use crate::bits::BitString;
use crate::ghz::{Basis, GhzSpec};
use crate::party::PartyId;
use crate::photon::{
    announce_decoys, generate_decoys, interleave, measure_announced, public_discussion, Link, PhotonSlot,
    QuantumChannel, RegisterStore,
};

use super::check::{comparison_result, step3_check};
use super::proposed::forge_result;
use super::transcript::{
    AbortCause, Announcement, ChannelKind, EventBody, PairVerdict, ProtocolKind, ProtocolTranscript, Recorder,
    RunOutcome, Verdict,
};
use super::{check_secrets, key_positions, ProtocolError};

/// `|φ⁺⟩ = (|00⟩+|11⟩)/√2` in the two-particle family.
pub const PHI_PLUS_INDEX: u64 = 1;
/// `|ψ⁻⟩ = (|01⟩−|10⟩)/√2` in the two-particle family.
pub const PSI_MINUS_INDEX: u64 = 4;

/// Parameters of the single-TP two-party baseline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZhangConfig {
    pub m: usize,
    /// EPR pairs spent on the state check, on top of the `m` key pairs.
    pub check_rounds: usize,
    /// Decoys per participant sequence.
    pub decoys: usize,
    pub announce_results: bool,
    pub decoy_tolerance: usize,
}

impl ZhangConfig {
    pub fn new(m: usize) -> Self {
        Self { m, check_rounds: m, decoys: m, announce_results: false, decoy_tolerance: 0 }
    }
}

/// Runs the two-party baseline: one TP distributes `|φ⁺⟩`/`|ψ⁻⟩` pairs, the
/// participants check them together over a direct authenticated channel,
/// send `C = C_A ⊕ C_B` and the TP announces from `R = C_T ⊕ C`. Nobody can
/// cross-check the announcement.
pub fn run_zhang_baseline(
    cfg: &ZhangConfig,
    secrets: &[BitString],
    adversary: &mut dyn Adversary,
    rng: &mut dyn RngCore,
) -> Result<ProtocolTranscript, ProtocolError> {
    if cfg.m == 0 {
        return Err(ProtocolError::InvalidParameter { name: "m", reason: "must be at least 1".into() });
    }
    check_secrets(secrets, 2, cfg.m)?;
    let m = cfg.m;
    let total = m + cfg.check_rounds;
    let mut log = Recorder::default();
    let finish = |log: Recorder, outcome| Ok(log.finish(ProtocolKind::ZhangBaseline, 2, m, outcome));

    log.push(0, PartyId::Arbiter, EventBody::SecretsAssigned { secrets: secrets.to_vec() });

    // Step 1
    let honest = (0..total)
        .map(|_| {
            let index = if rng.gen::<bool>() { PSI_MINUS_INDEX } else { PHI_PLUS_INDEX };
            GhzSpec::from_index(index, 2)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prep = adversary.prepare_states(&honest, rng).unwrap_or_else(|| Tp1Preparation::faithful(&honest));
    let specs = prep.claimed;
    let mut store = RegisterStore::new(prep.registers);
    log.push(1, PartyId::Tp, EventBody::StatesPrepared { states: prep.states });

    // Step 2
    let mut sequences = Vec::with_capacity(2);
    for i in 1..=2 {
        let carriers = (0..total).map(|r| PhotonSlot::Carrier { register: r, particle: i - 1 }).collect();
        let decoys = generate_decoys(cfg.decoys, rng);
        let (mut slots, positions) = interleave(carriers, decoys.clone(), rng);
        let link = Link { from: PartyId::Tp, to: PartyId::Participant(i) };
        let mut channel = QuantumChannel::new(link);
        if let Some(tap) = adversary.tap(link) {
            channel.add_tap(tap);
        }
        let tapped = channel.is_tapped();
        log.push(2, PartyId::Tp, EventBody::Transmission { link, slots: slots.len(), decoys: decoys.len(), tapped });
        channel.transmit(&mut slots, &mut store, rng);
        if tapped {
            log.push(2, adversary.actor(), EventBody::ChannelTapped { link, measured: slots.len() });
        }
        sequences.push((slots, positions, decoys));
    }

    // Step 3
    let mut failed = Vec::new();
    let mut mismatches = 0;
    for (i, (slots, positions, decoys)) in sequences.iter_mut().enumerate() {
        let participant = i + 1;
        let announcements = announce_decoys(positions, decoys);
        log.push(3, PartyId::Tp, EventBody::DecoysAnnounced { participant, announcements: announcements.clone() });
        let results = measure_announced(slots, &announcements, rng)?;
        log.push(
            3,
            PartyId::Participant(participant),
            EventBody::DecoyResults { participant, results: results.iter().copied().collect() },
        );
        let report = public_discussion(&announcements, &results, decoys)?;
        log.push(3, PartyId::Tp, EventBody::DecoyCheck { participant, report });
        if report.mismatches > cfg.decoy_tolerance {
            failed.push(participant);
            mismatches += report.mismatches;
        }
    }
    if !failed.is_empty() {
        let outcome = log.abort(3, PartyId::Tp, AbortCause::DecoyMismatch { participants: failed, mismatches });
        return finish(log, outcome);
    }

    // Step 4: joint check over the participants' direct authenticated channel
    let mut checked = index::sample(rng, total, cfg.check_rounds).into_vec();
    checked.sort_unstable();
    log.push(
        4,
        PartyId::Participant(1),
        EventBody::CheckPositionsAnnounced { positions: checked.clone(), channel: ChannelKind::Authenticated },
    );
    let bases: Vec<Basis> = (0..cfg.check_rounds).map(|_| Basis::random(rng)).collect();
    log.push(
        4,
        PartyId::Participant(2),
        EventBody::CheckBasesAnnounced { bases: bases.clone(), channel: ChannelKind::Authenticated },
    );
    let mut rows = vec![Vec::with_capacity(2); cfg.check_rounds];
    for i in 0..2 {
        let mut bits = BitString::default();
        for (k, (&p, &basis)) in checked.iter().zip(&bases).enumerate() {
            let bit = store.get_mut(p).measure(&[i], basis, rng)?.get(i).expect("measured particle");
            rows[k].push(bit);
            bits.push(bit);
        }
        log.push(4, PartyId::Participant(i + 1), EventBody::CheckOutcomes { participant: i + 1, bits });
    }
    let checked_specs: Vec<GhzSpec> = checked.iter().map(|&p| specs[p]).collect();
    let report = step3_check(&checked_specs, &checked, &bases, &rows)?;
    let passed = report.passed;
    let failed_rounds = report.failed_rounds();
    log.push(4, PartyId::Tp, EventBody::StateCheck { report });
    if !passed {
        let outcome = log.abort(4, PartyId::Tp, AbortCause::StateCheckMismatch { rounds: failed_rounds });
        return finish(log, outcome);
    }

    // Step 5
    let keys_at = key_positions(total, &checked, m);
    let mut infos = Vec::with_capacity(2);
    for i in 0..2 {
        let mut key = BitString::default();
        for &p in &keys_at {
            key.push(store.get_mut(p).measure(&[i], Basis::Z, rng)?.get(i).expect("measured particle"));
        }
        adversary.observe_key(i + 1, &keys_at, &key);
        log.push(
            5,
            PartyId::Participant(i + 1),
            EventBody::KeyMeasured { participant: i + 1, positions: keys_at.clone(), retained: total - cfg.check_rounds, key: key.clone() },
        );
        infos.push(&key ^ &secrets[i]);
    }

    // Step 6
    let combined = &infos[0] ^ &infos[1];
    log.push(6, PartyId::Participant(1), EventBody::CombinedComparisonInfoSent { info: combined.clone() });

    // Step 7: R = C_T ⊕ C, with C_T the XOR of each pair's Z outcomes.
    let zeros = BitString::zeros(m);
    let r = comparison_result(&specs, &keys_at, (1, 2), &combined, &zeros);
    log.push(7, PartyId::Tp, EventBody::ComparisonComputed { pair: (1, 2), result: r.clone() });
    let honest_verdict = Verdict::from_result(&r);
    let verdict = adversary.announce(PartyId::Tp, (1, 2), honest_verdict);
    let result = cfg.announce_results.then(|| forge_result(&r, honest_verdict, verdict));
    log.push(7, PartyId::Tp, EventBody::Announced { announcement: Announcement { source: PartyId::Tp, pair: (1, 2), verdict, result } });
    finish(log, RunOutcome::Completed { verdicts: vec![PairVerdict { pair: (1, 2), verdict }] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::NoAdversary;
    use crate::ghz::SharedRegister;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn honest_baseline_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = ZhangConfig::new(8);
        for (a, b, expect) in [
            ("10110010", "10110010", Verdict::Identical),
            ("10110010", "10110011", Verdict::Different),
        ] {
            let s: Vec<BitString> = vec![a.parse().unwrap(), b.parse().unwrap()];
            for _ in 0..50 {
                let t = run_zhang_baseline(&cfg, &s, &mut NoAdversary, &mut rng).unwrap();
                assert_eq!(t.verdicts()[0].verdict, expect);
            }
        }
    }

    #[test]
    fn psi_minus_is_anticorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let psi = GhzSpec::from_index(PSI_MINUS_INDEX, 2).unwrap();
        assert!(psi.t_xor(0, 1).unwrap());
        for _ in 0..100 {
            let mut reg = SharedRegister::from_spec(&psi);
            let out = reg.measure(&[0, 1], Basis::Z, &mut rng).unwrap();
            assert_ne!(out.get(0), out.get(1));
        }
        let phi = GhzSpec::from_index(PHI_PLUS_INDEX, 2).unwrap();
        assert_eq!(phi.q_bits(), vec![false, false]);
        assert!(!phi.delta());
        assert!(psi.delta());
    }

    #[test]
    fn baseline_needs_two_participants() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s: Vec<BitString> = vec!["1".parse().unwrap(); 3];
        assert!(run_zhang_baseline(&ZhangConfig::new(1), &s, &mut NoAdversary, &mut rng).is_err());
    }
}
