use rand::seq::index;
use rand::{Rng, RngCore};

use crate::adversary::{Adversary, Tp1Preparation};
use crate::bits::BitString;
use crate::ghz::{Basis, GhzSpec};
use crate::party::PartyId;
use crate::photon::{
    announce_decoys, generate_decoys, interleave, measure_announced, public_discussion, Link, PhotonSlot,
    QuantumChannel, RegisterStore,
};

use super::check::{arbiter_identify, comparison_result, cross_check, step3_check, CrossCheck};
use super::transcript::{
    AbortCause, Announcement, ChannelKind, EventBody, PairVerdict, ProtocolKind, ProtocolTranscript, Recorder,
    RunOutcome, Verdict,
};
use super::{all_pairs, check_secrets, key_positions, ProposedConfig, ProtocolError, Variant};

fn draw_spec(cfg: &ProposedConfig, rng: &mut dyn RngCore) -> Result<GhzSpec, ProtocolError> {
    Ok(match &cfg.state_pool {
        Some(pool) => GhzSpec::from_index(pool[rng.gen_range(0..pool.len())], cfg.n)?,
        None => GhzSpec::random(cfg.n, rng)?,
    })
}

/// Runs the seven-step protocol once.
///
/// 1. TP1 prepares `2m` registers.
/// 2. Particle sequences go out with decoys; each link is checked by public
///    discussion; TP1 tells TP2 the initial states.
/// 3. P1 picks `c` registers, P2 a basis for each, everyone measures and TP2
///    verifies the joint outcomes against the initial states.
/// 4. Each participant Z-measures its first `m` remaining particles into `K_i`
///    and forms `C_i = K_i ⊕ M_i`.
/// 5. `C_i` goes to both TPs.
/// 6. Each TP announces a verdict from `R_ij = T_ij ⊕ C_i ⊕ C_j` for every pair.
/// 7. Participants compare the two TPs' verdicts and abort on any conflict.
pub fn run_proposed(
    cfg: &ProposedConfig,
    secrets: &[BitString],
    adversary: &mut dyn Adversary,
    rng: &mut dyn RngCore,
) -> Result<ProtocolTranscript, ProtocolError> {
    cfg.validate()?;
    check_secrets(secrets, cfg.n, cfg.m)?;
    let (n, m) = (cfg.n, cfg.m);
    let total = cfg.registers();
    let mut log = Recorder::default();
    let finish = |log: Recorder, outcome| Ok(log.finish(ProtocolKind::Proposed, n, m, outcome));

    log.push(0, PartyId::Arbiter, EventBody::SecretsAssigned { secrets: secrets.to_vec() });

    // Step 1
    let honest = (0..total).map(|_| draw_spec(cfg, rng)).collect::<Result<Vec<_>, _>>()?;
    let prep = match adversary.prepare_states(&honest, rng) {
        Some(p) => p,
        None => Tp1Preparation::faithful(&honest),
    };
    if prep.registers.len() != total || prep.claimed.len() != total {
        return Err(ProtocolError::Contract("TP1 preparation must cover every register".into()));
    }
    let claimed = prep.claimed;
    let mut store = RegisterStore::new(prep.registers);
    log.push(1, PartyId::Tp1, EventBody::StatesPrepared { states: prep.states });

    // Step 2: distribution
    let mut sequences = Vec::with_capacity(n);
    for i in 1..=n {
        let carriers = (0..total).map(|r| PhotonSlot::Carrier { register: r, particle: i - 1 }).collect();
        let decoys = generate_decoys(cfg.decoys, rng);
        let (mut slots, positions) = interleave(carriers, decoys.clone(), rng);
        let link = Link { from: PartyId::Tp1, to: PartyId::Participant(i) };
        let mut channel = QuantumChannel::new(link);
        if let Some(tap) = adversary.tap(link) {
            channel.add_tap(tap);
        }
        let tapped = channel.is_tapped();
        log.push(2, PartyId::Tp1, EventBody::Transmission { link, slots: slots.len(), decoys: decoys.len(), tapped });
        channel.transmit(&mut slots, &mut store, rng);
        if tapped {
            log.push(2, adversary.actor(), EventBody::ChannelTapped { link, measured: slots.len() });
        }
        sequences.push((slots, positions, decoys));
    }

    // Step 2: public discussion
    let mut failed = Vec::new();
    let mut mismatches = 0;
    for (i, (slots, positions, decoys)) in sequences.iter_mut().enumerate() {
        let participant = i + 1;
        let announcements = announce_decoys(positions, decoys);
        log.push(2, PartyId::Tp1, EventBody::DecoysAnnounced { participant, announcements: announcements.clone() });
        let results = measure_announced(slots, &announcements, rng)?;
        log.push(
            2,
            PartyId::Participant(participant),
            EventBody::DecoyResults { participant, results: results.iter().copied().collect() },
        );
        let report = public_discussion(&announcements, &results, decoys)?;
        log.push(2, PartyId::Tp1, EventBody::DecoyCheck { participant, report });
        if report.mismatches > cfg.decoy_tolerance {
            failed.push(participant);
            mismatches += report.mismatches;
        }
    }
    if !failed.is_empty() {
        let outcome = log.abort(2, PartyId::Tp1, AbortCause::DecoyMismatch { participants: failed, mismatches });
        return finish(log, outcome);
    }
    log.push(2, PartyId::Tp1, EventBody::InitialStateMessage { to: PartyId::Tp2, specs: claimed.clone() });
    adversary.learn_initial_states(&claimed);

    // Step 3: state check
    let mut announced = index::sample(rng, total, cfg.check_rounds).into_vec();
    announced.sort_unstable();
    let channel = match cfg.variant {
        Variant::ClassicalBroadcast => ChannelKind::Classical,
        Variant::Tp2Relay => ChannelKind::Authenticated,
    };
    log.push(3, PartyId::Participant(1), EventBody::CheckPositionsAnnounced { positions: announced.clone(), channel });
    let received = match cfg.variant {
        Variant::ClassicalBroadcast => adversary.tamper_positions(&announced, total, rng),
        Variant::Tp2Relay => None,
    };
    if let Some(r) = &received {
        if r.len() != announced.len() || r.iter().any(|p| *p >= total) {
            return Err(ProtocolError::Contract("tampered positions must stay aligned with the announcement".into()));
        }
    }
    let relay = match cfg.variant {
        Variant::ClassicalBroadcast => PartyId::Participant(1),
        Variant::Tp2Relay => PartyId::Tp2,
    };
    let mut views = vec![announced.clone()];
    for participant in 2..=n {
        let (positions, tampered) = match &received {
            Some(r) => (r.clone(), r != &announced),
            None => (announced.clone(), false),
        };
        log.push(3, relay, EventBody::CheckPositionsReceived { participant, positions: positions.clone(), tampered });
        views.push(positions);
    }
    let bases: Vec<Basis> = (0..cfg.check_rounds).map(|_| Basis::random(rng)).collect();
    log.push(3, PartyId::Participant(2), EventBody::CheckBasesAnnounced { bases: bases.clone(), channel });

    let mut rows = vec![Vec::with_capacity(n); cfg.check_rounds];
    for (i, view) in views.iter().enumerate() {
        let mut bits = BitString::default();
        for (k, (&position, &basis)) in view.iter().zip(&bases).enumerate() {
            let out = store.get_mut(position).measure(&[i], basis, rng)?;
            let bit = out.get(i).expect("measured particle");
            rows[k].push(bit);
            bits.push(bit);
        }
        log.push(3, PartyId::Participant(i + 1), EventBody::CheckOutcomes { participant: i + 1, bits });
    }
    let checked_specs: Vec<GhzSpec> = announced.iter().map(|&p| claimed[p]).collect();
    let report = step3_check(&checked_specs, &announced, &bases, &rows)?;
    let passed = report.passed;
    let failed_rounds = report.failed_rounds();
    log.push(3, PartyId::Tp2, EventBody::StateCheck { report });
    if !passed {
        let outcome = log.abort(3, PartyId::Tp2, AbortCause::StateCheckMismatch { rounds: failed_rounds });
        return finish(log, outcome);
    }

    // Step 4
    let retained = total - cfg.check_rounds;
    let mut comparison_info = Vec::with_capacity(n);
    for (i, view) in views.iter().enumerate() {
        let positions = key_positions(total, view, m);
        let mut key = BitString::default();
        for &p in &positions {
            let out = store.get_mut(p).measure(&[i], Basis::Z, rng)?;
            key.push(out.get(i).expect("measured particle"));
        }
        adversary.observe_key(i + 1, &positions, &key);
        log.push(
            4,
            PartyId::Participant(i + 1),
            EventBody::KeyMeasured { participant: i + 1, positions, retained, key: key.clone() },
        );
        comparison_info.push(&key ^ &secrets[i]);
    }

    // Step 5
    for (i, info) in comparison_info.iter().enumerate() {
        log.push(
            5,
            PartyId::Participant(i + 1),
            EventBody::ComparisonInfoSent { participant: i + 1, to: vec![PartyId::Tp1, PartyId::Tp2], info: info.clone() },
        );
    }

    // Step 6: both TPs work from P1's announced positions and the claimed states.
    let tp_keys = key_positions(total, &announced, m);
    let pairs = all_pairs(n);
    let mut announcements = [Vec::new(), Vec::new()];
    for (slot, tp) in [PartyId::Tp1, PartyId::Tp2].into_iter().enumerate() {
        for &pair in &pairs {
            let r = comparison_result(&claimed, &tp_keys, pair, &comparison_info[pair.0 - 1], &comparison_info[pair.1 - 1]);
            log.push(6, tp, EventBody::ComparisonComputed { pair, result: r.clone() });
            let honest = Verdict::from_result(&r);
            let verdict = adversary.announce(tp, pair, honest);
            let result = cfg.announce_results.then(|| forge_result(&r, honest, verdict));
            let a = Announcement { source: tp, pair, verdict, result };
            log.push(6, tp, EventBody::Announced { announcement: a.clone() });
            announcements[slot].push(a);
        }
    }

    // Step 7
    let mut conflicts = Vec::new();
    for (a1, a2) in announcements[0].iter().zip(&announcements[1]) {
        let result = cross_check(a1, a2)?;
        log.push(7, PartyId::Participant(a1.pair.0), EventBody::CrossChecked { pair: a1.pair, result });
        if result == CrossCheck::Conflict {
            conflicts.push(a1.pair);
        }
    }
    if !conflicts.is_empty() {
        let liar = arbiter_identify(&claimed, &tp_keys, &comparison_info, &announcements[0], &announcements[1])?;
        log.push(7, PartyId::Arbiter, EventBody::Arbitration { liar });
        let outcome = log.abort(7, PartyId::Participant(conflicts[0].0), AbortCause::AnnouncementConflict { pairs: conflicts });
        return finish(log, outcome);
    }
    let verdicts = announcements[0].iter().map(|a| PairVerdict { pair: a.pair, verdict: a.verdict }).collect();
    finish(log, RunOutcome::Completed { verdicts })
}

/// Result vector consistent with an announced verdict: the true one when
/// honest, otherwise zeros or the true vector with its first bit flipped.
pub(crate) fn forge_result(r: &BitString, honest: Verdict, announced: Verdict) -> BitString {
    if honest == announced {
        return r.clone();
    }
    match announced {
        Verdict::Identical => BitString::zeros(r.len()),
        Verdict::Different => {
            let mut forged = r.clone();
            forged.flip(0);
            forged
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::NoAdversary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn secrets(strs: &[&str]) -> Vec<BitString> {
        strs.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn honest_run_completes_with_correct_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = ProposedConfig::new(3, 4);
        let s = secrets(&["1010", "1010", "0011"]);
        let t = run_proposed(&cfg, &s, &mut NoAdversary, &mut rng).unwrap();
        assert!(t.is_completed(), "{:?}", t.outcome);
        let v: Vec<_> = t.verdicts().iter().map(|p| (p.pair, p.verdict)).collect();
        assert_eq!(
            v,
            vec![((1, 2), Verdict::Identical), ((1, 3), Verdict::Different), ((2, 3), Verdict::Different)]
        );
        for e in &t.events {
            if let EventBody::ComparisonComputed { pair, result } = &e.body {
                assert_eq!(result, &(&s[pair.0 - 1] ^ &s[pair.1 - 1]));
            }
        }
    }

    #[test]
    fn events_are_step_ordered_and_sequenced() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = run_proposed(&ProposedConfig::new(4, 3), &secrets(&["101", "001", "111", "000"]), &mut NoAdversary, &mut rng)
            .unwrap();
        for (k, w) in t.events.windows(2).enumerate() {
            assert!(w[0].step <= w[1].step);
            assert_eq!(w[0].seq, k);
        }
    }

    #[test]
    fn check_accounting() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut cfg = ProposedConfig::new(3, 5);
        cfg.check_rounds = 2;
        let t = run_proposed(&cfg, &secrets(&["10101", "00000", "11111"]), &mut NoAdversary, &mut rng).unwrap();
        for e in &t.events {
            if let EventBody::KeyMeasured { retained, positions, .. } = &e.body {
                assert_eq!(retained + cfg.check_rounds, 2 * cfg.m);
                assert_eq!(positions.len(), cfg.m);
            }
        }
    }

    #[test]
    fn secrets_shape_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cfg = ProposedConfig::new(3, 4);
        assert!(run_proposed(&cfg, &secrets(&["1010", "1010"]), &mut NoAdversary, &mut rng).is_err());
        assert!(run_proposed(&cfg, &secrets(&["1010", "1010", "101"]), &mut NoAdversary, &mut rng).is_err());
    }

    #[test]
    fn forged_results_match_verdicts() {
        let r: BitString = "0000".parse().unwrap();
        let f = forge_result(&r, Verdict::Identical, Verdict::Different);
        assert_eq!(Verdict::from_result(&f), Verdict::Different);
        let r: BitString = "0100".parse().unwrap();
        let f = forge_result(&r, Verdict::Different, Verdict::Identical);
        assert_eq!(Verdict::from_result(&f), Verdict::Identical);
    }
}
