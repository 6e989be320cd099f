use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::ghz::{Basis, GhzSpec};

use super::transcript::{Announcement, Pair, Verdict};
use super::ProtocolError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundDiagnosis {
    pub ordinal: usize,
    pub position: usize,
    pub basis: Basis,
    /// Joint outcome as ket text, participant 1 leftmost.
    pub outcome: String,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCheckReport {
    pub passed: bool,
    pub rounds: Vec<RoundDiagnosis>,
}

impl StateCheckReport {
    pub fn failed_rounds(&self) -> Vec<usize> {
        self.rounds.iter().filter(|r| !r.consistent).map(|r| r.ordinal).collect()
    }
}

/// Verifies checked registers against the claimed initial states.
///
/// `outcomes[k][i]` is participant `i+1`'s result for round `k`. A Z round
/// passes iff the joint outcome is `q` or `q̄`; an X round passes iff its
/// minus-count parity equals Δ.
pub fn step3_check(
    claimed: &[GhzSpec],
    positions: &[usize],
    bases: &[Basis],
    outcomes: &[Vec<bool>],
) -> Result<StateCheckReport, ProtocolError> {
    if claimed.len() != bases.len() || bases.len() != outcomes.len() || positions.len() != bases.len() {
        return Err(ProtocolError::Contract("one claimed state, position, basis and outcome row per round".into()));
    }
    let mut rounds = Vec::with_capacity(bases.len());
    for (ordinal, (((spec, &position), &basis), row)) in
        claimed.iter().zip(positions).zip(bases).zip(outcomes).enumerate()
    {
        if row.len() != spec.n() {
            return Err(ProtocolError::Contract(format!(
                "round {ordinal}: {} outcomes for a {}-particle state",
                row.len(),
                spec.n()
            )));
        }
        let mask = row.iter().enumerate().fold(0u32, |acc, (k, b)| acc | (u32::from(*b) << k));
        let consistent = match basis {
            Basis::Z => spec.z_consistent(mask),
            Basis::X => spec.x_consistent(mask),
        };
        rounds.push(RoundDiagnosis {
            ordinal,
            position,
            basis,
            outcome: row.iter().map(|b| basis.symbol(*b)).collect(),
            consistent,
        });
    }
    Ok(StateCheckReport { passed: rounds.iter().all(|r| r.consistent), rounds })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossCheck {
    Accepted,
    Conflict,
}

/// Participants' comparison of the two TPs' announcements for one pair.
pub fn cross_check(tp1: &Announcement, tp2: &Announcement) -> Result<CrossCheck, ProtocolError> {
    if tp1.pair != tp2.pair {
        return Err(ProtocolError::Contract(format!(
            "cross-check of different pairs {:?} and {:?}",
            tp1.pair, tp2.pair
        )));
    }
    Ok(if tp1.verdict == tp2.verdict { CrossCheck::Accepted } else { CrossCheck::Conflict })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liar {
    None,
    Tp1,
    Tp2,
    /// Both announcements disagree with the recomputation; outside the
    /// individually-dishonest model, so recorded but not resolved.
    Both,
}

/// `R_ij = T_ij ⊕ C_i ⊕ C_j` over the key registers.
pub fn comparison_result(
    specs: &[GhzSpec],
    key_positions: &[usize],
    pair: Pair,
    c_i: &BitString,
    c_j: &BitString,
) -> BitString {
    let (i, j) = pair;
    key_positions
        .iter()
        .enumerate()
        .map(|(bit, &p)| {
            let t = specs[p].q_bit(i - 1) ^ specs[p].q_bit(j - 1);
            t ^ c_i.get(bit) ^ c_j.get(bit)
        })
        .collect()
}

/// Idealized arbiter: recomputes every pair's verdict from TP1's tamper-proof
/// initial-state commitment and the submitted comparison information, then
/// flags whichever TP announced something else.
///
/// `comparison_info[i]` belongs to participant `i+1`.
pub fn arbiter_identify(
    committed: &[GhzSpec],
    key_positions: &[usize],
    comparison_info: &[BitString],
    tp1: &[Announcement],
    tp2: &[Announcement],
) -> Result<Liar, ProtocolError> {
    let mut tp1_lied = false;
    let mut tp2_lied = false;
    for (a1, a2) in tp1.iter().zip(tp2) {
        if a1.pair != a2.pair {
            return Err(ProtocolError::Contract("announcement lists are not aligned by pair".into()));
        }
        let (i, j) = a1.pair;
        if i == 0 || j > comparison_info.len() {
            return Err(ProtocolError::Contract(format!("pair {:?} out of range", a1.pair)));
        }
        let r = comparison_result(committed, key_positions, a1.pair, &comparison_info[i - 1], &comparison_info[j - 1]);
        let truth = Verdict::from_result(&r);
        tp1_lied |= a1.verdict != truth;
        tp2_lied |= a2.verdict != truth;
    }
    Ok(match (tp1_lied, tp2_lied) {
        (false, false) => Liar::None,
        (true, false) => Liar::Tp1,
        (false, true) => Liar::Tp2,
        (true, true) => Liar::Both,
    })
}
