use super::{IlpInstance, Selection, SolveStats, SolverError};
use crate::pcn::Amount;

pub const BRUTE_FORCE_MAX_TXNS: usize = 24;

/// Enumerate every subset in Gray-code order, keeping the best
/// `(throughput, tie key)` pair. The tie key has one bit per transaction,
/// most significant for the smallest id, so a larger key means the smallest
/// differing id is included.
pub fn solve_bruteforce(inst: &IlpInstance) -> Result<Selection, SolverError> {
    let k = inst.num_txns();
    if k > BRUTE_FORCE_MAX_TXNS {
        return Err(SolverError::TooLarge { got: k, max: BRUTE_FORCE_MAX_TXNS });
    }
    let mut key_bit = vec![0u32; k];
    for (rank, &col) in inst.id_order().iter().enumerate() {
        key_bit[col] = 1 << (k - 1 - rank);
    }

    let mut agg = vec![0i64; inst.num_hubs()];
    let mut weight: Amount = 0;
    let mut key = 0u32;
    let mut mask = 0u32;
    let mut best: Option<(Amount, u32, u32)> = inst.fits(&agg).then_some((0, 0, 0));

    for step in 1u64..(1u64 << k) {
        let j = step.trailing_zeros() as usize;
        let on = mask & (1 << j) == 0;
        mask ^= 1 << j;
        key ^= key_bit[j];
        let sign = if on { 1 } else { -1 };
        for (a, v) in agg.iter_mut().zip(inst.column(j)) {
            *a += sign * v;
        }
        if on {
            weight += inst.weights()[j];
        } else {
            weight -= inst.weights()[j];
        }
        if inst.fits(&agg) && best.is_none_or(|(w, kk, _)| (weight, key) > (w, kk)) {
            best = Some((weight, key, mask));
        }
    }

    // The empty selection always fits since balances are non-negative.
    let (_, _, mask) = best.expect("empty selection is feasible");
    let chosen = (0..k).map(|j| mask & (1 << j) != 0).collect();
    let stats = SolveStats { states_explored: 1u64 << k, pruned: false };
    Ok(Selection::from_chosen(inst, chosen, stats))
}
