//! Layered dynamic program over partial aggregates.
//!
//! A state is the partial sum `A.x` restricted to the first `h - 1` hub rows;
//! the last row is minus their sum. Layer `p` maps every state reachable by
//! the columns at positions `p..k` of the processing order to the best weight
//! achieving it. Intermediate states are not filtered by `b`; only the full
//! aggregate at layer 0 must satisfy `A.x <= b`.
//!
//! Reconstruction walks the layers forward and includes a column whenever some
//! optimal completion allows it, so ties go to columns processed first.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{IlpInstance, Selection, SolveStats, SolverError};
use crate::pcn::Amount;

/// Default cap on the total number of stored states across all layers.
pub const DEFAULT_STATE_LIMIT: u64 = 100_000_000;

/// Layers whose whole box (times the layer count) fits this many cells are
/// stored as flat arrays.
const DENSE_CELLS: u128 = 1 << 23;

const EMPTY: u64 = u64::MAX;

/// Exact solver. Columns are processed in transaction id order, which makes
/// its tie-break coincide with the brute-force oracle.
pub fn solve_dp(inst: &IlpInstance, state_limit: u64) -> Result<Selection, SolverError> {
    run(inst, &inst.id_order(), None, state_limit)
}

/// Same program with every state of max-norm above `radius` discarded.
///
/// Columns are visited in a greedy balancing order (each step takes the
/// column type that keeps the running total of all columns smallest), and
/// states are partial sums along that order. The answer is always feasible;
/// it is optimal whenever nothing was pruned. For `radius >= sum of amounts`
/// no state can be pruned and the exact solver runs instead.
pub fn solve_dp_bounded(
    inst: &IlpInstance,
    radius: Amount,
    state_limit: u64,
) -> Result<Selection, SolverError> {
    let total: Amount = inst.weights().iter().sum();
    if radius >= total {
        return solve_dp(inst, state_limit);
    }
    let mut order = balancing_order(inst);
    // layer p holds sums of columns p..k, so reversing turns them into prefixes
    order.reverse();
    run(inst, &order, Some(radius as i64), state_limit)
}

/// Greedy discrepancy-style ordering: repeatedly append the column type that
/// minimises the max-norm of the running sum. Within a type, ids ascend.
fn balancing_order(inst: &IlpInstance) -> Vec<usize> {
    let mut types: BTreeMap<&[i64], VecDeque<usize>> = BTreeMap::new();
    for col in inst.id_order() {
        types.entry(inst.column(col)).or_default().push_back(col);
    }
    let rank: HashMap<usize, usize> =
        inst.id_order().into_iter().enumerate().map(|(r, c)| (c, r)).collect();
    let mut running = vec![0i64; inst.num_hubs()];
    let mut order = Vec::with_capacity(inst.num_txns());
    while order.len() < inst.num_txns() {
        let (&ty, _) = types
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .min_by_key(|(ty, q)| {
                let norm = running.iter().zip(ty.iter()).map(|(a, b)| (a + b).abs()).max();
                (norm.unwrap_or(0), rank[&q[0]])
            })
            .expect("columns remain");
        let col = types.get_mut(ty).and_then(VecDeque::pop_front).expect("non-empty type");
        for (a, b) in running.iter_mut().zip(ty) {
            *a += b;
        }
        order.push(col);
    }
    order
}

/// Mixed-radix packing of a state box into one integer.
struct Codec {
    lo: Vec<i64>,
    hi: Vec<i64>,
    stride: Vec<u128>,
    size: u128,
}

impl Codec {
    fn new(lo: Vec<i64>, hi: Vec<i64>) -> Option<Self> {
        let mut stride = Vec::with_capacity(lo.len());
        let mut size: u128 = 1;
        for (l, h) in lo.iter().zip(&hi) {
            stride.push(size);
            size = size.checked_mul((h - l + 1) as u128)?;
        }
        Some(Codec { lo, hi, stride, size })
    }

    fn contains(&self, s: &[i64]) -> bool {
        s.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    fn encode(&self, s: &[i64]) -> u128 {
        s.iter().zip(&self.lo).zip(&self.stride).map(|((v, l), st)| (v - l) as u128 * st).sum()
    }

    fn decode(&self, mut key: u128, out: &mut [i64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let span = (self.hi[i] - self.lo[i] + 1) as u128;
            *o = (key % span) as i64 + self.lo[i];
            key /= span;
        }
    }
}

enum Store {
    Dense(Vec<u64>),
    Sparse(HashMap<u128, u64>),
}

struct Layer {
    store: Store,
    count: u64,
}

impl Layer {
    fn new(dense: bool, size: u128) -> Self {
        let store = if dense {
            Store::Dense(vec![EMPTY; size as usize])
        } else {
            Store::Sparse(HashMap::new())
        };
        Layer { store, count: 0 }
    }

    fn get(&self, key: u128) -> Option<u64> {
        match &self.store {
            Store::Dense(cells) => Some(cells[key as usize]).filter(|&v| v != EMPTY),
            Store::Sparse(map) => map.get(&key).copied(),
        }
    }

    fn relax(&mut self, key: u128, value: u64) {
        let slot = match &mut self.store {
            Store::Dense(cells) => &mut cells[key as usize],
            Store::Sparse(map) => map.entry(key).or_insert(EMPTY),
        };
        if *slot == EMPTY {
            self.count += 1;
            *slot = value;
        } else if value > *slot {
            *slot = value;
        }
    }

    fn entries(&self) -> Vec<(u128, u64)> {
        match &self.store {
            Store::Dense(cells) => cells
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != EMPTY)
                .map(|(k, &v)| (k as u128, v))
                .collect(),
            Store::Sparse(map) => map.iter().map(|(&k, &v)| (k, v)).collect(),
        }
    }
}

fn within(state: &[i64], radius: Option<i64>) -> bool {
    let Some(r) = radius else { return true };
    let last: i64 = state.iter().sum();
    last.abs() <= r && state.iter().all(|v| v.abs() <= r)
}

fn run(
    inst: &IlpInstance,
    order: &[usize],
    radius: Option<i64>,
    limit: u64,
) -> Result<Selection, SolverError> {
    let k = order.len();
    let rows = inst.num_hubs().saturating_sub(1);

    let mut lo = vec![0i64; rows];
    let mut hi = vec![0i64; rows];
    for j in 0..k {
        for (i, &v) in inst.column(j)[..rows].iter().enumerate() {
            if v > 0 {
                hi[i] += v;
            } else {
                lo[i] += v;
            }
        }
    }
    if let Some(r) = radius {
        lo.iter_mut().for_each(|l| *l = (*l).max(-r));
        hi.iter_mut().for_each(|h| *h = (*h).min(r));
    }
    let explosion = |estimate| SolverError::StateExplosion { estimate, limit };
    let codec = Codec::new(lo, hi).ok_or_else(|| explosion(u128::MAX))?;

    let estimate = (0..=k).fold(0u128, |acc, p| {
        let subsets = 1u128.checked_shl((k - p) as u32).unwrap_or(u128::MAX);
        acc.saturating_add(codec.size.min(subsets))
    });
    if estimate > u128::from(limit) {
        return Err(explosion(estimate));
    }
    let dense = codec.size.saturating_mul(k as u128 + 1) <= DENSE_CELLS;

    let mut layers: Vec<Layer> = (0..=k).map(|_| Layer::new(false, 0)).collect();
    let mut base = Layer::new(dense, codec.size);
    base.relax(codec.encode(&vec![0; rows]), 0);
    layers[k] = base;

    let mut explored = 1u64;
    let mut pruned = false;
    let mut buf = vec![0i64; rows];
    for p in (0..k).rev() {
        let col = order[p];
        let shift = &inst.column(col)[..rows];
        let w = inst.weights()[col];
        let mut cur = Layer::new(dense, codec.size);
        for (key, v) in layers[p + 1].entries() {
            cur.relax(key, v);
            codec.decode(key, &mut buf);
            buf.iter_mut().zip(shift).for_each(|(s, a)| *s += a);
            if within(&buf, radius) && codec.contains(&buf) {
                cur.relax(codec.encode(&buf), v + w);
            } else {
                pruned = true;
            }
        }
        explored += cur.count;
        if explored > limit {
            return Err(explosion(u128::from(explored)));
        }
        layers[p] = cur;
    }

    // full aggregate: the first rows, then minus their sum for the last hub
    let fits = |state: &[i64]| {
        if inst.num_hubs() == 0 {
            return true;
        }
        let mut full = state.to_vec();
        full.push(-state.iter().sum::<i64>());
        inst.fits(&full)
    };
    let finals: Vec<(u128, u64)> = layers[0]
        .entries()
        .into_iter()
        .filter(|&(key, _)| {
            codec.decode(key, &mut buf);
            fits(&buf)
        })
        .collect();
    let best = finals.iter().map(|&(_, v)| v).max().ok_or_else(|| {
        SolverError::Abort("the empty selection did not survive the program".into())
    })?;
    let mut targets: Vec<u128> =
        finals.into_iter().filter(|&(_, v)| v == best).map(|(key, _)| key).collect();

    let mut chosen = vec![false; inst.num_txns()];
    for p in 0..k {
        let col = order[p];
        let shift = &inst.column(col)[..rows];
        let w = inst.weights()[col];
        let mut include = Vec::new();
        for &t in &targets {
            let need = layers[p].get(t).expect("target lies in its layer");
            let Some(rest) = need.checked_sub(w) else { continue };
            codec.decode(t, &mut buf);
            buf.iter_mut().zip(shift).for_each(|(s, a)| *s -= a);
            if !codec.contains(&buf) {
                continue;
            }
            let prev = codec.encode(&buf);
            if layers[p + 1].get(prev) == Some(rest) {
                include.push(prev);
            }
        }
        if include.is_empty() {
            targets.retain(|&t| layers[p + 1].get(t) == layers[p].get(t));
        } else {
            chosen[col] = true;
            targets = include;
        }
        targets.sort_unstable();
        targets.dedup();
    }

    let selection =
        Selection::from_chosen(inst, chosen, SolveStats { states_explored: explored, pruned });
    debug_assert_eq!(selection.throughput, best);
    Ok(selection)
}

#[cfg(test)]
mod tests {
    use super::super::testing::{ids, two_hub};
    use super::super::{solve_bruteforce, solve_greedy};
    use super::*;

    #[test]
    fn matches_brute_force_on_three_transactions() {
        let inst = two_hub([10, 10], &[7, 6, -5]);
        let dp = solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(dp.throughput, 18);
        assert_eq!(dp.chosen, solve_bruteforce(&inst).unwrap().chosen);
    }

    #[test]
    fn empty_program() {
        let inst = two_hub([1, 1], &[]);
        let sel = solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap();
        assert!(sel.chosen.is_empty());
        assert_eq!(sel.throughput, 0);
    }

    #[test]
    fn tie_break_matches_brute_force() {
        let inst = two_hub([5, 5], &[5, 5, -3, 3]);
        let dp = solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap();
        let bf = solve_bruteforce(&inst).unwrap();
        assert_eq!(dp.chosen, bf.chosen);
        assert_eq!(dp.throughput, bf.throughput);
    }

    #[test]
    fn bounded_with_full_radius_is_exact() {
        let inst = two_hub([10, 10], &[7, 6, -5]);
        let full = solve_dp_bounded(&inst, 18, DEFAULT_STATE_LIMIT).unwrap();
        let exact = solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(full, exact);
        assert!(!full.stats.pruned);
    }

    #[test]
    fn bounded_radius_zero_keeps_only_zero_columns() {
        let inst = IlpInstance::new(
            vec![vec![4, -4], vec![0, 0], vec![-4, 4], vec![0, 0]],
            vec![9, 9],
            vec![4, 2, 4, 0],
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
        )
        .unwrap();
        let sel = solve_dp_bounded(&inst, 0, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(ids(&sel, &inst), ["b", "d"]);
        assert!(sel.stats.pruned);
    }

    #[test]
    fn bounded_radius_eight_still_optimal() {
        // order [-5, 6, 7] keeps the partial sums at -5, 1, 8
        let inst = two_hub([10, 10], &[7, 6, -5]);
        let sel = solve_dp_bounded(&inst, 8, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(sel.throughput, 18);
        assert!(inst.is_feasible(&sel.chosen));
    }

    #[test]
    fn balancing_order_interleaves_signs() {
        let inst = two_hub([10, 10], &[7, 6, -5]);
        assert_eq!(balancing_order(&inst), vec![2, 1, 0]);
    }

    #[test]
    fn greedy_is_dominated_here() {
        let inst = two_hub([0, 0], &[5, -5]);
        assert_eq!(solve_greedy(&inst).throughput, 0);
        assert_eq!(solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap().throughput, 10);
    }

    #[test]
    fn state_limit_trips() {
        let inst = two_hub([10, 10], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert!(matches!(solve_dp(&inst, 10), Err(SolverError::StateExplosion { .. })));
    }

    #[test]
    fn three_hub_states() {
        // hub rows: t1 0->1 (4), t2 1->2 (4), t3 2->0 (4): a cycle clears fully
        let inst = IlpInstance::new(
            vec![vec![4, -4, 0], vec![0, 4, -4], vec![-4, 0, 4]],
            vec![0, 0, 0],
            vec![4, 4, 4],
            vec!["t1".into(), "t2".into(), "t3".into()],
        )
        .unwrap();
        let sel = solve_dp(&inst, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(sel.throughput, 12);
        assert_eq!(sel.chosen, solve_bruteforce(&inst).unwrap().chosen);
    }

    #[test]
    fn codec_round_trip() {
        let codec = Codec::new(vec![-3, 0, -1], vec![2, 4, 1]).unwrap();
        assert_eq!(codec.size, 6 * 5 * 3);
        let mut out = vec![0; 3];
        for s in [[-3, 0, -1], [2, 4, 1], [0, 2, 0]] {
            codec.decode(codec.encode(&s), &mut out);
            assert_eq!(out, s);
        }
    }
}
