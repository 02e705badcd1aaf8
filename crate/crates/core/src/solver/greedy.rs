use super::{IlpInstance, Selection, SolveStats};

/// Largest amount first (ties by id), keeping each transaction whose
/// addition leaves the running aggregate within `b`. Always feasible, not
/// always optimal.
pub fn solve_greedy(inst: &IlpInstance) -> Selection {
    let mut order: Vec<usize> = (0..inst.num_txns()).collect();
    order.sort_by(|&a, &b| {
        inst.weights()[b]
            .cmp(&inst.weights()[a])
            .then_with(|| inst.txn_ids()[a].cmp(&inst.txn_ids()[b]))
    });
    let mut running = vec![0i64; inst.num_hubs()];
    let mut chosen = vec![false; inst.num_txns()];
    for &j in &order {
        let next: Vec<i64> = running.iter().zip(inst.column(j)).map(|(a, v)| a + v).collect();
        if inst.fits(&next) {
            running = next;
            chosen[j] = true;
        }
    }
    let stats = SolveStats { states_explored: inst.num_txns() as u64, pruned: false };
    Selection::from_chosen(inst, chosen, stats)
}

#[cfg(test)]
mod tests {
    use super::super::solve_bruteforce;
    use super::super::testing::{ids, two_hub};
    use super::*;

    #[test]
    fn largest_first_blocks_the_optimum() {
        // 7 fits, 6 would reach 13, -5 brings it to 2
        let inst = two_hub([10, 10], &[7, 6, -5]);
        let g = solve_greedy(&inst);
        assert_eq!(ids(&g, &inst), ["t1", "t3"]);
        assert_eq!(g.throughput, 12);
        assert_eq!(solve_bruteforce(&inst).unwrap().throughput, 18);
    }

    #[test]
    fn takes_everything_when_it_fits() {
        let inst = two_hub([5, 5], &[4, -3, 2]);
        let g = solve_greedy(&inst);
        assert_eq!(ids(&g, &inst), ["t1", "t2", "t3"]);
        assert_eq!(g.throughput, 9);
    }

    #[test]
    fn misses_a_perfect_netting() {
        let inst = two_hub([0, 0], &[5, -5]);
        assert_eq!(solve_greedy(&inst).throughput, 0);
        assert_eq!(solve_bruteforce(&inst).unwrap().throughput, 10);
    }
}
