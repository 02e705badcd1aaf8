use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CliError;
use crate::pcn::{Amount, FactoryState, FeeSchedule, NodeId, Topology, Transaction};
use crate::solver::{build_ilp, SolverChoice, DEFAULT_STATE_LIMIT};

pub const MAX_BENCH_HUBS: usize = 5;

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub hubs: usize,
    pub delta: Amount,
    pub k_list: Vec<usize>,
    pub seeds: u64,
    /// Defaults to `dp-bounded` with radius `hubs * delta`.
    pub solver: Option<SolverChoice>,
    /// Each row reports the fastest of this many runs.
    pub repeat: usize,
    pub state_limit: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            hubs: 3,
            delta: 5,
            k_list: vec![1000, 2000, 4000],
            seeds: 5,
            solver: None,
            repeat: 1,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub seed: u64,
    pub solver: String,
    pub wall_ms: f64,
    pub states: u64,
    pub pruned: bool,
}

/// Hubs only, balances uniform in `[0, 10 delta]`, `k` payments between two
/// distinct uniform hubs with amounts uniform in `[1, delta]`.
pub fn bench_instance(
    hubs: usize,
    delta: Amount,
    k: usize,
    seed: u64,
) -> (Topology, Vec<Transaction>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ k as u64);
    let ids: Vec<NodeId> = (1..=hubs).map(|i| NodeId::new(format!("h{i}"))).collect();
    let factory = FactoryState::new(
        ids.iter().map(|h| (h.clone(), rng.gen_range(0..=10 * delta), FeeSchedule::default())),
    )
    .expect("distinct hubs");
    let topo = Topology::new(factory, []).expect("no clients");
    let width = k.to_string().len();
    let txns = (0..k)
        .map(|i| {
            let s = rng.gen_range(0..hubs);
            let r = (s + rng.gen_range(1..hubs)) % hubs;
            let amount = rng.gen_range(1..=delta);
            Transaction::new(format!("t{i:0width$}"), ids[s].clone(), ids[r].clone(), amount)
                .expect("distinct endpoints")
        })
        .collect();
    (topo, txns)
}

pub fn cmd_bench(opts: &BenchOptions) -> Result<Vec<BenchRow>, CliError> {
    if !(2..=MAX_BENCH_HUBS).contains(&opts.hubs) {
        return Err(CliError::Invalid(format!("--hubs must be between 2 and {MAX_BENCH_HUBS}")));
    }
    if opts.delta == 0 || opts.repeat == 0 {
        return Err(CliError::Invalid("--delta and --repeat must be positive".into()));
    }
    let solver =
        opts.solver.unwrap_or(SolverChoice::DpBounded { radius: opts.hubs as Amount * opts.delta });
    let mut rows = Vec::new();
    for seed in 0..opts.seeds {
        for &k in &opts.k_list {
            let (topo, txns) = bench_instance(opts.hubs, opts.delta, k, seed);
            let mut best = f64::INFINITY;
            let mut stats = None;
            for _ in 0..opts.repeat {
                let start = Instant::now();
                let inst = build_ilp(&topo, &txns).map_err(CliError::from_solver)?;
                let sel = solver.run(&inst, opts.state_limit).map_err(CliError::from_solver)?;
                best = best.min(start.elapsed().as_secs_f64() * 1e3);
                stats = Some(sel.stats);
            }
            let stats = stats.expect("at least one repetition");
            rows.push(BenchRow {
                k,
                seed,
                solver: solver.to_string(),
                wall_ms: (best * 1e3).round() / 1e3,
                states: stats.states_explored,
                pruned: stats.pruned,
            });
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("k,seed,solver,wall_ms,states,pruned\n");
    for r in rows {
        writeln!(out, "{},{},{},{:.3},{},{}", r.k, r.seed, r.solver, r.wall_ms, r.states, r.pruned)
            .expect("writing to a string");
    }
    out
}
