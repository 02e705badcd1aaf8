//! Throughput-maximal selection of transactions whose aggregate fits the
//! factory balances: `max w.x  s.t.  A.x <= b, x in {0,1}^k`.
//!
//! Rows of `A` are hubs, columns are transactions. Client channels never
//! constrain the selection once inputs are validated, because every subset of
//! a client's transactions nets to at most its submitted totals.
//!
//! Four interchangeable oracles share one tie-break: among equal-throughput
//! optima, the selection containing the smallest transaction id of the
//! symmetric difference wins. Zero-amount transactions therefore always end
//! up selected.

mod brute;
mod dp;
mod greedy;
mod reduction;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pcn::{aggregate_demand, route_demand, Amount, Flow, PcnError, Topology, Transaction};

pub use brute::{solve_bruteforce, BRUTE_FORCE_MAX_TXNS};
pub use dp::{solve_dp, solve_dp_bounded, DEFAULT_STATE_LIMIT};
pub use greedy::solve_greedy;
pub use reduction::{subset_sum_reduce, SubsetSumInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("brute force supports at most {max} transactions, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("state space of about {estimate} entries exceeds the limit of {limit}; use --solver greedy or a --radius")]
    StateExplosion { estimate: u128, limit: u64 },
    #[error("client `{client}` submitted more than its channel can carry")]
    UnvalidatedInput { client: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Pcn(#[from] PcnError),
    #[error("internal inconsistency: {0}")]
    Abort(String),
}

/// The integer program behind one aggregation round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IlpInstance {
    /// Column-major: `columns[j][i]` is the entry for hub `i`, transaction `j`.
    columns: Vec<Vec<i64>>,
    cover: Vec<Amount>,
    weights: Vec<Amount>,
    delta: Amount,
    txn_ids: Vec<String>,
}

impl IlpInstance {
    /// Build from explicit columns. Each column must sum to zero and the ids
    /// must be unique.
    pub fn new(
        columns: Vec<Vec<i64>>,
        cover: Vec<Amount>,
        weights: Vec<Amount>,
        txn_ids: Vec<String>,
    ) -> Result<Self, SolverError> {
        let h = cover.len();
        if columns.len() != weights.len() || columns.len() != txn_ids.len() {
            return Err(SolverError::InvalidInput("column, weight and id counts differ".into()));
        }
        if let Some(j) = columns.iter().position(|c| c.len() != h || c.iter().sum::<i64>() != 0) {
            return Err(SolverError::InvalidInput(format!(
                "column {j} must have {h} entries summing to zero"
            )));
        }
        let unique: BTreeSet<&String> = txn_ids.iter().collect();
        if unique.len() != txn_ids.len() {
            return Err(SolverError::InvalidInput("transaction ids must be unique".into()));
        }
        let delta = columns.iter().flatten().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        Ok(IlpInstance { columns, cover, weights, delta, txn_ids })
    }

    pub fn num_txns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_hubs(&self) -> usize {
        self.cover.len()
    }

    pub fn column(&self, j: usize) -> &[i64] {
        &self.columns[j]
    }

    /// Row-major copy of `A`.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        (0..self.num_hubs()).map(|i| self.columns.iter().map(|c| c[i]).collect()).collect()
    }

    pub fn cover(&self) -> &[Amount] {
        &self.cover
    }

    pub fn weights(&self) -> &[Amount] {
        &self.weights
    }

    pub fn upper(&self) -> Vec<u8> {
        vec![1; self.num_txns()]
    }

    pub fn delta(&self) -> Amount {
        self.delta
    }

    pub fn txn_ids(&self) -> &[String] {
        &self.txn_ids
    }

    /// Column indices sorted by transaction id.
    pub(crate) fn id_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_txns()).collect();
        order.sort_by(|&a, &b| self.txn_ids[a].cmp(&self.txn_ids[b]));
        order
    }

    /// `A.x` for a selection.
    pub fn aggregate(&self, chosen: &[bool]) -> Vec<i64> {
        let mut agg = vec![0i64; self.num_hubs()];
        for (col, _) in self.columns.iter().zip(chosen).filter(|(_, &on)| on) {
            for (a, v) in agg.iter_mut().zip(col) {
                *a += v;
            }
        }
        agg
    }

    pub fn fits(&self, aggregate: &[i64]) -> bool {
        aggregate.iter().zip(&self.cover).all(|(&a, &b)| a <= b as i64)
    }

    pub fn is_feasible(&self, chosen: &[bool]) -> bool {
        chosen.len() == self.num_txns() && self.fits(&self.aggregate(chosen))
    }
}

/// One column per transaction: `+w` on the sender's hub row, `-w` on the
/// recipient's hub row (they cancel for intra-hub payments). `b` is the
/// current factory balance vector.
pub fn build_ilp(topo: &Topology, txns: &[Transaction]) -> Result<IlpInstance, SolverError> {
    let h = topo.hubs().len();
    let mut out_sum: BTreeMap<&str, Amount> = BTreeMap::new();
    let mut in_sum: BTreeMap<&str, Amount> = BTreeMap::new();
    let mut columns = Vec::with_capacity(txns.len());
    for t in txns {
        let s = topo.hub_index(t.sender())?;
        let r = topo.hub_index(t.recipient())?;
        let w = t.amount() as i64;
        let mut col = vec![0i64; h];
        col[s] += w;
        col[r] -= w;
        columns.push(col);
        *out_sum.entry(t.sender().as_str()).or_default() += t.amount();
        *in_sum.entry(t.recipient().as_str()).or_default() += t.amount();
    }
    for ch in topo.channels() {
        let out = out_sum.get(ch.client.as_str()).copied().unwrap_or(0);
        let inc = in_sum.get(ch.client.as_str()).copied().unwrap_or(0);
        if out > ch.cap_out || inc > ch.cap_in {
            return Err(SolverError::UnvalidatedInput { client: ch.client.to_string() });
        }
    }
    IlpInstance::new(
        columns,
        topo.factory().balances().to_vec(),
        txns.iter().map(Transaction::amount).collect(),
        txns.iter().map(|t| t.id().to_string()).collect(),
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub states_explored: u64,
    /// Set when the radius bound discarded at least one state.
    pub pruned: bool,
}

/// An oracle's answer in terms of the instance's columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub chosen: Vec<bool>,
    pub throughput: Amount,
    pub stats: SolveStats,
}

impl Selection {
    pub(crate) fn from_chosen(inst: &IlpInstance, chosen: Vec<bool>, stats: SolveStats) -> Self {
        let throughput =
            inst.weights.iter().zip(&chosen).filter(|(_, &on)| on).map(|(w, _)| *w).sum();
        Selection { chosen, throughput, stats }
    }

    pub fn selected_ids(&self, inst: &IlpInstance) -> BTreeSet<String> {
        inst.txn_ids
            .iter()
            .zip(&self.chosen)
            .filter(|(_, &on)| on)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// A selected sublist together with the flow routing its aggregate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub selected: BTreeSet<String>,
    pub throughput: Amount,
    pub flow: Flow,
    pub stats: SolveStats,
}

impl Solution {
    /// Selected transactions in the order they appear in `txns`.
    pub fn selected_txns(&self, txns: &[Transaction]) -> Vec<Transaction> {
        txns.iter().filter(|t| self.selected.contains(t.id())).cloned().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SolverChoice {
    Brute,
    Dp,
    DpBounded { radius: Amount },
    Greedy,
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Brute => "brute",
            SolverChoice::Dp => "dp",
            SolverChoice::DpBounded { .. } => "dp-bounded",
            SolverChoice::Greedy => "greedy",
        }
    }

    /// Parse a solver name; `dp-bounded` needs a radius.
    pub fn parse(name: &str, radius: Option<Amount>) -> Result<Self, SolverError> {
        match (name, radius) {
            ("brute", _) => Ok(SolverChoice::Brute),
            ("dp", _) => Ok(SolverChoice::Dp),
            ("greedy", _) => Ok(SolverChoice::Greedy),
            ("dp-bounded", Some(radius)) => Ok(SolverChoice::DpBounded { radius }),
            ("dp-bounded", None) => {
                Err(SolverError::InvalidInput("dp-bounded requires a radius".into()))
            }
            (other, _) => Err(SolverError::InvalidInput(format!("unknown solver `{other}`"))),
        }
    }

    pub fn run(&self, inst: &IlpInstance, state_limit: u64) -> Result<Selection, SolverError> {
        match *self {
            SolverChoice::Brute => solve_bruteforce(inst),
            SolverChoice::Dp => solve_dp(inst, state_limit),
            SolverChoice::DpBounded { radius } => solve_dp_bounded(inst, radius, state_limit),
            SolverChoice::Greedy => Ok(solve_greedy(inst)),
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverChoice::DpBounded { radius } => write!(f, "dp-bounded:{radius}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for SolverChoice {
    type Err = SolverError;

    /// Accepts `brute`, `dp`, `greedy` and `dp-bounded:<radius>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("dp-bounded", r)) => {
                let radius = r
                    .parse()
                    .map_err(|_| SolverError::InvalidInput(format!("bad radius `{r}`")))?;
                Ok(SolverChoice::DpBounded { radius })
            }
            _ => SolverChoice::parse(s, None),
        }
    }
}

/// Build the program, run the oracle and route the chosen aggregate.
pub fn solve(
    topo: &Topology,
    txns: &[Transaction],
    choice: SolverChoice,
    state_limit: u64,
) -> Result<Solution, SolverError> {
    let inst = build_ilp(topo, txns)?;
    let selection = choice.run(&inst, state_limit)?;
    into_solution(topo, txns, &inst, &selection)
}

pub(crate) fn into_solution(
    topo: &Topology,
    txns: &[Transaction],
    inst: &IlpInstance,
    selection: &Selection,
) -> Result<Solution, SolverError> {
    let chosen: Vec<Transaction> =
        txns.iter().zip(&selection.chosen).filter(|(_, &on)| on).map(|(t, _)| t.clone()).collect();
    let flow = route_demand(topo, &aggregate_demand(&chosen))
        .map_err(|e| SolverError::Abort(format!("selected aggregate does not route: {e}")))?;
    Ok(Solution {
        selected: selection.selected_ids(inst),
        throughput: selection.throughput,
        flow,
        stats: selection.stats,
    })
}
