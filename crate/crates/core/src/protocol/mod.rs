//! One aggregation round: delegates are drawn from common randomness, users
//! secret-share padded inputs to them, the committee reconstructs, validates
//! and solves, and every user receives and checks its own slice of the result.
//!
//! The committee is simulated in the clear; what the protocol guarantees is
//! stated in terms of the views it emits.

mod delegates;
mod privacy;
mod sharing;
mod validation;
mod views;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delegates::select_delegates;
pub use privacy::{corrupted_edges, privacy_experiment, PrivacyOutcome};
pub use sharing::{reconstruct, share_input, Share, Slot, UserInput};
pub use validation::{validate_inputs, RejectReason, Rejection, Validated};
pub use views::{
    build_views, channel_key, factory_key, flow_entries, incident_edges, involved_users,
    local_validate, Role, UserView, ValidationFailure, ViewTxn,
};

use crate::exec::{execute_atomic, ExecError, ExecutionOutcome, Strategy};
use crate::pcn::{
    apply_flow, transition_fee, Amount, FeeReport, NodeId, PcnError, Topology, Transaction,
};
use crate::solver::{
    build_ilp, into_solution, Solution, SolverChoice, SolverError, DEFAULT_STATE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("need between 1 and {hubs} delegates, got {k}")]
    BadK { k: usize, hubs: usize },
    #[error("share {index} is missing")]
    MissingShare { index: usize },
    #[error("shares do not line up")]
    LengthMismatch,
    #[error("share payload does not decode: {0}")]
    Decode(String),
    #[error("`{user}` submitted {len} transactions but lists are padded to {pad_to}")]
    PadTooSmall { user: NodeId, len: usize, pad_to: usize },
    #[error("transaction id `{0}` is used twice")]
    DuplicateTxn(String),
    #[error(transparent)]
    Pcn(#[from] PcnError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub num_delegates: usize,
    /// Common randomness shared by all users.
    pub seed: [u8; 32],
    /// Public length every user's list is padded to.
    pub pad_to: usize,
    pub solver: SolverChoice,
    /// Ledger heights the execution may take.
    pub timeout: u64,
    /// Dust output per receiver in the execution.
    pub epsilon: Amount,
    pub state_limit: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            num_delegates: 1,
            seed: [0; 32],
            pad_to: 16,
            solver: SolverChoice::Dp,
            timeout: 10,
            epsilon: 1,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }
}

/// Output of the flow computation phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowComputation {
    pub delegates: Vec<NodeId>,
    /// Transactions that survived validation, in submission order.
    pub kept: Vec<Transaction>,
    pub solution: Solution,
    pub rejected_users: Vec<Rejection>,
    pub views: BTreeMap<NodeId, UserView>,
}

impl FlowComputation {
    /// Selected transactions in submission order.
    pub fn selected(&self) -> Vec<Transaction> {
        self.solution.selected_txns(&self.kept)
    }
}

/// Each user's outgoing list padded to `pad_to`, plus its local balances.
pub fn padded_inputs(
    topo: &Topology,
    txns: &[Transaction],
    pad_to: usize,
) -> Result<Vec<UserInput>, ProtocolError> {
    let mut seen = std::collections::BTreeSet::new();
    for t in txns {
        for end in [t.sender(), t.recipient()] {
            if !topo.contains(end) {
                return Err(PcnError::UnknownNode(end.clone()).into());
            }
        }
        if !seen.insert(t.id()) {
            return Err(ProtocolError::DuplicateTxn(t.id().to_string()));
        }
    }
    topo.nodes()
        .into_iter()
        .map(|user| {
            let mut slots: Vec<Slot> =
                txns.iter().filter(|t| t.sender() == &user).cloned().map(Slot::Payment).collect();
            if slots.len() > pad_to {
                return Err(ProtocolError::PadTooSmall { user, len: slots.len(), pad_to });
            }
            slots.resize(pad_to, Slot::Zero);
            let channel = topo.channel(&user).map(|ch| (ch.cap_out, ch.cap_in));
            let factory_balance =
                topo.factory().index_of(&user).map(|i| topo.factory().balances()[i]);
            Ok(UserInput { user, slots, channel, factory_balance })
        })
        .collect()
}

/// Pad, share, reconstruct, validate, solve, route and slice into views.
/// Deterministic in `(topo, txns, config)`.
pub fn run_flow_computation(
    topo: &Topology,
    txns: &[Transaction],
    config: &ProtocolConfig,
) -> Result<FlowComputation, ProtocolError> {
    let delegates = select_delegates(topo.hubs(), config.num_delegates, &config.seed)?;
    let inputs = padded_inputs(topo, txns, config.pad_to)?;

    let mut rng = ChaCha20Rng::from_seed(config.seed);
    let mut reconstructed = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let shares = share_input(input, delegates.len(), &mut rng)?;
        reconstructed.push(reconstruct(&shares)?);
    }
    // submission order is restored from the original list
    let order: BTreeMap<&str, usize> = txns.iter().enumerate().map(|(i, t)| (t.id(), i)).collect();
    let mut submitted: Vec<Transaction> =
        reconstructed.iter().flat_map(|u| u.payments().cloned()).collect();
    submitted.sort_by_key(|t| order[t.id()]);

    let Validated { kept, rejected_users } = validate_inputs(topo, &submitted);
    let inst = build_ilp(topo, &kept)?;
    let selection = config.solver.run(&inst, config.state_limit)?;
    let solution = into_solution(topo, &kept, &inst, &selection)?;
    let views = build_views(topo, &solution.selected_txns(&kept), &solution.flow);
    Ok(FlowComputation { delegates, kept, solution, rejected_users, views })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolReport {
    pub accepted: Solution,
    pub rejected_users: Vec<Rejection>,
    pub views: BTreeMap<NodeId, UserView>,
    /// Per-user result of the local checks.
    pub validation: BTreeMap<NodeId, Result<(), ValidationFailure>>,
    pub fees: FeeReport,
    /// `None` when some user aborted before execution.
    pub outcome: Option<ExecutionOutcome>,
}

/// The whole round, including local validation and atomic execution.
/// Parties without an entry in `strategies` behave honestly.
pub fn run_protocol(
    topo: &Topology,
    txns: &[Transaction],
    config: &ProtocolConfig,
    strategies: &BTreeMap<NodeId, Strategy>,
) -> Result<ProtocolReport, ProtocolError> {
    let fc = run_flow_computation(topo, txns, config)?;
    let validation: BTreeMap<NodeId, Result<(), ValidationFailure>> = fc
        .views
        .iter()
        .map(|(user, view)| {
            let own: Vec<Transaction> =
                txns.iter().filter(|t| t.sender() == user).cloned().collect();
            (user.clone(), local_validate(topo, user, view, &own, &fc.views))
        })
        .collect();
    let flow = &fc.solution.flow;
    let fees = transition_fee(topo, &apply_flow(topo, flow)?)?;
    let outcome = if validation.values().all(Result::is_ok) {
        let all: BTreeMap<NodeId, Strategy> = crate::exec::parties(topo, flow)
            .into_iter()
            .map(|p| {
                let s = strategies.get(&p).copied().unwrap_or_default();
                (p, s)
            })
            .collect();
        Some(execute_atomic(topo, flow, &all, config.timeout, config.epsilon, &config.seed)?)
    } else {
        None
    };
    Ok(ProtocolReport {
        accepted: fc.solution,
        rejected_users: fc.rejected_users,
        views: fc.views,
        validation,
        fees,
        outcome,
    })
}
