use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use super::report::{Baseline, ExecutionReport, ReportFile, SolverStatsReport};
use super::scenario::{parse_seed, Scenario, ScenarioFile};
use super::CliError;
use crate::exec::ExecutionOutcome;
use crate::pcn::{
    apply_flow, sequential_execute, transition_fee, Amount, NodeId, SequentialOutcome, Transaction,
};
use crate::protocol::{
    build_views, local_validate, run_flow_computation, run_protocol, FlowComputation,
    ValidationFailure,
};
use crate::solver::{subset_sum_reduce, SolverChoice};

/// Command-line overrides of the scenario's configuration.
#[derive(Clone, Debug, Default)]
pub struct SolveFlags {
    pub solver: Option<String>,
    pub radius: Option<Amount>,
    pub seed_hex: Option<String>,
}

impl SolveFlags {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<(), CliError> {
        if let Some(name) = &self.solver {
            let radius = self.radius.or(match scenario.config.solver {
                SolverChoice::DpBounded { radius } => Some(radius),
                _ => None,
            });
            scenario.config.solver =
                SolverChoice::parse(name, radius).map_err(|e| CliError::Invalid(e.to_string()))?;
        } else if let Some(radius) = self.radius {
            scenario.config.solver = SolverChoice::DpBounded { radius };
        }
        if let Some(seed) = &self.seed_hex {
            scenario.config.seed = parse_seed(seed)?;
        }
        Ok(())
    }
}

fn baseline(scenario: &Scenario, selected: &[Transaction]) -> Result<Baseline, CliError> {
    let outcome = sequential_execute(&scenario.topology, selected).map_err(CliError::failed)?;
    Ok(match outcome {
        SequentialOutcome::Completed { fees, .. } => {
            Baseline { feasible: true, total_fee: Some(fees.total), failed_at_index: None }
        }
        SequentialOutcome::Infeasible { index, .. } => {
            Baseline { feasible: false, total_fee: None, failed_at_index: Some(index) }
        }
    })
}

fn timed_flow_computation(scenario: &Scenario) -> Result<(FlowComputation, f64), CliError> {
    let start = Instant::now();
    let fc = run_flow_computation(&scenario.topology, &scenario.txns, &scenario.config)?;
    let wall_ms = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    Ok((fc, wall_ms))
}

fn solve_report(
    scenario: &Scenario,
    fc: &FlowComputation,
    wall_ms: f64,
) -> Result<ReportFile, CliError> {
    let topo = &scenario.topology;
    let flow = &fc.solution.flow;
    let after = apply_flow(topo, flow).map_err(CliError::failed)?;
    let fees = transition_fee(topo, &after).map_err(CliError::failed)?;
    Ok(ReportFile {
        selected_txn_ids: fc.solution.selected.iter().cloned().collect(),
        throughput: fc.solution.throughput,
        flow: flow.clone(),
        fees,
        sequential_baseline: baseline(scenario, &fc.selected())?,
        execution: None,
        validation: None,
        rejected_users: fc.rejected_users.clone(),
        solver_stats: SolverStatsReport {
            solver: scenario.config.solver.to_string(),
            states_explored: fc.solution.stats.states_explored,
            pruned: fc.solution.stats.pruned,
            wall_ms,
        },
    })
}

/// Solve and route, without executing anything.
pub fn cmd_solve(scenario: &Scenario) -> Result<ReportFile, CliError> {
    let (fc, wall_ms) = timed_flow_computation(scenario)?;
    solve_report(scenario, &fc, wall_ms)
}

fn execution_parts(
    validation: &BTreeMap<NodeId, Result<(), ValidationFailure>>,
    outcome: &Option<ExecutionOutcome>,
) -> (BTreeMap<String, String>, ExecutionReport) {
    let validation = validation
        .iter()
        .map(|(u, r)| {
            let status = match r {
                Ok(()) => "ok".to_string(),
                Err(f) => f.check_name().to_string(),
            };
            (u.to_string(), status)
        })
        .collect();
    let execution = match outcome {
        Some(o) => ExecutionReport {
            committed: o.committed,
            refunds_issued: o.refunds_issued,
            events: o.events.clone(),
        },
        None => ExecutionReport { committed: false, refunds_issued: false, events: Vec::new() },
    };
    (validation, execution)
}

/// The full round. The flag is true when the execution committed.
pub fn cmd_simulate(scenario: &Scenario) -> Result<(ReportFile, bool), CliError> {
    let (fc, wall_ms) = timed_flow_computation(scenario)?;
    let mut report = solve_report(scenario, &fc, wall_ms)?;
    let full =
        run_protocol(&scenario.topology, &scenario.txns, &scenario.config, &scenario.adversary)?;
    let (validation, execution) = execution_parts(&full.validation, &full.outcome);
    let committed = execution.committed;
    report.validation = Some(validation);
    report.execution = Some(execution);
    Ok((report, committed))
}

fn mismatch(what: &str) -> CliError {
    CliError::Verification(format!("{what} does not match the scenario"))
}

/// Check a report against its scenario: every user's local checks on the
/// reported selection and flow first, then every other field against a
/// recomputation.
pub fn cmd_verify(scenario: &Scenario, report: &ReportFile) -> Result<(), CliError> {
    let topo = &scenario.topology;
    let by_id: BTreeMap<&str, &Transaction> = scenario.txns.iter().map(|t| (t.id(), t)).collect();
    let mut seen = BTreeSet::new();
    let mut selected = Vec::new();
    for id in &report.selected_txn_ids {
        let Some(t) = by_id.get(id.as_str()) else {
            return Err(CliError::Verification(format!(
                "NotSubmitted: `{id}` is not in the scenario"
            )));
        };
        if !seen.insert(id.as_str()) {
            return Err(CliError::Verification(format!(
                "EndpointMismatch: `{id}` is listed twice"
            )));
        }
        selected.push((*t).clone());
    }

    let flow = &report.flow;
    if flow.factory_demand.len() != topo.hubs().len() {
        return Err(CliError::Verification(
            "FlowMismatch: factory demand has the wrong arity".into(),
        ));
    }
    if let Some(c) = flow.client_net.keys().find(|c| topo.channel(c).is_none()) {
        return Err(CliError::Verification(format!("FlowMismatch: `{c}` has no channel")));
    }
    let views = build_views(topo, &selected, flow);
    for (user, view) in &views {
        let own: Vec<Transaction> =
            scenario.txns.iter().filter(|t| t.sender() == user).cloned().collect();
        if let Err(f) = local_validate(topo, user, view, &own, &views) {
            return Err(CliError::Verification(format!("{user}: {f}")));
        }
    }
    let sum: Amount = selected.iter().map(Transaction::amount).sum();
    if sum != report.throughput {
        return Err(CliError::Verification(format!(
            "throughput {} differs from the selected amounts {sum}",
            report.throughput
        )));
    }

    let mut rerun = scenario.clone();
    rerun.config.solver = report.solver_stats.solver.parse().map_err(|_| {
        CliError::Verification(format!("unknown solver `{}`", report.solver_stats.solver))
    })?;
    let (fc, _) = timed_flow_computation(&rerun)?;
    let expected = solve_report(&rerun, &fc, report.solver_stats.wall_ms)?;
    let checks: [(&str, bool); 7] = [
        ("selection", expected.selected_txn_ids == report.selected_txn_ids),
        ("flow", expected.flow == report.flow),
        ("rejected_users", expected.rejected_users == report.rejected_users),
        ("fees", expected.fees == report.fees),
        ("sequential_baseline", expected.sequential_baseline == report.sequential_baseline),
        ("solver_stats", expected.solver_stats == report.solver_stats),
        ("throughput", expected.throughput == report.throughput),
    ];
    if let Some((what, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(mismatch(what));
    }

    if report.execution.is_some() || report.validation.is_some() {
        let full = run_protocol(topo, &rerun.txns, &rerun.config, &rerun.adversary)?;
        let (validation, execution) = execution_parts(&full.validation, &full.outcome);
        if report.validation.as_ref() != Some(&validation) {
            return Err(mismatch("validation"));
        }
        if report.execution.as_ref() != Some(&execution) {
            return Err(mismatch("execution"));
        }
    }
    Ok(())
}

/// A scenario that has a nonzero optimum exactly when some of `items` sum to
/// `target`.
pub fn cmd_reduce_subset_sum(target: Amount, items: &[Amount]) -> Result<ScenarioFile, CliError> {
    let red = subset_sum_reduce(target, items).map_err(|e| CliError::Invalid(e.to_string()))?;
    let scenario = Scenario {
        config: crate::protocol::ProtocolConfig {
            pad_to: Scenario::min_pad(&red.txns),
            solver: SolverChoice::Dp,
            ..Default::default()
        },
        topology: red.topology,
        txns: red.txns,
        adversary: BTreeMap::new(),
    };
    Ok(scenario.to_file())
}
