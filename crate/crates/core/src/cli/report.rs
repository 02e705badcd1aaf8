use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::exec::LedgerEvent;
use crate::pcn::{Amount, FeeReport, Flow};
use crate::protocol::Rejection;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    /// Whether executing the selected transactions one at a time succeeds.
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_fee: Option<Amount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_at_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionReport {
    pub committed: bool,
    pub refunds_issued: bool,
    pub events: Vec<LedgerEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverStatsReport {
    pub solver: String,
    pub states_explored: u64,
    pub pruned: bool,
    /// Wall time of the solver call; not covered by determinism checks.
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub selected_txn_ids: Vec<String>,
    pub throughput: Amount,
    pub flow: Flow,
    pub fees: FeeReport,
    pub sequential_baseline: Baseline,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
    /// Per-user local check result: `ok` or the failing check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<BTreeMap<String, String>>,
    pub rejected_users: Vec<Rejection>,
    pub solver_stats: SolverStatsReport,
}

impl ReportFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("report: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The report with `wall_ms` zeroed, for byte comparisons.
    pub fn without_timing(&self) -> ReportFile {
        let mut r = self.clone();
        r.solver_stats.wall_ms = 0.0;
        r
    }
}
