use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{run_flow_computation, FlowComputation, ProtocolConfig, ProtocolError};
use crate::pcn::{NodeId, Topology, Transaction};
use crate::protocol::views::{channel_key, factory_key, flow_entries, involved_users};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyOutcome {
    pub constraints_ok: bool,
    pub views_equal: bool,
}

/// Edge keys of the adversary's subgraph: the corrupted nodes with their
/// incident edges, widened to every hub and hub edge once any hub is corrupted.
pub fn corrupted_edges(topo: &Topology, corrupted: &BTreeSet<NodeId>) -> BTreeSet<String> {
    let any_hub = corrupted.iter().any(|c| topo.is_hub(c));
    let mut edges = BTreeSet::new();
    for ch in topo.channels() {
        if any_hub || corrupted.contains(&ch.client) || corrupted.contains(&ch.hub) {
            edges.insert(channel_key(&ch.client));
        }
    }
    if any_hub {
        edges.extend(topo.hubs().iter().map(factory_key));
    }
    edges
}

fn restricted_flow(
    topo: &Topology,
    run: &FlowComputation,
    edges: &BTreeSet<String>,
) -> BTreeMap<String, i64> {
    flow_entries(topo, &run.solution.flow).into_iter().filter(|(k, _)| edges.contains(k)).collect()
}

fn corrupted_bytes(run: &FlowComputation, corrupted: &BTreeSet<NodeId>) -> Vec<Vec<u8>> {
    corrupted
        .iter()
        .map(|c| run.views.get(c).map(|v| serde_json::to_vec(v).expect("views serialize")))
        .map(Option::unwrap_or_default)
        .collect()
}

/// Run the round on both lists. The pair is admissible when the flow on the
/// adversary's edges, the set of involved users and the corrupted users'
/// own selected transactions coincide; `views_equal` compares the serialized
/// views of every corrupted user.
pub fn privacy_experiment(
    topo: &Topology,
    corrupted: &BTreeSet<NodeId>,
    t0: &[Transaction],
    t1: &[Transaction],
    config: &ProtocolConfig,
) -> Result<PrivacyOutcome, ProtocolError> {
    let r0 = run_flow_computation(topo, t0, config)?;
    let r1 = run_flow_computation(topo, t1, config)?;
    let edges = corrupted_edges(topo, corrupted);
    let own = |run: &FlowComputation| -> Vec<_> {
        corrupted.iter().map(|c| run.views.get(c).map(|v| v.restricted_txns.clone())).collect()
    };
    let constraints_ok = restricted_flow(topo, &r0, &edges) == restricted_flow(topo, &r1, &edges)
        && involved_users(topo, &r0.solution.flow) == involved_users(topo, &r1.solution.flow)
        && own(&r0) == own(&r1);
    let views_equal = corrupted_bytes(&r0, corrupted) == corrupted_bytes(&r1, corrupted);
    Ok(PrivacyOutcome { constraints_ok, views_equal })
}
