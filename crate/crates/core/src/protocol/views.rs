//! What each user learns from a round, and the local checks it runs on it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pcn::{Amount, Flow, NodeId, Topology, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Sender,
    Recipient,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViewTxn {
    pub id: String,
    pub amount: Amount,
    /// The user's own role in the transaction.
    pub role: Role,
    pub counterparty: NodeId,
}

/// Edge keys are `channel:<client>` and `factory:<hub>`; only nonzero
/// entries are listed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub user: NodeId,
    pub restricted_txns: Vec<ViewTxn>,
    pub incident_flow: BTreeMap<String, i64>,
    pub involved_count: usize,
}

pub fn channel_key(client: &NodeId) -> String {
    format!("channel:{client}")
}

pub fn factory_key(hub: &NodeId) -> String {
    format!("factory:{hub}")
}

/// Every flow entry on an edge touching `user`: its own channel for a client;
/// its clients' channels and the whole factory for a hub.
pub fn incident_edges(topo: &Topology, user: &NodeId) -> Vec<String> {
    if let Some(ch) = topo.channel(user) {
        return vec![channel_key(&ch.client)];
    }
    let Some(idx) = topo.factory().index_of(user) else { return Vec::new() };
    let mut keys: Vec<String> = topo.clients_of(idx).map(|ch| channel_key(&ch.client)).collect();
    keys.extend(topo.hubs().iter().map(factory_key));
    keys
}

/// Nodes at either end of an edge carrying nonzero flow.
pub fn involved_users(topo: &Topology, flow: &Flow) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for (client, &net) in &flow.client_net {
        if net != 0 {
            out.insert(client.clone());
            if let Some(ch) = topo.channel(client) {
                out.insert(ch.hub.clone());
            }
        }
    }
    for (hub, &d) in topo.hubs().iter().zip(&flow.factory_demand) {
        if d != 0 {
            out.insert(hub.clone());
        }
    }
    out
}

/// All flow entries keyed by edge, zeros omitted.
pub fn flow_entries(topo: &Topology, flow: &Flow) -> BTreeMap<String, i64> {
    let mut out: BTreeMap<String, i64> = flow
        .client_net
        .iter()
        .filter(|(_, &v)| v != 0)
        .map(|(c, &v)| (channel_key(c), v))
        .collect();
    for (hub, &d) in topo.hubs().iter().zip(&flow.factory_demand) {
        if d != 0 {
            out.insert(factory_key(hub), d);
        }
    }
    out
}

/// Restrict the selection and flow to each node of `topo`.
pub fn build_views(
    topo: &Topology,
    selected: &[Transaction],
    flow: &Flow,
) -> BTreeMap<NodeId, UserView> {
    let entries = flow_entries(topo, flow);
    let involved_count = involved_users(topo, flow).len();
    topo.nodes()
        .into_iter()
        .map(|user| {
            let mut restricted_txns: Vec<ViewTxn> = selected
                .iter()
                .filter_map(|t| {
                    let (role, counterparty) = if t.sender() == &user {
                        (Role::Sender, t.recipient())
                    } else if t.recipient() == &user {
                        (Role::Recipient, t.sender())
                    } else {
                        return None;
                    };
                    Some(ViewTxn {
                        id: t.id().to_string(),
                        amount: t.amount(),
                        role,
                        counterparty: counterparty.clone(),
                    })
                })
                .collect();
            restricted_txns.sort();
            let incident_flow = incident_edges(topo, &user)
                .into_iter()
                .filter_map(|k| entries.get(&k).map(|&v| (k, v)))
                .collect();
            let view =
                UserView { user: user.clone(), restricted_txns, incident_flow, involved_count };
            (user, view)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum ValidationFailure {
    NotSubmitted { txn: String },
    EndpointMismatch { txn: String },
    FlowMismatch { edge: String },
    NetFlowViolation { expected: i64, observed: i64 },
}

impl ValidationFailure {
    pub fn check_name(&self) -> &'static str {
        match self {
            ValidationFailure::NotSubmitted { .. } => "NotSubmitted",
            ValidationFailure::EndpointMismatch { .. } => "EndpointMismatch",
            ValidationFailure::FlowMismatch { .. } => "FlowMismatch",
            ValidationFailure::NetFlowViolation { .. } => "NetFlowViolation",
        }
    }
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationFailure::NotSubmitted { txn } => {
                write!(f, "NotSubmitted: `{txn}` was never submitted by its sender")
            }
            ValidationFailure::EndpointMismatch { txn } => {
                write!(f, "EndpointMismatch: `{txn}` differs between its endpoints")
            }
            ValidationFailure::FlowMismatch { edge } => {
                write!(f, "FlowMismatch: endpoints disagree on `{edge}`")
            }
            ValidationFailure::NetFlowViolation { expected, observed } => write!(
                f,
                "NetFlowViolation: net incident flow {observed}, aggregate demand {expected}"
            ),
        }
    }
}

fn mirror(t: &ViewTxn, owner: &NodeId) -> ViewTxn {
    let role = match t.role {
        Role::Sender => Role::Recipient,
        Role::Recipient => Role::Sender,
    };
    ViewTxn { id: t.id.clone(), amount: t.amount, role, counterparty: owner.clone() }
}

/// The four checks a user runs before anything is executed, in order:
/// own transactions were submitted, both endpoints list each transaction,
/// edge copies agree with the other endpoints (including the involved count),
/// and the net incident flow equals the user's demand under its list.
pub fn local_validate(
    topo: &Topology,
    user: &NodeId,
    view: &UserView,
    own_submitted: &[Transaction],
    peers: &BTreeMap<NodeId, UserView>,
) -> Result<(), ValidationFailure> {
    for t in view.restricted_txns.iter().filter(|t| t.role == Role::Sender) {
        let submitted = own_submitted.iter().any(|s| {
            s.id() == t.id
                && s.sender() == user
                && s.recipient() == &t.counterparty
                && s.amount() == t.amount
        });
        if !submitted {
            return Err(ValidationFailure::NotSubmitted { txn: t.id.clone() });
        }
    }

    for t in &view.restricted_txns {
        let mirrored = mirror(t, user);
        let confirmed = view.user == *user
            && peers.get(&t.counterparty).is_some_and(|p| p.restricted_txns.contains(&mirrored));
        if !confirmed {
            return Err(ValidationFailure::EndpointMismatch { txn: t.id.clone() });
        }
    }
    // a peer listing a transaction with us that we do not have
    for (peer, pv) in peers.iter().filter(|(p, _)| *p != user) {
        for t in pv.restricted_txns.iter().filter(|t| &t.counterparty == user) {
            if !view.restricted_txns.contains(&mirror(t, peer)) {
                return Err(ValidationFailure::EndpointMismatch { txn: t.id.clone() });
            }
        }
    }

    let edges = incident_edges(topo, user);
    if let Some(k) = view.incident_flow.keys().find(|k| !edges.contains(k)) {
        return Err(ValidationFailure::FlowMismatch { edge: k.clone() });
    }
    for edge in &edges {
        let mine = view.incident_flow.get(edge).copied().unwrap_or(0);
        for other in edge_endpoints(topo, edge).iter().filter(|o| *o != user) {
            let Some(pv) = peers.get(other) else {
                return Err(ValidationFailure::FlowMismatch { edge: edge.clone() });
            };
            let theirs = pv.incident_flow.get(edge).copied().unwrap_or(0);
            if theirs != mine || pv.involved_count != view.involved_count {
                return Err(ValidationFailure::FlowMismatch { edge: edge.clone() });
            }
        }
    }

    let expected: i64 = view
        .restricted_txns
        .iter()
        .map(|t| match t.role {
            Role::Sender => t.amount as i64,
            Role::Recipient => -(t.amount as i64),
        })
        .sum();
    let flow_at = |k: String| view.incident_flow.get(&k).copied().unwrap_or(0);
    let observed = if topo.channel(user).is_some() {
        flow_at(channel_key(user))
    } else if let Some(idx) = topo.factory().index_of(user) {
        let clients: i64 = topo.clients_of(idx).map(|ch| flow_at(channel_key(&ch.client))).sum();
        flow_at(factory_key(user)) - clients
    } else {
        0
    };
    if observed != expected {
        return Err(ValidationFailure::NetFlowViolation { expected, observed });
    }
    Ok(())
}

/// The nodes that keep a copy of an edge's flow entry.
fn edge_endpoints(topo: &Topology, edge: &str) -> Vec<NodeId> {
    if let Some(client) = edge.strip_prefix("channel:") {
        let client = NodeId::new(client);
        return match topo.channel(&client) {
            Some(ch) => vec![client, ch.hub.clone()],
            None => Vec::new(),
        };
    }
    if edge.starts_with("factory:") {
        return topo.hubs().to_vec();
    }
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcn::fixtures::{n, topo, tx};
    use crate::pcn::{aggregate_demand, route_demand};

    fn setup() -> (Topology, Vec<Transaction>, BTreeMap<NodeId, UserView>) {
        let t = topo(
            &[("h1", 20), ("h2", 20)],
            &[("a", "h1", 20, 20), ("b", "h2", 20, 20), ("c", "h2", 20, 20)],
        );
        let txns = vec![tx("t1", "a", "b", 7), tx("t2", "b", "c", 3), tx("t3", "h1", "c", 2)];
        let flow = route_demand(&t, &aggregate_demand(&txns)).unwrap();
        let views = build_views(&t, &txns, &flow);
        (t, txns, views)
    }

    fn own(txns: &[Transaction], user: &NodeId) -> Vec<Transaction> {
        txns.iter().filter(|t| t.sender() == user).cloned().collect()
    }

    fn check(
        t: &Topology,
        txns: &[Transaction],
        views: &BTreeMap<NodeId, UserView>,
        user: &str,
    ) -> Result<(), ValidationFailure> {
        let u = n(user);
        local_validate(t, &u, &views[&u], &own(txns, &u), views)
    }

    #[test]
    fn honest_views_pass() {
        let (t, txns, views) = setup();
        for u in t.nodes() {
            assert_eq!(check(&t, &txns, &views, u.as_str()), Ok(()), "{u}");
        }
    }

    #[test]
    fn views_stay_local() {
        let (_, _, views) = setup();
        let a = &views[&n("a")];
        assert_eq!(a.incident_flow, BTreeMap::from([("channel:a".to_string(), 7)]));
        assert_eq!(a.restricted_txns.len(), 1);
        assert_eq!(a.involved_count, 5);
        let h2 = &views[&n("h2")];
        assert!(h2.incident_flow.keys().all(|k| k != "channel:a"));
    }

    #[test]
    fn inserted_transaction_not_submitted() {
        let (t, txns, mut views) = setup();
        let extra =
            ViewTxn { id: "tx".into(), amount: 1, role: Role::Sender, counterparty: n("c") };
        views.get_mut(&n("a")).unwrap().restricted_txns.push(extra);
        assert_eq!(
            check(&t, &txns, &views, "a"),
            Err(ValidationFailure::NotSubmitted { txn: "tx".into() })
        );
    }

    #[test]
    fn one_sided_transaction_is_an_endpoint_mismatch() {
        let (t, txns, mut views) = setup();
        views.get_mut(&n("b")).unwrap().restricted_txns.retain(|x| x.id != "t1");
        assert_eq!(
            check(&t, &txns, &views, "a"),
            Err(ValidationFailure::EndpointMismatch { txn: "t1".into() })
        );
    }

    #[test]
    fn diverging_copies_are_a_flow_mismatch() {
        let (t, txns, mut views) = setup();
        *views.get_mut(&n("a")).unwrap().incident_flow.get_mut("channel:a").unwrap() += 1;
        assert_eq!(
            check(&t, &txns, &views, "h1"),
            Err(ValidationFailure::FlowMismatch { edge: "channel:a".into() })
        );
    }

    #[test]
    fn perturbed_edge_breaks_net_flow_by_one() {
        let (t, txns, mut views) = setup();
        for u in ["a", "h1"] {
            *views.get_mut(&n(u)).unwrap().incident_flow.get_mut("channel:a").unwrap() += 1;
        }
        assert_eq!(
            check(&t, &txns, &views, "a"),
            Err(ValidationFailure::NetFlowViolation { expected: 7, observed: 8 })
        );
    }

    #[test]
    fn involved_count_disagreement() {
        let (t, txns, mut views) = setup();
        views.get_mut(&n("b")).unwrap().involved_count += 1;
        assert!(matches!(
            check(&t, &txns, &views, "h2"),
            Err(ValidationFailure::FlowMismatch { .. })
        ));
    }
}
