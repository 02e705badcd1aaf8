use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pcn::{Amount, NodeId, Topology, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    OutgoingCapacity,
    IncomingCapacity,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::OutgoingCapacity => "outgoing-capacity",
            RejectReason::IncomingCapacity => "incoming-capacity",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rejection {
    pub user: NodeId,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validated {
    /// Surviving transactions in submission order.
    pub kept: Vec<Transaction>,
    /// Sorted by user, then reason.
    pub rejected_users: Vec<Rejection>,
}

/// Drop every client's outgoing list when it sums to at least the client's
/// outgoing capacity, and every incoming list when it sums to at least the
/// incoming capacity. Comparisons are made on the current survivors and
/// repeated until nothing changes, so the result does not depend on the
/// order clients are visited in.
pub fn validate_inputs(topo: &Topology, txns: &[Transaction]) -> Validated {
    let mut dropped_out: BTreeSet<NodeId> = BTreeSet::new();
    let mut dropped_in: BTreeSet<NodeId> = BTreeSet::new();
    loop {
        let alive = |t: &&Transaction| {
            !dropped_out.contains(t.sender()) && !dropped_in.contains(t.recipient())
        };
        let mut out: BTreeMap<&NodeId, Amount> = BTreeMap::new();
        for t in txns.iter().filter(alive) {
            *out.entry(t.sender()).or_default() += t.amount();
        }
        let new_out: Vec<NodeId> = topo
            .channels()
            .filter(|ch| !dropped_out.contains(&ch.client))
            .filter(|ch| out.get(&ch.client).is_some_and(|&s| s >= ch.cap_out))
            .map(|ch| ch.client.clone())
            .collect();
        dropped_out.extend(new_out.iter().cloned());

        let alive = |t: &&Transaction| {
            !dropped_out.contains(t.sender()) && !dropped_in.contains(t.recipient())
        };
        let mut inc: BTreeMap<&NodeId, Amount> = BTreeMap::new();
        for t in txns.iter().filter(alive) {
            *inc.entry(t.recipient()).or_default() += t.amount();
        }
        let new_in: Vec<NodeId> = topo
            .channels()
            .filter(|ch| !dropped_in.contains(&ch.client))
            .filter(|ch| inc.get(&ch.client).is_some_and(|&s| s >= ch.cap_in))
            .map(|ch| ch.client.clone())
            .collect();
        dropped_in.extend(new_in.iter().cloned());

        if new_out.is_empty() && new_in.is_empty() {
            break;
        }
    }

    let kept = txns
        .iter()
        .filter(|t| !dropped_out.contains(t.sender()) && !dropped_in.contains(t.recipient()))
        .cloned()
        .collect();
    let mut rejected_users: Vec<Rejection> = dropped_out
        .into_iter()
        .map(|user| Rejection { user, reason: RejectReason::OutgoingCapacity })
        .chain(
            dropped_in
                .into_iter()
                .map(|user| Rejection { user, reason: RejectReason::IncomingCapacity }),
        )
        .collect();
    rejected_users.sort();
    Validated { kept, rejected_users }
}
