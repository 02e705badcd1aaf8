//! Restricted payment channel network: a handful of hubs joined by one
//! channel factory, and clients that each hold exactly one channel to a hub.
//!
//! Everything here is exact integer arithmetic. Demand vectors and flows are
//! signed (`i64`), balances and amounts are unsigned coins.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A non-negative number of coins.
pub type Amount = u64;

/// Parts-per-million denominator for proportional fees.
pub const PPM: u64 = 1_000_000;

/// Largest amount or balance accepted anywhere in the model. Keeps every sum
/// of up to 2^15 amounts inside `i64`.
pub const MAX_AMOUNT: Amount = 1 << 48;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PcnError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{0}` is declared more than once")]
    DuplicateNode(NodeId),
    #[error("client `{client}` is attached to unknown hub `{hub}`")]
    UnknownHub { client: NodeId, hub: NodeId },
    #[error("proportional fee of {0} ppm must be below 1000000")]
    FeeOutOfRange(u32),
    #[error("transaction `{0}` pays its own sender")]
    SelfPayment(String),
    #[error("amount {0} exceeds the supported maximum")]
    AmountTooLarge(u64),
    #[error("demand vector does not sum to zero")]
    Unbalanced,
    #[error("factory demand has {got} entries but there are {expected} hubs")]
    FactoryArity { expected: usize, got: usize },
    #[error("infeasible: {0}")]
    Infeasible(Violation),
    #[error("topologies do not share the same structure")]
    StructureMismatch,
}

/// The first capacity constraint a flow breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ClientOut { client: NodeId, required: Amount, available: Amount },
    ClientIn { client: NodeId, required: Amount, available: Amount },
    Factory { hub: NodeId, required: Amount, available: Amount },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ClientOut { client, required, available } => {
                write!(f, "client `{client}` must send {required} to its hub but holds {available}")
            }
            Violation::ClientIn { client, required, available } => write!(
                f,
                "hub of `{client}` must send {required} but holds {available} on that channel"
            ),
            Violation::Factory { hub, required, available } => write!(
                f,
                "hub `{hub}` must release {required} in the factory but holds {available}"
            ),
        }
    }
}

/// Base plus proportional forwarding fee, charged on a balance decrease.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    pub base: Amount,
    pub prop_ppm: u32,
}

impl FeeSchedule {
    pub fn new(base: Amount, prop_ppm: u32) -> Result<Self, PcnError> {
        if u64::from(prop_ppm) >= PPM {
            return Err(PcnError::FeeOutOfRange(prop_ppm));
        }
        Ok(FeeSchedule { base, prop_ppm })
    }

    /// `base + ceil(prop_ppm * decrease / 1e6)`, or zero when nothing moves.
    pub fn fee(&self, decrease: Amount) -> Amount {
        if decrease == 0 {
            return 0;
        }
        let scaled = u128::from(self.prop_ppm) * u128::from(decrease);
        let prop = scaled.div_ceil(u128::from(PPM)) as Amount;
        self.base + prop
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelState {
    pub client: NodeId,
    pub hub: NodeId,
    /// Balance on the client -> hub direction.
    pub cap_out: Amount,
    /// Balance on the hub -> client direction.
    pub cap_in: Amount,
    pub fees: FeeSchedule,
}

impl ChannelState {
    pub fn total(&self) -> Amount {
        self.cap_out + self.cap_in
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoryState {
    hubs: Vec<NodeId>,
    balances: Vec<Amount>,
    fees: Vec<FeeSchedule>,
}

impl FactoryState {
    pub fn new(
        entries: impl IntoIterator<Item = (NodeId, Amount, FeeSchedule)>,
    ) -> Result<Self, PcnError> {
        let mut factory = FactoryState { hubs: Vec::new(), balances: Vec::new(), fees: Vec::new() };
        let mut seen = BTreeSet::new();
        for (hub, balance, fees) in entries {
            if !seen.insert(hub.clone()) {
                return Err(PcnError::DuplicateNode(hub));
            }
            check_amount(balance)?;
            FeeSchedule::new(fees.base, fees.prop_ppm)?;
            factory.hubs.push(hub);
            factory.balances.push(balance);
            factory.fees.push(fees);
        }
        Ok(factory)
    }

    pub fn hubs(&self) -> &[NodeId] {
        &self.hubs
    }

    pub fn balances(&self) -> &[Amount] {
        &self.balances
    }

    pub fn fees(&self) -> &[FeeSchedule] {
        &self.fees
    }

    pub fn len(&self) -> usize {
        self.hubs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hubs.is_empty()
    }

    pub fn index_of(&self, hub: &NodeId) -> Option<usize> {
        self.hubs.iter().position(|h| h == hub)
    }

    pub fn total(&self) -> Amount {
        self.balances.iter().sum()
    }

    /// A zero-sum demand is routable iff no hub is asked for more than it holds.
    pub fn can_route(&self, demand: &[i64]) -> bool {
        demand.len() == self.len()
            && demand.iter().sum::<i64>() == 0
            && demand.iter().zip(&self.balances).all(|(&d, &c)| d <= c as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    factory: FactoryState,
    clients: BTreeMap<NodeId, ChannelState>,
}

impl Topology {
    pub fn new(
        factory: FactoryState,
        channels: impl IntoIterator<Item = ChannelState>,
    ) -> Result<Self, PcnError> {
        let mut clients = BTreeMap::new();
        for ch in channels {
            if factory.index_of(&ch.client).is_some() || clients.contains_key(&ch.client) {
                return Err(PcnError::DuplicateNode(ch.client));
            }
            if factory.index_of(&ch.hub).is_none() {
                return Err(PcnError::UnknownHub { client: ch.client, hub: ch.hub });
            }
            check_amount(ch.cap_out)?;
            check_amount(ch.cap_in)?;
            FeeSchedule::new(ch.fees.base, ch.fees.prop_ppm)?;
            clients.insert(ch.client.clone(), ch);
        }
        Ok(Topology { factory, clients })
    }

    pub fn factory(&self) -> &FactoryState {
        &self.factory
    }

    pub fn hubs(&self) -> &[NodeId] {
        self.factory.hubs()
    }

    pub fn channels(&self) -> impl Iterator<Item = &ChannelState> {
        self.clients.values()
    }

    pub fn channel(&self, client: &NodeId) -> Option<&ChannelState> {
        self.clients.get(client)
    }

    pub fn is_hub(&self, node: &NodeId) -> bool {
        self.factory.index_of(node).is_some()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.clients.contains_key(node) || self.is_hub(node)
    }

    /// Factory index of the hub serving `node` (a hub serves itself).
    pub fn hub_index(&self, node: &NodeId) -> Result<usize, PcnError> {
        if let Some(ch) = self.clients.get(node) {
            return Ok(self.factory.index_of(&ch.hub).expect("validated at construction"));
        }
        self.factory.index_of(node).ok_or_else(|| PcnError::UnknownNode(node.clone()))
    }

    /// Clients attached to the hub at factory index `hub`.
    pub fn clients_of(&self, hub: usize) -> impl Iterator<Item = &ChannelState> {
        let id = &self.factory.hubs[hub];
        self.clients.values().filter(move |ch| &ch.hub == id)
    }

    /// All node ids: hubs in factory order, then clients in id order.
    pub fn nodes(&self) -> Vec<NodeId> {
        self.factory.hubs.iter().chain(self.clients.keys()).cloned().collect()
    }

    /// Every coin held in a channel or in the factory.
    pub fn total_coins(&self) -> Amount {
        self.factory.total() + self.clients.values().map(ChannelState::total).sum::<Amount>()
    }

    /// Same nodes, attachments, fee schedules and per-container totals.
    pub fn same_structure(&self, other: &Topology) -> bool {
        self.factory.hubs == other.factory.hubs
            && self.factory.fees == other.factory.fees
            && self.factory.total() == other.factory.total()
            && self.clients.len() == other.clients.len()
            && self.clients.iter().zip(&other.clients).all(|((ka, a), (kb, b))| {
                ka == kb && a.hub == b.hub && a.fees == b.fees && a.total() == b.total()
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTransaction")]
pub struct Transaction {
    id: String,
    sender: NodeId,
    recipient: NodeId,
    amount: Amount,
}

#[derive(Deserialize)]
struct RawTransaction {
    id: String,
    sender: NodeId,
    recipient: NodeId,
    amount: Amount,
}

impl TryFrom<RawTransaction> for Transaction {
    type Error = PcnError;

    fn try_from(raw: RawTransaction) -> Result<Self, Self::Error> {
        Transaction::new(raw.id, raw.sender, raw.recipient, raw.amount)
    }
}

impl Transaction {
    pub fn new(
        id: impl Into<String>,
        sender: NodeId,
        recipient: NodeId,
        amount: Amount,
    ) -> Result<Self, PcnError> {
        let id = id.into();
        if sender == recipient {
            return Err(PcnError::SelfPayment(id));
        }
        check_amount(amount)?;
        Ok(Transaction { id, sender, recipient, amount })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn sender(&self) -> &NodeId {
        &self.sender
    }

    pub fn recipient(&self) -> &NodeId {
        &self.recipient
    }

    pub fn amount(&self) -> Amount {
        self.amount
    }

    pub fn involves(&self, node: &NodeId) -> bool {
        &self.sender == node || &self.recipient == node
    }
}

/// Signed net outflow per node; absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandVector {
    entries: BTreeMap<NodeId, i64>,
}

impl DemandVector {
    pub fn zero() -> Self {
        DemandVector::default()
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (NodeId, i64)>,
    ) -> Result<Self, PcnError> {
        let mut d = DemandVector::zero();
        for (node, v) in entries {
            d.bump(node, v);
        }
        if d.entries.values().sum::<i64>() != 0 {
            return Err(PcnError::Unbalanced);
        }
        Ok(d)
    }

    fn bump(&mut self, node: NodeId, delta: i64) {
        if delta == 0 {
            return;
        }
        let v = self.get(&node) + delta;
        if v == 0 {
            self.entries.remove(&node);
        } else {
            self.entries.insert(node, v);
        }
    }

    pub fn get(&self, node: &NodeId) -> i64 {
        self.entries.get(node).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, i64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense view in the given node order.
    pub fn to_vec(&self, order: &[NodeId]) -> Vec<i64> {
        order.iter().map(|n| self.get(n)).collect()
    }
}

impl std::ops::Add for &DemandVector {
    type Output = DemandVector;

    fn add(self, rhs: &DemandVector) -> DemandVector {
        let mut out = self.clone();
        for (k, v) in rhs.iter() {
            out.bump(k.clone(), v);
        }
        out
    }
}

/// Net per client channel (positive: client pays its hub) plus the factory
/// demand per hub. Opposite directions are always netted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub client_net: BTreeMap<NodeId, i64>,
    pub factory_demand: Vec<i64>,
}

impl Flow {
    pub fn zero(num_hubs: usize) -> Self {
        Flow { client_net: BTreeMap::new(), factory_demand: vec![0; num_hubs] }
    }

    pub fn is_zero(&self) -> bool {
        self.client_net.values().all(|&v| v == 0) && self.factory_demand.iter().all(|&v| v == 0)
    }

    /// Net outflow at every node implied by this flow.
    pub fn demand(&self, topo: &Topology) -> Result<DemandVector, PcnError> {
        check_shape(topo, self)?;
        let mut entries: Vec<(NodeId, i64)> = Vec::new();
        let mut hub_net = self.factory_demand.clone();
        for (client, &net) in &self.client_net {
            let hub = topo.hub_index(client)?;
            hub_net[hub] -= net;
            entries.push((client.clone(), net));
        }
        entries.extend(topo.hubs().iter().cloned().zip(hub_net));
        DemandVector::from_entries(entries)
    }
}

/// Transition fees, one entry per channel that paid something.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeReport {
    pub per_channel: BTreeMap<NodeId, Amount>,
    pub factory: Amount,
    pub total: Amount,
}

impl FeeReport {
    pub fn merge(&mut self, other: &FeeReport) {
        for (k, v) in &other.per_channel {
            *self.per_channel.entry(k.clone()).or_insert(0) += v;
        }
        self.factory += other.factory;
        self.total += other.total;
    }
}

fn check_amount(a: Amount) -> Result<(), PcnError> {
    if a > MAX_AMOUNT {
        return Err(PcnError::AmountTooLarge(a));
    }
    Ok(())
}

fn check_shape(topo: &Topology, f: &Flow) -> Result<(), PcnError> {
    if f.factory_demand.len() != topo.factory.len() {
        return Err(PcnError::FactoryArity {
            expected: topo.factory.len(),
            got: f.factory_demand.len(),
        });
    }
    if let Some(c) = f.client_net.keys().find(|c| !topo.clients.contains_key(*c)) {
        return Err(PcnError::UnknownNode(c.clone()));
    }
    if f.factory_demand.iter().sum::<i64>() != 0 {
        return Err(PcnError::Unbalanced);
    }
    Ok(())
}

/// Sum of the demand vectors of `txns`.
pub fn aggregate_demand(txns: &[Transaction]) -> DemandVector {
    let mut d = DemandVector::zero();
    for t in txns {
        let w = t.amount as i64;
        d.bump(t.sender.clone(), w);
        d.bump(t.recipient.clone(), -w);
    }
    d
}

/// The unique netted flow routing `d`, or the first constraint it breaks.
pub fn route_demand(topo: &Topology, d: &DemandVector) -> Result<Flow, PcnError> {
    let mut flow = Flow::zero(topo.factory.len());
    let mut total = 0i64;
    for (node, v) in d.iter() {
        let hub = topo.hub_index(node)?;
        flow.factory_demand[hub] += v;
        if topo.clients.contains_key(node) {
            flow.client_net.insert(node.clone(), v);
        }
        total += v;
    }
    if total != 0 {
        return Err(PcnError::Unbalanced);
    }
    match first_violation(topo, &flow)? {
        Some(v) => Err(PcnError::Infeasible(v)),
        None => Ok(flow),
    }
}

/// Clients are checked in id order, then hubs in factory order.
pub fn first_violation(topo: &Topology, f: &Flow) -> Result<Option<Violation>, PcnError> {
    check_shape(topo, f)?;
    for (client, &net) in &f.client_net {
        let ch = &topo.clients[client];
        let need = net.unsigned_abs();
        if net > 0 && need > ch.cap_out {
            return Ok(Some(Violation::ClientOut {
                client: client.clone(),
                required: need,
                available: ch.cap_out,
            }));
        }
        if net < 0 && need > ch.cap_in {
            return Ok(Some(Violation::ClientIn {
                client: client.clone(),
                required: need,
                available: ch.cap_in,
            }));
        }
    }
    for (i, &demand) in f.factory_demand.iter().enumerate() {
        let have = topo.factory.balances[i];
        if demand > 0 && demand as u64 > have {
            return Ok(Some(Violation::Factory {
                hub: topo.factory.hubs[i].clone(),
                required: demand as u64,
                available: have,
            }));
        }
    }
    Ok(None)
}

pub fn check_flow_feasible(topo: &Topology, f: &Flow) -> Result<bool, PcnError> {
    Ok(first_violation(topo, f)?.is_none())
}

/// Shift balances by `f`. Channel totals and the factory total are preserved.
pub fn apply_flow(topo: &Topology, f: &Flow) -> Result<Topology, PcnError> {
    if let Some(v) = first_violation(topo, f)? {
        return Err(PcnError::Infeasible(v));
    }
    let mut next = topo.clone();
    for (client, &net) in &f.client_net {
        let ch = next.clients.get_mut(client).expect("checked by first_violation");
        let moved = net.unsigned_abs();
        if net > 0 {
            ch.cap_out -= moved;
            ch.cap_in += moved;
        } else {
            ch.cap_in -= moved;
            ch.cap_out += moved;
        }
    }
    for (bal, &d) in next.factory.balances.iter_mut().zip(&f.factory_demand) {
        *bal = (*bal as i64 - d) as Amount;
    }
    Ok(next)
}

/// Fee for moving one channel from state `a` to `b`. The schedule belongs to
/// the hub, which charges when it forwards, i.e. when the hub -> client
/// balance shrinks. A client spending its own side pays nothing here.
pub fn channel_transition_fee(a: &ChannelState, b: &ChannelState) -> Amount {
    a.fees.fee(a.cap_in.saturating_sub(b.cap_in))
}

/// Fee for moving the factory from `a` to `b`: every hub whose balance drops
/// charges on its own decrease.
pub fn factory_transition_fee(a: &FactoryState, b: &FactoryState) -> Amount {
    a.balances
        .iter()
        .zip(&b.balances)
        .zip(&a.fees)
        .map(|((&x, &y), fees)| fees.fee(x.saturating_sub(y)))
        .sum()
}

pub fn transition_fee(before: &Topology, after: &Topology) -> Result<FeeReport, PcnError> {
    if !before.same_structure(after) {
        return Err(PcnError::StructureMismatch);
    }
    let mut report = FeeReport::default();
    for (a, b) in before.clients.values().zip(after.clients.values()) {
        let fee = channel_transition_fee(a, b);
        if fee > 0 {
            report.per_channel.insert(a.client.clone(), fee);
        }
    }
    report.factory = factory_transition_fee(&before.factory, &after.factory);
    report.total = report.per_channel.values().sum::<Amount>() + report.factory;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequentialOutcome {
    Completed { final_topology: Topology, fees: FeeReport },
    Infeasible { index: usize, violation: Violation },
}

/// Route and apply each transaction on its own, in order.
pub fn sequential_execute(
    topo: &Topology,
    txns: &[Transaction],
) -> Result<SequentialOutcome, PcnError> {
    let mut current = topo.clone();
    let mut fees = FeeReport::default();
    for (index, t) in txns.iter().enumerate() {
        let d = aggregate_demand(std::slice::from_ref(t));
        let flow = match route_demand(&current, &d) {
            Ok(f) => f,
            Err(PcnError::Infeasible(violation)) => {
                return Ok(SequentialOutcome::Infeasible { index, violation })
            }
            Err(e) => return Err(e),
        };
        let next = apply_flow(&current, &flow)?;
        fees.merge(&transition_fee(&current, &next)?);
        current = next;
    }
    Ok(SequentialOutcome::Completed { final_topology: current, fees })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn n(s: &str) -> NodeId {
        NodeId::new(s)
    }

    pub fn tx(id: &str, from: &str, to: &str, amount: Amount) -> Transaction {
        Transaction::new(id, n(from), n(to), amount).unwrap()
    }

    pub fn fees(base: Amount, ppm: u32) -> FeeSchedule {
        FeeSchedule::new(base, ppm).unwrap()
    }

    /// Hubs with the given balances and no fees, plus `(client, hub, out, in)` channels.
    pub fn topo(hubs: &[(&str, Amount)], clients: &[(&str, &str, Amount, Amount)]) -> Topology {
        let factory =
            FactoryState::new(hubs.iter().map(|&(h, b)| (n(h), b, FeeSchedule::default())))
                .unwrap();
        Topology::new(
            factory,
            clients.iter().map(|&(c, h, o, i)| ChannelState {
                client: n(c),
                hub: n(h),
                cap_out: o,
                cap_in: i,
                fees: FeeSchedule::default(),
            }),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn aggregate_of_nothing_is_zero() {
        assert!(aggregate_demand(&[]).is_zero());
    }

    #[test]
    fn cancelling_list_shrinks_demand() {
        let order: Vec<NodeId> = ["v1", "v2", "v3", "v4", "v5"].iter().map(|s| n(s)).collect();
        let t2 = [tx("a", "v3", "v5", 5), tx("b", "v5", "v3", 2)];
        assert_eq!(aggregate_demand(&t2).to_vec(&order), vec![0, 0, 3, 0, -3]);
        let t1 = [tx("a", "v2", "v4", 5), tx("b", "v3", "v5", 5)];
        assert_eq!(aggregate_demand(&t1).to_vec(&order), vec![0, 5, 5, -5, -5]);
    }

    #[test]
    fn self_payment_rejected() {
        assert_eq!(
            Transaction::new("x", n("a"), n("a"), 1),
            Err(PcnError::SelfPayment("x".into()))
        );
    }

    #[test]
    fn zero_demand_routes_to_zero_flow() {
        let t = topo(&[("h1", 5), ("h2", 5)], &[("c1", "h1", 1, 1)]);
        let f = route_demand(&t, &DemandVector::zero()).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.factory_demand, vec![0, 0]);
    }

    #[test]
    fn single_payment_crosses_the_factory() {
        let t = topo(&[("h1", 4), ("h2", 4)], &[("c1", "h1", 4, 4), ("c5", "h2", 4, 4)]);
        let f = route_demand(&t, &aggregate_demand(&[tx("p", "c1", "c5", 4)])).unwrap();
        assert_eq!(f.client_net, BTreeMap::from([(n("c1"), 4), (n("c5"), -4)]));
        assert_eq!(f.factory_demand, vec![4, -4]);
        assert_eq!(f.demand(&t).unwrap(), aggregate_demand(&[tx("p", "c1", "c5", 4)]));
    }

    #[test]
    fn route_reports_unknown_node() {
        let t = topo(&[("h1", 4)], &[]);
        let d = DemandVector::from_entries([(n("h1"), 1), (n("zz"), -1)]).unwrap();
        assert_eq!(route_demand(&t, &d), Err(PcnError::UnknownNode(n("zz"))));
    }

    #[test]
    fn route_reports_first_violation() {
        let t = topo(&[("h1", 0), ("h2", 0)], &[("c1", "h1", 3, 0), ("c2", "h2", 0, 9)]);
        let d = aggregate_demand(&[tx("p", "c1", "c2", 5)]);
        match route_demand(&t, &d) {
            Err(PcnError::Infeasible(Violation::ClientOut { client, required, available })) => {
                assert_eq!((client, required, available), (n("c1"), 5, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn feasibility_checks() {
        let t = topo(&[("h1", 10), ("h2", 10)], &[("c1", "h1", 4, 0)]);
        assert!(check_flow_feasible(&t, &Flow::zero(2)).unwrap());
        let mut f = Flow::zero(2);
        f.client_net.insert(n("c1"), 5);
        f.factory_demand = vec![5, -5];
        assert!(!check_flow_feasible(&t, &f).unwrap());

        let f = Flow { client_net: BTreeMap::new(), factory_demand: vec![8, -8] };
        assert!(check_flow_feasible(&t, &f).unwrap());
        let tight = topo(&[("h1", 7), ("h2", 10)], &[]);
        assert!(!check_flow_feasible(&tight, &f).unwrap());

        let mut stray = Flow::zero(2);
        stray.client_net.insert(n("nobody"), 1);
        assert_eq!(check_flow_feasible(&t, &stray), Err(PcnError::UnknownNode(n("nobody"))));
    }

    #[test]
    fn apply_shifts_balances() {
        let t = topo(&[("h1", 10), ("h2", 10)], &[("c1", "h1", 10, 0)]);
        assert_eq!(apply_flow(&t, &Flow::zero(2)).unwrap(), t);

        let mut f = Flow::zero(2);
        f.client_net.insert(n("c1"), 4);
        let after = apply_flow(&t, &f).unwrap();
        let ch = after.channel(&n("c1")).unwrap();
        assert_eq!((ch.cap_out, ch.cap_in), (6, 4));

        let f = Flow { client_net: BTreeMap::new(), factory_demand: vec![8, -8] };
        let after = apply_flow(&t, &f).unwrap();
        assert_eq!(after.factory().balances(), &[2, 18]);
        assert_eq!(after.total_coins(), t.total_coins());

        let f = Flow { client_net: BTreeMap::new(), factory_demand: vec![11, -11] };
        assert!(matches!(apply_flow(&t, &f), Err(PcnError::Infeasible(_))));
    }

    fn one_hub(balance: Amount, base: Amount, ppm: u32) -> Topology {
        let factory = FactoryState::new([
            (n("h1"), balance, fees(base, ppm)),
            (n("h2"), 40 - balance, FeeSchedule::default()),
        ])
        .unwrap();
        Topology::new(factory, []).unwrap()
    }

    #[test]
    fn fee_formula() {
        let a = one_hub(20, 1, 100_000);
        assert_eq!(transition_fee(&a, &a).unwrap().total, 0);
        let c = one_hub(10, 1, 100_000);
        assert_eq!(transition_fee(&a, &c).unwrap().total, 2);
        let b = one_hub(15, 1, 100_000);
        let split = transition_fee(&a, &b).unwrap().total + transition_fee(&b, &c).unwrap().total;
        assert_eq!(split, 4);
    }

    #[test]
    fn fee_rounds_up() {
        let f = fees(0, 1);
        assert_eq!(f.fee(1), 1);
        assert_eq!(f.fee(0), 0);
        assert_eq!(fees(3, 999_999).fee(MAX_AMOUNT), 3 + MAX_AMOUNT - MAX_AMOUNT / PPM);
    }

    #[test]
    fn fee_rejects_bad_ppm() {
        assert_eq!(FeeSchedule::new(0, 1_000_000), Err(PcnError::FeeOutOfRange(1_000_000)));
    }

    #[test]
    fn transition_fee_needs_same_structure() {
        let a = topo(&[("h1", 1)], &[]);
        let b = topo(&[("h2", 1)], &[]);
        assert_eq!(transition_fee(&a, &b), Err(PcnError::StructureMismatch));
    }

    #[test]
    fn sequential_fees_accumulate() {
        let factory = FactoryState::new([(n("h1"), 0, fees(1, 100_000))]).unwrap();
        let ch = |c: &str| ChannelState {
            client: n(c),
            hub: n("h1"),
            cap_out: 50,
            cap_in: 50,
            fees: fees(1, 100_000),
        };
        let t = Topology::new(factory, [ch("c1"), ch("c2")]).unwrap();
        let txns = [tx("a", "c1", "c2", 5), tx("b", "c1", "c2", 5)];
        match sequential_execute(&t, &txns).unwrap() {
            SequentialOutcome::Completed { fees, final_topology } => {
                // only the hub's forwarding leg to c2 charges: 2 * (1 + ceil(0.5))
                assert_eq!(fees.total, 4);
                assert_eq!(fees.per_channel, BTreeMap::from([(n("c2"), 4)]));
                assert_eq!(final_topology.total_coins(), t.total_coins());
            }
            other => panic!("unexpected {other:?}"),
        }
        match sequential_execute(&t, &[]).unwrap() {
            SequentialOutcome::Completed { fees, final_topology } => {
                assert_eq!(fees.total, 0);
                assert_eq!(final_topology, t);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sequential_reports_index() {
        let t = topo(&[("h1", 3), ("h2", 0)], &[]);
        let txns = [tx("a", "h1", "h2", 2), tx("b", "h1", "h2", 2)];
        assert!(matches!(
            sequential_execute(&t, &txns).unwrap(),
            SequentialOutcome::Infeasible { index: 1, .. }
        ));
    }
}
