//! All-or-nothing execution of a flow over a simulated ledger.
//!
//! Every receiver of the flow prepares an epoch transaction carrying one
//! dust output per receiver. Senders acknowledge (sign) every epoch
//! transaction and lock their payments to its outputs. Once one fully signed
//! epoch transaction is on the ledger, receivers claim their payments; the
//! updates settle together when every payment is claimed by the deadline.
//! Anything short of that and, at the deadline, every sender is refunded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pcn::{
    apply_flow, first_violation, Amount, Flow, NodeId, PcnError, Topology, Violation,
};

/// Off-chain and on-chain steps of one run, independent of the flow size.
pub const PHASES: u8 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    #[default]
    Honest,
    /// As a sender, never sign any epoch transaction.
    WithholdSignature,
    /// As a receiver, never post an epoch transaction.
    WithholdEpochPost,
    /// As a receiver, never claim incoming payments.
    NoSpend,
    /// Stop acting from the given phase (1..=4) on.
    CrashAtPhase(u8),
}

impl Strategy {
    /// Every distinct behaviour, used for exhaustive enumeration.
    pub fn all() -> Vec<Strategy> {
        let mut v = vec![
            Strategy::Honest,
            Strategy::WithholdSignature,
            Strategy::WithholdEpochPost,
            Strategy::NoSpend,
        ];
        v.extend((1..=PHASES).map(Strategy::CrashAtPhase));
        v
    }

    fn acts_in(self, phase: u8) -> bool {
        !matches!(self, Strategy::CrashAtPhase(p) if p <= phase)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Honest => f.write_str("honest"),
            Strategy::WithholdSignature => f.write_str("withhold-signature"),
            Strategy::WithholdEpochPost => f.write_str("withhold-epoch-posts"),
            Strategy::NoSpend => f.write_str("no-spend"),
            Strategy::CrashAtPhase(p) => write!(f, "crash-at-phase-{p}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = ExecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExecError::BadStrategy(s.to_string());
        Ok(match s {
            "honest" => Strategy::Honest,
            "withhold-signature" => Strategy::WithholdSignature,
            "withhold-epoch-posts" => Strategy::WithholdEpochPost,
            "no-spend" => Strategy::NoSpend,
            _ => {
                let p: u8 = s
                    .strip_prefix("crash-at-phase-")
                    .ok_or_else(bad)?
                    .parse()
                    .map_err(|_| bad())?;
                if !(1..=PHASES).contains(&p) {
                    return Err(bad());
                }
                Strategy::CrashAtPhase(p)
            }
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("flow is not feasible: {0}")]
    InfeasibleFlow(Violation),
    #[error("no strategy for party `{0}`")]
    MissingStrategy(NodeId),
    #[error("unknown strategy `{0}`")]
    BadStrategy(String),
    #[error("timeout must be positive")]
    BadTimeout,
    #[error(transparent)]
    Pcn(#[from] PcnError),
}

/// On-chain events. Parties appear under per-run aliases only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LedgerEvent {
    EpochPosted { height: u64, poster: String, outputs: usize, escrow: Amount },
    PaymentClaimed { height: u64, receiver: String, update: usize },
    Settled { height: u64, updates: usize },
    Refunded { height: u64, updates: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub height: u64,
    pub posted: Vec<LedgerEvent>,
}

/// One edge of the flow's support. Factory updates may have several parties
/// on each side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelUpdate {
    pub edge: String,
    pub senders: Vec<NodeId>,
    pub receivers: Vec<NodeId>,
}

/// The support of `flow` as updates, in a fixed order (channels by client,
/// then the factory).
pub fn channel_updates(topo: &Topology, flow: &Flow) -> Vec<ChannelUpdate> {
    let mut out = Vec::new();
    for (client, &net) in &flow.client_net {
        let Some(ch) = topo.channel(client) else { continue };
        let (s, r) = match net.signum() {
            1 => (client.clone(), ch.hub.clone()),
            -1 => (ch.hub.clone(), client.clone()),
            _ => continue,
        };
        out.push(ChannelUpdate {
            edge: format!("channel:{client}"),
            senders: vec![s],
            receivers: vec![r],
        });
    }
    let pick = |sign: i64| -> Vec<NodeId> {
        topo.hubs()
            .iter()
            .zip(&flow.factory_demand)
            .filter(|(_, &d)| d.signum() == sign)
            .map(|(h, _)| h.clone())
            .collect()
    };
    let (senders, receivers) = (pick(1), pick(-1));
    if !senders.is_empty() {
        out.push(ChannelUpdate { edge: "factory".into(), senders, receivers });
    }
    out
}

/// Everyone who sends or receives on some update.
pub fn parties(topo: &Topology, flow: &Flow) -> BTreeSet<NodeId> {
    channel_updates(topo, flow)
        .into_iter()
        .flat_map(|u| u.senders.into_iter().chain(u.receivers))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunState {
    Pending,
    Committed,
    Refunded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub committed: bool,
    pub final_topology: Topology,
    pub events: Vec<LedgerEvent>,
    pub refunds_issued: bool,
    pub phases_run: u8,
}

/// Step-by-step execution, exposed so that invariants can be checked in
/// every intermediate state.
#[derive(Clone, Debug)]
pub struct AtomicRun {
    initial: Topology,
    target: Topology,
    updates: Vec<ChannelUpdate>,
    senders: BTreeSet<NodeId>,
    receivers: BTreeSet<NodeId>,
    strategies: BTreeMap<NodeId, Strategy>,
    aliases: BTreeMap<NodeId, String>,
    timeout: u64,
    epsilon: Amount,
    start: u64,
    phase: u8,
    ledger: Ledger,
    /// Epoch transactions by creator, with the senders that signed them.
    epoch_txs: BTreeMap<NodeId, BTreeSet<NodeId>>,
    locked: BTreeSet<NodeId>,
    poster: Option<NodeId>,
    claimed: BTreeSet<(usize, NodeId)>,
    wallets: BTreeMap<NodeId, Amount>,
    escrow: Amount,
    live: Topology,
    state: RunState,
}

impl AtomicRun {
    pub fn new(
        topo: &Topology,
        flow: &Flow,
        strategies: &BTreeMap<NodeId, Strategy>,
        timeout: u64,
        epsilon: Amount,
        seed: &[u8; 32],
    ) -> Result<Self, ExecError> {
        if timeout == 0 {
            return Err(ExecError::BadTimeout);
        }
        if let Some(v) = first_violation(topo, flow)? {
            return Err(ExecError::InfeasibleFlow(v));
        }
        let target = apply_flow(topo, flow)?;
        let updates = channel_updates(topo, flow);
        let senders: BTreeSet<NodeId> = updates.iter().flat_map(|u| u.senders.clone()).collect();
        let receivers: BTreeSet<NodeId> =
            updates.iter().flat_map(|u| u.receivers.clone()).collect();
        let mut chosen = BTreeMap::new();
        for p in senders.iter().chain(&receivers) {
            let s = strategies.get(p).ok_or_else(|| ExecError::MissingStrategy(p.clone()))?;
            chosen.insert(p.clone(), *s);
        }
        let aliases = chosen.keys().map(|p| (p.clone(), alias(seed, p))).collect();
        // each receiver can fund the dust outputs of its own epoch transaction
        let stake = epsilon * receivers.len() as Amount;
        let wallets = receivers.iter().map(|r| (r.clone(), stake)).collect();
        let state = if updates.is_empty() { RunState::Committed } else { RunState::Pending };
        Ok(AtomicRun {
            initial: topo.clone(),
            target,
            updates,
            senders,
            receivers,
            strategies: chosen,
            aliases,
            timeout,
            epsilon,
            start: 0,
            phase: 0,
            ledger: Ledger::default(),
            epoch_txs: BTreeMap::new(),
            locked: BTreeSet::new(),
            poster: None,
            claimed: BTreeSet::new(),
            wallets,
            escrow: 0,
            live: topo.clone(),
            state,
        })
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn live_topology(&self) -> &Topology {
        &self.live
    }

    pub fn deadline(&self) -> u64 {
        self.start + self.timeout
    }

    /// Channels, factory, off-chain wallets and escrowed dust together.
    pub fn total_coins(&self) -> Amount {
        self.live.total_coins() + self.wallets.values().sum::<Amount>() + self.escrow
    }

    fn strategy(&self, p: &NodeId) -> Strategy {
        self.strategies[p]
    }

    /// Run the next phase. Returns false once all phases have run.
    pub fn step(&mut self) -> bool {
        if self.phase == PHASES {
            return false;
        }
        self.phase += 1;
        if self.state != RunState::Pending {
            return true;
        }
        match self.phase {
            1 => {
                for r in &self.receivers {
                    if self.strategies[r].acts_in(1) {
                        self.epoch_txs.insert(r.clone(), BTreeSet::new());
                    }
                }
            }
            2 => {
                for s in &self.senders {
                    let st = self.strategies[s];
                    if st.acts_in(2) && st != Strategy::WithholdSignature {
                        for sigs in self.epoch_txs.values_mut() {
                            sigs.insert(s.clone());
                        }
                    }
                }
            }
            3 => {
                self.locked = self
                    .senders
                    .iter()
                    .filter(|s| self.strategies[s].acts_in(3))
                    .cloned()
                    .collect();
            }
            _ => self.post_and_claim(),
        }
        true
    }

    fn post_and_claim(&mut self) {
        let height = self.start + 1;
        self.advance_to(height);
        if height > self.deadline() {
            return;
        }
        let poster = self.epoch_txs.iter().find_map(|(creator, sigs)| {
            let st = self.strategy(creator);
            let ready = sigs.len() == self.senders.len();
            (ready && st.acts_in(4) && st != Strategy::WithholdEpochPost).then(|| creator.clone())
        });
        let Some(poster) = poster else { return };
        let stake = self.epsilon * self.receivers.len() as Amount;
        *self.wallets.get_mut(&poster).expect("posters are receivers") -= stake;
        self.escrow = stake;
        self.ledger.posted.push(LedgerEvent::EpochPosted {
            height,
            poster: self.aliases[&poster].clone(),
            outputs: self.receivers.len(),
            escrow: stake,
        });
        self.poster = Some(poster);

        for (i, u) in self.updates.iter().enumerate() {
            if !u.senders.iter().all(|s| self.locked.contains(s)) {
                continue;
            }
            for r in &u.receivers {
                let st = self.strategies[r];
                if st.acts_in(4) && st != Strategy::NoSpend {
                    self.claimed.insert((i, r.clone()));
                    self.ledger.posted.push(LedgerEvent::PaymentClaimed {
                        height,
                        receiver: self.aliases[r].clone(),
                        update: i,
                    });
                }
            }
        }
        let total_claims: usize = self.updates.iter().map(|u| u.receivers.len()).sum();
        if self.claimed.len() == total_claims {
            self.live = self.target.clone();
            self.release_escrow();
            self.state = RunState::Committed;
            self.ledger.posted.push(LedgerEvent::Settled { height, updates: self.updates.len() });
        }
    }

    fn release_escrow(&mut self) {
        if let Some(p) = &self.poster {
            *self.wallets.get_mut(p).expect("posters are receivers") += self.escrow;
            self.escrow = 0;
        }
    }

    fn advance_to(&mut self, height: u64) {
        self.ledger.height = self.ledger.height.max(height);
        if self.state == RunState::Pending && self.ledger.height > self.deadline() {
            self.live = self.initial.clone();
            self.release_escrow();
            self.state = RunState::Refunded;
            self.ledger.posted.push(LedgerEvent::Refunded {
                height: self.ledger.height,
                updates: self.updates.len(),
            });
        }
    }

    /// Move the ledger forward; passing the deadline while still pending
    /// triggers the refunds.
    pub fn advance_ledger(&mut self, by: u64) {
        self.advance_to(self.ledger.height + by);
    }

    pub fn finish(mut self) -> ExecutionOutcome {
        while self.step() {}
        if self.state == RunState::Pending {
            let past = self.deadline() + 1 - self.ledger.height;
            self.advance_ledger(past);
        }
        ExecutionOutcome {
            committed: self.state == RunState::Committed,
            final_topology: self.live,
            events: self.ledger.posted,
            refunds_issued: self.state == RunState::Refunded,
            phases_run: self.phase,
        }
    }
}

fn alias(seed: &[u8; 32], party: &NodeId) -> String {
    let mut h = Sha256::new();
    h.update(b"alias");
    h.update(seed);
    h.update(party.as_str().as_bytes());
    hex::encode(&h.finalize()[..6])
}

/// Run every phase and, if needed, the timeout.
pub fn execute_atomic(
    topo: &Topology,
    flow: &Flow,
    strategies: &BTreeMap<NodeId, Strategy>,
    timeout: u64,
    epsilon: Amount,
    seed: &[u8; 32],
) -> Result<ExecutionOutcome, ExecError> {
    Ok(AtomicRun::new(topo, flow, strategies, timeout, epsilon, seed)?.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcn::fixtures::{n, topo, tx};
    use crate::pcn::{aggregate_demand, route_demand};

    fn setup() -> (Topology, Flow) {
        let t = topo(&[("h1", 10), ("h2", 10)], &[("a", "h1", 10, 10), ("b", "h2", 10, 10)]);
        let f = route_demand(&t, &aggregate_demand(&[tx("t1", "a", "b", 4)])).unwrap();
        (t, f)
    }

    fn honest(t: &Topology, f: &Flow) -> BTreeMap<NodeId, Strategy> {
        parties(t, f).into_iter().map(|p| (p, Strategy::Honest)).collect()
    }

    fn run(t: &Topology, f: &Flow, s: &BTreeMap<NodeId, Strategy>) -> ExecutionOutcome {
        execute_atomic(t, f, s, 10, 1, &[0; 32]).unwrap()
    }

    #[test]
    fn updates_and_parties() {
        let (t, f) = setup();
        let u = channel_updates(&t, &f);
        assert_eq!(u.len(), 3);
        assert_eq!(u[2].senders, vec![n("h1")]);
        assert_eq!(u[2].receivers, vec![n("h2")]);
        assert_eq!(parties(&t, &f).len(), 4);
    }

    #[test]
    fn honest_commits() {
        let (t, f) = setup();
        let out = run(&t, &f, &honest(&t, &f));
        assert!(out.committed);
        assert!(!out.refunds_issued);
        assert_eq!(out.final_topology, apply_flow(&t, &f).unwrap());
        assert_eq!(out.phases_run, PHASES);
    }

    #[test]
    fn withheld_signature_refunds() {
        let (t, f) = setup();
        let mut s = honest(&t, &f);
        s.insert(n("a"), Strategy::WithholdSignature);
        let out = run(&t, &f, &s);
        assert!(!out.committed);
        assert!(out.refunds_issued);
        assert_eq!(out.final_topology, t);
        assert!(!out.events.iter().any(|e| matches!(e, LedgerEvent::EpochPosted { .. })));
    }

    #[test]
    fn one_receiver_not_claiming_refunds_everyone() {
        let (t, f) = setup();
        let mut s = honest(&t, &f);
        s.insert(n("b"), Strategy::NoSpend);
        let out = run(&t, &f, &s);
        assert!(!out.committed);
        assert_eq!(out.final_topology, t);
        assert!(out.events.iter().any(|e| matches!(e, LedgerEvent::PaymentClaimed { .. })));
    }

    #[test]
    fn one_willing_poster_suffices() {
        let (t, f) = setup();
        let mut s = honest(&t, &f);
        s.insert(n("h1"), Strategy::WithholdEpochPost);
        assert!(run(&t, &f, &s).committed);
    }

    #[test]
    fn missing_strategy() {
        let (t, f) = setup();
        let mut s = honest(&t, &f);
        s.remove(&n("b"));
        assert_eq!(
            execute_atomic(&t, &f, &s, 10, 1, &[0; 32]).unwrap_err(),
            ExecError::MissingStrategy(n("b"))
        );
    }

    #[test]
    fn infeasible_flow_rejected() {
        let (t, f) = setup();
        let mut big = f.clone();
        big.client_net.insert(n("a"), 11);
        assert!(matches!(
            execute_atomic(&t, &big, &honest(&t, &f), 10, 1, &[0; 32]),
            Err(ExecError::InfeasibleFlow(_)) | Err(ExecError::Pcn(_))
        ));
    }

    #[test]
    fn coins_conserved_at_every_step() {
        let (t, f) = setup();
        for st in Strategy::all() {
            let mut s = honest(&t, &f);
            s.insert(n("h2"), st);
            let mut r = AtomicRun::new(&t, &f, &s, 3, 2, &[1; 32]).unwrap();
            let total = r.total_coins();
            while r.step() {
                assert_eq!(r.total_coins(), total);
            }
            for _ in 0..5 {
                r.advance_ledger(1);
                assert_eq!(r.total_coins(), total);
            }
        }
    }

    #[test]
    fn ledger_advance() {
        let (t, f) = setup();
        let mut r = AtomicRun::new(&t, &f, &honest(&t, &f), 5, 1, &[0; 32]).unwrap();
        let before = r.ledger().clone();
        r.advance_ledger(0);
        assert_eq!(r.ledger(), &before);
        r.advance_ledger(6);
        assert_eq!(r.state(), RunState::Refunded);
        assert!(matches!(r.ledger().posted.last(), Some(LedgerEvent::Refunded { .. })));

        let mut done = AtomicRun::new(&t, &f, &honest(&t, &f), 5, 1, &[0; 32]).unwrap();
        while done.step() {}
        assert_eq!(done.state(), RunState::Committed);
        let events = done.ledger().posted.len();
        done.advance_ledger(100);
        assert_eq!(done.ledger().posted.len(), events);
    }

    #[test]
    fn zero_flow_commits_without_events() {
        let (t, _) = setup();
        let out = run(&t, &Flow::zero(2), &BTreeMap::new());
        assert!(out.committed);
        assert!(out.events.is_empty());
        assert_eq!(out.final_topology, t);
    }

    #[test]
    fn strategy_strings_round_trip() {
        for s in Strategy::all() {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("crash-at-phase-5".parse::<Strategy>().is_err());
        assert!("lazy".parse::<Strategy>().is_err());
    }

    #[test]
    fn aliases_hide_names() {
        let (t, f) = setup();
        let out = run(&t, &f, &honest(&t, &f));
        let text = serde_json::to_string(&out.events).unwrap();
        for p in ["\"a\"", "\"b\"", "h1", "h2"] {
            assert!(!text.contains(p), "{p} leaked");
        }
    }
}
