//! Random instance generators and independent oracles shared by the
//! integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;
use txagg::cli::Scenario;
use txagg::exec::Strategy;
use txagg::pcn::{Amount, ChannelState, FactoryState, FeeSchedule, NodeId, Topology, Transaction};
use txagg::protocol::ProtocolConfig;
use txagg::solver::SolverChoice;

pub fn n(s: &str) -> NodeId {
    NodeId::new(s)
}

pub fn tx(id: &str, from: &str, to: &str, amount: Amount) -> Transaction {
    Transaction::new(id, n(from), n(to), amount).unwrap()
}

pub fn random_fees(rng: &mut impl Rng) -> FeeSchedule {
    FeeSchedule::new(rng.gen_range(0..=3), rng.gen_range(0..=20_000)).unwrap()
}

/// `hubs` hubs with balances up to `max_balance` and `clients` clients with
/// capacities up to `max_cap`.
pub fn random_topology(
    rng: &mut impl Rng,
    hubs: usize,
    clients: usize,
    max_balance: Amount,
    max_cap: Amount,
    with_fees: bool,
) -> Topology {
    let fees = |rng: &mut _| if with_fees { random_fees(rng) } else { FeeSchedule::default() };
    let factory = FactoryState::new(
        (1..=hubs)
            .map(|i| (NodeId::new(format!("h{i}")), rng.gen_range(0..=max_balance), fees(rng)))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let channels: Vec<ChannelState> = (1..=clients)
        .map(|i| ChannelState {
            client: NodeId::new(format!("c{i}")),
            hub: NodeId::new(format!("h{}", rng.gen_range(1..=hubs))),
            cap_out: rng.gen_range(0..=max_cap),
            cap_in: rng.gen_range(0..=max_cap),
            fees: fees(rng),
        })
        .collect();
    Topology::new(factory, channels).unwrap()
}

/// `k` payments between distinct uniformly chosen nodes.
pub fn random_txns(
    rng: &mut impl Rng,
    topo: &Topology,
    k: usize,
    max_amount: Amount,
) -> Vec<Transaction> {
    let nodes = topo.nodes();
    (0..k)
        .map(|i| {
            let s = nodes.choose(rng).unwrap().clone();
            let r = loop {
                let r = nodes.choose(rng).unwrap();
                if *r != s {
                    break r.clone();
                }
            };
            Transaction::new(format!("t{i:02}"), s, r, rng.gen_range(0..=max_amount)).unwrap()
        })
        .collect()
}

/// A small scenario with fees, random configuration and, sometimes, a
/// misbehaving party.
pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let hubs = rng.gen_range(2..=3);
    let clients = rng.gen_range(2..=5);
    let topology = random_topology(rng, hubs, clients, 30, 30, true);
    let k = rng.gen_range(0..=8);
    let txns = random_txns(rng, &topology, k, 12);
    let mut seed = [0u8; 32];
    rng.fill(&mut seed);
    let solver = *[
        SolverChoice::Dp,
        SolverChoice::Brute,
        SolverChoice::Greedy,
        SolverChoice::DpBounded { radius: 10 },
    ]
    .choose(rng)
    .unwrap();
    let config = ProtocolConfig {
        num_delegates: rng.gen_range(1..=hubs),
        seed,
        pad_to: Scenario::min_pad(&txns) + rng.gen_range(0..=2),
        solver,
        timeout: rng.gen_range(1..=10),
        epsilon: rng.gen_range(0..=2),
        ..Default::default()
    };
    let mut adversary = BTreeMap::new();
    if rng.gen_bool(0.3) {
        let node = topology.nodes().choose(rng).unwrap().clone();
        adversary.insert(node, *Strategy::all().choose(rng).unwrap());
    }
    Scenario { topology, txns, config, adversary }
}

/// Brute force over all subsets with the same tie-break as the library:
/// highest throughput, then the lexicographically best inclusion vector
/// when transactions are read in id order.
pub fn oracle_optimum(topo: &Topology, txns: &[Transaction]) -> (Amount, Vec<String>) {
    let hubs = topo.hubs();
    let mut order: Vec<usize> = (0..txns.len()).collect();
    order.sort_by(|&a, &b| txns[a].id().cmp(txns[b].id()));
    let mut best: Option<(Amount, Vec<bool>)> = None;
    for mask in 0u32..(1 << txns.len()) {
        let mut demand = vec![0i64; hubs.len()];
        let mut w = 0;
        for (j, t) in txns.iter().enumerate() {
            if mask & (1 << j) != 0 {
                demand[topo.hub_index(t.sender()).unwrap()] += t.amount() as i64;
                demand[topo.hub_index(t.recipient()).unwrap()] -= t.amount() as i64;
                w += t.amount();
            }
        }
        let fits = demand.iter().zip(topo.factory().balances()).all(|(&d, &b)| d <= b as i64);
        if !fits {
            continue;
        }
        let key: Vec<bool> = order.iter().map(|&j| mask & (1 << j) != 0).collect();
        let better = match &best {
            None => true,
            Some((bw, bk)) => (w, &key) > (*bw, bk),
        };
        if better {
            best = Some((w, key));
        }
    }
    let (w, key) = best.unwrap();
    let ids = order.iter().zip(&key).filter(|(_, &on)| on).map(|(&j, _)| txns[j].id().to_string());
    let mut ids: Vec<String> = ids.collect();
    ids.sort();
    (w, ids)
}

/// Does some subset of `items` sum to `target`?
pub fn subset_sum_exists(target: Amount, items: &[Amount]) -> bool {
    (0u32..(1 << items.len())).any(|mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| v)
            .sum::<Amount>()
            == target
    })
}

/// Every JSON document obtained by changing exactly one leaf of `doc`,
/// skipping leaves whose key is in `skip`.
pub fn leaf_mutations(doc: &Value, skip: &[&str]) -> Vec<(String, Value)> {
    fn walk(v: &Value, path: &mut Vec<String>, skip: &[&str], out: &mut Vec<Vec<String>>) {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    if skip.contains(&k.as_str()) {
                        continue;
                    }
                    path.push(k.clone());
                    walk(child, path, skip, out);
                    path.pop();
                }
            }
            Value::Array(a) => {
                for (i, child) in a.iter().enumerate() {
                    path.push(i.to_string());
                    walk(child, path, skip, out);
                    path.pop();
                }
            }
            _ => out.push(path.clone()),
        }
    }
    let mut paths = Vec::new();
    walk(doc, &mut Vec::new(), skip, &mut paths);
    paths
        .into_iter()
        .map(|p| {
            let pointer = format!("/{}", p.join("/"));
            let mut mutated = doc.clone();
            let leaf = mutated.pointer_mut(&pointer).unwrap();
            *leaf = match leaf.take() {
                Value::Bool(b) => Value::Bool(!b),
                Value::Number(x) if x.is_i64() => Value::from(x.as_i64().unwrap() + 1),
                Value::Number(x) if x.is_u64() => Value::from(x.as_u64().unwrap() + 1),
                Value::Number(x) => Value::from(x.as_f64().unwrap() + 1.0),
                Value::String(s) => Value::String(format!("{s}x")),
                Value::Null => Value::from(0),
                other => other,
            };
            (pointer, mutated)
        })
        .collect()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}
