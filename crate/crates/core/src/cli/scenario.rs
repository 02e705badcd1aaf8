use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::exec::Strategy;
use crate::pcn::{Amount, ChannelState, FactoryState, FeeSchedule, NodeId, Topology, Transaction};
use crate::protocol::ProtocolConfig;
use crate::solver::{SolverChoice, DEFAULT_STATE_LIMIT};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubEntry {
    pub id: String,
    pub factory_balance: Amount,
    #[serde(default)]
    pub fee_base: Amount,
    #[serde(default)]
    pub fee_prop_ppm: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientEntry {
    pub id: String,
    pub hub: String,
    pub cap_out: Amount,
    pub cap_in: Amount,
    #[serde(default)]
    pub fee_base: Amount,
    #[serde(default)]
    pub fee_prop_ppm: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxnEntry {
    pub id: String,
    pub sender: String,
    pub recipient: String,
    pub amount: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEntry {
    pub num_delegates: usize,
    pub seed_hex: String,
    pub pad_to: usize,
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Amount>,
    pub timeout: u64,
    pub epsilon: Amount,
}

/// The on-disk scenario document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub hubs: Vec<HubEntry>,
    pub clients: Vec<ClientEntry>,
    pub transactions: Vec<TxnEntry>,
    pub config: ConfigEntry,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub adversary: BTreeMap<String, String>,
}

/// A scenario with every reference resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub topology: Topology,
    pub txns: Vec<Transaction>,
    pub config: ProtocolConfig,
    pub adversary: BTreeMap<NodeId, Strategy>,
}

pub fn parse_seed(hex_str: &str) -> Result<[u8; 32], CliError> {
    let bytes = hex::decode(hex_str).map_err(|e| CliError::Invalid(format!("seed: {e}")))?;
    bytes.try_into().map_err(|_| CliError::Invalid("seed must be 64 hex characters".into()))
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenarios serialize");
        s.push('\n');
        s
    }

    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let factory = FactoryState::new(
            self.hubs
                .iter()
                .map(|h| {
                    let fees = FeeSchedule::new(h.fee_base, h.fee_prop_ppm)?;
                    Ok((NodeId::new(&h.id), h.factory_balance, fees))
                })
                .collect::<Result<Vec<_>, crate::pcn::PcnError>>()
                .map_err(invalid)?,
        )
        .map_err(invalid)?;
        let channels = self
            .clients
            .iter()
            .map(|c| {
                Ok(ChannelState {
                    client: NodeId::new(&c.id),
                    hub: NodeId::new(&c.hub),
                    cap_out: c.cap_out,
                    cap_in: c.cap_in,
                    fees: FeeSchedule::new(c.fee_base, c.fee_prop_ppm)?,
                })
            })
            .collect::<Result<Vec<_>, crate::pcn::PcnError>>()
            .map_err(invalid)?;
        let topology = Topology::new(factory, channels).map_err(invalid)?;

        let mut txns = Vec::with_capacity(self.transactions.len());
        for t in &self.transactions {
            let (s, r) = (NodeId::new(&t.sender), NodeId::new(&t.recipient));
            for end in [&s, &r] {
                if !topology.contains(end) {
                    return Err(CliError::Invalid(format!(
                        "transaction `{}`: unknown node `{end}`",
                        t.id
                    )));
                }
            }
            txns.push(Transaction::new(t.id.clone(), s, r, t.amount).map_err(invalid)?);
        }

        let c = &self.config;
        let solver = if c.solver.contains(':') {
            c.solver.parse()
        } else {
            SolverChoice::parse(&c.solver, c.radius)
        }
        .map_err(invalid)?;
        let config = ProtocolConfig {
            num_delegates: c.num_delegates,
            seed: parse_seed(&c.seed_hex)?,
            pad_to: c.pad_to,
            solver,
            timeout: c.timeout,
            epsilon: c.epsilon,
            state_limit: DEFAULT_STATE_LIMIT,
        };
        if config.timeout == 0 {
            return Err(CliError::Invalid("timeout must be positive".into()));
        }

        let mut adversary = BTreeMap::new();
        for (party, strategy) in &self.adversary {
            let node = NodeId::new(party);
            if !topology.contains(&node) {
                return Err(CliError::Invalid(format!("adversary: unknown node `{party}`")));
            }
            adversary.insert(node, strategy.parse().map_err(invalid)?);
        }
        Ok(Scenario { topology, txns, config, adversary })
    }
}

impl Scenario {
    /// The document that resolves back to this scenario.
    pub fn to_file(&self) -> ScenarioFile {
        let f = self.topology.factory();
        let hubs = f
            .hubs()
            .iter()
            .zip(f.balances())
            .zip(f.fees())
            .map(|((id, &b), fees)| HubEntry {
                id: id.to_string(),
                factory_balance: b,
                fee_base: fees.base,
                fee_prop_ppm: fees.prop_ppm,
            })
            .collect();
        let clients = self
            .topology
            .channels()
            .map(|c| ClientEntry {
                id: c.client.to_string(),
                hub: c.hub.to_string(),
                cap_out: c.cap_out,
                cap_in: c.cap_in,
                fee_base: c.fees.base,
                fee_prop_ppm: c.fees.prop_ppm,
            })
            .collect();
        let transactions = self
            .txns
            .iter()
            .map(|t| TxnEntry {
                id: t.id().to_string(),
                sender: t.sender().to_string(),
                recipient: t.recipient().to_string(),
                amount: t.amount(),
            })
            .collect();
        let (solver, radius) = match self.config.solver {
            SolverChoice::DpBounded { radius } => ("dp-bounded".to_string(), Some(radius)),
            other => (other.name().to_string(), None),
        };
        let config = ConfigEntry {
            num_delegates: self.config.num_delegates,
            seed_hex: hex::encode(self.config.seed),
            pad_to: self.config.pad_to,
            solver,
            radius,
            timeout: self.config.timeout,
            epsilon: self.config.epsilon,
        };
        let adversary =
            self.adversary.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ScenarioFile { hubs, clients, transactions, config, adversary }
    }

    /// Smallest padding length that accepts every user's list.
    pub fn min_pad(txns: &[Transaction]) -> usize {
        let mut per: BTreeMap<&NodeId, usize> = BTreeMap::new();
        for t in txns {
            *per.entry(t.sender()).or_default() += 1;
        }
        per.values().copied().max().unwrap_or(0)
    }
}
