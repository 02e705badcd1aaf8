use crate::pcn::{Amount, FactoryState, FeeSchedule, NodeId, Topology, Transaction};

use super::SolverError;

/// Two hubs with empty factory balances, one transaction per item from the
/// first hub to the second and one transaction of `target` back. A nonempty
/// feasible selection must net to zero, so it exists iff some items sum to
/// `target`.
#[derive(Clone, Debug)]
pub struct SubsetSumInstance {
    pub topology: Topology,
    pub txns: Vec<Transaction>,
}

pub const TARGET_TXN_ID: &str = "target";

pub fn subset_sum_reduce(
    target: Amount,
    items: &[Amount],
) -> Result<SubsetSumInstance, SolverError> {
    if target == 0 {
        return Err(SolverError::InvalidInput("target must be positive".into()));
    }
    if items.is_empty() || items.contains(&0) {
        return Err(SolverError::InvalidInput("items must be nonempty and positive".into()));
    }
    let (a, b) = (NodeId::new("h1"), NodeId::new("h2"));
    let factory = FactoryState::new([
        (a.clone(), 0, FeeSchedule::default()),
        (b.clone(), 0, FeeSchedule::default()),
    ])?;
    let topology = Topology::new(factory, [])?;
    let width = items.len().to_string().len();
    let mut txns = items
        .iter()
        .enumerate()
        .map(|(i, &amt)| {
            Transaction::new(format!("item{:0width$}", i + 1), a.clone(), b.clone(), amt)
        })
        .collect::<Result<Vec<_>, _>>()?;
    txns.push(Transaction::new(TARGET_TXN_ID, b, a, target)?);
    Ok(SubsetSumInstance { topology, txns })
}
