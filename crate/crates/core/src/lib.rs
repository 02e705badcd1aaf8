//! Transaction aggregation for hub-based payment channel networks.
//!
//! Given hubs joined by a channel factory and clients attached to them, pick
//! the largest-throughput sublist of pending payments whose aggregate can be
//! routed in one step, route it as a single netted flow and execute that flow
//! atomically.

pub mod cli;
pub mod exec;
pub mod pcn;
pub mod protocol;
pub mod solver;
