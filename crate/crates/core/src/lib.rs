//! Seeded simulator of history-based hedonic coalition formation.
//!
//! Agents negotiate coalitions through a two-phase agree/confirm protocol,
//! track how trustworthy their partners are, pay to leave early and rank
//! candidate coalitions according to a risk attitude. A run is a pure
//! function of its [`SimConfig`](domain::SimConfig).

pub mod cli;
pub mod domain;
pub mod engine;
pub mod error;
pub mod ledger;
pub mod metrics;
pub mod protocol;
pub mod strategy;
pub mod trace;
pub mod trust;
pub mod utility;

pub use domain::{AgentId, CoalitionSet, SimConfig};
pub use engine::{run_simulation, RunResult};
pub use error::{Error, Result};
