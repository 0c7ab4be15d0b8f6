use crate::domain::{AgentId, ConfigViolation};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent {agent} is not a member of coalition {coalition}")]
    NotAMember { agent: AgentId, coalition: String },

    #[error("a coalition must contain at least one agent")]
    EmptyCoalition,

    #[error("a proposal needs at least one solicited agent besides the initiator")]
    NoSolicitedAgents,

    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),

    #[error("agent {0} cannot hold a trust record about itself")]
    SelfTrust(AgentId),

    #[error("preference score requires positive utility, got {0}")]
    NonPositiveUtility(f64),

    #[error("formation probability needs at least one interest degree")]
    EmptyDeltas,

    #[error("illegal proposal phase transition {from:?} -> {to:?}")]
    IllegalTransition {
        from: crate::protocol::Phase,
        to: crate::protocol::Phase,
    },

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("unknown configuration key `{0}`")]
    UnknownConfigKey(String),

    #[error("malformed override `{0}`, expected key=value")]
    MalformedOverride(String),

    #[error("runs disagree on step count: expected {expected}, run {run} has {found}")]
    MismatchedRuns {
        run: usize,
        expected: usize,
        found: usize,
    },

    #[error("invariant violated at step {step}: {message}")]
    Invariant { step: u32, message: String },

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[ConfigViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
