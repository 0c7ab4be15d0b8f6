//! Each agent's trust that every other agent will stay in a shared coalition.

use crate::domain::{AgentId, SimConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const INITIAL_TRUST: f64 = 0.5;

/// `n x n` matrix where entry `(i, j)` is agent i's estimate that j stays in
/// their coalition next step. Off-diagonal entries are kept in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustMatrix {
    n: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrustEventKind {
    Stayed,
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrustEvent {
    pub observer: AgentId,
    pub subject: AgentId,
    pub kind: TrustEventKind,
    pub step: u32,
}

impl TrustMatrix {
    pub fn new(n_agents: usize) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::TooFewAgents(n_agents));
        }
        let mut values = vec![INITIAL_TRUST; n_agents * n_agents];
        for i in 0..n_agents {
            values[i * n_agents + i] = 0.0;
        }
        Ok(TrustMatrix { n: n_agents, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, observer: AgentId, subject: AgentId) -> f64 {
        self.values[observer.0 * self.n + subject.0]
    }

    pub(crate) fn set(&mut self, observer: AgentId, subject: AgentId, value: f64) {
        self.values[observer.0 * self.n + subject.0] = value;
    }

    /// Rewards a stay by `trust_reward` or punishes a departure by
    /// `trust_punishment`, clamped to `[0, 1]`. Returns the new value.
    pub fn apply(&mut self, event: &TrustEvent, config: &SimConfig) -> Result<f64> {
        self.apply_with(event, config.trust_reward, config.trust_punishment)
    }

    pub fn apply_with(&mut self, event: &TrustEvent, reward: f64, punishment: f64) -> Result<f64> {
        if event.observer == event.subject {
            return Err(Error::SelfTrust(event.observer));
        }
        let old = self.get(event.observer, event.subject);
        let new = match event.kind {
            TrustEventKind::Stayed => (old + reward).min(1.0),
            TrustEventKind::Left => (old - punishment).max(0.0),
        };
        self.set(event.observer, event.subject, new);
        Ok(new)
    }

    /// Rows are observers, columns subjects; the diagonal is left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("observer");
        for j in 0..self.n {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for i in 0..self.n {
            out.push_str(&i.to_string());
            for j in 0..self.n {
                if i == j {
                    out.push(',');
                } else {
                    out.push_str(&format!(",{:.6}", self.get(AgentId(i), AgentId(j))));
                }
            }
            out.push('\n');
        }
        out
    }
}
