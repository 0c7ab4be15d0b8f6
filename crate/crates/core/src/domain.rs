//! Identifiers, configuration and value types shared by every module.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of an agent in `[0, n_agents)`. Ordering follows the index and is
/// used for deterministic iteration and tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Non-empty set of agents, stored sorted and without duplicates so that
/// equality is independent of construction order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<AgentId>", into = "Vec<AgentId>")]
pub struct CoalitionSet(Vec<AgentId>);

impl CoalitionSet {
    pub fn new(members: impl IntoIterator<Item = AgentId>) -> Result<Self> {
        let mut members: Vec<AgentId> = members.into_iter().collect();
        if members.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        members.sort_unstable();
        members.dedup();
        Ok(CoalitionSet(members))
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| AgentId(i)))
    }

    pub fn singleton(agent: AgentId) -> Self {
        CoalitionSet(vec![agent])
    }

    pub fn members(&self) -> &[AgentId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + Clone + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.0.binary_search(&agent).is_ok()
    }

    pub fn max_member(&self) -> AgentId {
        *self.0.last().expect("coalition sets are non-empty")
    }

    /// Copy of this set with `agent` added.
    pub fn with(&self, agent: AgentId) -> Self {
        let mut members = self.0.clone();
        if let Err(pos) = members.binary_search(&agent) {
            members.insert(pos, agent);
        }
        CoalitionSet(members)
    }

    /// Copy of this set with `agent` removed, or `None` if it would be empty.
    pub fn without(&self, agent: AgentId) -> Option<Self> {
        let members: Vec<AgentId> = self.0.iter().copied().filter(|&a| a != agent).collect();
        if members.is_empty() {
            None
        } else {
            Some(CoalitionSet(members))
        }
    }

    pub(crate) fn require_member(&self, agent: AgentId) -> Result<()> {
        if self.contains(agent) {
            Ok(())
        } else {
            Err(Error::NotAMember {
                agent,
                coalition: self.to_string(),
            })
        }
    }
}

impl TryFrom<Vec<AgentId>> for CoalitionSet {
    type Error = Error;

    fn try_from(members: Vec<AgentId>) -> Result<Self> {
        CoalitionSet::new(members)
    }
}

impl From<CoalitionSet> for Vec<AgentId> {
    fn from(set: CoalitionSet) -> Self {
        set.0
    }
}

impl fmt::Display for CoalitionSet {
    /// Dot-separated member ids, e.g. `0.4.7`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskAttitude {
    Seeking,
    Averse,
    Neutral,
}

impl RiskAttitude {
    pub const ALL: [RiskAttitude; 3] = [Self::Seeking, Self::Averse, Self::Neutral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Seeking => "seeking",
            Self::Averse => "averse",
            Self::Neutral => "neutral",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponderType {
    Early,
    Lazy,
    Random,
}

/// An agent's private estimate of the interaction between every ordered pair
/// of agents, itself included. Row-major `n x n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionTable {
    n: usize,
    values: Vec<f64>,
}

impl InteractionTable {
    pub const MIN: f64 = -100.0;
    pub const MAX: f64 = 100.0;

    pub fn zeros(n: usize) -> Self {
        InteractionTable {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        assert_eq!(values.len(), n * n, "interaction table must be square");
        InteractionTable { n, values }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: AgentId, b: AgentId) -> f64 {
        self.values[a.0 * self.n + b.0]
    }

    pub fn set(&mut self, a: AgentId, b: AgentId, value: f64) {
        self.values[a.0 * self.n + b.0] = value;
    }

    pub fn in_range(&self) -> bool {
        self.values
            .iter()
            .all(|v| (Self::MIN..=Self::MAX).contains(v))
    }
}

/// Immutable per-agent parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub honesty: f64,
    pub risk_attitude: RiskAttitude,
    pub responder_type: ResponderType,
    pub table: InteractionTable,
}

/// How risk attitudes are assigned across the population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMix {
    #[serde(rename = "all-seeking")]
    AllSeeking,
    #[serde(rename = "all-averse")]
    AllAverse,
    #[serde(rename = "all-neutral")]
    AllNeutral,
    #[serde(rename = "equal-thirds-with-remainder-by-id")]
    EqualThirds,
}

impl RiskMix {
    /// Attitude of agent `id` in a population of `n`.
    ///
    /// For the mixed population the `n % 3` lowest ids are the remainder and
    /// cycle Seeking, Averse; the rest cycle Seeking, Averse, Neutral.
    pub fn attitude_of(self, id: AgentId, n: usize) -> RiskAttitude {
        match self {
            RiskMix::AllSeeking => RiskAttitude::Seeking,
            RiskMix::AllAverse => RiskAttitude::Averse,
            RiskMix::AllNeutral => RiskAttitude::Neutral,
            RiskMix::EqualThirds => {
                let remainder = n % 3;
                if id.0 < remainder {
                    RiskAttitude::ALL[id.0]
                } else {
                    RiskAttitude::ALL[(id.0 - remainder) % 3]
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponderMix {
    /// Each agent draws its responder type uniformly from the seeded stream.
    UniformRandom,
    AllEarly,
    AllLazy,
    AllRandom,
}

/// Which ledger entries count as an agent's "gained utility".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainedUtility {
    /// Accruals plus every transfer and cost.
    LedgerTotal,
    /// Per-step coalition utility only.
    AccrualOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_steps: u32,
    pub n_runs: usize,
    pub seed: u64,
    pub bad_reputation_coeff: f64,
    pub honesty_min: f64,
    pub honesty_max: f64,
    pub response_deadline: u32,
    pub confirm_deadline: u32,
    pub obligatory_stay: u32,
    pub leave_penalty: f64,
    pub enroll_fee: f64,
    pub initiator_reward_share: f64,
    pub comm_cost: f64,
    pub step_coeff: f64,
    pub trust_reward: f64,
    pub trust_punishment: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_proposals_per_step: usize,
    pub max_confirms_per_step: usize,
    pub candidate_random_count: usize,
    pub candidate_sent_count: usize,
    pub candidate_recv_count: usize,
    pub random_coalition_size_max: usize,
    pub risk_mix: RiskMix,
    pub responder_mix: ResponderMix,
    pub gained_utility: GainedUtility,
    /// Initiators already in a coalition only propose candidates that pass
    /// their own leave criterion.
    pub initiator_leave_check: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 20,
            n_steps: 100,
            n_runs: 20,
            seed: 0,
            bad_reputation_coeff: 0.15,
            honesty_min: 0.0,
            honesty_max: 0.35,
            response_deadline: 3,
            confirm_deadline: 3,
            obligatory_stay: 12,
            leave_penalty: 80.0,
            enroll_fee: 5.0,
            initiator_reward_share: 0.5,
            comm_cost: 50.0,
            step_coeff: 0.9,
            trust_reward: 0.01,
            trust_punishment: 0.05,
            alpha: 2.0,
            beta: 0.75,
            max_proposals_per_step: 3,
            max_confirms_per_step: 1,
            candidate_random_count: 15,
            candidate_sent_count: 5,
            candidate_recv_count: 5,
            random_coalition_size_max: 4,
            risk_mix: RiskMix::EqualThirds,
            responder_mix: ResponderMix::UniformRandom,
            gained_utility: GainedUtility::LedgerTotal,
            initiator_leave_check: true,
        }
    }
}

#[cfg(test)]
impl SimConfig {
    /// Round-number parameters the hand-computed unit tests are written against.
    pub(crate) fn round_numbers() -> Self {
        SimConfig {
            obligatory_stay: 5,
            leave_penalty: 50.0,
            enroll_fee: 10.0,
            comm_cost: 1.0,
            step_coeff: 0.5,
            beta: 0.5,
            max_proposals_per_step: 1,
            max_confirms_per_step: 2,
            candidate_random_count: 10,
            random_coalition_size_max: 5,
            ..SimConfig::default()
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Applies one `key=value` override. The value is read as JSON when it
    /// parses as such and as a bare string otherwise, so `risk_mix=all-averse`
    /// and `alpha=3` both work.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::MalformedOverride(spec.to_owned()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::MalformedOverride(spec.to_owned()));
        }
        let mut doc = serde_json::to_value(&*self)?;
        let fields = doc.as_object_mut().expect("config serializes to an object");
        if !fields.contains_key(key) {
            return Err(Error::UnknownConfigKey(key.to_owned()));
        }
        let raw = raw.trim();
        let value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_owned()));
        fields.insert(key.to_owned(), value);
        *self = serde_json::from_value(doc)?;
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        let violations = validate_config(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every agent holds an `n x n` interaction table, so memory grows with the
/// cube of the population.
pub const MAX_AGENTS: usize = 256;

/// Every violated configuration invariant. Empty means the config is usable.
pub fn validate_config(config: &SimConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            out.push(ConfigViolation { field, message });
        }
    };

    check(
        (2..=MAX_AGENTS).contains(&config.n_agents),
        "n_agents",
        format!("must lie in [2, {MAX_AGENTS}], got {}", config.n_agents),
    );
    check(
        config.step_coeff > 0.0 && config.step_coeff < 1.0,
        "step_coeff",
        format!("must lie in (0, 1), got {}", config.step_coeff),
    );
    check(
        config.alpha > 1.0 && config.alpha.is_finite(),
        "alpha",
        format!("must be greater than 1, got {}", config.alpha),
    );
    check(
        config.beta > 0.0 && config.beta < 1.0,
        "beta",
        format!("must lie in (0, 1), got {}", config.beta),
    );
    check(
        (0.0..=1.0).contains(&config.initiator_reward_share),
        "initiator_reward_share",
        format!("must lie in [0, 1], got {}", config.initiator_reward_share),
    );
    check(
        config.trust_punishment > config.trust_reward,
        "trust_punishment",
        format!(
            "must exceed trust_reward ({} <= {})",
            config.trust_punishment, config.trust_reward
        ),
    );
    check(
        config.trust_reward >= 0.0 && config.trust_reward <= 1.0,
        "trust_reward",
        format!("must lie in [0, 1], got {}", config.trust_reward),
    );
    check(
        (0.0..1.0).contains(&config.bad_reputation_coeff),
        "bad_reputation_coeff",
        format!("must lie in [0, 1), got {}", config.bad_reputation_coeff),
    );
    check(
        config.honesty_min >= 0.0 && config.honesty_min <= config.honesty_max,
        "honesty_min",
        format!(
            "need 0 <= honesty_min <= honesty_max, got [{}, {}]",
            config.honesty_min, config.honesty_max
        ),
    );
    check(
        config.honesty_max.is_finite() && config.honesty_max <= 10.0,
        "honesty_max",
        format!("must be finite and at most 10, got {}", config.honesty_max),
    );
    check(
        config.response_deadline >= 1,
        "response_deadline",
        "must be at least 1 step".to_owned(),
    );
    check(
        config.confirm_deadline >= 1,
        "confirm_deadline",
        "must be at least 1 step".to_owned(),
    );
    for (field, value) in [
        ("leave_penalty", config.leave_penalty),
        ("enroll_fee", config.enroll_fee),
        ("comm_cost", config.comm_cost),
    ] {
        check(
            value >= 0.0 && value.is_finite(),
            field,
            format!("must be a finite non-negative amount, got {value}"),
        );
    }
    check(
        config.random_coalition_size_max >= 2,
        "random_coalition_size_max",
        format!("must be at least 2, got {}", config.random_coalition_size_max),
    );
    check(
        config.max_confirms_per_step >= 1,
        "max_confirms_per_step",
        "must be at least 1".to_owned(),
    );
    out
}

/// A formed coalition. Singletons are never represented as `Coalition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    pub id: u64,
    pub members: CoalitionSet,
    pub initiator: AgentId,
    pub formed_at: u32,
}

impl Coalition {
    pub fn age(&self, step: u32) -> u32 {
        step.saturating_sub(self.formed_at)
    }
}
