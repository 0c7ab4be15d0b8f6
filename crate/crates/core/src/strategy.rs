//! Agent decision rules: answering proposals, confirming (and thereby
//! leaving a coalition), estimating how likely a candidate coalition is to
//! form from proposal history, and choosing which proposals to send.

use crate::domain::{
    AgentId, AgentProfile, CoalitionSet, ResponderType, RiskAttitude, SimConfig,
};
use crate::error::{Error, Result};
use crate::trust::TrustMatrix;
use crate::utility::{self, JoinRole};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// A proposal this agent received from the counterpart.
    Received,
    /// A proposal this agent sent that the counterpart accepted.
    SentAccepted,
    /// A proposal this agent sent that the counterpart refused or ignored.
    SentRefused,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProposalRecord {
    pub coalition: CoalitionSet,
    pub counterpart: AgentId,
    pub direction: Direction,
    pub step: u32,
}

/// Everything one agent remembers about past proposals.
#[derive(Clone, Debug, Default)]
pub struct History {
    records: Vec<ProposalRecord>,
    by_counterpart: BTreeMap<AgentId, Vec<usize>>,
    sent: Vec<CoalitionSet>,
    received: Vec<(CoalitionSet, AgentId)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: ProposalRecord) {
        if record.direction == Direction::Received {
            self.received
                .push((record.coalition.clone(), record.counterpart));
        }
        self.by_counterpart
            .entry(record.counterpart)
            .or_default()
            .push(self.records.len());
        self.records.push(record);
    }

    /// Notes a proposal this agent opened, before any answer is known.
    pub fn push_sent(&mut self, coalition: CoalitionSet) {
        self.sent.push(coalition);
    }

    pub fn records(&self) -> &[ProposalRecord] {
        &self.records
    }

    pub fn records_with(&self, counterpart: AgentId) -> impl Iterator<Item = &ProposalRecord> {
        self.by_counterpart
            .get(&counterpart)
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    pub fn sent(&self) -> &[CoalitionSet] {
        &self.sent
    }

    pub fn received(&self) -> &[(CoalitionSet, AgentId)] {
        &self.received
    }
}

/// Agreement-phase answer: yes unless the coalition is worth less than being
/// alone (utility 0).
pub fn should_accept(agent: AgentId, proposed: &CoalitionSet, profile: &AgentProfile) -> Result<bool> {
    Ok(utility::coalition_utility(agent, proposed, &profile.table)? >= 0.0)
}

/// Step at which a responder answers a proposal that reached it at
/// `arrival_step` and must be answered within `deadline` steps.
pub fn response_step<R: Rng + ?Sized>(
    responder: ResponderType,
    arrival_step: u32,
    deadline: u32,
    rng: &mut R,
) -> u32 {
    let deadline = deadline.max(1);
    match responder {
        ResponderType::Early => arrival_step,
        ResponderType::Lazy => arrival_step + deadline - 1,
        ResponderType::Random => arrival_step + rng.random_range(0..deadline),
    }
}

/// Leave criterion: switch only if the discounted proposal beats the current
/// coalition inflated by the agent's honesty. Strict inequality.
pub fn should_switch(eu_current: f64, eu_proposed: f64, honesty: f64, brc: f64) -> bool {
    eu_current * (1.0 + honesty) < eu_proposed * (1.0 - brc)
}

/// Size of the symmetric difference divided by the population size.
pub fn coalition_distance(c1: &CoalitionSet, c2: &CoalitionSet, n_agents: usize) -> f64 {
    let (a, b) = (c1.members(), c2.members());
    let (mut i, mut j, mut differing) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                differing += 1;
                i += 1;
            }
            Ordering::Greater => {
                differing += 1;
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    differing += (a.len() - i) + (b.len() - j);
    differing as f64 / n_agents as f64
}

/// How unwilling `target` is expected to be toward `candidate`, in `[-1, 1]`.
/// Negative means likely interested.
///
/// Each history category contributes the distance to its closest record, or
/// 1.0 when the category is empty.
pub fn interest_degree(
    history: &History,
    target: AgentId,
    candidate: &CoalitionSet,
    n_agents: usize,
) -> f64 {
    let (mut rcv, mut acc, mut refused) = (1.0f64, 1.0f64, 1.0f64);
    for record in history.records_with(target) {
        let d = coalition_distance(candidate, &record.coalition, n_agents);
        let slot = match record.direction {
            Direction::Received => &mut rcv,
            Direction::SentAccepted => &mut acc,
            Direction::SentRefused => &mut refused,
        };
        *slot = slot.min(d);
    }
    rcv.min(acc) - refused
}

/// Probability that every solicited agent agrees, driven by the most
/// unwilling one: `(1 - max delta) / 2`.
pub fn formation_probability(deltas: &[f64]) -> Result<f64> {
    let worst = deltas
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::EmptyDeltas)?;
    Ok(((1.0 - worst) / 2.0).clamp(0.0, 1.0))
}

pub fn preference_score(
    utility: f64,
    p_formation: f64,
    attitude: RiskAttitude,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if utility <= 0.0 {
        return Err(Error::NonPositiveUtility(utility));
    }
    Ok(match attitude {
        RiskAttitude::Seeking => utility.powf(alpha) * p_formation,
        RiskAttitude::Averse => utility * p_formation.powf(beta),
        RiskAttitude::Neutral => utility * p_formation,
    })
}

/// The initiator-side view of `candidate` when `target` is a member.
fn member_deltas(history: &History, initiator: AgentId, candidate: &CoalitionSet, n: usize) -> Vec<f64> {
    candidate
        .iter()
        .filter(|&j| j != initiator)
        .map(|j| interest_degree(history, j, candidate, n))
        .collect()
}

/// Candidate pool for one initiator: fresh random coalitions plus samples of
/// previously sent and received proposals, de-duplicated in that order.
pub fn generate_candidates<R: Rng + ?Sized>(
    initiator: AgentId,
    history: &History,
    config: &SimConfig,
    rng: &mut R,
) -> Vec<CoalitionSet> {
    let n = config.n_agents;
    let max_size = config.random_coalition_size_max.min(n).max(2);
    let mut seen = HashSet::new();
    let mut out = Vec::new();

    // Random coalitions are redrawn on collision so the pool holds the
    // requested count whenever the population allows it.
    let mut attempts = 0;
    let max_attempts = config.candidate_random_count.saturating_mul(20);
    while out.len() < config.candidate_random_count && attempts < max_attempts {
        attempts += 1;
        let size = rng.random_range(2..=max_size);
        let members = index::sample(rng, n - 1, size - 1)
            .into_iter()
            .map(|k| AgentId(if k < initiator.0 { k } else { k + 1 }))
            .chain(std::iter::once(initiator));
        let c = CoalitionSet::new(members).expect("initiator is always present");
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }

    let sent = history.sent();
    let take = config.candidate_sent_count.min(sent.len());
    for i in index::sample(rng, sent.len(), take) {
        let c = include_initiator(&sent[i], initiator, None, max_size);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }

    let received = history.received();
    let take = config.candidate_recv_count.min(received.len());
    for i in index::sample(rng, received.len(), take) {
        let (c, from) = &received[i];
        let c = include_initiator(c, initiator, Some(*from), max_size);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Inserts the initiator into a historical coalition that lacks it, replacing
/// the coalition's previous initiator (or its highest id) when full.
fn include_initiator(
    c: &CoalitionSet,
    initiator: AgentId,
    previous_initiator: Option<AgentId>,
    max_size: usize,
) -> CoalitionSet {
    if c.contains(initiator) {
        return c.clone();
    }
    if c.len() < max_size {
        return c.with(initiator);
    }
    let evict = previous_initiator
        .filter(|&p| c.contains(p))
        .unwrap_or_else(|| c.max_member());
    match c.without(evict) {
        Some(rest) => rest.with(initiator),
        None => CoalitionSet::singleton(initiator),
    }
}

/// The initiator's current coalition, if any.
#[derive(Clone, Copy, Debug)]
pub struct CurrentMembership<'a> {
    pub members: &'a CoalitionSet,
    /// Steps since the coalition formed.
    pub age: u32,
}

/// State an initiator consults when choosing proposals.
#[derive(Clone, Copy, Debug)]
pub struct SelectionContext<'a> {
    pub profile: &'a AgentProfile,
    pub history: &'a History,
    pub trust: &'a TrustMatrix,
    pub current: Option<CurrentMembership<'a>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub coalition: CoalitionSet,
    pub utility: f64,
    pub p_formation: f64,
    pub score: f64,
}

/// Orders scored candidates best first; equal scores fall back to
/// lexicographic member order.
pub fn rank_scored(scored: &mut [ScoredCandidate]) {
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.coalition.cmp(&b.coalition))
    });
}

/// Filters and scores candidates, best first, without applying the
/// per-step budget or the send threshold.
pub fn rank_candidates(
    initiator: AgentId,
    candidates: &[CoalitionSet],
    ctx: &SelectionContext<'_>,
    config: &SimConfig,
) -> Result<Vec<ScoredCandidate>> {
    let profile = ctx.profile;
    let current_eu = match ctx.current {
        Some(cur) if config.initiator_leave_check => {
            let u = utility::coalition_utility(initiator, cur.members, &profile.table)?;
            Some(utility::expected_utility_current(initiator, cur.members, u, ctx.trust)?)
        }
        _ => None,
    };
    let would_pay_penalty = ctx
        .current
        .is_some_and(|cur| cur.age < config.obligatory_stay);

    let mut scored = Vec::new();
    for c in candidates {
        let u = utility::coalition_utility(initiator, c, &profile.table)?;
        if u <= 0.0 {
            continue;
        }
        if let Some(cur) = ctx.current {
            if cur.members == c {
                continue;
            }
        }
        if let Some(eu_current) = current_eu {
            let eu_proposed =
                utility::expected_utility_proposed(u, would_pay_penalty, JoinRole::Initiator, config);
            if !should_switch(eu_current, eu_proposed, profile.honesty, config.bad_reputation_coeff) {
                continue;
            }
        }
        let deltas = member_deltas(ctx.history, initiator, c, config.n_agents);
        let p = formation_probability(&deltas)?;
        let score = preference_score(u, p, profile.risk_attitude, config.alpha, config.beta)?;
        scored.push(ScoredCandidate {
            coalition: c.clone(),
            utility: u,
            p_formation: p,
            score,
        });
    }
    rank_scored(&mut scored);
    Ok(scored)
}

/// The proposals an initiator sends this step: the top
/// `max_proposals_per_step` ranked candidates whose `utility * p_formation`
/// reaches twice the communication cost.
pub fn select_proposals(
    initiator: AgentId,
    candidates: &[CoalitionSet],
    ctx: &SelectionContext<'_>,
    config: &SimConfig,
) -> Result<Vec<ScoredCandidate>> {
    let mut ranked = rank_candidates(initiator, candidates, ctx, config)?;
    ranked.truncate(config.max_proposals_per_step);
    ranked.retain(|s| passes_send_gate(s.utility, s.p_formation, config.comm_cost));
    Ok(ranked)
}

pub fn passes_send_gate(utility: f64, p_formation: f64, comm_cost: f64) -> bool {
    utility * p_formation >= 2.0 * comm_cost
}
