//! Deterministic step scheduler.
//!
//! Each step runs, in order:
//!
//! 1. expire proposals whose window closed with answers pending
//! 2. deliver agreement answers due this step
//! 3. collect confirmations (per-agent budget, leave criterion)
//! 4. arbitrate fully confirmed proposals in seeded random order
//! 5. settle departures, penalties, fees and trust updates
//! 6. accrue each member's coalition utility
//! 7. let every agent open new proposals
//! 8. snapshot metrics
//!
//! Agents are visited in ascending id and every random draw comes from one
//! seeded ChaCha stream, so `(config, seed)` fixes the whole trajectory.

use crate::domain::{
    validate_config, AgentId, AgentProfile, Coalition, CoalitionSet, GainedUtility, InteractionTable,
    ResponderMix, ResponderType, SimConfig,
};
use crate::error::{Error, Result};
use crate::ledger::{LedgerEntry, LedgerKind, Party, StepFlows};
use crate::metrics::{classify_roles, StepFrame};
use crate::protocol::{Answer, Commitment, Outcome, Phase, Proposal, ProposalBook};
use crate::strategy::{
    self, CurrentMembership, Direction, History, ProposalRecord, SelectionContext,
};
use crate::trace::{CancelReason, Trace, TraceEvent, TraceHeader, TraceLine};
use crate::trust::{TrustEvent, TrustEventKind, TrustMatrix};
use crate::utility::{self, JoinRole};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Lifetime of one coalition. `dissolved_at` is `None` while it is alive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalitionLifetime {
    pub id: u64,
    pub formed_at: u32,
    pub dissolved_at: Option<u32>,
    pub initiator: AgentId,
    pub size: usize,
}

/// Counters behind the per-step budget and audit checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditStats {
    pub proposals_opened: u64,
    pub proposals_formed: u64,
    pub proposals_cancelled: u64,
    pub ignored_responses: u64,
    pub departures: u64,
    pub penalised_departures: u64,
    pub max_confirms_in_step: usize,
    pub max_opened_in_step: usize,
}

/// Result of arbitrating fully confirmed proposals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Arbitration {
    /// Proposal ids that form, in the order they were visited.
    pub formed: Vec<u64>,
    pub cancelled: Vec<u64>,
}

/// Visits eligible proposals in uniformly random order; a proposal forms only
/// if none of its members (initiator included) is already bound to a
/// coalition formed earlier in the same pass.
pub fn arbitrate_formations<R: Rng + ?Sized>(
    eligible: &[(u64, CoalitionSet)],
    rng: &mut R,
) -> Arbitration {
    let mut order: Vec<usize> = (0..eligible.len()).collect();
    order.shuffle(rng);
    let mut bound = HashSet::new();
    let mut out = Arbitration::default();
    for i in order {
        let (id, members) = &eligible[i];
        if members.iter().any(|a| bound.contains(&a)) {
            out.cancelled.push(*id);
        } else {
            bound.extend(members.iter());
            out.formed.push(*id);
        }
    }
    out
}

/// Full mutable state of one run.
pub struct WorldState {
    config: SimConfig,
    step: u32,
    profiles: Vec<AgentProfile>,
    trust: TrustMatrix,
    histories: Vec<History>,
    coalitions: BTreeMap<u64, Coalition>,
    membership: Vec<Option<u64>>,
    proposals: BTreeMap<u64, Proposal>,
    book: ProposalBook,
    /// (due step, proposal id, responder) of agreement answers not yet delivered.
    pending_answers: BTreeSet<(u32, u64, AgentId)>,
    next_coalition_id: u64,
    ledger: Vec<LedgerEntry>,
    balances: Vec<f64>,
    accruals: Vec<f64>,
    lifetimes: Vec<CoalitionLifetime>,
    frames: Vec<StepFrame>,
    audit: AuditStats,
    trace: Option<Vec<TraceLine>>,
    rng: ChaCha8Rng,
    flows: StepFlows,
}

fn invariant(step: u32, message: impl Into<String>) -> Error {
    Error::Invariant {
        step,
        message: message.into(),
    }
}

impl WorldState {
    /// Draws profiles from the seeded stream and starts everyone alone.
    pub fn new(config: SimConfig, record_trace: bool) -> Result<Self> {
        let config = config.validated()?;
        let n = config.n_agents;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut profiles = Vec::with_capacity(n);
        for i in 0..n {
            let honesty = if config.honesty_max > config.honesty_min {
                rng.random_range(config.honesty_min..=config.honesty_max)
            } else {
                config.honesty_min
            };
            let mut table = InteractionTable::zeros(n);
            for a in 0..n {
                for b in 0..n {
                    let v = rng.random_range(InteractionTable::MIN..=InteractionTable::MAX);
                    table.set(AgentId(a), AgentId(b), v);
                }
            }
            let responder_type = match config.responder_mix {
                ResponderMix::AllEarly => ResponderType::Early,
                ResponderMix::AllLazy => ResponderType::Lazy,
                ResponderMix::AllRandom => ResponderType::Random,
                ResponderMix::UniformRandom => {
                    [ResponderType::Early, ResponderType::Lazy, ResponderType::Random]
                        [rng.random_range(0..3)]
                }
            };
            profiles.push(AgentProfile {
                honesty,
                risk_attitude: config.risk_mix.attitude_of(AgentId(i), n),
                responder_type,
                table,
            });
        }
        Ok(WorldState {
            step: 0,
            trust: TrustMatrix::new(n)?,
            histories: vec![History::new(); n],
            coalitions: BTreeMap::new(),
            membership: vec![None; n],
            proposals: BTreeMap::new(),
            book: ProposalBook::default(),
            pending_answers: BTreeSet::new(),
            next_coalition_id: 0,
            ledger: Vec::new(),
            balances: vec![0.0; n],
            accruals: vec![0.0; n],
            lifetimes: Vec::new(),
            frames: Vec::new(),
            audit: AuditStats::default(),
            trace: record_trace.then(Vec::new),
            rng,
            flows: StepFlows::default(),
            profiles,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Index of the next step to run.
    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn profiles(&self) -> &[AgentProfile] {
        &self.profiles
    }

    pub fn trust(&self) -> &TrustMatrix {
        &self.trust
    }

    pub fn coalitions(&self) -> impl Iterator<Item = &Coalition> {
        self.coalitions.values()
    }

    pub fn coalition_of(&self, agent: AgentId) -> Option<&Coalition> {
        self.membership[agent.0].and_then(|id| self.coalitions.get(&id))
    }

    pub fn open_proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn balances(&self) -> &[f64] {
        &self.balances
    }

    pub fn history(&self, agent: AgentId) -> &History {
        &self.histories[agent.0]
    }

    fn emit(&mut self, event: TraceEvent) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceLine {
                step: self.step,
                event,
            });
        }
    }

    fn post(&mut self, kind: LedgerKind, party: Party, amount: f64) {
        let entry = LedgerEntry {
            step: self.step,
            kind,
            party,
            amount,
        };
        if let Party::Agent(a) = party {
            self.balances[a.0] += amount;
            if kind == LedgerKind::UtilityAccrual {
                self.accruals[a.0] += amount;
            }
        }
        self.flows.add(kind, amount);
        self.ledger.push(entry);
        self.emit(TraceEvent::Ledger {
            kind,
            party,
            amount,
        });
    }

    /// Runs one full step and returns its metrics snapshot.
    pub fn advance_step(&mut self) -> Result<StepFrame> {
        self.flows = StepFlows::default();
        self.expire()?;
        self.deliver_answers()?;
        let confirms = self.collect_confirmations()?;
        let snapshot: Vec<(u64, CoalitionSet)> = self
            .coalitions
            .values()
            .map(|c| (c.id, c.members.clone()))
            .collect();
        let arbitration = self.arbitrate();
        let mut departed = HashSet::new();
        let formed = self.settle_formations(&arbitration, &mut departed)?;
        self.update_trust(&snapshot, &departed)?;
        self.check_partition()?;
        if let Some(v) = self.flows.violation() {
            return Err(invariant(self.step, v));
        }
        self.accrue()?;
        let opened = self.open_new_proposals()?;

        self.audit.max_confirms_in_step = self.audit.max_confirms_in_step.max(confirms);
        self.audit.max_opened_in_step = self.audit.max_opened_in_step.max(opened);
        if confirms > self.config.max_confirms_per_step || opened > self.config.max_proposals_per_step {
            return Err(invariant(self.step, "per-step budget exceeded"));
        }
        for agent in 0..self.config.n_agents {
            let total = self.balances[agent];
            self.emit(TraceEvent::Balance {
                agent: AgentId(agent),
                total,
            });
        }

        self.proposals.retain(|_, p| !p.phase().is_terminal());
        let frame = self.snapshot(formed);
        self.frames.push(frame.clone());
        self.step += 1;
        Ok(frame)
    }

    fn cancel(&mut self, id: u64, reason: CancelReason) -> Result<()> {
        let step = self.step;
        let p = self
            .proposals
            .get_mut(&id)
            .ok_or_else(|| invariant(step, format!("unknown proposal {id}")))?;
        if !p.phase().is_terminal() {
            p.cancel()?;
        }
        let initiator = p.initiator;
        self.audit.proposals_cancelled += 1;
        self.emit(TraceEvent::Cancel {
            proposal: id,
            initiator,
            reason,
        });
        Ok(())
    }

    fn expire(&mut self) -> Result<()> {
        let expired: Vec<u64> = self
            .proposals
            .values()
            .filter(|p| p.has_expired(self.step, &self.config))
            .map(|p| p.id)
            .collect();
        for id in expired {
            let p = &self.proposals[&id];
            // an unanswered proposal counts as refused by whoever stayed silent
            if p.phase() == Phase::Agreement {
                let records: Vec<ProposalRecord> = p
                    .pending_agreement()
                    .map(|who| ProposalRecord {
                        coalition: p.coalition.clone(),
                        counterpart: who,
                        direction: Direction::SentRefused,
                        step: self.step,
                    })
                    .collect();
                let initiator = p.initiator;
                for r in records {
                    self.histories[initiator.0].push(r);
                }
            }
            self.cancel(id, CancelReason::Expired)?;
        }
        Ok(())
    }

    fn deliver_answers(&mut self) -> Result<()> {
        let step = self.step;
        while let Some(&(due, id, responder)) = self.pending_answers.first() {
            if due > step {
                break;
            }
            self.pending_answers.pop_first();
            let Some(p) = self.proposals.get_mut(&id) else {
                // proposal already closed and dropped
                self.audit.ignored_responses += 1;
                self.emit(TraceEvent::Audit {
                    proposal: id,
                    actor: responder,
                    reason: crate::protocol::IgnoreReason::Terminal,
                });
                continue;
            };
            let yes = strategy::should_accept(responder, &p.coalition, &self.profiles[responder.0])?;
            let answer = if yes { Answer::Yes } else { Answer::No };
            match p.record_agreement(responder, answer, step, self.config.response_deadline) {
                Outcome::Ignored(reason) => {
                    self.audit.ignored_responses += 1;
                    self.emit(TraceEvent::Audit {
                        proposal: id,
                        actor: responder,
                        reason,
                    });
                }
                Outcome::Recorded(phase) => {
                    let initiator = p.initiator;
                    let record = ProposalRecord {
                        coalition: p.coalition.clone(),
                        counterpart: responder,
                        direction: if yes {
                            Direction::SentAccepted
                        } else {
                            Direction::SentRefused
                        },
                        step,
                    };
                    self.histories[initiator.0].push(record);
                    self.emit(TraceEvent::Respond {
                        proposal: id,
                        responder,
                        answer,
                    });
                    match phase {
                        Phase::Commitment => self.emit(TraceEvent::Agreed {
                            proposal: id,
                            initiator,
                        }),
                        Phase::Cancelled => {
                            self.audit.proposals_cancelled += 1;
                            self.emit(TraceEvent::Cancel {
                                proposal: id,
                                initiator,
                                reason: CancelReason::Refused,
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Expected utility of staying where the agent is now, and whether
    /// leaving this step would cost the penalty.
    fn staying_value(&self, agent: AgentId) -> Result<(f64, bool)> {
        match self.coalition_of(agent) {
            None => Ok((0.0, false)),
            Some(c) => {
                let table = &self.profiles[agent.0].table;
                let u = utility::coalition_utility(agent, &c.members, table)?;
                let eu = utility::expected_utility_current(agent, &c.members, u, &self.trust)?;
                Ok((eu, c.age(self.step) < self.config.obligatory_stay))
            }
        }
    }

    /// Returns the largest number of confirmations any agent gave.
    fn collect_confirmations(&mut self) -> Result<usize> {
        let step = self.step;
        let mut most = 0;
        for i in 0..self.config.n_agents {
            let agent = AgentId(i);
            let (eu_current, pays_penalty) = self.staying_value(agent)?;
            let current = self.coalition_of(agent).map(|c| c.members.clone());
            let profile = &self.profiles[i];
            let mut chosen = Vec::new();
            for p in self.proposals.values() {
                if chosen.len() >= self.config.max_confirms_per_step {
                    break;
                }
                if !p.awaits_confirmation_from(agent) || current.as_ref() == Some(&p.coalition) {
                    continue;
                }
                let u = utility::coalition_utility(agent, &p.coalition, &profile.table)?;
                let eu_proposed =
                    utility::expected_utility_proposed(u, pays_penalty, JoinRole::Solicited, &self.config);
                if strategy::should_switch(
                    eu_current,
                    eu_proposed,
                    profile.honesty,
                    self.config.bad_reputation_coeff,
                ) {
                    chosen.push(p.id);
                }
            }
            for &id in &chosen {
                let p = self.proposals.get_mut(&id).expect("chosen from the open set");
                match p.record_commitment(agent, Commitment::Confirmed, step, self.config.confirm_deadline) {
                    Outcome::Recorded(_) => self.emit(TraceEvent::Confirm { proposal: id, agent }),
                    Outcome::Ignored(reason) => {
                        return Err(invariant(step, format!("confirmation of {id} by {agent} ignored: {reason:?}")))
                    }
                }
            }
            most = most.max(chosen.len());
        }
        Ok(most)
    }

    fn arbitrate(&mut self) -> Arbitration {
        let eligible: Vec<(u64, CoalitionSet)> = self
            .proposals
            .values()
            .filter(|p| p.is_formation_eligible())
            .map(|p| (p.id, p.coalition.clone()))
            .collect();
        arbitrate_formations(&eligible, &mut self.rng)
    }

    /// Forms the winning proposals: members leave their old coalitions,
    /// solicited members pay the enrollment fee. Returns how many formed.
    fn settle_formations(
        &mut self,
        arbitration: &Arbitration,
        departed: &mut HashSet<(u64, AgentId)>,
    ) -> Result<usize> {
        for &id in &arbitration.cancelled {
            self.cancel(id, CancelReason::Conflict)?;
        }
        for &id in &arbitration.formed {
            let p = self.proposals.get_mut(&id).expect("eligible proposals are open");
            p.mark_formed()?;
            let (initiator, members) = (p.initiator, p.coalition.clone());
            for agent in members.iter() {
                if let Some(old) = self.membership[agent.0] {
                    self.apply_departure(agent, old)?;
                    departed.insert((old, agent));
                }
            }
            let cid = self.next_coalition_id;
            self.next_coalition_id += 1;
            for agent in members.iter() {
                self.membership[agent.0] = Some(cid);
            }
            self.lifetimes.push(CoalitionLifetime {
                id: cid,
                formed_at: self.step,
                dissolved_at: None,
                initiator,
                size: members.len(),
            });
            self.emit(TraceEvent::Form {
                coalition: cid,
                proposal: id,
                initiator,
                members: members.clone(),
            });
            self.audit.proposals_formed += 1;
            let fee = self.config.enroll_fee;
            let reward = self.config.initiator_reward_share * fee;
            for agent in members.iter().filter(|&a| a != initiator) {
                self.post(LedgerKind::EnrollFee, Party::Agent(agent), -fee);
                self.post(LedgerKind::InitiatorReward, Party::Agent(initiator), reward);
                self.post(LedgerKind::FeeSink, Party::Sink, fee - reward);
            }
            self.coalitions.insert(
                cid,
                Coalition {
                    id: cid,
                    members,
                    initiator,
                    formed_at: self.step,
                },
            );
        }
        Ok(arbitration.formed.len())
    }

    /// Removes `agent` from coalition `coalition_id`, charging the early-leave
    /// penalty and splitting it among those who remain. A coalition left
    /// with one member dissolves.
    pub fn apply_departure(&mut self, agent: AgentId, coalition_id: u64) -> Result<()> {
        let step = self.step;
        let c = self
            .coalitions
            .get(&coalition_id)
            .ok_or_else(|| invariant(step, format!("no coalition {coalition_id}")))?;
        c.members.require_member(agent)?;
        let early = c.age(step) < self.config.obligatory_stay;
        let remaining = c
            .members
            .without(agent)
            .ok_or_else(|| invariant(step, "coalition with a single member"))?;
        self.emit(TraceEvent::Depart {
            agent,
            coalition: coalition_id,
        });
        self.audit.departures += 1;
        if early {
            self.audit.penalised_departures += 1;
            let penalty = self.config.leave_penalty;
            let share = penalty / remaining.len() as f64;
            self.post(LedgerKind::LeavePenalty, Party::Agent(agent), -penalty);
            for other in remaining.iter() {
                self.post(LedgerKind::PenaltyShare, Party::Agent(other), share);
            }
        }
        self.membership[agent.0] = None;
        if remaining.len() == 1 {
            let last = remaining.members()[0];
            self.membership[last.0] = None;
            self.coalitions.remove(&coalition_id);
            if let Some(l) = self.lifetimes.iter_mut().rev().find(|l| l.id == coalition_id) {
                l.dissolved_at = Some(step);
            }
            self.emit(TraceEvent::Dissolve {
                agent: last,
                coalition: coalition_id,
            });
        } else {
            let c = self.coalitions.get_mut(&coalition_id).expect("checked above");
            // a coalition always has one initiator; the lowest remaining id inherits it
            if c.initiator == agent {
                c.initiator = remaining.members()[0];
            }
            c.members = remaining;
        }
        Ok(())
    }

    /// Co-members of every coalition that existed at the start of the step
    /// update their records: stayers reward each other and punish leavers,
    /// leavers reward those who stayed.
    fn update_trust(
        &mut self,
        snapshot: &[(u64, CoalitionSet)],
        departed: &HashSet<(u64, AgentId)>,
    ) -> Result<()> {
        for (cid, members) in snapshot {
            for observer in members.iter() {
                let observer_left = departed.contains(&(*cid, observer));
                for subject in members.iter().filter(|&s| s != observer) {
                    let kind = if !departed.contains(&(*cid, subject)) {
                        TrustEventKind::Stayed
                    } else if !observer_left {
                        TrustEventKind::Left
                    } else {
                        continue;
                    };
                    let event = TrustEvent {
                        observer,
                        subject,
                        kind,
                        step: self.step,
                    };
                    let value = self.trust.apply(&event, &self.config)?;
                    self.emit(TraceEvent::Trust {
                        kind,
                        observer,
                        subject,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    fn accrue(&mut self) -> Result<()> {
        for i in 0..self.config.n_agents {
            let agent = AgentId(i);
            let Some(c) = self.coalition_of(agent) else {
                continue;
            };
            let u = utility::coalition_utility(agent, &c.members, &self.profiles[i].table)?;
            self.post(LedgerKind::UtilityAccrual, Party::Agent(agent), u);
        }
        Ok(())
    }

    /// Returns the largest number of proposals any agent opened.
    fn open_new_proposals(&mut self) -> Result<usize> {
        let step = self.step;
        let mut most = 0;
        for i in 0..self.config.n_agents {
            let agent = AgentId(i);
            let candidates =
                strategy::generate_candidates(agent, &self.histories[i], &self.config, &mut self.rng);
            let current = self.coalition_of(agent).map(|c| (c.members.clone(), c.age(step)));
            let ctx = SelectionContext {
                profile: &self.profiles[i],
                history: &self.histories[i],
                trust: &self.trust,
                current: current.as_ref().map(|(members, age)| CurrentMembership {
                    members,
                    age: *age,
                }),
            };
            let selected = strategy::select_proposals(agent, &candidates, &ctx, &self.config)?;
            most = most.max(selected.len());
            for choice in selected {
                let proposal = self.book.open(agent, choice.coalition.clone(), step)?;
                let id = proposal.id;
                self.emit(TraceEvent::Open {
                    proposal: id,
                    initiator: agent,
                    coalition: choice.coalition.clone(),
                });
                self.audit.proposals_opened += 1;
                self.post(LedgerKind::CommCost, Party::Agent(agent), -self.config.comm_cost);
                self.histories[i].push_sent(choice.coalition.clone());
                // answers are read from the inbox from the next step on and
                // must land inside the remaining response window
                let window = self.config.response_deadline.saturating_sub(1);
                for responder in proposal.solicited() {
                    self.histories[responder.0].push(ProposalRecord {
                        coalition: choice.coalition.clone(),
                        counterpart: agent,
                        direction: Direction::Received,
                        step,
                    });
                    let due = strategy::response_step(
                        self.profiles[responder.0].responder_type,
                        step + 1,
                        window,
                        &mut self.rng,
                    );
                    self.pending_answers.insert((due, id, responder));
                }
                self.proposals.insert(id, proposal);
            }
        }
        Ok(most)
    }

    fn check_partition(&self) -> Result<()> {
        let step = self.step;
        let mut seen = vec![false; self.config.n_agents];
        for (id, c) in &self.coalitions {
            if c.members.len() < 2 {
                return Err(invariant(step, format!("coalition {id} has fewer than two members")));
            }
            if !c.members.contains(c.initiator) {
                return Err(invariant(step, format!("initiator of coalition {id} is not a member")));
            }
            for a in c.members.iter() {
                if a.0 >= self.config.n_agents || seen[a.0] {
                    return Err(invariant(step, format!("agent {a} appears in two coalitions")));
                }
                seen[a.0] = true;
                if self.membership[a.0] != Some(*id) {
                    return Err(invariant(step, format!("membership of {a} disagrees with coalition {id}")));
                }
            }
        }
        for (i, m) in self.membership.iter().enumerate() {
            if m.is_some() != seen[i] {
                return Err(invariant(step, format!("agent {i} has a dangling membership")));
            }
        }
        Ok(())
    }

    fn snapshot(&self, formed: usize) -> StepFrame {
        let roles = classify_roles(self.config.n_agents, self.coalitions.values());
        let active = self.coalitions.len();
        let members: usize = self.coalitions.values().map(|c| c.members.len()).sum();
        StepFrame {
            step: self.step,
            alone: roles.alone,
            solicited: roles.solicited,
            initiator: roles.initiator,
            coalitions_active: active,
            formed_this_step: formed,
            mean_coalition_size: if active == 0 {
                0.0
            } else {
                members as f64 / active as f64
            },
        }
    }

    /// Consumes the state into the run's outputs.
    pub fn finish(self) -> RunResult {
        let agents = self
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| AgentOutcome {
                agent: AgentId(i),
                honesty: p.honesty,
                risk_attitude: p.risk_attitude,
                ledger_total: self.balances[i],
                accrual_total: self.accruals[i],
            })
            .collect();
        let trace = self.trace.map(|lines| Trace {
            header: TraceHeader {
                n_agents: self.config.n_agents,
                seed: self.config.seed,
                trust_reward: self.config.trust_reward,
                trust_punishment: self.config.trust_punishment,
            },
            lines,
        });
        RunResult {
            seed: self.config.seed,
            n_steps: self.config.n_steps,
            frames: self.frames,
            agents,
            lifetimes: self.lifetimes,
            ledger: self.ledger,
            audit: self.audit,
            final_trust: self.trust,
            trace,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentOutcome {
    pub agent: AgentId,
    pub honesty: f64,
    pub risk_attitude: crate::domain::RiskAttitude,
    pub ledger_total: f64,
    pub accrual_total: f64,
}

impl AgentOutcome {
    pub fn gained(&self, mode: GainedUtility) -> f64 {
        match mode {
            GainedUtility::LedgerTotal => self.ledger_total,
            GainedUtility::AccrualOnly => self.accrual_total,
        }
    }
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub n_steps: u32,
    pub frames: Vec<StepFrame>,
    pub agents: Vec<AgentOutcome>,
    pub lifetimes: Vec<CoalitionLifetime>,
    pub ledger: Vec<LedgerEntry>,
    pub audit: AuditStats,
    pub final_trust: TrustMatrix,
    pub trace: Option<Trace>,
}

impl RunResult {
    /// Last step index of the run, used to censor coalitions still alive.
    pub fn end_step(&self) -> u32 {
        self.n_steps.saturating_sub(1)
    }
}

/// Runs `config.n_steps` steps from a fresh world seeded by `config.seed`.
pub fn run_simulation(config: &SimConfig) -> Result<RunResult> {
    run_with_options(config, false)
}

pub fn run_with_options(config: &SimConfig, record_trace: bool) -> Result<RunResult> {
    let violations = validate_config(config);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    let mut world = WorldState::new(config.clone(), record_trace)?;
    for _ in 0..config.n_steps {
        world.advance_step()?;
    }
    Ok(world.finish())
}
