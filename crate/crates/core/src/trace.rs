//! Line-oriented event trace and an independent replay checker.
//!
//! Every line after the header has five whitespace-separated fields:
//!
//! ```text
//! <step> <kind> <actor> <object> <amount>
//! 12 open 3 p41:3.7.9 -
//! 12 yes 7 p41 -
//! 13 form 3 c5/p41/3.7.9 -
//! 13 ledger.fee 7 - -10
//! 13 trust.left 2 a4 0.45
//! 13 balance 7 - 183.25
//! ```
//!
//! `-` marks an unused field. Amounts use the shortest representation that
//! round-trips, so a replay reproduces balances bit for bit.

use crate::domain::{AgentId, CoalitionSet};
use crate::error::{Error, Result};
use crate::ledger::{LedgerKind, Party, StepFlows};
use crate::protocol::{Answer, IgnoreReason};
use crate::trust::{TrustEvent, TrustEventKind, TrustMatrix};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

pub const TRACE_MAGIC: &str = "# hedonica-trace v1";

/// Replay refuses populations larger than this.
pub const MAX_REPLAY_AGENTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CancelReason {
    Refused,
    Expired,
    Conflict,
}

impl CancelReason {
    fn as_str(self) -> &'static str {
        match self {
            CancelReason::Refused => "refused",
            CancelReason::Expired => "expired",
            CancelReason::Conflict => "conflict",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent {
    Open {
        proposal: u64,
        initiator: AgentId,
        coalition: CoalitionSet,
    },
    Respond {
        proposal: u64,
        responder: AgentId,
        answer: Answer,
    },
    Agreed {
        proposal: u64,
        initiator: AgentId,
    },
    Confirm {
        proposal: u64,
        agent: AgentId,
    },
    Cancel {
        proposal: u64,
        initiator: AgentId,
        reason: CancelReason,
    },
    Audit {
        proposal: u64,
        actor: AgentId,
        reason: IgnoreReason,
    },
    Form {
        coalition: u64,
        proposal: u64,
        initiator: AgentId,
        members: CoalitionSet,
    },
    Depart {
        agent: AgentId,
        coalition: u64,
    },
    Dissolve {
        agent: AgentId,
        coalition: u64,
    },
    Ledger {
        kind: LedgerKind,
        party: Party,
        amount: f64,
    },
    Trust {
        kind: TrustEventKind,
        observer: AgentId,
        subject: AgentId,
        value: f64,
    },
    Balance {
        agent: AgentId,
        total: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceLine {
    pub step: u32,
    pub event: TraceEvent,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.step;
        match &self.event {
            TraceEvent::Open {
                proposal,
                initiator,
                coalition,
            } => write!(f, "{s} open {initiator} p{proposal}:{coalition} -"),
            TraceEvent::Respond {
                proposal,
                responder,
                answer,
            } => {
                let kind = match answer {
                    Answer::Yes => "yes",
                    Answer::No => "no",
                };
                write!(f, "{s} {kind} {responder} p{proposal} -")
            }
            TraceEvent::Agreed {
                proposal,
                initiator,
            } => write!(f, "{s} agreed {initiator} p{proposal} -"),
            TraceEvent::Confirm { proposal, agent } => write!(f, "{s} confirm {agent} p{proposal} -"),
            TraceEvent::Cancel {
                proposal,
                initiator,
                reason,
            } => write!(f, "{s} cancel.{} {initiator} p{proposal} -", reason.as_str()),
            TraceEvent::Audit {
                proposal,
                actor,
                reason,
            } => write!(f, "{s} audit.{} {actor} p{proposal} -", reason.as_str()),
            TraceEvent::Form {
                coalition,
                proposal,
                initiator,
                members,
            } => write!(f, "{s} form {initiator} c{coalition}/p{proposal}/{members} -"),
            TraceEvent::Depart { agent, coalition } => write!(f, "{s} depart {agent} c{coalition} -"),
            TraceEvent::Dissolve { agent, coalition } => write!(f, "{s} dissolve {agent} c{coalition} -"),
            TraceEvent::Ledger {
                kind,
                party,
                amount,
            } => write!(f, "{s} ledger.{} {party} - {amount}", kind.as_str()),
            TraceEvent::Trust {
                kind,
                observer,
                subject,
                value,
            } => {
                let k = match kind {
                    TrustEventKind::Stayed => "stayed",
                    TrustEventKind::Left => "left",
                };
                write!(f, "{s} trust.{k} {observer} a{subject} {value}")
            }
            TraceEvent::Balance { agent, total } => write!(f, "{s} balance {agent} - {total}"),
        }
    }
}

fn prefixed<T: FromStr>(field: &str, prefix: char) -> Option<T> {
    field.strip_prefix(prefix)?.parse().ok()
}

fn agent(field: &str) -> Option<AgentId> {
    field.parse().ok().map(AgentId)
}

fn members(field: &str) -> Option<CoalitionSet> {
    let ids: Option<Vec<usize>> = field.split('.').map(|s| s.parse().ok()).collect();
    CoalitionSet::from_indices(&ids?).ok()
}

fn finite(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn ignore_reason(s: &str) -> Option<IgnoreReason> {
    [
        IgnoreReason::Terminal,
        IgnoreReason::WrongPhase,
        IgnoreReason::NotSolicited,
        IgnoreReason::Duplicate,
        IgnoreReason::Late,
    ]
    .into_iter()
    .find(|r| r.as_str() == s)
}

impl FromStr for TraceLine {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [step, kind, actor, object, amount] = fields[..] else {
            return Err(format!("expected 5 fields, found {}", fields.len()));
        };
        let step: u32 = step.parse().map_err(|_| format!("bad step `{step}`"))?;
        let bad = || format!("malformed `{kind}` line");
        let event = match kind {
            "open" => {
                let (p, c) = object.split_once(':').ok_or_else(bad)?;
                TraceEvent::Open {
                    proposal: prefixed(p, 'p').ok_or_else(bad)?,
                    initiator: agent(actor).ok_or_else(bad)?,
                    coalition: members(c).ok_or_else(bad)?,
                }
            }
            "yes" | "no" => TraceEvent::Respond {
                proposal: prefixed(object, 'p').ok_or_else(bad)?,
                responder: agent(actor).ok_or_else(bad)?,
                answer: if kind == "yes" { Answer::Yes } else { Answer::No },
            },
            "agreed" => TraceEvent::Agreed {
                proposal: prefixed(object, 'p').ok_or_else(bad)?,
                initiator: agent(actor).ok_or_else(bad)?,
            },
            "confirm" => TraceEvent::Confirm {
                proposal: prefixed(object, 'p').ok_or_else(bad)?,
                agent: agent(actor).ok_or_else(bad)?,
            },
            "form" => {
                let mut parts = object.split('/');
                let (Some(c), Some(p), Some(m), None) = (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(bad());
                };
                TraceEvent::Form {
                    coalition: prefixed(c, 'c').ok_or_else(bad)?,
                    proposal: prefixed(p, 'p').ok_or_else(bad)?,
                    initiator: agent(actor).ok_or_else(bad)?,
                    members: members(m).ok_or_else(bad)?,
                }
            }
            "depart" => TraceEvent::Depart {
                agent: agent(actor).ok_or_else(bad)?,
                coalition: prefixed(object, 'c').ok_or_else(bad)?,
            },
            "dissolve" => TraceEvent::Dissolve {
                agent: agent(actor).ok_or_else(bad)?,
                coalition: prefixed(object, 'c').ok_or_else(bad)?,
            },
            "balance" => TraceEvent::Balance {
                agent: agent(actor).ok_or_else(bad)?,
                total: finite(amount).ok_or_else(bad)?,
            },
            _ => {
                if let Some(reason) = kind.strip_prefix("cancel.") {
                    let reason = match reason {
                        "refused" => CancelReason::Refused,
                        "expired" => CancelReason::Expired,
                        "conflict" => CancelReason::Conflict,
                        _ => return Err(bad()),
                    };
                    TraceEvent::Cancel {
                        proposal: prefixed(object, 'p').ok_or_else(bad)?,
                        initiator: agent(actor).ok_or_else(bad)?,
                        reason,
                    }
                } else if let Some(reason) = kind.strip_prefix("audit.") {
                    TraceEvent::Audit {
                        proposal: prefixed(object, 'p').ok_or_else(bad)?,
                        actor: agent(actor).ok_or_else(bad)?,
                        reason: ignore_reason(reason).ok_or_else(bad)?,
                    }
                } else if let Some(k) = kind.strip_prefix("ledger.") {
                    let party = if actor == "sink" {
                        Party::Sink
                    } else {
                        Party::Agent(agent(actor).ok_or_else(bad)?)
                    };
                    TraceEvent::Ledger {
                        kind: LedgerKind::parse(k).ok_or_else(bad)?,
                        party,
                        amount: finite(amount).ok_or_else(bad)?,
                    }
                } else if let Some(k) = kind.strip_prefix("trust.") {
                    TraceEvent::Trust {
                        kind: match k {
                            "stayed" => TrustEventKind::Stayed,
                            "left" => TrustEventKind::Left,
                            _ => return Err(bad()),
                        },
                        observer: agent(actor).ok_or_else(bad)?,
                        subject: prefixed(object, 'a').map(AgentId).ok_or_else(bad)?,
                        value: finite(amount).ok_or_else(bad)?,
                    }
                } else {
                    return Err(format!("unknown event kind `{kind}`"));
                }
            }
        };
        Ok(TraceLine { step, event })
    }
}

/// Parameters needed to replay a trace, carried on its first line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceHeader {
    pub n_agents: usize,
    pub seed: u64,
    pub trust_reward: f64,
    pub trust_punishment: f64,
}

impl fmt::Display for TraceHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{TRACE_MAGIC} n_agents={} seed={} trust_reward={} trust_punishment={}",
            self.n_agents, self.seed, self.trust_reward, self.trust_punishment
        )
    }
}

impl FromStr for TraceHeader {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let rest = line
            .strip_prefix(TRACE_MAGIC)
            .ok_or_else(|| "missing trace header".to_owned())?;
        let mut values: HashMap<&str, &str> = HashMap::new();
        for pair in rest.split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| format!("bad header field `{pair}`"))?;
            values.insert(k, v);
        }
        let get = |k: &str| values.get(k).copied().ok_or_else(|| format!("header lacks `{k}`"));
        let n_agents: usize = get("n_agents")?.parse().map_err(|_| "bad n_agents".to_owned())?;
        if !(2..=MAX_REPLAY_AGENTS).contains(&n_agents) {
            return Err(format!("n_agents {n_agents} out of range"));
        }
        let num = |k: &str| -> std::result::Result<f64, String> {
            finite(get(k)?).ok_or_else(|| format!("bad {k}"))
        };
        Ok(TraceHeader {
            n_agents,
            seed: get("seed")?.parse().map_err(|_| "bad seed".to_owned())?,
            trust_reward: num("trust_reward")?,
            trust_punishment: num("trust_punishment")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub lines: Vec<TraceLine>,
}

impl Trace {
    pub fn render(&self) -> String {
        let mut out = self.header.to_string();
        out.push('\n');
        for line in &self.lines {
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses a whole trace file. Blank lines and `#` comments after the header
/// are skipped.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::TraceParse {
        line: 1,
        message: "empty trace".to_owned(),
    })?;
    let header: TraceHeader = first.parse().map_err(|message| Error::TraceParse { line: 1, message })?;
    let mut parsed = Vec::new();
    for (i, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        parsed.push(
            trimmed
                .parse()
                .map_err(|message| Error::TraceParse { line: i + 1, message })?,
        );
    }
    Ok(Trace {
        header,
        lines: parsed,
    })
}

/// First point where a trace disagrees with itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: u32,
    /// Index into `Trace::lines` (0-based), or `None` for end-of-step checks.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "step {}: event #{}: {}", self.step, l + 1, self.message),
            None => write!(f, "step {}: {}", self.step, self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayReport {
    pub steps: usize,
    pub events: usize,
    pub formations: usize,
    pub departures: usize,
    pub trust_updates: usize,
    pub balance_checks: usize,
}

struct ReplayProposal {
    initiator: AgentId,
    members: CoalitionSet,
    yes: BTreeSet<AgentId>,
    confirmed: BTreeSet<AgentId>,
    agreed: bool,
    closed: bool,
}

struct Replay {
    n: usize,
    reward: f64,
    punishment: f64,
    balances: Vec<f64>,
    trust: TrustMatrix,
    coalitions: BTreeMap<u64, BTreeSet<AgentId>>,
    member_of: Vec<Option<u64>>,
    proposals: HashMap<u64, ReplayProposal>,
    used_coalition_ids: HashSet<u64>,
    step: Option<u32>,
    step_start: BTreeMap<u64, BTreeSet<AgentId>>,
    departed: HashSet<(u64, AgentId)>,
    flows: StepFlows,
    report: ReplayReport,
}

/// Re-derives balances, membership and trust from the trace alone and checks
/// them against the checkpoints and invariants it records.
pub fn replay_check(trace: &Trace) -> std::result::Result<ReplayReport, Divergence> {
    let n = trace.header.n_agents;
    let mut replay = Replay {
        n,
        reward: trace.header.trust_reward,
        punishment: trace.header.trust_punishment,
        balances: vec![0.0; n],
        trust: TrustMatrix::new(n).map_err(|e| Divergence {
            step: 0,
            line: None,
            message: e.to_string(),
        })?,
        coalitions: BTreeMap::new(),
        member_of: vec![None; n],
        proposals: HashMap::new(),
        used_coalition_ids: HashSet::new(),
        step: None,
        step_start: BTreeMap::new(),
        departed: HashSet::new(),
        flows: StepFlows::default(),
        report: ReplayReport::default(),
    };
    for (i, line) in trace.lines.iter().enumerate() {
        replay.advance_to(line.step, i)?;
        replay
            .apply(&line.event)
            .map_err(|message| Divergence {
                step: line.step,
                line: Some(i),
                message,
            })?;
        replay.report.events += 1;
    }
    if let Some(step) = replay.step {
        replay.finish_step(step)?;
    }
    Ok(replay.report)
}

impl Replay {
    fn advance_to(&mut self, step: u32, line: usize) -> std::result::Result<(), Divergence> {
        match self.step {
            Some(s) if s == step => return Ok(()),
            Some(s) if s > step => {
                return Err(Divergence {
                    step,
                    line: Some(line),
                    message: format!("step goes backwards from {s}"),
                })
            }
            Some(s) => self.finish_step(s)?,
            None => {}
        }
        self.step = Some(step);
        self.step_start = self.coalitions.clone();
        self.departed.clear();
        self.flows = StepFlows::default();
        self.report.steps += 1;
        Ok(())
    }

    fn finish_step(&mut self, step: u32) -> std::result::Result<(), Divergence> {
        let fail = |message: String| Divergence {
            step,
            line: None,
            message,
        };
        if let Some(v) = self.flows.violation() {
            return Err(fail(format!("ledger conservation: {v}")));
        }
        for (id, members) in &self.coalitions {
            if members.len() < 2 {
                return Err(fail(format!("coalition c{id} has {} member(s)", members.len())));
            }
            for m in members {
                if self.member_of[m.0] != Some(*id) {
                    return Err(fail(format!("agent {m} membership disagrees with c{id}")));
                }
            }
        }
        Ok(())
    }

    fn check_agent(&self, a: AgentId) -> std::result::Result<(), String> {
        if a.0 < self.n {
            Ok(())
        } else {
            Err(format!("agent {a} outside population of {}", self.n))
        }
    }

    fn check_set(&self, c: &CoalitionSet) -> std::result::Result<(), String> {
        c.iter().try_for_each(|a| self.check_agent(a))
    }

    fn apply(&mut self, event: &TraceEvent) -> std::result::Result<(), String> {
        match event {
            TraceEvent::Open {
                proposal,
                initiator,
                coalition,
            } => {
                self.check_set(coalition)?;
                if !coalition.contains(*initiator) || coalition.len() < 2 {
                    return Err(format!("p{proposal} is not a valid proposal from {initiator}"));
                }
                if self.proposals.contains_key(proposal) {
                    return Err(format!("p{proposal} opened twice"));
                }
                self.proposals.insert(
                    *proposal,
                    ReplayProposal {
                        initiator: *initiator,
                        members: coalition.clone(),
                        yes: BTreeSet::new(),
                        confirmed: BTreeSet::new(),
                        agreed: false,
                        closed: false,
                    },
                );
            }
            TraceEvent::Respond {
                proposal,
                responder,
                answer,
            } => {
                let p = self.open_proposal(*proposal)?;
                if !p.members.contains(*responder) || p.initiator == *responder {
                    return Err(format!("{responder} was not solicited by p{proposal}"));
                }
                if *answer == Answer::Yes && !p.yes.insert(*responder) {
                    return Err(format!("{responder} answered p{proposal} twice"));
                }
            }
            TraceEvent::Agreed { proposal, .. } => {
                let p = self.open_proposal(*proposal)?;
                let solicited = p.members.iter().filter(|&a| a != p.initiator);
                if !solicited.clone().all(|a| p.yes.contains(&a)) {
                    return Err(format!("p{proposal} entered commitment without every yes"));
                }
                p.agreed = true;
            }
            TraceEvent::Confirm { proposal, agent } => {
                let p = self.open_proposal(*proposal)?;
                if !p.agreed || !p.members.contains(*agent) || p.initiator == *agent {
                    return Err(format!("{agent} cannot confirm p{proposal}"));
                }
                p.confirmed.insert(*agent);
            }
            TraceEvent::Cancel { proposal, .. } => {
                self.open_proposal(*proposal)?.closed = true;
            }
            TraceEvent::Audit { .. } => {}
            TraceEvent::Form {
                coalition,
                proposal,
                initiator,
                members,
            } => {
                self.check_set(members)?;
                let p = self.open_proposal(*proposal)?;
                let complete = p.agreed
                    && p.members
                        .iter()
                        .filter(|&a| a != p.initiator)
                        .all(|a| p.yes.contains(&a) && p.confirmed.contains(&a));
                if !complete {
                    return Err(format!("p{proposal} formed without every yes and confirmation"));
                }
                if p.members != *members || p.initiator != *initiator {
                    return Err(format!("c{coalition} does not match p{proposal}"));
                }
                p.closed = true;
                if !self.used_coalition_ids.insert(*coalition) {
                    return Err(format!("coalition id c{coalition} reused"));
                }
                for a in members.iter() {
                    if let Some(c) = self.member_of[a.0] {
                        return Err(format!("{a} joins c{coalition} while still in c{c}"));
                    }
                }
                for a in members.iter() {
                    self.member_of[a.0] = Some(*coalition);
                }
                self.coalitions.insert(*coalition, members.iter().collect());
                self.report.formations += 1;
            }
            TraceEvent::Depart { agent, coalition } => {
                self.check_agent(*agent)?;
                if self.member_of[agent.0] != Some(*coalition) {
                    return Err(format!("{agent} departs c{coalition} without being a member"));
                }
                if let Some(c) = self.coalitions.get_mut(coalition) {
                    c.remove(agent);
                }
                self.member_of[agent.0] = None;
                self.departed.insert((*coalition, *agent));
                self.report.departures += 1;
            }
            TraceEvent::Dissolve { agent, coalition } => {
                self.check_agent(*agent)?;
                let last = self.coalitions.get(coalition);
                if last.map(|m| m.len() == 1 && m.contains(agent)) != Some(true) {
                    return Err(format!("c{coalition} dissolves but {agent} is not its last member"));
                }
                self.coalitions.remove(coalition);
                self.member_of[agent.0] = None;
            }
            TraceEvent::Ledger {
                kind,
                party,
                amount,
            } => {
                self.flows.add(*kind, *amount);
                match party {
                    Party::Agent(a) => {
                        self.check_agent(*a)?;
                        if *kind == LedgerKind::UtilityAccrual && self.member_of[a.0].is_none() {
                            return Err(format!("{a} accrues utility while alone"));
                        }
                        self.balances[a.0] += amount;
                    }
                    Party::Sink => {
                        if *kind != LedgerKind::FeeSink {
                            return Err(format!("sink cannot receive {}", kind.as_str()));
                        }
                    }
                }
            }
            TraceEvent::Trust {
                kind,
                observer,
                subject,
                value,
            } => {
                self.check_agent(*observer)?;
                self.check_agent(*subject)?;
                let shared = self
                    .step_start
                    .iter()
                    .find(|(_, m)| m.contains(observer) && m.contains(subject))
                    .map(|(id, _)| *id)
                    .ok_or_else(|| format!("{observer} and {subject} were not co-members"))?;
                let subject_left = self.departed.contains(&(shared, *subject));
                let observer_left = self.departed.contains(&(shared, *observer));
                let witnessed = match kind {
                    TrustEventKind::Stayed => !subject_left,
                    TrustEventKind::Left => subject_left && !observer_left,
                };
                if !witnessed {
                    return Err(format!("{observer} records {kind:?} for {subject} without witnessing it"));
                }
                let event = TrustEvent {
                    observer: *observer,
                    subject: *subject,
                    kind: *kind,
                    step: self.step.unwrap_or(0),
                };
                let replayed = self
                    .trust
                    .apply_with(&event, self.reward, self.punishment)
                    .map_err(|e| e.to_string())?;
                if replayed != *value {
                    return Err(format!(
                        "trust of {observer} in {subject} replays to {replayed}, trace says {value}"
                    ));
                }
                self.report.trust_updates += 1;
            }
            TraceEvent::Balance { agent, total } => {
                self.check_agent(*agent)?;
                let replayed = self.balances[agent.0];
                if replayed != *total {
                    return Err(format!(
                        "balance of {agent} replays to {replayed}, trace records {total}"
                    ));
                }
                self.report.balance_checks += 1;
            }
        }
        Ok(())
    }

    fn open_proposal(&mut self, id: u64) -> std::result::Result<&mut ReplayProposal, String> {
        match self.proposals.get_mut(&id) {
            Some(p) if !p.closed => Ok(p),
            Some(_) => Err(format!("p{id} used after it closed")),
            None => Err(format!("p{id} was never opened")),
        }
    }
}
