//! Two-phase proposal lifecycle: an agreement round (yes/no) followed by a
//! commitment round (confirm), each with its own deadline.
//!
//! ```text
//! Agreement --all yes--> Commitment --all confirmed + arbitration--> Formed
//!     |                      |
//!     +--no / timeout--------+--timeout / arbitration loss----------> Cancelled
//! ```
//!
//! A deadline of `d` steps for a proposal created at step `t` covers steps
//! `t ..= t + d - 1`; the proposal is cancelled on entering step `t + d` if
//! anything is still pending. The commitment clock restarts when agreement
//! completes.

use crate::domain::{AgentId, CoalitionSet, SimConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Agreement,
    Commitment,
    Formed,
    Cancelled,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Formed | Phase::Cancelled)
    }

    pub fn can_become(self, next: Phase) -> bool {
        matches!(
            (self, next),
            (Phase::Agreement, Phase::Commitment)
                | (Phase::Agreement, Phase::Cancelled)
                | (Phase::Commitment, Phase::Formed)
                | (Phase::Commitment, Phase::Cancelled)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementStatus {
    Pending,
    Yes,
    No,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Commitment {
    Confirmed,
    Declined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitmentStatus {
    Pending,
    Confirmed,
    Declined,
}

/// Why a response was dropped instead of recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IgnoreReason {
    Terminal,
    WrongPhase,
    NotSolicited,
    Duplicate,
    Late,
}

impl IgnoreReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IgnoreReason::Terminal => "terminal",
            IgnoreReason::WrongPhase => "wrong-phase",
            IgnoreReason::NotSolicited => "not-solicited",
            IgnoreReason::Duplicate => "duplicate",
            IgnoreReason::Late => "late",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Recorded; carries the phase after the response.
    Recorded(Phase),
    Ignored(IgnoreReason),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub id: u64,
    pub initiator: AgentId,
    pub coalition: CoalitionSet,
    pub created_at: u32,
    phase: Phase,
    agreement: BTreeMap<AgentId, AgreementStatus>,
    commitment: BTreeMap<AgentId, CommitmentStatus>,
    commitment_started: Option<u32>,
}

/// Builds a fresh proposal in the agreement phase with every solicited
/// answer pending.
pub fn open_proposal(
    id: u64,
    initiator: AgentId,
    coalition: CoalitionSet,
    step: u32,
) -> Result<Proposal> {
    coalition.require_member(initiator)?;
    if coalition.len() < 2 {
        return Err(Error::NoSolicitedAgents);
    }
    let solicited = coalition.iter().filter(|&a| a != initiator);
    Ok(Proposal {
        id,
        initiator,
        agreement: solicited.clone().map(|a| (a, AgreementStatus::Pending)).collect(),
        commitment: solicited.map(|a| (a, CommitmentStatus::Pending)).collect(),
        coalition,
        created_at: step,
        phase: Phase::Agreement,
        commitment_started: None,
    })
}

/// Hands out monotonically increasing proposal ids.
#[derive(Clone, Debug, Default)]
pub struct ProposalBook {
    next_id: u64,
}

impl ProposalBook {
    pub fn open(&mut self, initiator: AgentId, coalition: CoalitionSet, step: u32) -> Result<Proposal> {
        let proposal = open_proposal(self.next_id, initiator, coalition, step)?;
        self.next_id += 1;
        Ok(proposal)
    }
}

impl Proposal {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn commitment_started(&self) -> Option<u32> {
        self.commitment_started
    }

    pub fn solicited(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agreement.keys().copied()
    }

    pub fn agreement_status(&self, agent: AgentId) -> Option<AgreementStatus> {
        self.agreement.get(&agent).copied()
    }

    pub fn commitment_status(&self, agent: AgentId) -> Option<CommitmentStatus> {
        self.commitment.get(&agent).copied()
    }

    pub fn pending_agreement(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agreement
            .iter()
            .filter(|(_, s)| **s == AgreementStatus::Pending)
            .map(|(a, _)| *a)
    }

    pub fn all_agreed(&self) -> bool {
        self.agreement.values().all(|s| *s == AgreementStatus::Yes)
    }

    pub fn all_confirmed(&self) -> bool {
        self.commitment.values().all(|s| *s == CommitmentStatus::Confirmed)
    }

    /// Awaiting `agent`'s confirmation.
    pub fn awaits_confirmation_from(&self, agent: AgentId) -> bool {
        self.phase == Phase::Commitment
            && self.commitment.get(&agent) == Some(&CommitmentStatus::Pending)
    }

    /// Every solicited agent said yes and confirmed; formation now depends
    /// only on arbitration.
    pub fn is_formation_eligible(&self) -> bool {
        self.phase == Phase::Commitment && self.all_confirmed()
    }

    pub fn transition(&mut self, next: Phase) -> Result<()> {
        if !self.phase.can_become(next) {
            return Err(Error::IllegalTransition {
                from: self.phase,
                to: next,
            });
        }
        self.phase = next;
        Ok(())
    }

    pub fn cancel(&mut self) -> Result<()> {
        self.transition(Phase::Cancelled)
    }

    pub fn mark_formed(&mut self) -> Result<()> {
        if !self.all_agreed() || !self.all_confirmed() {
            return Err(Error::IllegalTransition {
                from: self.phase,
                to: Phase::Formed,
            });
        }
        self.transition(Phase::Formed)
    }

    fn check_response(&self, phase: Phase, window_start: u32, deadline: u32, step: u32) -> Option<IgnoreReason> {
        if self.phase.is_terminal() {
            Some(IgnoreReason::Terminal)
        } else if self.phase != phase {
            Some(IgnoreReason::WrongPhase)
        } else if step >= window_start + deadline || step < window_start {
            Some(IgnoreReason::Late)
        } else {
            None
        }
    }

    pub fn record_agreement(&mut self, responder: AgentId, answer: Answer, step: u32, deadline: u32) -> Outcome {
        if let Some(reason) = self.check_response(Phase::Agreement, self.created_at, deadline, step) {
            return Outcome::Ignored(reason);
        }
        match self.agreement.get_mut(&responder) {
            None => return Outcome::Ignored(IgnoreReason::NotSolicited),
            Some(s) if *s != AgreementStatus::Pending => return Outcome::Ignored(IgnoreReason::Duplicate),
            Some(s) => {
                *s = match answer {
                    Answer::Yes => AgreementStatus::Yes,
                    Answer::No => AgreementStatus::No,
                }
            }
        }
        if answer == Answer::No {
            self.phase = Phase::Cancelled;
        } else if self.all_agreed() {
            self.phase = Phase::Commitment;
            self.commitment_started = Some(step);
        }
        Outcome::Recorded(self.phase)
    }

    pub fn record_commitment(
        &mut self,
        responder: AgentId,
        answer: Commitment,
        step: u32,
        deadline: u32,
    ) -> Outcome {
        let start = self.commitment_started.unwrap_or(self.created_at);
        if let Some(reason) = self.check_response(Phase::Commitment, start, deadline, step) {
            return Outcome::Ignored(reason);
        }
        match self.commitment.get_mut(&responder) {
            None => return Outcome::Ignored(IgnoreReason::NotSolicited),
            Some(s) if *s != CommitmentStatus::Pending => return Outcome::Ignored(IgnoreReason::Duplicate),
            Some(s) => {
                *s = match answer {
                    Commitment::Confirmed => CommitmentStatus::Confirmed,
                    Commitment::Declined => CommitmentStatus::Declined,
                }
            }
        }
        if answer == Commitment::Declined {
            self.phase = Phase::Cancelled;
        }
        Outcome::Recorded(self.phase)
    }

    /// True when the current phase's window has closed with answers missing.
    pub fn has_expired(&self, step: u32, config: &SimConfig) -> bool {
        match self.phase {
            Phase::Agreement => {
                step >= self.created_at + config.response_deadline
                    && self.agreement.values().any(|s| *s == AgreementStatus::Pending)
            }
            Phase::Commitment => {
                let start = self.commitment_started.unwrap_or(self.created_at);
                step >= start + config.confirm_deadline
                    && self.commitment.values().any(|s| *s == CommitmentStatus::Pending)
            }
            Phase::Formed | Phase::Cancelled => false,
        }
    }
}

/// Cancels every proposal whose current window closed before `current_step`
/// with answers still pending. Returns the cancelled ids in iteration order.
pub fn expire_proposals<'a>(
    proposals: impl IntoIterator<Item = &'a mut Proposal>,
    current_step: u32,
    config: &SimConfig,
) -> Vec<u64> {
    let mut cancelled = Vec::new();
    for p in proposals {
        if p.has_expired(current_step, config) {
            p.phase = Phase::Cancelled;
            cancelled.push(p.id);
        }
    }
    cancelled
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> CoalitionSet {
        CoalitionSet::from_indices(v).unwrap()
    }

    fn proposal(step: u32) -> Proposal {
        open_proposal(0, AgentId(0), ids(&[0, 1, 2]), step).unwrap()
    }

    #[test]
    fn open_keys_solicited_only() {
        let p = proposal(0);
        assert_eq!(p.solicited().collect::<Vec<_>>(), vec![AgentId(1), AgentId(2)]);
        assert_eq!(p.agreement_status(AgentId(1)), Some(AgreementStatus::Pending));
        assert_eq!(p.agreement_status(AgentId(0)), None);
        assert_eq!(p.phase(), Phase::Agreement);
        assert!(matches!(
            open_proposal(0, AgentId(0), ids(&[0]), 0),
            Err(Error::NoSolicitedAgents)
        ));
        assert!(open_proposal(0, AgentId(3), ids(&[0, 1]), 0).is_err());
    }

    #[test]
    fn ids_increase() {
        let mut book = ProposalBook::default();
        let a = book.open(AgentId(0), ids(&[0, 1]), 4).unwrap();
        let b = book.open(AgentId(1), ids(&[1, 2]), 4).unwrap();
        assert!(b.id > a.id);
    }

    #[test]
    fn all_yes_enters_commitment() {
        let mut p = proposal(5);
        assert_eq!(p.record_agreement(AgentId(1), Answer::Yes, 6, 3), Outcome::Recorded(Phase::Agreement));
        assert_eq!(p.record_agreement(AgentId(2), Answer::Yes, 7, 3), Outcome::Recorded(Phase::Commitment));
        assert_eq!(p.commitment_started(), Some(7));
    }

    #[test]
    fn any_no_cancels() {
        let mut p = proposal(5);
        p.record_agreement(AgentId(1), Answer::Yes, 5, 3);
        assert_eq!(p.record_agreement(AgentId(2), Answer::No, 5, 3), Outcome::Recorded(Phase::Cancelled));
    }

    #[test]
    fn late_duplicate_and_stranger_are_ignored() {
        let mut p = proposal(5);
        assert_eq!(p.record_agreement(AgentId(1), Answer::Yes, 8, 3), Outcome::Ignored(IgnoreReason::Late));
        p.record_agreement(AgentId(1), Answer::Yes, 7, 3);
        assert_eq!(p.record_agreement(AgentId(1), Answer::No, 7, 3), Outcome::Ignored(IgnoreReason::Duplicate));
        assert_eq!(p.record_agreement(AgentId(9), Answer::Yes, 7, 3), Outcome::Ignored(IgnoreReason::NotSolicited));
        assert_eq!(
            p.record_commitment(AgentId(1), Commitment::Confirmed, 7, 3),
            Outcome::Ignored(IgnoreReason::WrongPhase)
        );
    }

    #[test]
    fn timeout_path() {
        let config = SimConfig::default();
        let mut p = proposal(5);
        p.record_agreement(AgentId(1), Answer::Yes, 6, 3);
        assert!(expire_proposals([&mut p], 7, &config).is_empty());
        assert_eq!(expire_proposals([&mut p], 8, &config), vec![0]);
        assert_eq!(p.phase(), Phase::Cancelled);
    }

    #[test]
    fn answered_proposal_is_untouched_by_expiry() {
        let config = SimConfig::default();
        let mut p = proposal(5);
        p.record_agreement(AgentId(1), Answer::Yes, 5, 3);
        p.record_agreement(AgentId(2), Answer::Yes, 5, 3);
        p.record_commitment(AgentId(1), Commitment::Confirmed, 5, 3);
        p.record_commitment(AgentId(2), Commitment::Confirmed, 5, 3);
        assert!(expire_proposals([&mut p], 50, &config).is_empty());
        assert!(p.is_formation_eligible());
    }

    #[test]
    fn commitment_window_restarts() {
        let config = SimConfig::default();
        let mut p = proposal(4);
        p.record_agreement(AgentId(1), Answer::Yes, 5, 3);
        p.record_agreement(AgentId(2), Answer::Yes, 6, 3);
        p.record_commitment(AgentId(1), Commitment::Confirmed, 6, 3);
        assert!(expire_proposals([&mut p], 8, &config).is_empty());
        assert_eq!(expire_proposals([&mut p], 9, &config), vec![0]);
    }

    #[test]
    fn commitment_outcomes() {
        let mut p = proposal(0);
        p.record_agreement(AgentId(1), Answer::Yes, 0, 3);
        p.record_agreement(AgentId(2), Answer::Yes, 0, 3);
        assert!(p.awaits_confirmation_from(AgentId(1)));
        p.record_commitment(AgentId(1), Commitment::Confirmed, 1, 3);
        assert!(!p.is_formation_eligible());
        let mut declined = p.clone();
        assert_eq!(
            declined.record_commitment(AgentId(2), Commitment::Declined, 1, 3),
            Outcome::Recorded(Phase::Cancelled)
        );
        assert_eq!(
            declined.record_commitment(AgentId(2), Commitment::Confirmed, 1, 3),
            Outcome::Ignored(IgnoreReason::Terminal)
        );
        p.record_commitment(AgentId(2), Commitment::Confirmed, 2, 3);
        assert!(p.is_formation_eligible());
        p.mark_formed().unwrap();
        assert!(p.cancel().is_err());
    }

    #[test]
    fn formed_requires_full_agreement() {
        let mut p = proposal(0);
        assert!(p.mark_formed().is_err());
        assert!(p.transition(Phase::Formed).is_err());
        p.cancel().unwrap();
        assert!(p.transition(Phase::Commitment).is_err());
    }
}
