//! Money flows. Every transfer is an entry; balances are folds over entries.

use crate::domain::AgentId;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LedgerKind {
    UtilityAccrual,
    CommCost,
    EnrollFee,
    InitiatorReward,
    LeavePenalty,
    PenaltyShare,
    /// The part of an enrollment fee the initiator does not receive.
    FeeSink,
}

impl LedgerKind {
    pub const ALL: [LedgerKind; 7] = [
        LedgerKind::UtilityAccrual,
        LedgerKind::CommCost,
        LedgerKind::EnrollFee,
        LedgerKind::InitiatorReward,
        LedgerKind::LeavePenalty,
        LedgerKind::PenaltyShare,
        LedgerKind::FeeSink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LedgerKind::UtilityAccrual => "accrual",
            LedgerKind::CommCost => "comm",
            LedgerKind::EnrollFee => "fee",
            LedgerKind::InitiatorReward => "reward",
            LedgerKind::LeavePenalty => "penalty",
            LedgerKind::PenaltyShare => "share",
            LedgerKind::FeeSink => "sink",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Agent(AgentId),
    Sink,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Agent(a) => write!(f, "{a}"),
            Party::Sink => f.write_str("sink"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u32,
    pub kind: LedgerKind,
    pub party: Party,
    pub amount: f64,
}

/// Per-step sums used by the conservation checks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepFlows {
    pub penalties: f64,
    pub shares: f64,
    pub fees: f64,
    pub rewards: f64,
    pub sinks: f64,
    pub fee_count: usize,
    pub reward_count: usize,
    pub sink_count: usize,
}

pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

impl StepFlows {
    pub fn add(&mut self, kind: LedgerKind, amount: f64) {
        match kind {
            LedgerKind::LeavePenalty => self.penalties += amount,
            LedgerKind::PenaltyShare => self.shares += amount,
            LedgerKind::EnrollFee => {
                self.fees += amount;
                self.fee_count += 1;
            }
            LedgerKind::InitiatorReward => {
                self.rewards += amount;
                self.reward_count += 1;
            }
            LedgerKind::FeeSink => {
                self.sinks += amount;
                self.sink_count += 1;
            }
            LedgerKind::UtilityAccrual | LedgerKind::CommCost => {}
        }
    }

    /// First broken conservation rule, if any.
    pub fn violation(&self) -> Option<String> {
        if (self.penalties + self.shares).abs() > CONSERVATION_TOLERANCE {
            return Some(format!(
                "penalty debits {} not matched by share credits {}",
                self.penalties, self.shares
            ));
        }
        if self.fee_count != self.reward_count || self.fee_count != self.sink_count {
            return Some(format!(
                "{} fees but {} rewards and {} sink entries",
                self.fee_count, self.reward_count, self.sink_count
            ));
        }
        if (self.fees + self.rewards + self.sinks).abs() > CONSERVATION_TOLERANCE {
            return Some(format!(
                "fees {} not matched by rewards {} plus sink {}",
                self.fees, self.rewards, self.sinks
            ));
        }
        None
    }
}
