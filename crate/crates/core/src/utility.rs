//! Coalition utility from interaction tables, and expected utilities used
//! when deciding whether to stay or switch.

use crate::domain::{AgentId, CoalitionSet, InteractionTable, SimConfig};
use crate::error::Result;
use crate::trust::TrustMatrix;

/// Which side of a proposal an agent evaluates it from. Only solicited
/// agents pay the enrollment fee.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinRole {
    Initiator,
    Solicited,
}

/// Sum of `table[a][b]` over all ordered pairs of distinct members, visited in
/// ascending `(a, b)` order. A singleton has utility 0.
pub fn coalition_utility(
    agent: AgentId,
    coalition: &CoalitionSet,
    table: &InteractionTable,
) -> Result<f64> {
    coalition.require_member(agent)?;
    Ok(pair_sum(coalition, table))
}

pub(crate) fn pair_sum(coalition: &CoalitionSet, table: &InteractionTable) -> f64 {
    let members = coalition.members();
    let mut sum = 0.0;
    for &a in members {
        for &b in members {
            if a != b {
                sum += table.get(a, b);
            }
        }
    }
    sum
}

/// `utility` discounted by the agent's trust that each co-member stays.
pub fn expected_utility_current(
    agent: AgentId,
    coalition: &CoalitionSet,
    utility: f64,
    trust: &TrustMatrix,
) -> Result<f64> {
    coalition.require_member(agent)?;
    let stay_probability: f64 = coalition
        .iter()
        .filter(|&j| j != agent)
        .map(|j| trust.get(agent, j))
        .product();
    Ok(utility * stay_probability)
}

/// Proposed utility less the one-off switching costs, spread by `step_coeff`.
pub fn expected_utility_proposed(
    proposed_utility: f64,
    would_pay_leave_penalty: bool,
    role: JoinRole,
    config: &SimConfig,
) -> f64 {
    let penalty = if would_pay_leave_penalty {
        config.leave_penalty
    } else {
        0.0
    };
    let enroll = match role {
        JoinRole::Solicited => config.enroll_fee,
        JoinRole::Initiator => 0.0,
    };
    proposed_utility - (penalty + enroll) * config.step_coeff
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> CoalitionSet {
        CoalitionSet::from_indices(v).unwrap()
    }

    #[test]
    fn singleton_is_zero() {
        let table = InteractionTable::from_rows(vec![vec![55.0; 2]; 2]);
        assert_eq!(coalition_utility(AgentId(0), &ids(&[0]), &table).unwrap(), 0.0);
    }

    #[test]
    fn pair_hand_enumeration() {
        let mut table = InteractionTable::zeros(2);
        table.set(AgentId(0), AgentId(1), 10.0);
        table.set(AgentId(1), AgentId(0), -3.0);
        assert_eq!(coalition_utility(AgentId(0), &ids(&[0, 1]), &table).unwrap(), 7.0);
    }

    #[test]
    fn non_member_is_rejected() {
        let table = InteractionTable::zeros(3);
        assert!(coalition_utility(AgentId(2), &ids(&[0, 1]), &table).is_err());
    }

    #[test]
    fn current_expected_utility() {
        let mut trust = TrustMatrix::new(3).unwrap();
        let c = ids(&[0, 1, 2]);
        assert_eq!(expected_utility_current(AgentId(0), &c, 100.0, &trust).unwrap(), 25.0);
        trust.set(AgentId(0), AgentId(1), 1.0);
        trust.set(AgentId(0), AgentId(2), 1.0);
        assert_eq!(expected_utility_current(AgentId(0), &c, 100.0, &trust).unwrap(), 100.0);
        let pair = ids(&[1, 2]);
        assert_eq!(expected_utility_current(AgentId(1), &pair, -40.0, &TrustMatrix::new(3).unwrap()).unwrap(), -20.0);
        assert_eq!(
            expected_utility_current(AgentId(1), &ids(&[1]), 12.0, &trust).unwrap(),
            12.0
        );
    }

    #[test]
    fn proposed_expected_utility() {
        let config = SimConfig::round_numbers();
        assert_eq!(expected_utility_proposed(200.0, false, JoinRole::Solicited, &config), 195.0);
        assert_eq!(expected_utility_proposed(200.0, true, JoinRole::Solicited, &config), 170.0);
        assert_eq!(expected_utility_proposed(200.0, false, JoinRole::Initiator, &config), 200.0);
        let free = SimConfig {
            enroll_fee: 0.0,
            ..SimConfig::round_numbers()
        };
        assert_eq!(expected_utility_proposed(0.0, false, JoinRole::Solicited, &free), 0.0);
    }
}
