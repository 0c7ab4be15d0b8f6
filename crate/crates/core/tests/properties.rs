use hedonica::domain::{AgentId, AgentProfile, CoalitionSet, InteractionTable, ResponderType, RiskAttitude, SimConfig};
use hedonica::protocol::{open_proposal, Answer, Commitment, Outcome, Phase};
use hedonica::strategy::{
    coalition_distance, formation_probability, interest_degree, preference_score, should_accept, Direction,
    History, ProposalRecord,
};
use hedonica::trace::{TraceLine, TraceEvent};
use hedonica::utility::coalition_utility;
use proptest::prelude::*;
use std::collections::BTreeSet;

const N: usize = 20;

fn coalition(n: usize, max: usize) -> impl Strategy<Value = CoalitionSet> {
    prop::collection::btree_set(0..n, 1..=max)
        .prop_map(|s| CoalitionSet::from_indices(&s.into_iter().collect::<Vec<_>>()).unwrap())
}

fn table(n: usize) -> impl Strategy<Value = InteractionTable> {
    prop::collection::vec(prop::collection::vec(-100.0..=100.0f64, n), n).prop_map(InteractionTable::from_rows)
}

fn attitude() -> impl Strategy<Value = RiskAttitude> {
    prop::sample::select(RiskAttitude::ALL.to_vec())
}

fn history(n: usize) -> impl Strategy<Value = History> {
    let direction = prop::sample::select(vec![Direction::Received, Direction::SentAccepted, Direction::SentRefused]);
    prop::collection::vec((coalition(n, 6), 0..n, direction), 0..30).prop_map(|records| {
        let mut h = History::new();
        for (coalition, counterpart, direction) in records {
            h.push(ProposalRecord {
                coalition,
                counterpart: AgentId(counterpart),
                direction,
                step: 0,
            });
        }
        h
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn coalition_set_is_order_independent(mut ids in prop::collection::vec(0..50usize, 1..12)) {
        let a = CoalitionSet::from_indices(&ids).unwrap();
        ids.reverse();
        ids.extend_from_slice(&ids.clone());
        let b = CoalitionSet::from_indices(&ids).unwrap();
        prop_assert_eq!(&a, &b);
        let expected: BTreeSet<usize> = ids.iter().copied().collect();
        prop_assert_eq!(a.iter().map(|x| x.0).collect::<Vec<_>>(), expected.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn interest_degree_stays_in_range(h in history(N), target in 0..N, c in coalition(N, 6)) {
        let d = interest_degree(&h, AgentId(target), &c, N);
        prop_assert!((-1.0..=1.0).contains(&d));
    }

    #[test]
    fn formation_probability_is_a_probability(deltas in prop::collection::vec(-1.0..=1.0f64, 1..8)) {
        let p = formation_probability(&deltas).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let worst = deltas.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(p, (1.0 - worst) / 2.0);
    }

    #[test]
    fn preference_is_monotone(
        u in 0.001..1e4f64,
        du in 0.001..1e3f64,
        p in 0.0..=1.0f64,
        dp in 0.0..=1.0f64,
        att in attitude(),
        alpha in 1.01..6.0f64,
        beta in 0.01..0.99f64,
    ) {
        let base = preference_score(u, p, att, alpha, beta).unwrap();
        if p > 0.0 {
            prop_assert!(preference_score(u + du, p, att, alpha, beta).unwrap() > base);
        }
        let p2 = (p + dp).min(1.0);
        prop_assert!(preference_score(u, p2, att, alpha, beta).unwrap() >= base);
    }

    #[test]
    fn acceptance_is_monotone_in_utility(t in table(8), c in coalition(8, 5), bump in 0.0..50.0f64) {
        let agent = c.members()[0];
        let profile = AgentProfile {
            honesty: 0.1,
            risk_attitude: RiskAttitude::Neutral,
            responder_type: ResponderType::Early,
            table: t.clone(),
        };
        if should_accept(agent, &c, &profile).unwrap() {
            let mut better = t;
            for a in c.iter() {
                for b in c.iter() {
                    if a != b {
                        better.set(a, b, better.get(a, b) + bump);
                    }
                }
            }
            let richer = AgentProfile { table: better, ..profile };
            prop_assert!(should_accept(agent, &c, &richer).unwrap());
        }
    }

    #[test]
    fn utility_does_not_depend_on_which_member_asks(t in table(10), c in coalition(10, 6)) {
        let values: Vec<f64> = c.iter().map(|a| coalition_utility(a, &c, &t).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn distance_matches_set_arithmetic(a in coalition(N, 8), b in coalition(N, 8)) {
        let sa: BTreeSet<_> = a.iter().collect();
        let sb: BTreeSet<_> = b.iter().collect();
        let expected = sa.symmetric_difference(&sb).count() as f64 / N as f64;
        prop_assert_eq!(coalition_distance(&a, &b, N), expected);
    }

    #[test]
    fn trace_lines_round_trip(
        step in 0..1000u32,
        agent in 0..50usize,
        amount in -1e6..1e6f64,
        kind in prop::sample::select(hedonica::ledger::LedgerKind::ALL.to_vec()),
    ) {
        let line = TraceLine {
            step,
            event: TraceEvent::Ledger { kind, party: hedonica::ledger::Party::Agent(AgentId(agent)), amount },
        };
        let text = line.to_string();
        let back: TraceLine = text.parse().unwrap();
        prop_assert_eq!(back, line);
    }
}

#[derive(Clone, Debug)]
enum Op {
    Agree(usize, bool, u32),
    Commit(usize, bool, u32),
    Cancel,
    Form,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..8usize, any::<bool>(), 0..10u32).prop_map(|(a, y, s)| Op::Agree(a, y, s)),
        (0..8usize, any::<bool>(), 0..10u32).prop_map(|(a, y, s)| Op::Commit(a, y, s)),
        Just(Op::Cancel),
        Just(Op::Form),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    /// Random message streams never push a proposal into an inconsistent state.
    #[test]
    fn protocol_state_machine(members in coalition(8, 6), ops in prop::collection::vec(op(), 0..40)) {
        prop_assume!(members.len() >= 2);
        let initiator = members.members()[0];
        let mut p = open_proposal(7, initiator, members.clone(), 2).unwrap();
        let deadline = 3;
        for o in ops {
            let before = p.phase();
            let result = match o {
                Op::Agree(a, yes, s) => {
                    let out = p.record_agreement(AgentId(a), if yes { Answer::Yes } else { Answer::No }, s, deadline);
                    if let Outcome::Recorded(_) = out {
                        prop_assert!(members.contains(AgentId(a)) && AgentId(a) != initiator);
                        prop_assert_eq!(before, Phase::Agreement);
                        prop_assert!((2..5).contains(&s));
                    }
                    Ok(())
                }
                Op::Commit(a, yes, s) => {
                    let c = if yes { Commitment::Confirmed } else { Commitment::Declined };
                    let out = p.record_commitment(AgentId(a), c, s, deadline);
                    if let Outcome::Recorded(_) = out {
                        prop_assert_eq!(before, Phase::Commitment);
                        prop_assert!(p.all_agreed());
                    }
                    Ok(())
                }
                Op::Cancel => p.cancel(),
                Op::Form => p.mark_formed(),
            };
            if before.is_terminal() {
                prop_assert_eq!(p.phase(), before);
                prop_assert!(result.is_err() || matches!(o, Op::Agree(..) | Op::Commit(..)));
            }
            match p.phase() {
                Phase::Formed => prop_assert!(p.all_agreed() && p.all_confirmed()),
                Phase::Commitment => prop_assert!(p.all_agreed() && p.commitment_started().is_some()),
                _ => {}
            }
        }
    }
}

#[test]
fn override_round_trips_every_field() {
    let config = SimConfig::default();
    let value = serde_json::to_value(&config).unwrap();
    let mut rebuilt = SimConfig {
        n_agents: 3,
        alpha: 9.0,
        ..SimConfig::default()
    };
    for (k, v) in value.as_object().unwrap() {
        rebuilt.apply_override(&format!("{k}={v}")).unwrap();
    }
    assert_eq!(rebuilt, config);
}
