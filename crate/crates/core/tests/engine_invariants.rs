use hedonica::domain::{GainedUtility, ResponderMix, RiskMix, SimConfig};
use hedonica::engine::{run_with_options, RunResult};
use hedonica::ledger::{LedgerKind, Party};
use hedonica::metrics::{coalition_duration, honesty_utility_profile};
use hedonica::trace::{parse_trace, replay_check};
use std::collections::BTreeMap;

fn config(seed: u64, risk_mix: RiskMix, responder_mix: ResponderMix) -> SimConfig {
    SimConfig {
        n_agents: 12,
        n_steps: 60,
        seed,
        risk_mix,
        responder_mix,
        ..SimConfig::default()
    }
}

fn batch() -> Vec<(SimConfig, RunResult)> {
    let mixes = [RiskMix::AllSeeking, RiskMix::AllAverse, RiskMix::AllNeutral, RiskMix::EqualThirds];
    let responders = [
        ResponderMix::UniformRandom,
        ResponderMix::AllEarly,
        ResponderMix::AllLazy,
        ResponderMix::AllRandom,
    ];
    let mut out = Vec::new();
    for seed in 0..4u64 {
        for (i, &mix) in mixes.iter().enumerate() {
            let c = config(seed, mix, responders[(i + seed as usize) % 4]);
            let r = run_with_options(&c, true).unwrap();
            out.push((c, r));
        }
    }
    out
}

#[test]
fn frames_partition_the_population() {
    for (c, r) in batch() {
        assert_eq!(r.frames.len(), c.n_steps as usize);
        for f in &r.frames {
            assert_eq!(f.alone + f.solicited + f.initiator, c.n_agents);
            assert_eq!(f.initiator, f.coalitions_active);
            if f.coalitions_active > 0 {
                assert!(f.mean_coalition_size >= 2.0);
            }
        }
    }
}

#[test]
fn traces_replay_cleanly() {
    for (_, r) in batch() {
        let trace = r.trace.as_ref().unwrap();
        let parsed = parse_trace(&trace.render()).unwrap();
        let report = replay_check(&parsed).unwrap_or_else(|d| panic!("seed {}: {d}", r.seed));
        assert_eq!(report.formations, r.lifetimes.len());
    }
}

#[test]
fn ledger_folds_to_balances_and_conserves_per_step() {
    for (c, r) in batch() {
        let mut balances = vec![0.0; c.n_agents];
        let mut per_step: BTreeMap<u32, [f64; 2]> = BTreeMap::new();
        for e in &r.ledger {
            if let Party::Agent(a) = e.party {
                balances[a.0] += e.amount;
            }
            let slot = per_step.entry(e.step).or_default();
            match e.kind {
                LedgerKind::LeavePenalty | LedgerKind::PenaltyShare => slot[0] += e.amount,
                LedgerKind::EnrollFee | LedgerKind::InitiatorReward | LedgerKind::FeeSink => slot[1] += e.amount,
                LedgerKind::UtilityAccrual | LedgerKind::CommCost => {}
            }
        }
        for (step, [penalty, fee]) in per_step {
            assert!(penalty.abs() < 1e-9, "step {step}: penalty flows {penalty}");
            assert!(fee.abs() < 1e-9, "step {step}: fee flows {fee}");
        }
        for (agent, outcome) in r.agents.iter().enumerate() {
            assert_eq!(outcome.ledger_total, balances[agent]);
        }
    }
}

#[test]
fn budgets_and_durations_hold() {
    for (c, r) in batch() {
        assert!(r.audit.max_confirms_in_step <= c.max_confirms_per_step);
        assert!(r.audit.max_opened_in_step <= c.max_proposals_per_step);
        for l in &r.lifetimes {
            let d = coalition_duration(l, r.end_step());
            assert!(d >= 1 && d <= c.n_steps, "duration {d}");
        }
    }
}

#[test]
fn honesty_bins_cover_every_agent() {
    let runs: Vec<RunResult> = batch().into_iter().map(|(_, r)| r).collect();
    for mode in [GainedUtility::LedgerTotal, GainedUtility::AccrualOnly] {
        let bins = honesty_utility_profile(&runs, 0.35, mode);
        assert_eq!(bins.len(), 8);
        let total: usize = bins.iter().map(|b| b.agent_count).sum();
        assert_eq!(total, runs.iter().map(|r| r.agents.len()).sum::<usize>());
    }
}

#[test]
fn runs_are_reproducible() {
    let c = config(5, RiskMix::EqualThirds, ResponderMix::UniformRandom);
    let a = run_with_options(&c, true).unwrap();
    let b = run_with_options(&c, true).unwrap();
    assert_eq!(a.trace.unwrap().render(), b.trace.unwrap().render());
    assert_eq!(a.ledger, b.ledger);
    assert_eq!(a.frames, b.frames);
}
