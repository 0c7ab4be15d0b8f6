//! Role counts, cross-run aggregation, honesty profiles and durations.

use crate::domain::{Coalition, GainedUtility};
use crate::engine::{CoalitionLifetime, RunResult};
use crate::error::{Error, Result};
use serde::Serialize;

/// Snapshot taken at the end of every step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepFrame {
    pub step: u32,
    pub alone: usize,
    pub solicited: usize,
    pub initiator: usize,
    pub coalitions_active: usize,
    pub formed_this_step: usize,
    pub mean_coalition_size: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoleCounts {
    pub alone: usize,
    pub solicited: usize,
    pub initiator: usize,
}

/// Splits `n_agents` into alone, solicited and initiator agents.
pub fn classify_roles<'a>(n_agents: usize, coalitions: impl IntoIterator<Item = &'a Coalition>) -> RoleCounts {
    let mut counts = RoleCounts {
        alone: n_agents,
        ..RoleCounts::default()
    };
    for c in coalitions {
        counts.alone -= c.members.len();
        if c.members.contains(c.initiator) {
            counts.initiator += 1;
            counts.solicited += c.members.len() - 1;
        } else {
            counts.solicited += c.members.len();
        }
    }
    counts
}

/// Closest multiple of 0.05, ties rounding up.
pub fn honesty_bin_index(honesty: f64) -> usize {
    (honesty * 20.0 + 0.5).floor().max(0.0) as usize
}

pub fn bin_center(index: usize) -> f64 {
    index as f64 / 20.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HonestyBin {
    pub bin_center: f64,
    /// `None` for bins no agent fell into.
    pub mean_gained_utility: Option<f64>,
    pub agent_count: usize,
}

/// Pools agents of all runs into honesty bins from 0 up to the bin of
/// `honesty_max` and averages their gained utility.
pub fn honesty_utility_profile(runs: &[RunResult], honesty_max: f64, mode: GainedUtility) -> Vec<HonestyBin> {
    let top = runs
        .iter()
        .flat_map(|r| r.agents.iter().map(|a| honesty_bin_index(a.honesty)))
        .chain(std::iter::once(honesty_bin_index(honesty_max)))
        .max()
        .unwrap_or(0);
    let mut sums = vec![(0.0, 0usize); top + 1];
    for agent in runs.iter().flat_map(|r| &r.agents) {
        let slot = &mut sums[honesty_bin_index(agent.honesty)];
        slot.0 += agent.gained(mode);
        slot.1 += 1;
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (sum, count))| HonestyBin {
            bin_center: bin_center(i),
            mean_gained_utility: (count > 0).then(|| sum / count as f64),
            agent_count: count,
        })
        .collect()
}

/// Bin with the highest mean gained utility; the lowest such bin on ties.
pub fn peak_bin(bins: &[HonestyBin]) -> Option<&HonestyBin> {
    bins.iter()
        .filter(|b| b.mean_gained_utility.is_some())
        .fold(None, |best: Option<&HonestyBin>, b| match best {
            Some(x) if x.mean_gained_utility >= b.mean_gained_utility => Some(x),
            _ => Some(b),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DurationStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub min: Option<u32>,
    pub max: Option<u32>,
    /// Coalitions still alive at the end, counted up to the final step.
    pub censored: usize,
}

/// Inclusive lifetime in steps; coalitions alive at the end are cut at `end_step`.
pub fn coalition_duration(lifetime: &CoalitionLifetime, end_step: u32) -> u32 {
    lifetime.dissolved_at.unwrap_or(end_step) - lifetime.formed_at + 1
}

/// Pools every coalition of every `(lifetimes, end_step)` pair.
pub fn coalition_duration_stats<'a>(
    runs: impl IntoIterator<Item = (&'a [CoalitionLifetime], u32)>,
) -> DurationStats {
    let mut stats = DurationStats {
        count: 0,
        mean: None,
        min: None,
        max: None,
        censored: 0,
    };
    let mut total = 0u64;
    for (lifetimes, end) in runs {
        for l in lifetimes {
            let d = coalition_duration(l, end);
            total += u64::from(d);
            stats.count += 1;
            stats.censored += usize::from(l.dissolved_at.is_none());
            stats.min = Some(stats.min.map_or(d, |m| m.min(d)));
            stats.max = Some(stats.max.map_or(d, |m| m.max(d)));
        }
    }
    if stats.count > 0 {
        stats.mean = Some(total as f64 / stats.count as f64);
    }
    stats
}

pub fn run_duration_stats(runs: &[RunResult]) -> DurationStats {
    coalition_duration_stats(runs.iter().map(|r| (r.lifetimes.as_slice(), r.end_step())))
}

/// Per-step means of every frame field across runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFrame {
    pub step: u32,
    pub alone: f64,
    pub solicited: f64,
    pub initiator: f64,
    pub coalitions_active: f64,
    pub formed_this_step: f64,
    pub mean_coalition_size: f64,
}

pub fn aggregate_runs(runs: &[&[StepFrame]]) -> Result<Vec<MeanFrame>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for (run, frames) in runs.iter().enumerate() {
        if frames.len() != first.len() {
            return Err(Error::MismatchedRuns {
                run,
                expected: first.len(),
                found: frames.len(),
            });
        }
    }
    let k = runs.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let mean = |f: fn(&StepFrame) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / k;
            MeanFrame {
                step: first[i].step,
                alone: mean(|s| s.alone as f64),
                solicited: mean(|s| s.solicited as f64),
                initiator: mean(|s| s.initiator as f64),
                coalitions_active: mean(|s| s.coalitions_active as f64),
                formed_this_step: mean(|s| s.formed_this_step as f64),
                mean_coalition_size: mean(|s| s.mean_coalition_size),
            }
        })
        .collect())
}

/// Mean over all frames of all runs of one field.
pub fn overall_mean(runs: &[RunResult], field: fn(&StepFrame) -> f64) -> f64 {
    let (sum, count) = runs
        .iter()
        .flat_map(|r| &r.frames)
        .fold((0.0, 0usize), |(s, c), f| (s + field(f), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
