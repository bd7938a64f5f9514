//! Phase timing aggregation for the employee flow.

use super::session::{AccessSession, Phase};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseStat {
    pub phase: Phase,
    pub mean_ms: f64,
    /// Share of the total mean in percent; absent when the total is zero.
    pub share_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingReport {
    pub sessions: usize,
    pub phases: Vec<PhaseStat>,
    pub total_mean_ms: f64,
    /// True when the total is zero (or there were no sessions), so shares are undefined.
    pub degenerate: bool,
}

impl TimingReport {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseStat> {
        self.phases.iter().find(|p| p.phase == phase)
    }
}

/// Mean duration per phase across sessions that recorded any timing.
pub fn timing_report<'a, I>(sessions: I) -> TimingReport
where
    I: IntoIterator<Item = &'a AccessSession>,
{
    let timed: Vec<&AccessSession> = sessions
        .into_iter()
        .filter(|s| !s.phase_timings.is_empty())
        .collect();
    let n = timed.len();
    let means: Vec<(Phase, f64)> = Phase::ALL
        .iter()
        .map(|&p| {
            let sum: u64 = timed.iter().map(|s| s.phase_total(p)).sum();
            (p, if n == 0 { 0.0 } else { sum as f64 / n as f64 })
        })
        .collect();
    let total: f64 = means.iter().map(|(_, m)| m).sum();
    let degenerate = total == 0.0;
    TimingReport {
        sessions: n,
        phases: means
            .into_iter()
            .map(|(phase, mean_ms)| PhaseStat {
                phase,
                mean_ms,
                share_pct: (!degenerate).then(|| 100.0 * mean_ms / total),
            })
            .collect(),
        total_mean_ms: total,
        degenerate,
    }
}
