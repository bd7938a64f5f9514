use super::scenario::{TrialKind, TrialOutcome};
use crate::flows::TimingReport;
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::str::FromStr;

/// Histogram bin width in similarity points.
pub const BIN_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistogramBin {
    /// Inclusive lower edge. Bins are `[lower, lower + 2)`, the last one
    /// also holds 100.
    pub lower: f64,
    pub genuine: usize,
    pub impostor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub index: usize,
    pub kind: TrialKind,
    pub expected: TrialOutcome,
    pub outcome: TrialOutcome,
    /// Face trials: the controller issued a code challenge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tries: Option<u32>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NameTries {
    pub trial: usize,
    pub target: String,
    pub tries: u32,
    pub notified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TriesSummary {
    pub names: usize,
    pub tries: u64,
    /// Two decimals, truncated; absent when there are no names.
    pub mean_tries: Option<String>,
}

impl TriesSummary {
    pub fn new(names: usize, tries: u64) -> Self {
        Self {
            names,
            tries,
            mean_tries: mean_tries(tries, names),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuestReport {
    pub native: Vec<NameTries>,
    pub non_native: Vec<NameTries>,
    pub native_summary: TriesSummary,
    pub non_native_summary: TriesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub seed: u64,
    pub accept_threshold: f64,
    pub genuine_scores: Vec<f64>,
    pub impostor_scores: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
    pub false_accepts: usize,
    pub false_rejects: usize,
    /// Absent when there were no impostor trials.
    pub far: Option<f64>,
    /// Absent when there were no genuine trials.
    pub frr: Option<f64>,
    pub timing: TimingReport,
    pub guests: GuestReport,
    pub trials: Vec<TrialRecord>,
    pub trace_violations: Vec<String>,
    pub mismatches: usize,
}

/// `tries / names` to two decimals, truncated toward zero.
pub fn mean_tries(tries: u64, names: usize) -> Option<String> {
    if names == 0 {
        return None;
    }
    let hundredths = tries as u128 * 100 / names as u128;
    Some(format!("{}.{:02}", hundredths / 100, hundredths % 100))
}

/// 2-point bins over [0, 100]; empty score lists give an empty histogram.
pub fn histogram(genuine: &[f64], impostor: &[f64]) -> Vec<HistogramBin> {
    if genuine.is_empty() && impostor.is_empty() {
        return Vec::new();
    }
    let n = (100.0 / BIN_WIDTH) as usize;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|i| HistogramBin {
            lower: i as f64 * BIN_WIDTH,
            genuine: 0,
            impostor: 0,
        })
        .collect();
    let slot = |s: f64| ((s / BIN_WIDTH).floor() as usize).min(n - 1);
    for &s in genuine {
        bins[slot(s)].genuine += 1;
    }
    for &s in impostor {
        bins[slot(s)].impostor += 1;
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown report format {0:?} (expected json or text)")]
pub struct UnknownFormat(pub String);

impl FromStr for ReportFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

pub fn report_render(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

fn rate(r: Option<f64>, num: usize, den: usize) -> String {
    match r {
        Some(r) => format!("{r:.4} ({num}/{den})"),
        None => "n/a (no trials)".into(),
    }
}

fn range(scores: &[f64]) -> String {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() {
        "none".into()
    } else {
        format!("{} scores, min {min:.2}, max {max:.2}", scores.len())
    }
}

fn render_text(r: &Report) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "seed: {}", r.seed);
    let _ = writeln!(
        o,
        "trials: {} (mismatches: {})",
        r.trials.len(),
        r.mismatches
    );
    let _ = writeln!(o, "accept threshold: {}", r.accept_threshold);
    let _ = writeln!(o, "genuine: {}", range(&r.genuine_scores));
    let _ = writeln!(o, "impostor: {}", range(&r.impostor_scores));
    let _ = writeln!(
        o,
        "FAR: {}",
        rate(r.far, r.false_accepts, r.impostor_scores.len())
    );
    let _ = writeln!(
        o,
        "FRR: {}",
        rate(r.frr, r.false_rejects, r.genuine_scores.len())
    );
    if !r.histogram.is_empty() {
        let _ = writeln!(o, "histogram ({BIN_WIDTH}-point bins, non-empty only):");
        for b in r.histogram.iter().filter(|b| b.genuine + b.impostor > 0) {
            let _ = writeln!(
                o,
                "  [{:>3}, {:>3}{}  genuine {:>4}  impostor {:>4}",
                b.lower,
                b.lower + BIN_WIDTH,
                if b.lower + BIN_WIDTH >= 100.0 {
                    "]"
                } else {
                    ")"
                },
                b.genuine,
                b.impostor
            );
        }
    }
    let t = &r.timing;
    let _ = writeln!(
        o,
        "timing: {} sessions, mean total {:.0} ms",
        t.sessions, t.total_mean_ms
    );
    for p in &t.phases {
        let share = p
            .share_pct
            .map(|s| format!("{s:.1}%"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            o,
            "  {:<10} {:>8.0} ms  {share}",
            p.phase.to_string(),
            p.mean_ms
        );
    }
    for (label, s) in [
        ("native", &r.guests.native_summary),
        ("non-native", &r.guests.non_native_summary),
    ] {
        let mean = s.mean_tries.as_deref().unwrap_or("n/a");
        let _ = writeln!(
            o,
            "guest {label}: {} names, {} tries, mean tries {mean}",
            s.names, s.tries
        );
    }
    for v in &r.trace_violations {
        let _ = writeln!(o, "trace violation: {v}");
    }
    for t in r.trials.iter().filter(|t| !t.ok) {
        let _ = writeln!(
            o,
            "mismatch: trial {} ({:?}) expected {:?}, got {:?}{}",
            t.index,
            t.kind,
            t.expected,
            t.outcome,
            t.note
                .as_deref()
                .map(|n| format!(" ({n})"))
                .unwrap_or_default()
        );
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_tries_truncates() {
        assert_eq!(mean_tries(37, 33).as_deref(), Some("1.12"));
        assert_eq!(mean_tries(50, 33).as_deref(), Some("1.51"));
        assert_eq!(mean_tries(2, 1).as_deref(), Some("2.00"));
        assert_eq!(mean_tries(0, 0), None);
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[100.0, 94.25, 94.0], &[0.0, 1.99, 73.1]);
        assert_eq!(h.len(), 50);
        assert_eq!(h[49].genuine, 1);
        assert_eq!(h[47].genuine, 2);
        assert_eq!(h[0].impostor, 2);
        assert_eq!(h[36].impostor, 1);
        assert!(histogram(&[], &[]).is_empty());
    }

    #[test]
    fn formats() {
        assert_eq!("json".parse::<ReportFormat>(), Ok(ReportFormat::Json));
        assert!("yaml".parse::<ReportFormat>().is_err());
    }
}
