//! Scenario replay and test wiring.
//!
//! [`run_scenario`] drives each trial through a real controller server and
//! the door unit client over loopback TCP, with scripted face and speech
//! providers and a simulated clock, then aggregates a [`Report`]: score
//! separation (FAR/FRR and a 2-point histogram), employee phase timing and
//! guest tries per name.

mod report;
mod rig;
mod runner;
mod scenario;
mod stack;

pub use report::{
    histogram, mean_tries, report_render, GuestReport, HistogramBin, NameTries, Report,
    ReportFormat, TrialRecord, TriesSummary, UnknownFormat, BIN_WIDTH,
};
pub use rig::Rig;
pub use runner::run_scenario;
pub use scenario::{Generator, Scenario, ScenarioError, Trial, TrialKind, TrialOutcome};
pub use stack::LoopbackStack;
