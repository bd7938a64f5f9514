//! Scenario files: a directory, a list of trials and optional generated
//! trial blocks.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "directory": [{"id": "e1", "firstName": "Anna", "lastName": "Lindberg", "notifyHandle": "@anna"}],
//!   "trials": [
//!     {"kind": "genuine", "employeeId": "e1", "similarity": 97.5, "captureMs": 4466, "cloudAuthMs": 10353, "pinEntryMs": 5481},
//!     {"kind": "guestNative", "target": "e1", "transcripts": ["ana lindberi"], "expectTries": 1}
//!   ],
//!   "generate": [{"kind": "impostor", "count": 200, "min": 0.0, "max": 73.1}]
//! }
//! ```

use crate::directory::Directory;
use crate::flows::FlowConfig;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TrialKind {
    Genuine,
    Impostor,
    GuestNative,
    GuestNonNative,
}

impl TrialKind {
    pub fn is_face(self) -> bool {
        matches!(self, TrialKind::Genuine | TrialKind::Impostor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TrialOutcome {
    Unlocked,
    Denied,
    /// Face accepted but the person never produced the right code.
    LockedOut,
    Notified,
    /// Every scripted transcript was used without reaching a notification.
    Exhausted,
    Expired,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Trial {
    pub kind: TrialKind,
    /// Face trials: the employee the provider reports as best match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub employee_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_ms: Option<u64>,
    /// Scripted provider latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_auth_ms: Option<u64>,
    /// Time the employee takes to read and type the code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_entry_ms: Option<u64>,
    /// Guest trials: who the guest wants to meet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Guest trials: what the speech provider hears on each try.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transcripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<TrialOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_tries: Option<u32>,
}

impl Trial {
    fn blank(kind: TrialKind) -> Self {
        Self {
            kind,
            employee_id: None,
            similarity: None,
            capture_ms: None,
            cloud_auth_ms: None,
            pin_entry_ms: None,
            target: None,
            transcripts: Vec::new(),
            expect: None,
            expect_tries: None,
        }
    }

    pub fn face(kind: TrialKind, employee_id: Option<&str>, similarity: f64) -> Self {
        Self {
            employee_id: employee_id.map(str::to_string),
            similarity: Some(similarity),
            ..Self::blank(kind)
        }
    }

    pub fn guest(kind: TrialKind, target: &str, transcripts: &[&str]) -> Self {
        Self {
            target: Some(target.to_string()),
            transcripts: transcripts.iter().map(|s| s.to_string()).collect(),
            ..Self::blank(kind)
        }
    }

    pub fn expected(&self) -> TrialOutcome {
        self.expect.unwrap_or(match self.kind {
            TrialKind::Genuine => TrialOutcome::Unlocked,
            TrialKind::Impostor => TrialOutcome::Denied,
            TrialKind::GuestNative | TrialKind::GuestNonNative => TrialOutcome::Notified,
        })
    }
}

/// A block of face trials with similarities drawn uniformly from
/// `[min, max]` and rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Generator {
    pub kind: TrialKind,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    /// Best-match employees, used round robin. Defaults to every employee
    /// with a notification handle.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub employee_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_auth_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_entry_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub flow: FlowConfig,
    /// Employee documents, same shape as the directory file.
    #[serde(default)]
    pub directory: Vec<Value>,
    #[serde(default)]
    pub trials: Vec<Trial>,
    #[serde(default)]
    pub generate: Vec<Generator>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario config: {0}")]
    Config(String),
    #[error("directory: {0}")]
    Directory(String),
    #[error("trial {index}: {reason}")]
    Trial { index: usize, reason: String },
    #[error("generator {index}: {reason}")]
    Generator { index: usize, reason: String },
    #[error("protocol stack: {0}")]
    Stack(String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build_directory(&self) -> Result<Directory, ScenarioError> {
        Directory::from_documents(self.directory.iter().cloned())
            .map_err(|e| ScenarioError::Directory(e.to_string()))
    }

    /// Explicit trials followed by generated ones.
    pub fn expand(
        &self,
        directory: &Directory,
        rng: &mut ChaCha20Rng,
    ) -> Result<Vec<Trial>, ScenarioError> {
        let mut out = self.trials.clone();
        let handled: Vec<String> = directory
            .iter()
            .filter(|e| e.notify_handle.is_some())
            .map(|e| e.id.clone())
            .collect();
        for (index, g) in self.generate.iter().enumerate() {
            let err = |reason: String| ScenarioError::Generator { index, reason };
            if !g.kind.is_face() {
                return Err(err(
                    "only genuine and impostor trials can be generated".into()
                ));
            }
            if !(0.0 <= g.min && g.min <= g.max && g.max <= 100.0) {
                return Err(err(format!(
                    "need 0 <= min <= max <= 100, got [{}, {}]",
                    g.min, g.max
                )));
            }
            let ids = if g.employee_ids.is_empty() {
                &handled
            } else {
                &g.employee_ids
            };
            if ids.is_empty() && g.count > 0 {
                return Err(err("no employees to attribute matches to".into()));
            }
            for i in 0..g.count {
                let raw = rng.gen_range(g.min..=g.max);
                let similarity = ((raw * 100.0).round() / 100.0).clamp(g.min, g.max);
                let mut t = Trial::face(g.kind, Some(&ids[i % ids.len()]), similarity);
                t.capture_ms = g.capture_ms;
                t.cloud_auth_ms = g.cloud_auth_ms;
                t.pin_entry_ms = g.pin_entry_ms;
                out.push(t);
            }
        }
        for (index, t) in out.iter().enumerate() {
            validate_trial(t, directory)
                .map_err(|reason| ScenarioError::Trial { index, reason })?;
        }
        Ok(out)
    }
}

fn validate_trial(t: &Trial, directory: &Directory) -> Result<(), String> {
    let known = |id: &str| {
        directory
            .contains(id)
            .then_some(())
            .ok_or_else(|| format!("unknown employee {id:?}"))
    };
    if t.kind.is_face() {
        let s = t.similarity.ok_or("face trials need a similarity")?;
        if !(0.0..=100.0).contains(&s) {
            return Err(format!("similarity {s} outside [0, 100]"));
        }
        if let Some(id) = &t.employee_id {
            known(id)?;
        }
        if t.kind == TrialKind::Genuine && t.employee_id.is_none() {
            return Err("genuine trials need an employeeId".into());
        }
        if !t.transcripts.is_empty() || t.target.is_some() {
            return Err("face trials take no target or transcripts".into());
        }
    } else {
        known(t.target.as_deref().ok_or("guest trials need a target")?)?;
        if t.transcripts.is_empty() {
            return Err("guest trials need at least one transcript".into());
        }
        if t.transcripts.len() > 99 {
            return Err("at most 99 transcripts per trial".into());
        }
        if t.employee_id.is_some() || t.similarity.is_some() {
            return Err("guest trials take no employeeId or similarity".into());
        }
    }
    Ok(())
}
