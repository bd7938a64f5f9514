//! Face comparison providers and the accept/reject decision.

use crate::directory::Directory;
use crate::tag::{BufferTag, TagError};
use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub employee_id: Option<String>,
    pub similarity: f64,
}

impl MatchResult {
    pub fn new(employee_id: Option<String>, similarity: f64) -> Result<Self, ProviderError> {
        let r = Self {
            employee_id,
            similarity,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn no_match() -> Self {
        Self {
            employee_id: None,
            similarity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=100.0).contains(&self.similarity) {
            return Err(ProviderError::Invalid(format!(
                "similarity {} outside [0, 100]",
                self.similarity
            )));
        }
        if self.employee_id.is_none() && self.similarity != 0.0 {
            return Err(ProviderError::Invalid(
                "no employee but non-zero similarity".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RecognitionConfig {
    pub accept_threshold: f64,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        Self {
            accept_threshold: 90.0,
        }
    }
}

impl RecognitionConfig {
    pub fn new(accept_threshold: f64) -> Result<Self, ProviderError> {
        let cfg = Self { accept_threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let t = self.accept_threshold;
        if !(t > 0.0 && t < 100.0) {
            return Err(ProviderError::Invalid(format!(
                "accept_threshold must be in (0, 100), got {t}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Accept(String),
    Reject,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no scripted entry for {0:?}")]
    ScriptedMiss(String),
    #[error("input buffer is empty")]
    EmptyInput,
    #[error("collection is empty")]
    EmptyCollection,
    #[error("invalid provider data: {0}")]
    Invalid(String),
}

impl From<TagError> for ProviderError {
    fn from(e: TagError) -> Self {
        ProviderError::Invalid(e.to_string())
    }
}

/// Face comparison service.
///
/// A cloud adapter would upload the probe, run a collection search and map
/// the best face match to an enrolled employee id. Implementations must not
/// keep the probe bytes after returning.
#[async_trait]
pub trait FaceProvider: Send + Sync {
    async fn compare(
        &self,
        probe: &[u8],
        collection: &Directory,
    ) -> Result<MatchResult, ProviderError>;
}

/// Compares a decrypted probe against the enrolled collection.
pub async fn compare_probe(
    provider: &dyn FaceProvider,
    probe: &[u8],
    collection: &Directory,
) -> Result<MatchResult, ProviderError> {
    if probe.is_empty() {
        return Err(ProviderError::EmptyInput);
    }
    if collection.is_empty() {
        return Err(ProviderError::EmptyCollection);
    }
    let result = provider.compare(probe, collection).await?;
    result.validate()?;
    if let Some(id) = &result.employee_id {
        if !collection.contains(id) {
            return Err(ProviderError::Invalid(format!("unknown employee {id:?}")));
        }
    }
    Ok(result)
}

/// Accept iff an employee was matched with similarity strictly above the threshold.
pub fn decide_access(result: &MatchResult, cfg: &RecognitionConfig) -> Decision {
    match &result.employee_id {
        Some(id) if result.similarity > cfg.accept_threshold => Decision::Accept(id.clone()),
        _ => Decision::Reject,
    }
}

/// One line of a face script file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaceScriptEntry {
    pub probe_tag: String,
    pub employee_id: Option<String>,
    pub similarity: f64,
    /// Simulated service latency, applied to the provider's clock if it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    /// Answer with a provider-unavailable error instead of a result.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unavailable: bool,
}

impl FaceScriptEntry {
    pub fn new(tag: &str, employee_id: Option<&str>, similarity: f64) -> Self {
        Self {
            probe_tag: tag.to_string(),
            employee_id: employee_id.map(str::to_string),
            similarity,
            latency_ms: None,
            unavailable: false,
        }
    }
}

/// Scripted provider keyed by the probe's buffer tag. Immutable after construction.
pub struct MockFaceProvider {
    entries: HashMap<BufferTag, FaceScriptEntry>,
    clock: Option<Arc<crate::clock::SimClock>>,
}

impl std::fmt::Debug for MockFaceProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockFaceProvider")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl MockFaceProvider {
    pub fn from_script(script: Vec<FaceScriptEntry>) -> Result<Self, ProviderError> {
        let mut entries = HashMap::new();
        for entry in script {
            MatchResult::new(entry.employee_id.clone(), entry.similarity)?;
            let tag = BufferTag::new(&entry.probe_tag)?;
            if entries.insert(tag, entry.clone()).is_some() {
                return Err(ProviderError::Invalid(format!(
                    "duplicate probe tag {:?}",
                    entry.probe_tag
                )));
            }
        }
        Ok(Self {
            entries,
            clock: None,
        })
    }

    /// Parses a JSON array of `{probeTag, employeeId|null, similarity}`.
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let script: Vec<FaceScriptEntry> =
            serde_json::from_str(text).map_err(|e| ProviderError::Invalid(e.to_string()))?;
        Self::from_script(script)
    }

    /// Advances `clock` by each entry's `latency_ms` when it is answered.
    pub fn with_clock(mut self, clock: Arc<crate::clock::SimClock>) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[async_trait]
impl FaceProvider for MockFaceProvider {
    async fn compare(
        &self,
        probe: &[u8],
        _collection: &Directory,
    ) -> Result<MatchResult, ProviderError> {
        let tag = BufferTag::of_buffer(probe);
        let entry = self
            .entries
            .get(&tag)
            .ok_or_else(|| ProviderError::ScriptedMiss(tag.to_string()))?;
        if let (Some(clock), Some(ms)) = (&self.clock, entry.latency_ms) {
            clock.advance(ms);
        }
        if entry.unavailable {
            return Err(ProviderError::Unavailable("scripted outage".into()));
        }
        MatchResult::new(entry.employee_id.clone(), entry.similarity)
    }
}
