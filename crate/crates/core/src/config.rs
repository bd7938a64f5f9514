//! Controller service configuration, read from TOML.
//!
//! Top-level keys are snake_case. The nested `[flow]` and `[templates]`
//! tables reuse the camelCase field names of [`FlowConfig`] and
//! [`DirectoryConfig`], the same spelling scenario files use.
//!
//! ```toml
//! bind = "0.0.0.0:7700"
//! cipher_key_hex = "00112233445566778899aabbccddeeff"
//! directory_file = "directory.ndjson"
//! face_script = "face_script.json"
//! speech_script = "speech_script.json"
//! persistence_root = "var/templates"
//!
//! [flow]
//! unlockWindowMs = 5000
//! deliveryChannel = "#deliveries"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use crate::clock::{Clock, SystemClock};
use crate::crypto::{CipherKey, KeyError};
use crate::directory::{Directory, DirectoryConfig, IngestError, StoreError, TemplateStore};
use crate::flows::{Controller, ControllerDeps, FlowConfig, SimulatedLock};
use crate::notify::NotificationSink;
use crate::protocol::ServerConfig;
use crate::recognition::{MockFaceProvider, ProviderError};
use crate::transcription::MockSpeechProvider;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cipher_key_hex: {0}")]
    Key(#[from] KeyError),
    #[error("directory: {0}")]
    Directory(#[from] IngestError),
    #[error("provider script: {0}")]
    Script(#[from] ProviderError),
    #[error("template store: {0}")]
    Store(#[from] StoreError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_bind() -> String {
    "127.0.0.1:7700".into()
}

fn default_heartbeat() -> u64 {
    15
}

fn default_ack_timeout() -> u64 {
    5_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub cipher_key_hex: String,
    pub directory_file: PathBuf,
    pub face_script: PathBuf,
    pub speech_script: PathBuf,
    /// Template store root. Without it templates are kept in memory only.
    #[serde(default)]
    pub persistence_root: Option<PathBuf>,
    #[serde(default = "default_heartbeat")]
    pub heartbeat_secs: u64,
    /// How long a NOTIFY may wait for the notifier's ack.
    #[serde(default = "default_ack_timeout")]
    pub notify_ack_timeout_ms: u64,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub templates: DirectoryConfig,
}

impl ControllerConfig {
    /// Parses `text`, resolving relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text)?;
        for p in [
            &mut cfg.directory_file,
            &mut cfg.face_script,
            &mut cfg.speech_script,
        ] {
            *p = base.join(&*p);
        }
        if let Some(root) = &mut cfg.persistence_root {
            *root = base.join(&*root);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read(path)?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        CipherKey::from_hex(&self.cipher_key_hex)?;
        self.flow.validate().map_err(ConfigError::Invalid)?;
        self.templates.validate()?;
        if self.heartbeat_secs == 0 {
            return Err(ConfigError::Invalid(
                "heartbeat_secs must be positive".into(),
            ));
        }
        if self.notify_ack_timeout_ms == 0 {
            return Err(ConfigError::Invalid(
                "notify_ack_timeout_ms must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn key(&self) -> Result<CipherKey, ConfigError> {
        Ok(CipherKey::from_hex(&self.cipher_key_hex)?)
    }

    pub fn server(&self) -> ServerConfig {
        ServerConfig {
            heartbeat_interval: Duration::from_secs(self.heartbeat_secs),
            ..ServerConfig::default()
        }
    }

    pub fn ack_timeout(&self) -> Duration {
        Duration::from_millis(self.notify_ack_timeout_ms)
    }

    pub fn load_directory(&self) -> Result<Directory, ConfigError> {
        let file = std::fs::File::open(&self.directory_file).map_err(|source| ConfigError::Io {
            path: self.directory_file.clone(),
            source,
        })?;
        Ok(Directory::load(std::io::BufReader::new(file))?)
    }

    /// Loads every file the controller needs and wires it with the
    /// wall clock and a logging lock line.
    pub fn controller(
        &self,
        notifier: Arc<dyn NotificationSink>,
    ) -> Result<Controller, ConfigError> {
        let directory = self.load_directory()?;
        let face = MockFaceProvider::from_json(&read(&self.face_script)?)?;
        let speech = MockSpeechProvider::from_json(&read(&self.speech_script)?)?;
        let templates = match &self.persistence_root {
            Some(root) => TemplateStore::open(root, &directory, self.templates)?,
            None => TemplateStore::in_memory(&directory, self.templates)?,
        };
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        let deps = ControllerDeps {
            directory: Arc::new(directory),
            face: Arc::new(face),
            speech: Arc::new(speech),
            notifier,
            lock: Arc::new(SimulatedLock::new(
                clock.clone(),
                self.flow.unlock_window_ms,
            )),
            clock,
            key: self.key()?,
            templates: Some(Arc::new(templates)),
        };
        Ok(Controller::new(self.flow.clone(), deps, None))
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
cipher_key_hex = "00112233445566778899aabbccddeeff"
directory_file = "dir.ndjson"
face_script = "face.json"
speech_script = "speech.json"
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = ControllerConfig::from_toml(MINIMAL, Path::new("/etc/og")).unwrap();
        assert_eq!(cfg.bind, "127.0.0.1:7700");
        assert_eq!(cfg.directory_file, Path::new("/etc/og/dir.ndjson"));
        assert_eq!(cfg.flow, FlowConfig::default());
        assert_eq!(cfg.templates, DirectoryConfig::default());
        assert_eq!(cfg.server().heartbeat_interval, Duration::from_secs(15));
    }

    #[test]
    fn nested_tables_use_camel_case() {
        let text = format!(
            "{MINIMAL}\n[flow]\nunlockWindowMs = 7000\n[flow.recognition]\nacceptThreshold = 92.5\n[templates]\nretentionCapacity = 4\n"
        );
        let cfg = ControllerConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.flow.unlock_window_ms, 7000);
        assert_eq!(cfg.flow.recognition.accept_threshold, 92.5);
        assert_eq!(cfg.flow.max_attempts, 3);
        assert_eq!(cfg.templates.retention_capacity, 4);
    }

    #[test]
    fn rejects_bad_values() {
        let short = MINIMAL.replace("00112233445566778899aabbccddeeff", "0011");
        assert!(matches!(
            ControllerConfig::from_toml(&short, Path::new(".")),
            Err(ConfigError::Key(_))
        ));
        let zero = format!("{MINIMAL}\n[flow]\nmaxAttempts = 0\n");
        assert!(matches!(
            ControllerConfig::from_toml(&zero, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
        let typo = format!("{MINIMAL}\nbnd = \"x\"\n");
        assert!(matches!(
            ControllerConfig::from_toml(&typo, Path::new(".")),
            Err(ConfigError::Toml(_))
        ));
    }
}
