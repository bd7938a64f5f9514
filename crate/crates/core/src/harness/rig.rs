//! In-process wiring of a controller with scripted providers, a recording
//! notifier, a simulated lock and a simulated clock.

use crate::clock::SimClock;
use crate::crypto::CipherKey;
use crate::directory::{Directory, DirectoryConfig, StoreError, TemplateStore};
use crate::flows::{Controller, ControllerDeps, FlowConfig, SimulatedLock};
use crate::notify::{NotificationSink, RecordingSink};
use crate::recognition::{FaceScriptEntry, MockFaceProvider, ProviderError};
use crate::transcription::{MockSpeechProvider, SpeechScriptEntry};
use std::path::PathBuf;
use std::sync::Arc;

pub struct Rig {
    pub clock: Arc<SimClock>,
    pub sink: Arc<RecordingSink>,
    pub lock: Arc<SimulatedLock>,
    pub directory: Arc<Directory>,
    pub key: CipherKey,
    pub face: Arc<MockFaceProvider>,
    pub speech: Arc<MockSpeechProvider>,
    pub templates: Option<Arc<TemplateStore>>,
}

impl Rig {
    pub fn new(
        directory: Directory,
        face_script: Vec<FaceScriptEntry>,
        speech_script: Vec<SpeechScriptEntry>,
        key: CipherKey,
        unlock_window_ms: u64,
    ) -> Result<Self, ProviderError> {
        let clock = Arc::new(SimClock::new(0));
        let face = MockFaceProvider::from_script(face_script)?.with_clock(clock.clone());
        Ok(Self {
            lock: Arc::new(SimulatedLock::new(clock.clone(), unlock_window_ms)),
            sink: Arc::new(RecordingSink::new()),
            directory: Arc::new(directory),
            key,
            face: Arc::new(face),
            speech: Arc::new(MockSpeechProvider::from_script(speech_script)?),
            templates: None,
            clock,
        })
    }

    /// Keeps accepted high-score probes as templates under `root`.
    pub fn with_template_root(
        mut self,
        root: impl Into<PathBuf>,
        cfg: DirectoryConfig,
    ) -> Result<Self, StoreError> {
        self.templates = Some(Arc::new(TemplateStore::open(root, &self.directory, cfg)?));
        Ok(self)
    }

    pub fn deps(&self) -> ControllerDeps {
        self.deps_with_notifier(self.sink.clone())
    }

    pub fn deps_with_notifier(&self, notifier: Arc<dyn NotificationSink>) -> ControllerDeps {
        ControllerDeps {
            directory: self.directory.clone(),
            face: self.face.clone(),
            speech: self.speech.clone(),
            notifier,
            lock: self.lock.clone(),
            clock: self.clock.clone(),
            key: self.key.clone(),
            templates: self.templates.clone(),
        }
    }

    pub fn controller(&self, cfg: FlowConfig, seed: u64) -> Controller {
        Controller::new(cfg, self.deps(), Some(seed))
    }

    /// The most recent door code sent to `handle`, read back from the sink.
    pub fn last_code_for(&self, handle: &str) -> Option<String> {
        self.sink.direct_to(handle).iter().rev().find_map(|n| {
            n.text
                .strip_prefix("Your door code is ")
                .map(str::to_string)
        })
    }
}
