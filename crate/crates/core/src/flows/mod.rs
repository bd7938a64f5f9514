//! Controller-side session state machines.
//!
//! Three kiosk functions share one door and therefore one active session at
//! a time:
//!
//! * **employee**: decrypt probe, face match, then a four-digit code sent as
//!   a direct message. Three wrong codes end the session; every wrong code
//!   issues a fresh one. A correct code pulses the lock.
//! * **guest**: transcribe the spoken name, fuzzy match it and either notify
//!   the employee, ask the guest to confirm the candidate, or ask again.
//! * **delivery**: post to the delivery channel. The door is opened by hand.
//!
//! Every step consumes its probe/audio buffer and zeroes it before
//! returning; sessions never hold such bytes.

mod lock;
mod pin;
mod session;
mod timing;

pub use lock::{
    LineState, LockActuator, LockError, LockEvent, LockTimeline, LockWindow, SimulatedLock,
};
pub use pin::{generate_code, is_well_formed, PinChallenge};
pub use session::{AccessSession, Phase, PhaseTiming, SessionKind, SessionState, UnknownPhase};
pub use timing::{timing_report, PhaseStat, TimingReport};

use crate::clock::Clock;
use crate::crypto::{xor_in_place, CipherKey};
use crate::directory::{Directory, EmployeeRecord, StoreOutcome, TemplateStore};
use crate::notify::{send_channel, send_direct, NotificationSink};
use crate::recognition::{
    compare_probe, decide_access, Decision, FaceProvider, ProviderError, RecognitionConfig,
};
use crate::transcription::{match_name, transcribe, Band, SpeechProvider, TranscriptionConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const WELCOME_TEXT: &str = "Welcome to the office";
pub const GUEST_WAITING_TEXT: &str = "A guest is waiting outside the entrance door";
pub const DELIVERY_TEXT: &str = "There is a delivery at the door";

const FINISHED_ARCHIVE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FlowConfig {
    pub recognition: RecognitionConfig,
    pub transcription: TranscriptionConfig,
    pub unlock_window_ms: u64,
    pub max_attempts: u8,
    pub challenge_expiry_ms: u64,
    pub delivery_channel: String,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            recognition: RecognitionConfig::default(),
            transcription: TranscriptionConfig::default(),
            unlock_window_ms: 5_000,
            max_attempts: 3,
            challenge_expiry_ms: 120_000,
            delivery_channel: "#deliveries".into(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.recognition.validate().map_err(|e| e.to_string())?;
        self.transcription.validate().map_err(|e| e.to_string())?;
        if self.unlock_window_ms == 0 {
            return Err("unlockWindowMs must be positive".into());
        }
        if self.max_attempts == 0 {
            return Err("maxAttempts must be at least 1".into());
        }
        if self.challenge_expiry_ms == 0 {
            return Err("challengeExpiryMs must be positive".into());
        }
        if self.delivery_channel.trim().is_empty() {
            return Err("deliveryChannel is empty".into());
        }
        Ok(())
    }
}

/// Everything the controller talks to.
#[derive(Clone)]
pub struct ControllerDeps {
    pub directory: Arc<Directory>,
    pub face: Arc<dyn FaceProvider>,
    pub speech: Arc<dyn SpeechProvider>,
    pub notifier: Arc<dyn NotificationSink>,
    pub lock: Arc<dyn LockActuator>,
    pub clock: Arc<dyn Clock>,
    pub key: CipherKey,
    pub templates: Option<Arc<TemplateStore>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfirmAnswer {
    Yes,
    No,
}

/// Result of one step. Terminal outcomes end the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum StepOutcome {
    #[serde(rename_all = "camelCase")]
    ChallengeIssued {
        challenge_id: String,
        attempts_remaining: u8,
    },
    Denied,
    #[serde(rename_all = "camelCase")]
    Unlocked {
        employee_id: String,
        full_name: String,
        welcome: String,
        window: LockWindow,
    },
    #[serde(rename_all = "camelCase")]
    NewChallenge {
        challenge_id: String,
        attempts_remaining: u8,
    },
    LockedOut,
    Expired,
    #[serde(rename_all = "camelCase")]
    GuestNotified {
        employee_id: String,
        full_name: String,
    },
    #[serde(rename_all = "camelCase")]
    ConfirmRequested {
        employee_id: String,
        full_name: String,
        score: u8,
    },
    RetryPrompt {
        score: u8,
    },
    BackToUtterance,
    DeliveryNotified,
    Error {
        reason: String,
    },
}

impl StepOutcome {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            Self::Denied
                | Self::Unlocked { .. }
                | Self::LockedOut
                | Self::Expired
                | Self::GuestNotified { .. }
                | Self::DeliveryNotified
                | Self::Error { .. }
        )
    }
}

/// Caller mistakes: wrong session, wrong state. These do not change any state.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("a session is already active")]
    Busy,
    #[error("no active session {0:?}")]
    NoSession(String),
    #[error("session is {state:?}, cannot {action}")]
    InvalidState {
        state: SessionState,
        action: &'static str,
    },
    #[error("{0}")]
    BadInput(String),
}

pub struct Controller {
    cfg: FlowConfig,
    deps: ControllerDeps,
    rng: ChaCha20Rng,
    active: Option<AccessSession>,
    finished: Vec<AccessSession>,
}

impl Controller {
    /// `seed` fixes session ids and door codes; pass `None` in production.
    pub fn new(cfg: FlowConfig, deps: ControllerDeps, seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Self {
            cfg,
            deps,
            rng,
            active: None,
            finished: Vec::new(),
        }
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn directory(&self) -> &Directory {
        &self.deps.directory
    }

    pub fn lock(&self) -> &Arc<dyn LockActuator> {
        &self.deps.lock
    }

    pub fn active(&self) -> Option<&AccessSession> {
        self.active.as_ref()
    }

    /// Completed sessions, oldest first.
    pub fn finished(&self) -> &[AccessSession] {
        &self.finished
    }

    pub fn take_finished(&mut self) -> Vec<AccessSession> {
        std::mem::take(&mut self.finished)
    }

    fn now(&self) -> u64 {
        self.deps.clock.now_ms()
    }

    pub fn start_session(&mut self, kind: SessionKind) -> Result<AccessSession, FlowError> {
        let id = format!("s-{:016x}", self.rng.next_u64());
        self.start_session_with_id(kind, id)
    }

    /// Starts a session under an id chosen by the door unit.
    pub fn start_session_with_id(
        &mut self,
        kind: SessionKind,
        id: String,
    ) -> Result<AccessSession, FlowError> {
        if self.active.is_some() {
            return Err(FlowError::Busy);
        }
        if id.is_empty() || self.finished.iter().any(|s| s.session_id == id) {
            return Err(FlowError::BadInput(format!(
                "session id {id:?} is empty or reused"
            )));
        }
        let session = AccessSession::new(id, kind, self.now());
        tracing::debug!(session = %session.session_id, ?kind, "session started");
        self.active = Some(session.clone());
        Ok(session)
    }

    fn session_mut(&mut self, session_id: &str) -> Result<&mut AccessSession, FlowError> {
        match &mut self.active {
            Some(s) if s.session_id == session_id => Ok(s),
            _ => Err(FlowError::NoSession(session_id.to_string())),
        }
    }

    fn expect_state(
        &mut self,
        session_id: &str,
        want: SessionState,
        action: &'static str,
    ) -> Result<(), FlowError> {
        let s = self.session_mut(session_id)?;
        if s.state != want {
            return Err(FlowError::InvalidState {
                state: s.state,
                action,
            });
        }
        Ok(())
    }

    fn finish(&mut self, state: SessionState, outcome: StepOutcome) -> StepOutcome {
        if let Some(mut s) = self.active.take() {
            s.state = state;
            s.active_challenge = None;
            if let StepOutcome::Error { reason } = &outcome {
                s.error = Some(reason.clone());
            }
            tracing::debug!(session = %s.session_id, ?state, "session finished");
            if self.finished.len() >= FINISHED_ARCHIVE_LIMIT {
                self.finished.remove(0);
            }
            self.finished.push(s);
        }
        outcome
    }

    fn fail(&mut self, reason: impl Into<String>) -> StepOutcome {
        let reason = reason.into();
        tracing::warn!(%reason, "session failed");
        self.finish(SessionState::Error, StepOutcome::Error { reason })
    }

    /// Ends the active session as an error, e.g. when a client disconnects.
    pub fn abort_session(
        &mut self,
        session_id: &str,
        reason: &str,
    ) -> Result<StepOutcome, FlowError> {
        self.session_mut(session_id)?;
        Ok(self.fail(reason))
    }

    pub fn record_phase(
        &mut self,
        session_id: &str,
        phase: Phase,
        duration_ms: u64,
    ) -> Result<(), FlowError> {
        self.session_mut(session_id)?
            .record_phase(phase, duration_ms);
        Ok(())
    }

    pub fn record_phase_label(
        &mut self,
        session_id: &str,
        label: &str,
        duration_ms: i64,
    ) -> Result<(), FlowError> {
        self.session_mut(session_id)?
            .record_phase_label(label, duration_ms)
            .map_err(FlowError::BadInput)
    }

    /// Employee step one: decrypt, match, and on accept send a door code.
    pub async fn handle_capture(
        &mut self,
        session_id: &str,
        mut encrypted_probe: Vec<u8>,
    ) -> Result<StepOutcome, FlowError> {
        self.expect_state(session_id, SessionState::AwaitingCapture, "handle capture")?;
        let outcome = self.capture_step(&mut encrypted_probe).await;
        encrypted_probe.fill(0);
        drop(encrypted_probe);
        Ok(outcome)
    }

    async fn capture_step(&mut self, probe: &mut [u8]) -> StepOutcome {
        if probe.is_empty() {
            return self.fail("probe could not be decrypted: empty upload");
        }
        let started = self.now();
        xor_in_place(probe, &self.deps.key);
        let result = compare_probe(self.deps.face.as_ref(), probe, &self.deps.directory).await;
        let elapsed = self.now().saturating_sub(started);
        if let Some(s) = self.active.as_mut() {
            s.record_phase(Phase::CloudAuth, elapsed);
        }
        let result = match result {
            Ok(r) => r,
            // The service found no face it knows: same as a non-match.
            Err(ProviderError::ScriptedMiss(_)) => crate::recognition::MatchResult::no_match(),
            Err(e) => return self.fail(format!("face comparison failed: {e}")),
        };
        if let Some(s) = self.active.as_mut() {
            s.score = Some(result.similarity);
        }
        let employee_id = match decide_access(&result, &self.cfg.recognition) {
            Decision::Accept(id) => id,
            Decision::Reject => return self.finish(SessionState::Denied, StepOutcome::Denied),
        };
        if let Some(store) = &self.deps.templates {
            match store.maybe_store_template(
                &employee_id,
                probe,
                result.similarity,
                self.deps.clock.now_ms(),
            ) {
                Ok(StoreOutcome::Stored(t)) => {
                    tracing::debug!(template = %t.template_id, "template updated")
                }
                Ok(StoreOutcome::Skipped) => {}
                Err(e) => tracing::warn!(error = %e, "template update failed"),
            }
        }
        if let Some(s) = self.active.as_mut() {
            s.employee_id = Some(employee_id);
        }
        match self.issue_challenge().await {
            Ok(challenge_id) => StepOutcome::ChallengeIssued {
                challenge_id,
                attempts_remaining: self.cfg.max_attempts,
            },
            Err(reason) => self.fail(reason),
        }
    }

    fn active_employee(&self) -> Option<EmployeeRecord> {
        let id = self.active.as_ref()?.employee_id.as_ref()?;
        self.deps.directory.get(id).cloned()
    }

    /// Generates a fresh code, sends it to the matched employee and makes it
    /// the only accepted code.
    async fn issue_challenge(&mut self) -> Result<String, String> {
        let employee = self.active_employee().ok_or("no matched employee")?;
        let now = self.now();
        let mut challenge = generate_code(&mut self.rng, now);
        {
            let s = self.active.as_mut().ok_or("no session")?;
            while s.issued_challenges.contains(&challenge.challenge_id) {
                challenge = generate_code(&mut self.rng, now);
            }
            // The previous code stops working before the new one is sent.
            s.active_challenge = None;
        }
        let text = format!("Your door code is {}", challenge.code());
        send_direct(self.deps.notifier.as_ref(), &employee, &text, now)
            .await
            .map_err(|e| format!("could not send door code: {e}"))?;
        let s = self.active.as_mut().ok_or("no session")?;
        let id = challenge.challenge_id.clone();
        s.issued_challenges.push(id.clone());
        s.first_challenge_at.get_or_insert(now);
        s.active_challenge = Some(challenge);
        s.state = SessionState::AwaitingCode;
        Ok(id)
    }

    /// Employee step two. Malformed entries count as failed attempts.
    pub async fn submit_code(
        &mut self,
        session_id: &str,
        entered: &str,
    ) -> Result<StepOutcome, FlowError> {
        self.expect_state(session_id, SessionState::AwaitingCode, "submit code")?;
        let now = self.now();
        let expiry = self.cfg.challenge_expiry_ms;
        let max_attempts = self.cfg.max_attempts;
        let s = self.session_mut(session_id)?;
        let challenge = s
            .active_challenge
            .clone()
            .expect("AwaitingCode carries a challenge");
        if now.saturating_sub(challenge.issued_at) > expiry {
            return Ok(self.finish(SessionState::Expired, StepOutcome::Expired));
        }
        if is_well_formed(entered) && challenge.matches(entered) {
            return Ok(self.unlock().await);
        }
        s.attempts_used += 1;
        if s.attempts_used >= max_attempts {
            return Ok(self.finish(SessionState::LockedOut, StepOutcome::LockedOut));
        }
        let remaining = max_attempts - s.attempts_used;
        Ok(match self.issue_challenge().await {
            Ok(challenge_id) => StepOutcome::NewChallenge {
                challenge_id,
                attempts_remaining: remaining,
            },
            Err(reason) => self.fail(reason),
        })
    }

    async fn unlock(&mut self) -> StepOutcome {
        let Some(employee) = self.active_employee() else {
            return self.fail("no matched employee");
        };
        let window = match self.deps.lock.pulse() {
            Ok(w) => w,
            Err(e) => return self.fail(format!("lock refused pulse: {e}")),
        };
        let pin_started = self.pin_started_at();
        if let Some(s) = self.active.as_mut() {
            s.record_phase(Phase::PinEntry, window.start_ms.saturating_sub(pin_started));
        }
        let welcome = format!("{WELCOME_TEXT}, {}", employee.full_name);
        self.finish(
            SessionState::Unlocked,
            StepOutcome::Unlocked {
                employee_id: employee.id,
                full_name: employee.full_name,
                welcome,
                window,
            },
        )
    }

    fn pin_started_at(&self) -> u64 {
        self.active
            .as_ref()
            .and_then(|s| s.first_challenge_at)
            .unwrap_or_default()
    }

    /// Guest step: transcribe, match, and route by band.
    pub async fn handle_utterance(
        &mut self,
        session_id: &str,
        mut audio: Vec<u8>,
    ) -> Result<StepOutcome, FlowError> {
        self.expect_state(
            session_id,
            SessionState::AwaitingUtterance,
            "handle utterance",
        )?;
        let transcript = transcribe(self.deps.speech.as_ref(), &audio).await;
        audio.fill(0);
        drop(audio);
        if let Some(s) = self.active.as_mut() {
            s.utterances += 1;
        }
        let transcript = match transcript {
            Ok(t) => t,
            Err(ProviderError::ScriptedMiss(_)) | Err(ProviderError::EmptyInput) => String::new(),
            Err(e) => return Ok(self.fail(format!("transcription failed: {e}"))),
        };
        let m = match_name(&transcript, &self.deps.directory, &self.cfg.transcription);
        let candidate = m
            .employee_id
            .as_ref()
            .and_then(|id| self.deps.directory.get(id))
            .cloned();
        Ok(match (m.band, candidate) {
            (Band::Notify, Some(employee)) => self.notify_guest(employee).await,
            (Band::Confirm, Some(employee)) => {
                if let Some(s) = self.active.as_mut() {
                    s.state = SessionState::AwaitingConfirmation;
                    s.employee_id = Some(employee.id.clone());
                    s.score = Some(f64::from(m.score));
                }
                StepOutcome::ConfirmRequested {
                    employee_id: employee.id,
                    full_name: employee.full_name,
                    score: m.score,
                }
            }
            _ => StepOutcome::RetryPrompt { score: m.score },
        })
    }

    async fn notify_guest(&mut self, employee: EmployeeRecord) -> StepOutcome {
        let now = self.now();
        match send_direct(
            self.deps.notifier.as_ref(),
            &employee,
            GUEST_WAITING_TEXT,
            now,
        )
        .await
        {
            Ok(_) => {
                if let Some(s) = self.active.as_mut() {
                    s.employee_id = Some(employee.id.clone());
                }
                self.finish(
                    SessionState::GuestNotified,
                    StepOutcome::GuestNotified {
                        employee_id: employee.id,
                        full_name: employee.full_name,
                    },
                )
            }
            Err(e) => self.fail(format!("could not notify employee: {e}")),
        }
    }

    pub async fn confirm_guest(
        &mut self,
        session_id: &str,
        answer: ConfirmAnswer,
    ) -> Result<StepOutcome, FlowError> {
        self.expect_state(
            session_id,
            SessionState::AwaitingConfirmation,
            "confirm guest",
        )?;
        match answer {
            ConfirmAnswer::Yes => match self.active_employee() {
                Some(employee) => Ok(self.notify_guest(employee).await),
                None => Ok(self.fail("candidate vanished")),
            },
            ConfirmAnswer::No => {
                let s = self.session_mut(session_id)?;
                s.employee_id = None;
                s.score = None;
                s.state = SessionState::AwaitingUtterance;
                Ok(StepOutcome::BackToUtterance)
            }
        }
    }

    /// Delivery: one channel message, no lock activity.
    pub async fn handle_delivery(&mut self, session_id: &str) -> Result<StepOutcome, FlowError> {
        self.expect_state(session_id, SessionState::NotifyPending, "handle delivery")?;
        let now = self.now();
        let channel = self.cfg.delivery_channel.clone();
        Ok(
            match send_channel(self.deps.notifier.as_ref(), &channel, DELIVERY_TEXT, now).await {
                Ok(_) => self.finish(
                    SessionState::DeliveryNotified,
                    StepOutcome::DeliveryNotified,
                ),
                Err(e) => self.fail(format!("could not notify delivery channel: {e}")),
            },
        )
    }

    /// Ends the active session if its code has outlived the expiry.
    pub fn expire_stale(&mut self) -> Option<StepOutcome> {
        let now = self.now();
        let expiry = self.cfg.challenge_expiry_ms;
        let stale = self
            .active
            .as_ref()
            .and_then(|s| s.active_challenge.as_ref())
            .is_some_and(|c| now.saturating_sub(c.issued_at) > expiry);
        stale.then(|| self.finish(SessionState::Expired, StepOutcome::Expired))
    }
}
