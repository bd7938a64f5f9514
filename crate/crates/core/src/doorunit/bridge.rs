//! Maps kiosk presses to protocol requests and controller replies to kiosk
//! screens. Pure apart from the capture devices; the gateway feeds it.

use super::device::{CaptureDevice, DeviceKind};
use super::kiosk::{FromUi, ToUi};
use super::link::{capture_upload_message, door_message, guest_audio_message, new_session_id};
use crate::clock::Clock;
use crate::crypto::CipherKey;
use crate::flows::{ConfirmAnswer, SessionKind};
use crate::protocol::*;
use crate::transcription::Band;
use std::sync::{Arc, Mutex};

pub const OUT_OF_SERVICE: &str = "Out of service";

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    FromUi(String),
    ToUi(String),
    Capture(DeviceKind),
    Sent(Message),
    Received(Message),
}

/// Shared, append-only record of everything the bridge saw and did.
#[derive(Debug, Clone, Default)]
pub struct EventLog(Arc<Mutex<Vec<LogEntry>>>);

impl EventLog {
    fn push(&self, e: LogEntry) {
        self.0.lock().unwrap().push(e);
    }

    pub fn entries(&self) -> Vec<LogEntry> {
        self.0.lock().unwrap().clone()
    }

    /// Protocol messages exchanged, in order.
    pub fn messages(&self) -> Vec<Message> {
        self.entries()
            .into_iter()
            .filter_map(|e| match e {
                LogEntry::Sent(m) | LogEntry::Received(m) => Some(m),
                _ => None,
            })
            .collect()
    }

    pub fn screens(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter_map(|e| match e {
                LogEntry::ToUi(n) => Some(n),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct BridgeOutput {
    pub to_ui: Vec<ToUi>,
    pub to_controller: Vec<Message>,
    /// A result screen is up; call [`KioskBridge::hold_expired`] with this
    /// token once it has been shown long enough.
    pub hold: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Idle,
    AwaitAuth,
    PromptCode,
    AwaitCodeResult,
    AwaitChallenge,
    AwaitUnlock,
    PromptSpeak,
    AwaitMatch,
    AskConfirm,
    AwaitGuestResult,
    AwaitDelivery,
}

pub struct KioskBridge {
    key: CipherKey,
    camera: CaptureDevice,
    microphone: CaptureDevice,
    clock: Arc<dyn Clock>,
    stage: Stage,
    session: Option<String>,
    online: bool,
    hold_token: u64,
    log: EventLog,
}

impl KioskBridge {
    pub fn new(
        key: CipherKey,
        camera: CaptureDevice,
        microphone: CaptureDevice,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            key,
            camera,
            microphone,
            clock,
            stage: Stage::Idle,
            session: None,
            online: false,
            hold_token: 0,
            log: EventLog::default(),
        }
    }

    pub fn log(&self) -> EventLog {
        self.log.clone()
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    pub fn is_online(&self) -> bool {
        self.online
    }

    fn ui(&self, out: &mut BridgeOutput, ev: ToUi) {
        self.log.push(LogEntry::ToUi(ev.name().to_string()));
        out.to_ui.push(ev);
    }

    fn send(&self, out: &mut BridgeOutput, m: Message) {
        self.log.push(LogEntry::Sent(m.clone()));
        out.to_controller.push(m);
    }

    fn begin(&mut self, out: &mut BridgeOutput, kind: SessionKind) -> String {
        let id = new_session_id();
        self.send(
            out,
            door_message(
                MessageType::SessionStart,
                &id,
                &SessionStartPayload { kind },
            ),
        );
        self.session = Some(id.clone());
        id
    }

    /// Session over; show the result screen, then the menu after a hold.
    fn end_with(&mut self, out: &mut BridgeOutput, screen: ToUi) {
        self.stage = Stage::Idle;
        self.session = None;
        let menu = screen == ToUi::ShowMainMenu;
        self.ui(out, screen);
        if !menu {
            self.hold_token += 1;
            out.hold = Some(self.hold_token);
        }
    }

    fn abort(&mut self, out: &mut BridgeOutput, reason: &str) {
        if let Some(sid) = self.session.clone() {
            self.send(
                out,
                Message::error(Role::Door, Some(&sid), error_code::ABORTED, reason),
            );
        }
        self.end_with(
            out,
            ToUi::ShowError {
                message: reason.to_string(),
            },
        );
    }

    pub fn ui_connected(&mut self) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        if self.session.is_some() {
            self.abort(&mut out, "kiosk reconnected");
            out.to_ui.clear();
            out.hold = None;
        }
        if self.online {
            self.ui(&mut out, ToUi::ShowMainMenu);
        } else {
            self.ui(
                &mut out,
                ToUi::ShowError {
                    message: OUT_OF_SERVICE.into(),
                },
            );
        }
        out
    }

    pub fn ui_disconnected(&mut self) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        if self.session.is_some() {
            self.abort(&mut out, "kiosk disconnected");
        }
        out.to_ui.clear();
        out.hold = None;
        out
    }

    /// The UI sent something that is not a valid event.
    pub fn ui_invalid(&mut self, reason: &str) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        self.abort(&mut out, reason);
        out
    }

    pub fn set_online(&mut self, online: bool) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        self.online = online;
        if online {
            self.stage = Stage::Idle;
            self.session = None;
            self.ui(&mut out, ToUi::ShowMainMenu);
        } else {
            self.stage = Stage::Idle;
            self.session = None;
            self.ui(
                &mut out,
                ToUi::ShowError {
                    message: OUT_OF_SERVICE.into(),
                },
            );
        }
        out
    }

    pub fn hold_expired(&mut self, token: u64) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        if token == self.hold_token && self.stage == Stage::Idle && self.online {
            self.ui(&mut out, ToUi::ShowMainMenu);
        }
        out
    }

    pub fn on_ui(&mut self, ev: FromUi) -> BridgeOutput {
        self.log.push(LogEntry::FromUi(ev.name().to_string()));
        let mut out = BridgeOutput::default();
        if !self.online {
            self.ui(
                &mut out,
                ToUi::ShowError {
                    message: OUT_OF_SERVICE.into(),
                },
            );
            return out;
        }
        match (self.stage, &ev) {
            (Stage::Idle, FromUi::PressEmployee) => {
                let sid = self.begin(&mut out, SessionKind::Employee);
                self.ui(&mut out, ToUi::PromptCapture);
                let consent = ev.consent().expect("press grants consent");
                let started = self.clock.now_ms();
                let upload = self
                    .camera
                    .capture(consent)
                    .map_err(|e| e.to_string())
                    .and_then(|image| {
                        self.log.push(LogEntry::Capture(DeviceKind::Camera));
                        let ms = self.clock.now_ms().saturating_sub(started);
                        capture_upload_message(&sid, image, &self.key, Some(ms))
                            .map_err(|e| e.to_string())
                    });
                match upload {
                    Ok(m) => {
                        self.send(&mut out, m);
                        self.stage = Stage::AwaitAuth;
                    }
                    Err(reason) => self.abort(&mut out, &reason),
                }
            }
            (Stage::Idle, FromUi::PressGuest) => {
                self.begin(&mut out, SessionKind::Guest);
                self.stage = Stage::PromptSpeak;
                self.ui(&mut out, ToUi::PromptSpeak);
            }
            (Stage::Idle, FromUi::PressDelivery) => {
                let sid = self.begin(&mut out, SessionKind::Delivery);
                self.send(
                    &mut out,
                    door_message(MessageType::Delivery, &sid, &DeliveryPayload::default()),
                );
                self.stage = Stage::AwaitDelivery;
            }
            (Stage::PromptSpeak, FromUi::RecordDone) => {
                let sid = self.session.clone().expect("guest session");
                let consent = ev.consent().expect("record grants consent");
                let upload = self
                    .microphone
                    .capture(consent)
                    .map_err(|e| e.to_string())
                    .and_then(|audio| {
                        self.log.push(LogEntry::Capture(DeviceKind::Microphone));
                        guest_audio_message(&sid, audio).map_err(|e| e.to_string())
                    });
                match upload {
                    Ok(m) => {
                        self.send(&mut out, m);
                        self.stage = Stage::AwaitMatch;
                    }
                    Err(reason) => self.abort(&mut out, &reason),
                }
            }
            (Stage::PromptCode, FromUi::KeypadSubmit { code }) => {
                let sid = self.session.clone().expect("employee session");
                self.send(
                    &mut out,
                    door_message(
                        MessageType::CodeSubmit,
                        &sid,
                        &CodeSubmitPayload { code: code.clone() },
                    ),
                );
                self.stage = Stage::AwaitCodeResult;
            }
            (Stage::AskConfirm, FromUi::ConfirmYes | FromUi::ConfirmNo) => {
                let sid = self.session.clone().expect("guest session");
                let answer = if ev == FromUi::ConfirmYes {
                    ConfirmAnswer::Yes
                } else {
                    ConfirmAnswer::No
                };
                self.send(
                    &mut out,
                    door_message(
                        MessageType::GuestConfirm,
                        &sid,
                        &GuestConfirmPayload { answer },
                    ),
                );
                self.stage = Stage::AwaitGuestResult;
            }
            (stage, ev) => tracing::debug!(?stage, event = ev.name(), "kiosk event ignored"),
        }
        out
    }

    pub fn on_controller(&mut self, m: &Message) -> BridgeOutput {
        let mut out = BridgeOutput::default();
        if m.session.is_none() || m.session != self.session {
            if m.kind == MessageType::Error {
                tracing::warn!(payload = %m.payload, "controller error outside the session");
            }
            return out;
        }
        self.log.push(LogEntry::Received(m.clone()));
        if let Err(reason) = self.step(m, &mut out) {
            if m.kind == MessageType::Error {
                self.end_with(&mut out, ToUi::ShowError { message: reason });
            } else {
                self.abort(&mut out, &reason);
            }
        }
        out
    }

    fn step(&mut self, m: &Message, out: &mut BridgeOutput) -> Result<(), String> {
        let e = |err: SchemaError| err.to_string();
        match (self.stage, m.kind) {
            (Stage::AwaitAuth | Stage::AwaitChallenge, MessageType::CodeChallenge) => {
                let p: CodeChallengePayload = m.payload_as().map_err(e)?;
                self.stage = Stage::PromptCode;
                self.ui(
                    out,
                    ToUi::PromptCode {
                        attempts_remaining: p.attempts_remaining,
                    },
                );
            }
            (Stage::AwaitAuth, MessageType::AuthResult) => {
                let p: AuthResultPayload = m.payload_as().map_err(e)?;
                if p.accepted {
                    return Err("unexpected AUTH_RESULT".into());
                }
                self.end_with(out, ToUi::ShowDenied);
            }
            (Stage::AwaitCodeResult | Stage::PromptCode, MessageType::CodeResult) => {
                let p: CodeResultPayload = m.payload_as().map_err(e)?;
                match (self.stage, p.outcome) {
                    (Stage::AwaitCodeResult, CodeOutcome::Unlocked) => {
                        let full_name = p.full_name.unwrap_or_default();
                        let text = p
                            .welcome
                            .unwrap_or_else(|| crate::flows::WELCOME_TEXT.to_string());
                        self.stage = Stage::AwaitUnlock;
                        self.ui(out, ToUi::ShowWelcome { full_name, text });
                    }
                    (Stage::AwaitCodeResult, CodeOutcome::NewChallenge) => {
                        self.stage = Stage::AwaitChallenge
                    }
                    (_, CodeOutcome::LockedOut | CodeOutcome::Expired) => {
                        self.end_with(out, ToUi::ShowMainMenu)
                    }
                    (_, o) => return Err(format!("unexpected code outcome {o:?}")),
                }
            }
            (Stage::AwaitUnlock, MessageType::UnlockEvent) => {
                // The welcome screen is already up; start its hold.
                self.stage = Stage::Idle;
                self.session = None;
                self.hold_token += 1;
                out.hold = Some(self.hold_token);
            }
            (Stage::AwaitMatch, MessageType::GuestMatch) => {
                let p: GuestMatchPayload = m.payload_as().map_err(e)?;
                match p.band {
                    Band::Confirm => {
                        self.stage = Stage::AskConfirm;
                        self.ui(
                            out,
                            ToUi::AskConfirm {
                                full_name: p.full_name.unwrap_or_default(),
                                score: p.score,
                            },
                        );
                    }
                    Band::Retry => {
                        self.stage = Stage::PromptSpeak;
                        self.ui(out, ToUi::ShowRetry { score: p.score });
                    }
                    Band::Notify => return Err("unexpected notify band".into()),
                }
            }
            (Stage::AwaitMatch | Stage::AwaitGuestResult, MessageType::GuestResult) => {
                let p: GuestResultPayload = m.payload_as().map_err(e)?;
                match (self.stage, p.outcome) {
                    (_, GuestOutcome::Notified) => {
                        let name = p.full_name.unwrap_or_default();
                        self.end_with(
                            out,
                            ToUi::ShowNotified {
                                text: format!("{name} has been notified"),
                            },
                        );
                    }
                    (Stage::AwaitGuestResult, GuestOutcome::BackToUtterance) => {
                        self.stage = Stage::PromptSpeak;
                        self.ui(out, ToUi::PromptSpeak);
                    }
                    (_, o) => return Err(format!("unexpected guest outcome {o:?}")),
                }
            }
            (Stage::AwaitDelivery, MessageType::Delivery) => {
                self.end_with(
                    out,
                    ToUi::ShowNotified {
                        text: "The delivery has been announced".into(),
                    },
                );
            }
            (_, MessageType::Error) => {
                let p: ErrorPayload = m.payload_as().map_err(e)?;
                if error_code::ends_session(&p.code) {
                    self.end_with(out, ToUi::ShowError { message: p.message });
                } else {
                    self.abort(out, &format!("controller refused: {}", p.message));
                }
            }
            (stage, kind) => return Err(format!("unexpected {kind:?} while {stage:?}")),
        }
        Ok(())
    }
}
