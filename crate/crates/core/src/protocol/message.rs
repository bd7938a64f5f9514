use crate::flows::{ConfirmAnswer, SessionKind};
use crate::transcription::Band;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

/// Values of `ERROR.code`.
pub mod error_code {
    /// Undecodable frame or schema violation. Connection kept.
    pub const MALFORMED: &str = "malformed";
    /// Well-formed but refused (wrong state, unknown session). Session unchanged.
    pub const REJECTED: &str = "rejected";
    /// Envelope role does not match the role announced in HELLO.
    pub const ROLE: &str = "role";
    /// Another client of the same role is already connected.
    pub const BUSY: &str = "busy";
    pub const FRAME_TOO_LARGE: &str = "frameTooLarge";
    pub const HEARTBEAT: &str = "heartbeat";
    /// The session ended in its Error state.
    pub const SESSION: &str = "session";
    /// The door unit gave up on the session (device or UI failure).
    pub const ABORTED: &str = "aborted";

    /// Whether an ERROR with this code ends the session it names.
    pub fn ends_session(code: &str) -> bool {
        code == SESSION || code == ABORTED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageType {
    Hello,
    SessionStart,
    CaptureUpload,
    AuthResult,
    CodeChallenge,
    CodeSubmit,
    CodeResult,
    UnlockEvent,
    GuestAudio,
    GuestMatch,
    GuestConfirm,
    GuestResult,
    Delivery,
    Notify,
    NotifyAck,
    Error,
    Ping,
    Pong,
}

impl MessageType {
    pub const ALL: [MessageType; 18] = [
        MessageType::Hello,
        MessageType::SessionStart,
        MessageType::CaptureUpload,
        MessageType::AuthResult,
        MessageType::CodeChallenge,
        MessageType::CodeSubmit,
        MessageType::CodeResult,
        MessageType::UnlockEvent,
        MessageType::GuestAudio,
        MessageType::GuestMatch,
        MessageType::GuestConfirm,
        MessageType::GuestResult,
        MessageType::Delivery,
        MessageType::Notify,
        MessageType::NotifyAck,
        MessageType::Error,
        MessageType::Ping,
        MessageType::Pong,
    ];

    /// Which peers may send this type.
    pub fn allowed_senders(self) -> &'static [Role] {
        use MessageType::*;
        use Role::*;
        match self {
            Hello | Error | Ping | Pong => &[Door, Controller, Notifier],
            SessionStart | CaptureUpload | CodeSubmit | GuestAudio | GuestConfirm => &[Door],
            AuthResult | CodeChallenge | CodeResult | UnlockEvent | GuestMatch | GuestResult
            | Notify => &[Controller],
            // door asks, controller confirms
            Delivery => &[Door, Controller],
            NotifyAck => &[Notifier],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Door,
    Controller,
    Notifier,
}

/// Wire envelope. Field order here is the canonical serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub v: u32,
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub role: Role,
    pub session: Option<String>,
    pub payload: Value,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("payload must be a JSON object")]
    PayloadNotObject,
    #[error("{role:?} may not send {kind:?}")]
    Direction { role: Role, kind: MessageType },
    #[error("bad {kind:?} payload: {reason}")]
    Payload { kind: MessageType, reason: String },
}

impl Message {
    pub fn new<P: Serialize>(
        kind: MessageType,
        role: Role,
        session: Option<&str>,
        payload: &P,
    ) -> Self {
        let payload = serde_json::to_value(payload).expect("payload types serialize");
        Self {
            v: PROTOCOL_VERSION,
            kind,
            role,
            session: session.map(str::to_string),
            payload,
        }
    }

    pub fn empty(kind: MessageType, role: Role, session: Option<&str>) -> Self {
        Self::new(kind, role, session, &serde_json::Map::new())
    }

    pub fn error(
        role: Role,
        session: Option<&str>,
        code: &str,
        message: impl Into<String>,
    ) -> Self {
        Self::new(
            MessageType::Error,
            role,
            session,
            &ErrorPayload {
                code: code.to_string(),
                message: message.into(),
            },
        )
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.v != PROTOCOL_VERSION {
            return Err(SchemaError::Version(self.v));
        }
        if !self.payload.is_object() {
            return Err(SchemaError::PayloadNotObject);
        }
        if !self.kind.allowed_senders().contains(&self.role) {
            return Err(SchemaError::Direction {
                role: self.role,
                kind: self.kind,
            });
        }
        Ok(())
    }

    pub fn payload_as<P: DeserializeOwned>(&self) -> Result<P, SchemaError> {
        serde_json::from_value(self.payload.clone()).map_err(|e| SchemaError::Payload {
            kind: self.kind,
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct HelloPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStartPayload {
    pub kind: SessionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaptureUploadPayload {
    /// base64 of the XOR-encrypted image.
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthResultPayload {
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CodeChallengePayload {
    pub challenge_id: String,
    pub attempts_remaining: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSubmitPayload {
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CodeOutcome {
    Unlocked,
    NewChallenge,
    LockedOut,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CodeResultPayload {
    pub ok: bool,
    pub outcome: CodeOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts_remaining: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welcome: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnlockEventPayload {
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuestAudioPayload {
    /// base64 of the recorded audio.
    pub audio: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuestMatchPayload {
    pub band: Band,
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub employee_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuestConfirmPayload {
    pub answer: ConfirmAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GuestOutcome {
    Notified,
    BackToUtterance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GuestResultPayload {
    pub outcome: GuestOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub employee_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DeliveryPayload {
    /// Absent on the door's request, `"notified"` on the controller's reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NotifyPayload {
    pub id: String,
    pub target_kind: crate::notify::TargetKind,
    pub target: String,
    pub text: String,
    pub dispatched_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NotifyAckPayload {
    pub id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}
