//! The kiosk UI contract: JSON events over the `/kiosk` WebSocket.
//!
//! ```json
//! {"direction":"fromUi","name":"keypadSubmit","payload":{"code":"0042"}}
//! {"direction":"toUi","name":"showWelcome","payload":{"fullName":"Anna Lindberg","text":"Welcome to the office, Anna Lindberg"}}
//! ```

use super::device::Consent;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    ToUi,
    FromUi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KioskEvent {
    pub direction: Direction,
    pub name: String,
    #[serde(default = "empty_object")]
    pub payload: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

pub const FROM_UI_NAMES: [&str; 7] = [
    "pressEmployee",
    "pressGuest",
    "pressDelivery",
    "keypadSubmit",
    "confirmYes",
    "confirmNo",
    "recordDone",
];

pub const TO_UI_NAMES: [&str; 10] = [
    "showMainMenu",
    "promptCapture",
    "promptCode",
    "showWelcome",
    "showDenied",
    "promptSpeak",
    "askConfirm",
    "showNotified",
    "showRetry",
    "showError",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KioskError {
    #[error("invalid kiosk JSON: {0}")]
    Json(String),
    #[error("expected a fromUi event")]
    Direction,
    #[error("unknown event {0:?}")]
    UnknownName(String),
    #[error("bad payload for {name}: {reason}")]
    Payload { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FromUi {
    PressEmployee,
    PressGuest,
    PressDelivery,
    KeypadSubmit { code: String },
    ConfirmYes,
    ConfirmNo,
    RecordDone,
}

impl FromUi {
    pub fn name(&self) -> &'static str {
        match self {
            FromUi::PressEmployee => "pressEmployee",
            FromUi::PressGuest => "pressGuest",
            FromUi::PressDelivery => "pressDelivery",
            FromUi::KeypadSubmit { .. } => "keypadSubmit",
            FromUi::ConfirmYes => "confirmYes",
            FromUi::ConfirmNo => "confirmNo",
            FromUi::RecordDone => "recordDone",
        }
    }

    /// Capture permission carried by this press, if it is a capture trigger.
    pub fn consent(&self) -> Option<Consent> {
        match self {
            FromUi::PressEmployee | FromUi::RecordDone => Some(Consent {
                trigger: self.name(),
            }),
            _ => None,
        }
    }

    pub fn to_event(&self) -> KioskEvent {
        let payload = match self {
            FromUi::KeypadSubmit { code } => json!({ "code": code }),
            _ => empty_object(),
        };
        KioskEvent {
            direction: Direction::FromUi,
            name: self.name().to_string(),
            payload,
        }
    }

    pub fn from_event(ev: &KioskEvent) -> Result<Self, KioskError> {
        if ev.direction != Direction::FromUi {
            return Err(KioskError::Direction);
        }
        Ok(match ev.name.as_str() {
            "pressEmployee" => FromUi::PressEmployee,
            "pressGuest" => FromUi::PressGuest,
            "pressDelivery" => FromUi::PressDelivery,
            "keypadSubmit" => {
                let code = ev
                    .payload
                    .get("code")
                    .and_then(Value::as_str)
                    .ok_or_else(|| KioskError::Payload {
                        name: ev.name.clone(),
                        reason: "missing string field code".into(),
                    })?;
                FromUi::KeypadSubmit {
                    code: code.to_string(),
                }
            }
            "confirmYes" => FromUi::ConfirmYes,
            "confirmNo" => FromUi::ConfirmNo,
            "recordDone" => FromUi::RecordDone,
            other => return Err(KioskError::UnknownName(other.to_string())),
        })
    }

    pub fn parse(text: &str) -> Result<Self, KioskError> {
        let ev: KioskEvent =
            serde_json::from_str(text).map_err(|e| KioskError::Json(e.to_string()))?;
        Self::from_event(&ev)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "payload", rename_all = "camelCase")]
pub enum ToUi {
    ShowMainMenu,
    PromptCapture,
    #[serde(rename_all = "camelCase")]
    PromptCode {
        attempts_remaining: u8,
    },
    #[serde(rename_all = "camelCase")]
    ShowWelcome {
        full_name: String,
        text: String,
    },
    ShowDenied,
    PromptSpeak,
    #[serde(rename_all = "camelCase")]
    AskConfirm {
        full_name: String,
        score: u8,
    },
    ShowNotified {
        text: String,
    },
    ShowRetry {
        score: u8,
    },
    ShowError {
        message: String,
    },
}

impl ToUi {
    pub fn name(&self) -> &'static str {
        match self {
            ToUi::ShowMainMenu => "showMainMenu",
            ToUi::PromptCapture => "promptCapture",
            ToUi::PromptCode { .. } => "promptCode",
            ToUi::ShowWelcome { .. } => "showWelcome",
            ToUi::ShowDenied => "showDenied",
            ToUi::PromptSpeak => "promptSpeak",
            ToUi::AskConfirm { .. } => "askConfirm",
            ToUi::ShowNotified { .. } => "showNotified",
            ToUi::ShowRetry { .. } => "showRetry",
            ToUi::ShowError { .. } => "showError",
        }
    }

    pub fn to_event(&self) -> KioskEvent {
        let v = serde_json::to_value(self).expect("ToUi serializes");
        KioskEvent {
            direction: Direction::ToUi,
            name: self.name().to_string(),
            payload: v.get("payload").cloned().unwrap_or_else(empty_object),
        }
    }

    pub fn from_event(ev: &KioskEvent) -> Result<Self, KioskError> {
        if ev.direction != Direction::ToUi {
            return Err(KioskError::Direction);
        }
        if !TO_UI_NAMES.contains(&ev.name.as_str()) {
            return Err(KioskError::UnknownName(ev.name.clone()));
        }
        let mut tagged = json!({ "name": ev.name });
        if ev.payload.as_object().is_some_and(|o| !o.is_empty()) {
            tagged["payload"] = ev.payload.clone();
        }
        serde_json::from_value(tagged).map_err(|e| KioskError::Payload {
            name: ev.name.clone(),
            reason: e.to_string(),
        })
    }
}
