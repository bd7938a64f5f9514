use super::pin::PinChallenge;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    Employee,
    Guest,
    Delivery,
}

impl FromStr for SessionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "employee" => Ok(Self::Employee),
            "guest" => Ok(Self::Guest),
            "delivery" => Ok(Self::Delivery),
            other => Err(format!("unknown session kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SessionState {
    AwaitingCapture,
    AwaitingCode,
    AwaitingUtterance,
    AwaitingConfirmation,
    NotifyPending,
    Unlocked,
    Denied,
    LockedOut,
    Expired,
    GuestNotified,
    DeliveryNotified,
    Error,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Self::Unlocked
                | Self::Denied
                | Self::LockedOut
                | Self::Expired
                | Self::GuestNotified
                | Self::DeliveryNotified
                | Self::Error
        )
    }

    pub fn initial(kind: SessionKind) -> Self {
        match kind {
            SessionKind::Employee => Self::AwaitingCapture,
            SessionKind::Guest => Self::AwaitingUtterance,
            SessionKind::Delivery => Self::NotifyPending,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Capture,
    CloudAuth,
    PinEntry,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Capture, Phase::CloudAuth, Phase::PinEntry];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Capture => "Capture",
            Phase::CloudAuth => "CloudAuth",
            Phase::PinEntry => "PinEntry",
        })
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("unknown phase label {0:?}")]
pub struct UnknownPhase(pub String);

impl FromStr for Phase {
    type Err = UnknownPhase;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Capture" | "capture" => Ok(Phase::Capture),
            "CloudAuth" | "cloudAuth" | "cloud_auth" => Ok(Phase::CloudAuth),
            "PinEntry" | "pinEntry" | "pin_entry" => Ok(Phase::PinEntry),
            other => Err(UnknownPhase(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseTiming {
    pub phase: Phase,
    pub duration_ms: u64,
}

/// One kiosk interaction. Holds no image or audio bytes at any point; those
/// only live for the duration of a single step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessSession {
    pub session_id: String,
    pub kind: SessionKind,
    pub state: SessionState,
    pub attempts_used: u8,
    pub active_challenge: Option<PinChallenge>,
    pub phase_timings: Vec<PhaseTiming>,
    pub created_at: u64,
    /// Matched employee (employee flow) or current candidate / notified
    /// employee (guest flow).
    pub employee_id: Option<String>,
    pub score: Option<f64>,
    /// Every challenge id issued in this session, oldest first.
    pub issued_challenges: Vec<String>,
    /// When the first code was sent; PIN entry time is measured from here.
    pub first_challenge_at: Option<u64>,
    /// Number of utterances processed (guest flow).
    pub utterances: u32,
    pub error: Option<String>,
}

impl AccessSession {
    pub fn new(session_id: String, kind: SessionKind, created_at: u64) -> Self {
        Self {
            session_id,
            kind,
            state: SessionState::initial(kind),
            attempts_used: 0,
            active_challenge: None,
            phase_timings: Vec::new(),
            created_at,
            employee_id: None,
            score: None,
            issued_challenges: Vec::new(),
            first_challenge_at: None,
            utterances: 0,
            error: None,
        }
    }

    pub fn record_phase(&mut self, phase: Phase, duration_ms: u64) {
        self.phase_timings.push(PhaseTiming { phase, duration_ms });
    }

    /// Like [`AccessSession::record_phase`] but takes a label, as received over the wire.
    pub fn record_phase_label(&mut self, label: &str, duration_ms: i64) -> Result<(), String> {
        let phase: Phase = label.parse().map_err(|e: UnknownPhase| e.to_string())?;
        let duration =
            u64::try_from(duration_ms).map_err(|_| format!("negative duration {duration_ms}"))?;
        self.record_phase(phase, duration);
        Ok(())
    }

    pub fn phase_total(&self, phase: Phase) -> u64 {
        self.phase_timings
            .iter()
            .filter(|t| t.phase == phase)
            .map(|t| t.duration_ms)
            .sum()
    }

    pub fn check_invariants(&self, max_attempts: u8) -> Result<(), String> {
        if self.attempts_used > max_attempts {
            return Err(format!(
                "attempts_used {} > {max_attempts}",
                self.attempts_used
            ));
        }
        let awaiting_code = self.state == SessionState::AwaitingCode;
        if awaiting_code != self.active_challenge.is_some() {
            return Err(format!(
                "challenge presence {} in state {:?}",
                self.active_challenge.is_some(),
                self.state
            ));
        }
        let mut ids = self.issued_challenges.clone();
        ids.sort();
        ids.dedup();
        if ids.len() != self.issued_challenges.len() {
            return Err("challenge id reused".into());
        }
        let valid_for_kind = match self.kind {
            SessionKind::Employee => matches!(
                self.state,
                SessionState::AwaitingCapture
                    | SessionState::AwaitingCode
                    | SessionState::Unlocked
                    | SessionState::Denied
                    | SessionState::LockedOut
                    | SessionState::Expired
                    | SessionState::Error
            ),
            SessionKind::Guest => matches!(
                self.state,
                SessionState::AwaitingUtterance
                    | SessionState::AwaitingConfirmation
                    | SessionState::GuestNotified
                    | SessionState::Error
            ),
            SessionKind::Delivery => matches!(
                self.state,
                SessionState::NotifyPending | SessionState::DeliveryNotified | SessionState::Error
            ),
        };
        if !valid_for_kind {
            return Err(format!(
                "state {:?} invalid for {:?}",
                self.state, self.kind
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_states() {
        assert_eq!(
            SessionState::initial(SessionKind::Employee),
            SessionState::AwaitingCapture
        );
        assert_eq!(
            SessionState::initial(SessionKind::Guest),
            SessionState::AwaitingUtterance
        );
        assert_eq!(
            SessionState::initial(SessionKind::Delivery),
            SessionState::NotifyPending
        );
    }

    #[test]
    fn phase_labels() {
        let mut s = AccessSession::new("s".into(), SessionKind::Employee, 0);
        s.record_phase_label("Capture", 4466).unwrap();
        s.record_phase_label("cloudAuth", 10353).unwrap();
        assert!(s.record_phase_label("Coffee", 1).is_err());
        assert!(s.record_phase_label("PinEntry", -5).is_err());
        assert_eq!(s.phase_total(Phase::Capture), 4466);
        assert_eq!(s.phase_timings.len(), 2);
    }
}
