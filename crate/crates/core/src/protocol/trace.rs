//! Checks that the messages of one session follow the kiosk flowcharts.

use super::message::*;
use crate::flows::SessionKind;
use crate::transcription::Band;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("message {index} ({kind:?}): {reason}")]
pub struct TraceError {
    pub index: usize,
    pub kind: MessageType,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceVerdict {
    pub kind: SessionKind,
    /// The trace reached a terminal message.
    pub complete: bool,
    pub code_submits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum St {
    Start,
    AwaitCapture,
    AwaitAuth,
    AwaitSubmit,
    AwaitCodeResult,
    AwaitUnlock,
    AwaitNextChallenge,
    AwaitAudio,
    AwaitMatch,
    AwaitConfirm,
    AwaitGuestResult,
    AwaitDeliveryRequest,
    AwaitDeliveryReply,
    End,
}

/// Messages that carry no session (HELLO, PING, PONG) and non-terminal
/// ERROR replies are skipped. `max_submits` bounds CODE_SUBMIT count.
pub fn validate_trace(
    messages: &[Message],
    max_submits: usize,
) -> Result<TraceVerdict, TraceError> {
    let mut st = St::Start;
    let mut kind = None;
    let mut submits = 0usize;
    let mut challenge_ids: Vec<String> = Vec::new();

    for (index, m) in messages.iter().enumerate() {
        let fail = |reason: String| TraceError {
            index,
            kind: m.kind,
            reason,
        };
        if matches!(
            m.kind,
            MessageType::Hello | MessageType::Ping | MessageType::Pong
        ) {
            continue;
        }
        if m.kind == MessageType::Error {
            let p: ErrorPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
            if !error_code::ends_session(&p.code) {
                continue;
            }
            if st == St::Start || st == St::End {
                return Err(fail(format!("terminal error in state {st:?}")));
            }
            st = St::End;
            continue;
        }
        if st == St::End {
            return Err(fail("message after session end".into()));
        }
        let from_door = m.role == Role::Door;
        st = match (st, m.kind) {
            (St::Start, MessageType::SessionStart) if from_door => {
                let p: SessionStartPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                kind = Some(p.kind);
                match p.kind {
                    SessionKind::Employee => St::AwaitCapture,
                    SessionKind::Guest => St::AwaitAudio,
                    SessionKind::Delivery => St::AwaitDeliveryRequest,
                }
            }
            (St::AwaitCapture, MessageType::CaptureUpload) if from_door => St::AwaitAuth,
            (St::AwaitAuth, MessageType::AuthResult) => {
                let p: AuthResultPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                if p.accepted {
                    return Err(fail(
                        "an accepted probe continues with CODE_CHALLENGE".into(),
                    ));
                }
                St::End
            }
            (St::AwaitAuth | St::AwaitNextChallenge, MessageType::CodeChallenge) => {
                let p: CodeChallengePayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                if challenge_ids.contains(&p.challenge_id) {
                    return Err(fail(format!("challenge id {} reused", p.challenge_id)));
                }
                challenge_ids.push(p.challenge_id);
                St::AwaitSubmit
            }
            (St::AwaitSubmit, MessageType::CodeSubmit) if from_door => {
                submits += 1;
                if submits > max_submits {
                    return Err(fail(format!("more than {max_submits} code submissions")));
                }
                St::AwaitCodeResult
            }
            (St::AwaitSubmit | St::AwaitCodeResult, MessageType::CodeResult) => {
                let p: CodeResultPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                match (st, p.outcome) {
                    (_, CodeOutcome::Expired) => St::End,
                    (St::AwaitCodeResult, CodeOutcome::Unlocked) if p.ok => St::AwaitUnlock,
                    (St::AwaitCodeResult, CodeOutcome::NewChallenge) if !p.ok => {
                        St::AwaitNextChallenge
                    }
                    (St::AwaitCodeResult, CodeOutcome::LockedOut) if !p.ok => St::End,
                    (_, o) => {
                        return Err(fail(format!("unexpected code outcome {o:?} (ok={})", p.ok)))
                    }
                }
            }
            (St::AwaitUnlock, MessageType::UnlockEvent) if !from_door => St::End,
            (St::AwaitAudio, MessageType::GuestAudio) if from_door => St::AwaitMatch,
            (St::AwaitMatch, MessageType::GuestMatch) => {
                let p: GuestMatchPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                match p.band {
                    Band::Confirm => St::AwaitConfirm,
                    Band::Retry => St::AwaitAudio,
                    Band::Notify => {
                        return Err(fail("notify band is reported as GUEST_RESULT".into()))
                    }
                }
            }
            (St::AwaitMatch | St::AwaitGuestResult, MessageType::GuestResult) => {
                let p: GuestResultPayload = m.payload_as().map_err(|e| fail(e.to_string()))?;
                match (st, p.outcome) {
                    (_, GuestOutcome::Notified) => St::End,
                    (St::AwaitGuestResult, GuestOutcome::BackToUtterance) => St::AwaitAudio,
                    (_, o) => return Err(fail(format!("unexpected guest outcome {o:?}"))),
                }
            }
            (St::AwaitConfirm, MessageType::GuestConfirm) if from_door => St::AwaitGuestResult,
            (St::AwaitDeliveryRequest, MessageType::Delivery) if from_door => {
                St::AwaitDeliveryReply
            }
            (St::AwaitDeliveryReply, MessageType::Delivery) if !from_door => St::End,
            (st, k) => {
                return Err(fail(format!(
                    "{k:?} from {:?} not allowed in state {st:?}",
                    m.role
                )))
            }
        };
    }
    let kind = kind.ok_or_else(|| TraceError {
        index: 0,
        kind: messages
            .first()
            .map(|m| m.kind)
            .unwrap_or(MessageType::SessionStart),
        reason: "trace has no SESSION_START".into(),
    })?;
    Ok(TraceVerdict {
        kind,
        complete: st == St::End,
        code_submits: submits,
    })
}

/// Groups messages by session id, keeping arrival order within each group.
pub fn split_by_session(messages: &[Message]) -> Vec<(String, Vec<Message>)> {
    let mut out: Vec<(String, Vec<Message>)> = Vec::new();
    for m in messages {
        let Some(id) = &m.session else { continue };
        match out.iter_mut().find(|(s, _)| s == id) {
            Some((_, v)) => v.push(m.clone()),
            None => out.push((id.clone(), vec![m.clone()])),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn door(kind: MessageType, payload: serde_json::Value) -> Message {
        Message::new(kind, Role::Door, Some("s"), &payload)
    }
    fn ctl(kind: MessageType, payload: serde_json::Value) -> Message {
        Message::new(kind, Role::Controller, Some("s"), &payload)
    }
    fn challenge(id: &str) -> Message {
        ctl(
            MessageType::CodeChallenge,
            json!({"challengeId": id, "attemptsRemaining": 3}),
        )
    }

    #[test]
    fn employee_happy_path() {
        let t = vec![
            door(MessageType::SessionStart, json!({"kind": "employee"})),
            door(MessageType::CaptureUpload, json!({"image": ""})),
            challenge("a"),
            door(MessageType::CodeSubmit, json!({"code": "1234"})),
            ctl(
                MessageType::CodeResult,
                json!({"ok": true, "outcome": "unlocked"}),
            ),
            ctl(
                MessageType::UnlockEvent,
                json!({"startMs": 0, "endMs": 5000}),
            ),
        ];
        let v = validate_trace(&t, 3).unwrap();
        assert!(v.complete);
        assert_eq!(v.code_submits, 1);
        assert!(!validate_trace(&t[..5], 3).unwrap().complete);
    }

    #[test]
    fn unlock_without_code_is_invalid() {
        let t = vec![
            door(MessageType::SessionStart, json!({"kind": "employee"})),
            door(MessageType::CaptureUpload, json!({"image": ""})),
            ctl(
                MessageType::UnlockEvent,
                json!({"startMs": 0, "endMs": 5000}),
            ),
        ];
        assert_eq!(validate_trace(&t, 3).unwrap_err().index, 2);
    }

    #[test]
    fn reused_challenge_and_fourth_submit() {
        let wrong = |left| {
            ctl(
                MessageType::CodeResult,
                json!({"ok": false, "outcome": "newChallenge", "attemptsRemaining": left}),
            )
        };
        let mut t = vec![
            door(MessageType::SessionStart, json!({"kind": "employee"})),
            door(MessageType::CaptureUpload, json!({"image": ""})),
            challenge("a"),
            door(MessageType::CodeSubmit, json!({"code": "0000"})),
            wrong(2),
            challenge("a"),
        ];
        assert!(validate_trace(&t, 3).unwrap_err().reason.contains("reused"));
        t[5] = challenge("b");
        t.push(door(MessageType::CodeSubmit, json!({"code": "0000"})));
        t.push(wrong(1));
        t.push(challenge("c"));
        t.push(door(MessageType::CodeSubmit, json!({"code": "0000"})));
        assert!(validate_trace(&t, 2).is_err());
        t.push(ctl(
            MessageType::CodeResult,
            json!({"ok": false, "outcome": "lockedOut"}),
        ));
        assert!(validate_trace(&t, 3).unwrap().complete);
    }

    #[test]
    fn guest_retry_confirm_no_then_notified() {
        let t = vec![
            door(MessageType::SessionStart, json!({"kind": "guest"})),
            door(MessageType::GuestAudio, json!({"audio": ""})),
            ctl(
                MessageType::GuestMatch,
                json!({"band": "retry", "score": 10}),
            ),
            door(MessageType::GuestAudio, json!({"audio": ""})),
            ctl(
                MessageType::GuestMatch,
                json!({"band": "confirm", "score": 60}),
            ),
            door(MessageType::GuestConfirm, json!({"answer": "no"})),
            ctl(
                MessageType::GuestResult,
                json!({"outcome": "backToUtterance"}),
            ),
            door(MessageType::GuestAudio, json!({"audio": ""})),
            ctl(MessageType::GuestResult, json!({"outcome": "notified"})),
        ];
        assert!(validate_trace(&t, 3).unwrap().complete);
    }

    #[test]
    fn delivery_and_errors() {
        let t = vec![
            door(MessageType::SessionStart, json!({"kind": "delivery"})),
            ctl(
                MessageType::Error,
                json!({"code": "rejected", "message": "x"}),
            ),
            door(MessageType::Delivery, json!({})),
            ctl(MessageType::Delivery, json!({"status": "notified"})),
        ];
        assert!(validate_trace(&t, 3).unwrap().complete);
        let aborted = vec![
            door(MessageType::SessionStart, json!({"kind": "employee"})),
            door(
                MessageType::Error,
                json!({"code": "aborted", "message": "camera"}),
            ),
            door(MessageType::CaptureUpload, json!({"image": ""})),
        ];
        assert!(validate_trace(&aborted, 3)
            .unwrap_err()
            .reason
            .contains("after session end"));
    }
}
