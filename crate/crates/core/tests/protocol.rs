mod common;

use common::*;
use officegate::flows::LockActuator;
use officegate::flows::{FlowConfig, SessionState};
use officegate::harness::LoopbackStack;
use officegate::notify::{DeliveryReceipt, Notification, NotificationSink, NotifyError};
use officegate::protocol::*;
use serde_json::json;
use std::sync::Arc;
use std::time::Duration;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;

const WAIT: Duration = Duration::from_secs(5);

fn traced() -> ServerConfig {
    ServerConfig {
        record_trace: true,
        expiry_sweep: Duration::from_millis(20),
        ..ServerConfig::default()
    }
}

async fn door(stack: &LoopbackStack) -> ProtocolClient {
    ProtocolClient::connect(stack.addr(), Role::Door, "test-door")
        .await
        .unwrap()
}

fn start(door: &ProtocolClient, sid: &str, kind: &str) {
    door.send_payload(MessageType::SessionStart, Some(sid), &json!({"kind": kind}))
        .unwrap();
}

fn upload(door: &ProtocolClient, sid: &str, tag: &str) {
    door.send_payload(
        MessageType::CaptureUpload,
        Some(sid),
        &json!({"image": b64(&encrypted_probe(tag))}),
    )
    .unwrap();
}

async fn recv(door: &mut ProtocolClient) -> Message {
    door.recv_timeout(WAIT).await.unwrap()
}

fn error_code_of(m: &Message) -> String {
    assert_eq!(m.kind, MessageType::Error, "{m:?}");
    m.payload_as::<ErrorPayload>().unwrap().code
}

#[tokio::test]
async fn employee_happy_path_trace() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(1))
        .await
        .unwrap();
    let mut d = door(&stack).await;
    start(&d, "s1", "employee");
    upload(&d, "s1", "genuine");
    let ch = recv(&mut d).await;
    assert_eq!(ch.kind, MessageType::CodeChallenge);
    let p: CodeChallengePayload = ch.payload_as().unwrap();
    assert_eq!(p.attempts_remaining, 3);
    let code = rig.last_code_for("@anna").unwrap();
    d.send_payload(MessageType::CodeSubmit, Some("s1"), &json!({"code": code}))
        .unwrap();
    let res = recv(&mut d).await;
    let r: CodeResultPayload = res.payload_as().unwrap();
    assert!(r.ok);
    assert_eq!(r.outcome, CodeOutcome::Unlocked);
    assert_eq!(r.full_name.as_deref(), Some("Anna Lindberg"));
    assert_eq!(
        r.welcome.as_deref(),
        Some("Welcome to the office, Anna Lindberg")
    );
    let unlock = recv(&mut d).await;
    assert_eq!(unlock.kind, MessageType::UnlockEvent);
    let u: UnlockEventPayload = unlock.payload_as().unwrap();
    assert_eq!(u.end_ms - u.start_ms, 5000);

    let trace = stack.server.trace();
    let kinds: Vec<_> = trace.iter().map(|m| m.kind).collect();
    assert_eq!(
        kinds,
        [
            MessageType::SessionStart,
            MessageType::CaptureUpload,
            MessageType::CodeChallenge,
            MessageType::CodeSubmit,
            MessageType::CodeResult,
            MessageType::UnlockEvent,
        ]
    );
    assert!(validate_trace(&trace, 3).unwrap().complete);
    assert_eq!(rig.lock.timeline().unlock_count(), 1);
    stack.shutdown().await;
}

async fn raw_hello(
    stack: &LoopbackStack,
) -> (
    FrameReader<tokio::net::tcp::OwnedReadHalf>,
    tokio::net::tcp::OwnedWriteHalf,
) {
    let s = TcpStream::connect(stack.addr()).await.unwrap();
    let (r, mut w) = s.into_split();
    let mut reader = FrameReader::new(r);
    write_message(
        &mut w,
        &Message::empty(MessageType::Hello, Role::Door, None),
    )
    .await
    .unwrap();
    let hello = tokio::time::timeout(WAIT, reader.next())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    assert_eq!(hello.kind, MessageType::Hello);
    (reader, w)
}

async fn raw_next(reader: &mut FrameReader<tokio::net::tcp::OwnedReadHalf>) -> Option<Message> {
    tokio::time::timeout(WAIT, reader.next())
        .await
        .unwrap()
        .unwrap()
}

#[tokio::test]
async fn spoofed_unlock_is_rejected() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(2))
        .await
        .unwrap();
    let (mut reader, mut w) = raw_hello(&stack).await;

    let spoof = br#"{"v":1,"type":"UNLOCK_EVENT","role":"door","session":"x","payload":{"startMs":0,"endMs":5000}}"#;
    w.write_all(&frame_bytes(spoof).unwrap()).await.unwrap();
    assert_eq!(
        error_code_of(&raw_next(&mut reader).await.unwrap()),
        error_code::MALFORMED
    );

    // Claiming to be the controller on a door connection.
    let forged = Message::new(
        MessageType::UnlockEvent,
        Role::Controller,
        Some("x"),
        &json!({"startMs": 0, "endMs": 5000}),
    );
    write_message(&mut w, &forged).await.unwrap();
    assert_eq!(
        error_code_of(&raw_next(&mut reader).await.unwrap()),
        error_code::ROLE
    );

    // The connection survives both.
    write_message(&mut w, &Message::empty(MessageType::Ping, Role::Door, None))
        .await
        .unwrap();
    assert_eq!(raw_next(&mut reader).await.unwrap().kind, MessageType::Pong);
    assert_eq!(rig.lock.timeline().unlock_count(), 0);
    stack.shutdown().await;
}

#[tokio::test]
async fn malformed_frame_keeps_connection_oversize_closes_it() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(3))
        .await
        .unwrap();
    let (mut reader, mut w) = raw_hello(&stack).await;
    w.write_all(&frame_bytes(b"\xff\xfe not json").unwrap())
        .await
        .unwrap();
    assert_eq!(
        error_code_of(&raw_next(&mut reader).await.unwrap()),
        error_code::MALFORMED
    );
    write_message(&mut w, &Message::empty(MessageType::Ping, Role::Door, None))
        .await
        .unwrap();
    assert_eq!(raw_next(&mut reader).await.unwrap().kind, MessageType::Pong);

    w.write_all(&(20u32 << 20).to_be_bytes()).await.unwrap();
    assert_eq!(
        error_code_of(&raw_next(&mut reader).await.unwrap()),
        error_code::FRAME_TOO_LARGE
    );
    assert!(raw_next(&mut reader).await.is_none());
    stack.shutdown().await;
}

#[tokio::test]
async fn only_one_door_client() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(4))
        .await
        .unwrap();
    let _d = door(&stack).await;
    match ProtocolClient::connect(stack.addr(), Role::Door, "second").await {
        Err(ClientError::Handshake(reason)) => assert!(reason.starts_with("busy")),
        other => panic!("{:?}", other.map(|_| ())),
    }
    stack.shutdown().await;
}

#[tokio::test]
async fn notifier_absent_fails_closed() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(5))
        .await
        .unwrap();
    stack.stop_notifier().await.unwrap();
    let mut d = door(&stack).await;
    start(&d, "s1", "employee");
    upload(&d, "s1", "genuine");
    let m = recv(&mut d).await;
    assert_eq!(error_code_of(&m), error_code::SESSION);
    assert!(rig.sink.is_empty());
    assert_eq!(rig.lock.timeline().unlock_count(), 0);
    let c = stack.server.controller();
    assert_eq!(c.lock().await.finished()[0].state, SessionState::Error);
    stack.shutdown().await;
}

/// Never answers, and reports when a dispatch has started.
struct Hanging(tokio::sync::mpsc::UnboundedSender<()>);

#[async_trait::async_trait]
impl NotificationSink for Hanging {
    async fn dispatch(&self, _: &Notification) -> Result<DeliveryReceipt, NotifyError> {
        let _ = self.0.send(());
        std::future::pending().await
    }
}

#[tokio::test]
async fn notifier_disconnect_during_dispatch() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(6))
        .await
        .unwrap();
    stack.stop_notifier().await.unwrap();
    let (tx, mut started) = tokio::sync::mpsc::unbounded_channel();
    let n = ProtocolClient::connect(stack.addr(), Role::Notifier, "hanging")
        .await
        .unwrap();
    let task = tokio::spawn(serve_notifications(n, Arc::new(Hanging(tx))));
    stack.wait_for(|s| s.notifier_connected()).await.unwrap();

    let mut d = door(&stack).await;
    start(&d, "s1", "employee");
    upload(&d, "s1", "genuine");
    started.recv().await.unwrap();
    task.abort();
    let m = recv(&mut d).await;
    assert_eq!(error_code_of(&m), error_code::SESSION);
    assert!(m
        .payload_as::<ErrorPayload>()
        .unwrap()
        .message
        .contains("not connected"));
    assert_eq!(rig.lock.timeline().unlock_count(), 0);
    let trace = stack.server.trace();
    assert!(validate_trace(&trace, 3).unwrap().complete);
    stack.shutdown().await;
}

#[tokio::test]
async fn door_disconnect_aborts_session() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(7))
        .await
        .unwrap();
    let mut d = door(&stack).await;
    start(&d, "s1", "employee");
    upload(&d, "s1", "genuine");
    assert_eq!(recv(&mut d).await.kind, MessageType::CodeChallenge);
    drop(d);
    stack.wait_for(|s| !s.door_connected()).await.unwrap();
    let c = stack.server.controller();
    let c = c.lock().await;
    assert!(c.active().is_none());
    assert_eq!(c.finished()[0].state, SessionState::Error);
    assert_eq!(rig.lock.timeline().unlock_count(), 0);
    drop(c);
    stack.shutdown().await;
}

#[tokio::test]
async fn door_error_aborts_session() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(8))
        .await
        .unwrap();
    let d = door(&stack).await;
    start(&d, "s1", "employee");
    d.send(Message::error(
        Role::Door,
        Some("s1"),
        error_code::ABORTED,
        "camera unavailable",
    ))
    .unwrap();
    stack
        .wait_for(|s| s.trace().iter().any(|m| m.kind == MessageType::Error))
        .await
        .unwrap();
    let c = stack.server.controller();
    for _ in 0..100 {
        if c.lock().await.active().is_none() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(c.lock().await.finished()[0].state, SessionState::Error);
    assert!(validate_trace(&stack.server.trace(), 3).unwrap().complete);
    stack.shutdown().await;
}

#[tokio::test]
async fn stale_code_expires_via_sweep() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(9))
        .await
        .unwrap();
    let mut d = door(&stack).await;
    start(&d, "s1", "employee");
    upload(&d, "s1", "genuine");
    assert_eq!(recv(&mut d).await.kind, MessageType::CodeChallenge);
    rig.clock.advance(120_001);
    let m = recv(&mut d).await;
    let r: CodeResultPayload = m.payload_as().unwrap();
    assert_eq!(r.outcome, CodeOutcome::Expired);
    assert!(validate_trace(&stack.server.trace(), 3).unwrap().complete);
    stack.shutdown().await;
}

#[tokio::test]
async fn rejected_requests_leave_session_alone() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(10))
        .await
        .unwrap();
    let mut d = door(&stack).await;
    d.send_payload(
        MessageType::CodeSubmit,
        Some("ghost"),
        &json!({"code": "1234"}),
    )
    .unwrap();
    assert_eq!(error_code_of(&recv(&mut d).await), error_code::REJECTED);
    d.send_payload(MessageType::SessionStart, None, &json!({"kind": "guest"}))
        .unwrap();
    assert_eq!(error_code_of(&recv(&mut d).await), error_code::MALFORMED);
    start(&d, "g1", "guest");
    d.send_payload(
        MessageType::GuestAudio,
        Some("g1"),
        &json!({"audio": "@@not base64"}),
    )
    .unwrap();
    assert_eq!(error_code_of(&recv(&mut d).await), error_code::MALFORMED);
    start(&d, "g2", "guest");
    assert_eq!(error_code_of(&recv(&mut d).await), error_code::REJECTED);
    d.send_payload(
        MessageType::GuestAudio,
        Some("g1"),
        &json!({"audio": b64(&audio("s100"))}),
    )
    .unwrap();
    let m = recv(&mut d).await;
    assert_eq!(
        m.payload_as::<GuestResultPayload>().unwrap().outcome,
        GuestOutcome::Notified
    );
    stack.shutdown().await;
}

#[tokio::test]
async fn guest_and_delivery_traces() {
    let rig = rig();
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), traced(), Some(11))
        .await
        .unwrap();
    let mut d = door(&stack).await;
    start(&d, "g1", "guest");
    for (tag, want) in [
        ("s15", MessageType::GuestMatch),
        ("s55", MessageType::GuestMatch),
    ] {
        d.send_payload(
            MessageType::GuestAudio,
            Some("g1"),
            &json!({"audio": b64(&audio(tag))}),
        )
        .unwrap();
        assert_eq!(recv(&mut d).await.kind, want);
    }
    d.send_payload(
        MessageType::GuestConfirm,
        Some("g1"),
        &json!({"answer": "yes"}),
    )
    .unwrap();
    let m = recv(&mut d).await;
    let p: GuestResultPayload = m.payload_as().unwrap();
    assert_eq!(p.outcome, GuestOutcome::Notified);
    assert_eq!(p.full_name.as_deref(), Some("Anna Lindberg"));

    start(&d, "d1", "delivery");
    d.send_payload(MessageType::Delivery, Some("d1"), &json!({}))
        .unwrap();
    let m = recv(&mut d).await;
    assert_eq!(m.kind, MessageType::Delivery);
    assert_eq!(
        m.payload_as::<DeliveryPayload>().unwrap().status.as_deref(),
        Some("notified")
    );

    let trace = stack.server.trace();
    let sessions = split_by_session(&trace);
    assert_eq!(sessions.len(), 2);
    for (_, msgs) in &sessions {
        assert!(validate_trace(msgs, 3).unwrap().complete);
    }
    let sent = rig.sink.sent();
    assert_eq!(sent.len(), 2);
    assert_eq!(sent[1].notification.target, "#deliveries");
    stack.shutdown().await;
}

#[tokio::test]
async fn silent_peer_is_dropped_after_missed_heartbeats() {
    let rig = rig();
    let cfg = ServerConfig {
        heartbeat_interval: Duration::from_millis(40),
        ..traced()
    };
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), cfg, Some(12))
        .await
        .unwrap();
    let (mut reader, _w) = raw_hello(&stack).await;
    let mut pings = 0;
    let last = loop {
        let m = raw_next(&mut reader).await.unwrap();
        if m.kind != MessageType::Ping {
            break m;
        }
        pings += 1;
    };
    assert_eq!(pings, 3);
    assert_eq!(error_code_of(&last), error_code::HEARTBEAT);
    assert!(raw_next(&mut reader).await.is_none());

    // A client that answers PINGs stays connected.
    let _d = door(&stack).await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    assert!(stack.server.door_connected());
    assert!(stack.server.notifier_connected());
    stack.shutdown().await;
}
