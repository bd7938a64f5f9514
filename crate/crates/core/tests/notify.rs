mod common;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use common::*;
use officegate::directory::EmployeeRecord;
use officegate::doorunit::DoorLink;
use officegate::flows::{FlowConfig, SessionKind};
use officegate::harness::LoopbackStack;
use officegate::notify::*;
use officegate::protocol::{MessageType, ServerConfig};
use serde_json::{json, Value};
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Duration;

#[derive(Clone, Default)]
struct Stub {
    bodies: Arc<Mutex<Vec<Value>>>,
    status: Arc<Mutex<u16>>,
    with_id: bool,
}

async fn hook(State(s): State<Stub>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = {
        let mut b = s.bodies.lock().unwrap();
        b.push(body);
        b.len()
    };
    let status = StatusCode::from_u16(*s.status.lock().unwrap()).unwrap();
    let reply = if s.with_id {
        json!({"id": format!("stub-{n}")})
    } else {
        json!({})
    };
    (status, Json(reply))
}

async fn stub(with_id: bool) -> (Stub, String) {
    let s = Stub {
        with_id,
        status: Arc::new(Mutex::new(200)),
        ..Stub::default()
    };
    let app = Router::new()
        .route("/hook", post(hook))
        .with_state(s.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}/hook", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (s, url)
}

fn anna() -> EmployeeRecord {
    directory().get("e1").unwrap().clone()
}

#[tokio::test]
async fn webhook_posts_target_and_text() {
    let (s, url) = stub(true).await;
    let sink = WebhookSink::new(url).unwrap();
    let r = send_direct(
        &sink,
        &anna(),
        "Anna Lindberg, you have a guest at the door",
        1,
    )
    .await
    .unwrap();
    assert_eq!(r.id, "stub-1");
    assert_eq!(
        s.bodies.lock().unwrap()[0],
        json!({"target": "@anna", "text": "Anna Lindberg, you have a guest at the door"})
    );
    send_channel(&sink, "#deliveries", "There is a delivery at the door", 2)
        .await
        .unwrap();
    assert_eq!(s.bodies.lock().unwrap()[1]["target"], "#deliveries");
}

#[tokio::test]
async fn webhook_error_status_surfaces() {
    let (s, url) = stub(false).await;
    *s.status.lock().unwrap() = 500;
    let sink = WebhookSink::new(url).unwrap();
    let err = send_channel(&sink, "#deliveries", "There is a delivery at the door", 1)
        .await
        .unwrap_err();
    assert_eq!(err, NotifyError::Status(500));
}

#[tokio::test]
async fn webhook_receipts_are_distinct() {
    let (_s, url) = stub(false).await;
    let sink = WebhookSink::new(url).unwrap();
    let a = send_direct(&sink, &anna(), "one", 1).await.unwrap();
    let b = send_direct(&sink, &anna(), "two", 2).await.unwrap();
    assert_ne!(a.id, b.id);
}

#[tokio::test]
async fn webhook_unreachable_is_transport_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let sink = WebhookSink::new(format!("http://127.0.0.1:{port}/hook")).unwrap();
    let err = send_direct(&sink, &anna(), "x", 1).await.unwrap_err();
    assert!(matches!(err, NotifyError::Transport(_)), "{err:?}");
}

#[derive(Clone)]
struct Buf(Arc<Mutex<Vec<u8>>>);

impl Write for Buf {
    fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(b);
        Ok(b.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn digit_runs(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .collect()
}

// Current-thread runtime, so the thread-local subscriber sees every task.
#[tokio::test]
async fn door_codes_never_reach_logs_or_channels() {
    let buf = Buf(Arc::new(Mutex::new(Vec::new())));
    let w = buf.clone();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::TRACE)
        .without_time()
        .with_ansi(false)
        .with_writer(move || w.clone())
        .finish();
    let _guard = tracing::subscriber::set_default(subscriber);

    let rig = rig();
    let cfg = ServerConfig {
        record_trace: true,
        ..ServerConfig::default()
    };
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), cfg, Some(77))
        .await
        .unwrap();
    let mut door = DoorLink::connect(stack.addr(), key()).await.unwrap();
    let wait = Duration::from_secs(5);
    let mut submitted = Vec::new();

    // One success after a wrong try, then a full lockout.
    for wrong_tries in [1usize, 3] {
        let sid = door.start_session(SessionKind::Employee).unwrap();
        door.upload_probe(&sid, probe("genuine"), None).unwrap();
        for i in 0..=wrong_tries.min(2) {
            assert_eq!(
                door.recv_timeout(wait).await.unwrap().kind,
                MessageType::CodeChallenge
            );
            let real = rig.last_code_for("@anna").unwrap();
            let code = if i < wrong_tries {
                format!("{:04}", (real.parse::<u32>().unwrap() + 5000) % 10_000)
            } else {
                real
            };
            submitted.push(code.clone());
            door.submit_code(&sid, &code).unwrap();
            assert_eq!(
                door.recv_timeout(wait).await.unwrap().kind,
                MessageType::CodeResult
            );
            if i == wrong_tries {
                assert_eq!(
                    door.recv_timeout(wait).await.unwrap().kind,
                    MessageType::UnlockEvent
                );
            }
        }
        rig.clock.advance(5_000);
    }
    let sid = door.start_session(SessionKind::Delivery).unwrap();
    door.request_delivery(&sid).unwrap();
    door.recv_timeout(wait).await.unwrap();
    stack.shutdown().await;

    let sent = rig.sink.sent();
    let mut codes: Vec<String> = sent
        .iter()
        .filter(|r| r.notification.target_kind == TargetKind::Direct)
        .flat_map(|r| {
            digit_runs(&r.notification.text)
                .into_iter()
                .map(str::to_string)
        })
        .collect();
    assert_eq!(codes.len(), 5, "two challenges then three");
    codes.extend(submitted);

    let logs = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
    assert!(
        logs.contains("door unlocked"),
        "subscriber saw nothing:\n{logs}"
    );
    let log_runs = digit_runs(&logs);
    for code in &codes {
        assert!(
            !log_runs.contains(&code.as_str()),
            "code {code} logged:\n{logs}"
        );
        for r in sent
            .iter()
            .filter(|r| r.notification.target_kind == TargetKind::Channel)
        {
            assert!(!r.notification.text.contains(code.as_str()));
        }
    }
}
