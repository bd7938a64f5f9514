//! Controller server: one door-unit client and one notifier client.

use super::frame::FrameError;
use super::io::{spawn_writer, FrameReader, ReadError};
use super::link::NotifierLink;
use super::message::*;
use crate::flows::{Controller, FlowError, Phase, SessionState, StepOutcome};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::{mpsc, watch, Mutex};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Idle time before a PING is sent.
    pub heartbeat_interval: Duration,
    /// Unanswered PINGs before the connection is dropped.
    pub max_missed_heartbeats: u32,
    /// How often stale door codes are expired.
    pub expiry_sweep: Duration,
    /// Keep a copy of every session message (tests and replay).
    pub record_trace: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            heartbeat_interval: Duration::from_secs(15),
            max_missed_heartbeats: 3,
            expiry_sweep: Duration::from_secs(1),
            record_trace: false,
        }
    }
}

type Outbox = mpsc::UnboundedSender<Message>;

struct Shared {
    controller: Arc<Mutex<Controller>>,
    link: Arc<NotifierLink>,
    door: std::sync::Mutex<Option<(u64, Outbox)>>,
    trace: std::sync::Mutex<Vec<Message>>,
    cfg: ServerConfig,
    next_conn: AtomicU64,
}

impl Shared {
    fn record(&self, m: &Message) {
        if self.cfg.record_trace && m.session.is_some() {
            self.trace.lock().unwrap().push(m.clone());
        }
    }

    fn emit(&self, tx: &Outbox, m: Message) {
        self.record(&m);
        let _ = tx.send(m);
    }

    fn emit_to_door(&self, msgs: Vec<Message>) {
        let door = self.door.lock().unwrap().as_ref().map(|(_, tx)| tx.clone());
        for m in msgs {
            match &door {
                Some(tx) => self.emit(tx, m),
                None => self.record(&m),
            }
        }
    }
}

pub struct ControllerServer {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl ControllerServer {
    /// `link` must be the same sink the controller was built with.
    pub async fn bind(
        addr: impl ToSocketAddrs,
        controller: Controller,
        link: Arc<NotifierLink>,
        cfg: ServerConfig,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                controller: Arc::new(Mutex::new(controller)),
                link,
                door: std::sync::Mutex::new(None),
                trace: std::sync::Mutex::new(Vec::new()),
                cfg,
                next_conn: AtomicU64::new(1),
            }),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn controller(&self) -> Arc<Mutex<Controller>> {
        self.shared.controller.clone()
    }

    /// Serves until the process ends.
    pub async fn run(self) -> std::io::Result<()> {
        let (_keep, stop) = watch::channel(false);
        accept_loop(self.listener, self.shared, stop).await
    }

    pub fn spawn(self) -> std::io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let (stop_tx, stop) = watch::channel(false);
        let shared = self.shared.clone();
        let task = tokio::spawn(accept_loop(self.listener, self.shared, stop));
        Ok(ServerHandle {
            addr,
            shared,
            stop: stop_tx,
            task,
        })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: watch::Sender<bool>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn controller(&self) -> Arc<Mutex<Controller>> {
        self.shared.controller.clone()
    }

    /// Session messages seen so far, in order. Empty unless `record_trace`.
    pub fn trace(&self) -> Vec<Message> {
        self.shared.trace.lock().unwrap().clone()
    }

    pub fn door_connected(&self) -> bool {
        self.shared.door.lock().unwrap().is_some()
    }

    pub fn notifier_connected(&self) -> bool {
        self.shared.link.is_connected()
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        let _ = self.task.await;
    }
}

async fn accept_loop(
    listener: TcpListener,
    shared: Arc<Shared>,
    mut stop: watch::Receiver<bool>,
) -> std::io::Result<()> {
    let sweeper = tokio::spawn(sweep_loop(shared.clone(), stop.clone()));
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    tokio::spawn(handle_connection(shared.clone(), stream, peer, stop.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            _ = stop.changed() => break,
        }
    }
    sweeper.abort();
    Ok(())
}

async fn sweep_loop(shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    let mut tick = tokio::time::interval(shared.cfg.expiry_sweep);
    loop {
        tokio::select! {
            _ = tick.tick() => {}
            _ = stop.changed() => return,
        }
        let mut c = shared.controller.lock().await;
        let sid = c.active().map(|s| s.session_id.clone());
        if let (Some(sid), Some(outcome)) = (sid, c.expire_stale()) {
            drop(c);
            shared.emit_to_door(outcome_messages(&sid, &outcome));
        }
    }
}

async fn handle_connection(
    shared: Arc<Shared>,
    stream: TcpStream,
    peer: SocketAddr,
    stop: watch::Receiver<bool>,
) {
    let (r, w) = stream.into_split();
    let mut reader = FrameReader::new(r);
    let (tx, writer) = spawn_writer(w);
    let conn_id = shared.next_conn.fetch_add(1, Ordering::Relaxed);
    let handshake = shared.cfg.heartbeat_interval * shared.cfg.max_missed_heartbeats.max(1);

    let greeting = match tokio::time::timeout(handshake, reader.next()).await {
        Ok(Ok(Some(m))) if m.kind == MessageType::Hello => Some(m.role),
        Ok(Ok(Some(_))) => {
            let _ = tx.send(Message::error(
                Role::Controller,
                None,
                error_code::MALFORMED,
                "expected HELLO",
            ));
            None
        }
        Ok(Err(e)) => {
            let _ = tx.send(Message::error(
                Role::Controller,
                None,
                error_code::MALFORMED,
                e.to_string(),
            ));
            None
        }
        _ => None,
    };
    let role = greeting.filter(|&role| {
        let attached = match role {
            Role::Door => {
                let mut door = shared.door.lock().unwrap();
                let free = door.is_none();
                if free {
                    *door = Some((conn_id, tx.clone()));
                }
                free
            }
            Role::Notifier => shared.link.attach(conn_id, tx.clone()),
            Role::Controller => false,
        };
        if !attached {
            let _ = tx.send(Message::error(
                Role::Controller,
                None,
                error_code::BUSY,
                format!("cannot accept another {role:?} client"),
            ));
        }
        attached
    });

    if let Some(role) = role {
        tracing::info!(%peer, ?role, "client connected");
        let _ = tx.send(Message::new(
            MessageType::Hello,
            Role::Controller,
            None,
            &HelloPayload {
                client: Some("controller".into()),
            },
        ));
        connection_loop(&shared, role, &mut reader, &tx, stop).await;
        tracing::info!(%peer, ?role, "client disconnected");
        match role {
            Role::Door => {
                {
                    let mut c = shared.controller.lock().await;
                    if let Some(sid) = c.active().map(|s| s.session_id.clone()) {
                        let _ = c.abort_session(&sid, "door unit disconnected");
                    }
                }
                let mut door = shared.door.lock().unwrap();
                if door.as_ref().is_some_and(|(id, _)| *id == conn_id) {
                    *door = None;
                }
            }
            Role::Notifier => shared.link.detach(conn_id),
            Role::Controller => {}
        }
    }
    drop(tx);
    let _ = writer.await;
}

async fn connection_loop<R: tokio::io::AsyncRead + Unpin>(
    shared: &Shared,
    role: Role,
    reader: &mut FrameReader<R>,
    tx: &Outbox,
    mut stop: watch::Receiver<bool>,
) {
    let every = shared.cfg.heartbeat_interval;
    let mut tick = tokio::time::interval_at(tokio::time::Instant::now() + every, every);
    let mut heard = false;
    let mut missed = 0u32;
    loop {
        tokio::select! {
            read = reader.next() => {
                match read {
                    Ok(Some(m)) => {
                        heard = true;
                        if m.role != role {
                            let _ = tx.send(Message::error(Role::Controller, m.session.as_deref(), error_code::ROLE,
                                format!("connection speaks as {role:?}, message claims {:?}", m.role)));
                            continue;
                        }
                        match role {
                            Role::Door => on_door_message(shared, m, tx).await,
                            _ => on_notifier_message(shared, m, tx),
                        }
                    }
                    Ok(None) => return,
                    Err(ReadError::Frame(FrameError::Malformed { reason, .. })) => {
                        heard = true;
                        let _ = tx.send(Message::error(Role::Controller, None, error_code::MALFORMED, reason));
                    }
                    Err(ReadError::Frame(e)) => {
                        let _ = tx.send(Message::error(Role::Controller, None, error_code::FRAME_TOO_LARGE, e.to_string()));
                        return;
                    }
                    Err(ReadError::Io(e)) => {
                        tracing::debug!(error = %e, "read failed");
                        return;
                    }
                }
            }
            _ = tick.tick() => {
                if heard {
                    heard = false;
                    missed = 0;
                } else if missed >= shared.cfg.max_missed_heartbeats {
                    let _ = tx.send(Message::error(Role::Controller, None, error_code::HEARTBEAT, "no heartbeat"));
                    return;
                } else {
                    missed += 1;
                    let _ = tx.send(Message::empty(MessageType::Ping, Role::Controller, None));
                }
            }
            _ = stop.changed() => return,
        }
    }
}

fn on_notifier_message(shared: &Shared, m: Message, tx: &Outbox) {
    match m.kind {
        MessageType::NotifyAck => match m.payload_as::<NotifyAckPayload>() {
            Ok(ack) => shared.link.acknowledge(ack),
            Err(e) => {
                let _ = tx.send(Message::error(
                    Role::Controller,
                    None,
                    error_code::MALFORMED,
                    e.to_string(),
                ));
            }
        },
        MessageType::Ping => {
            let _ = tx.send(Message::empty(MessageType::Pong, Role::Controller, None));
        }
        MessageType::Pong | MessageType::Error => {}
        other => {
            let _ = tx.send(Message::error(
                Role::Controller,
                None,
                error_code::REJECTED,
                format!("{other:?} is not expected from the notifier"),
            ));
        }
    }
}

async fn on_door_message(shared: &Shared, m: Message, tx: &Outbox) {
    match m.kind {
        MessageType::Ping => {
            let _ = tx.send(Message::empty(MessageType::Pong, Role::Controller, None));
        }
        MessageType::Pong => {}
        MessageType::Hello => {
            let _ = tx.send(Message::error(
                Role::Controller,
                None,
                error_code::REJECTED,
                "HELLO already received",
            ));
        }
        MessageType::Error => {
            shared.record(&m);
            let (Some(sid), Ok(p)) = (m.session.as_deref(), m.payload_as::<ErrorPayload>()) else {
                return;
            };
            if error_code::ends_session(&p.code) {
                let mut c = shared.controller.lock().await;
                if c.abort_session(sid, &format!("door unit: {}", p.message))
                    .is_ok()
                {
                    tracing::info!(session = sid, "session aborted by door unit");
                }
            }
        }
        _ => {
            shared.record(&m);
            let sid = m.session.clone();
            let replies = match step(shared, &m).await {
                Ok(Some(outcome)) => outcome_messages(sid.as_deref().unwrap_or_default(), &outcome),
                Ok(None) => Vec::new(),
                Err((code, reason)) => vec![Message::error(
                    Role::Controller,
                    sid.as_deref(),
                    code,
                    reason,
                )],
            };
            for r in replies {
                shared.emit(tx, r);
            }
        }
    }
}

type StepError = (&'static str, String);

fn rejected(e: FlowError) -> StepError {
    (error_code::REJECTED, e.to_string())
}

fn malformed(e: impl ToString) -> StepError {
    (error_code::MALFORMED, e.to_string())
}

async fn step(shared: &Shared, m: &Message) -> Result<Option<StepOutcome>, StepError> {
    let sid = m
        .session
        .as_deref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| malformed("message needs a session id"))?;
    let mut c = shared.controller.lock().await;
    let outcome = match m.kind {
        MessageType::SessionStart => {
            let p: SessionStartPayload = m.payload_as().map_err(malformed)?;
            c.start_session_with_id(p.kind, sid.to_string())
                .map_err(rejected)?;
            return Ok(None);
        }
        MessageType::CaptureUpload => {
            let p: CaptureUploadPayload = m.payload_as().map_err(malformed)?;
            let bytes = BASE64.decode(p.image.as_bytes()).map_err(malformed)?;
            let awaiting = c
                .active()
                .is_some_and(|s| s.session_id == sid && s.state == SessionState::AwaitingCapture);
            if let (true, Some(ms)) = (awaiting, p.capture_ms) {
                c.record_phase(sid, Phase::Capture, ms).map_err(rejected)?;
            }
            c.handle_capture(sid, bytes).await
        }
        MessageType::CodeSubmit => {
            let p: CodeSubmitPayload = m.payload_as().map_err(malformed)?;
            c.submit_code(sid, &p.code).await
        }
        MessageType::GuestAudio => {
            let p: GuestAudioPayload = m.payload_as().map_err(malformed)?;
            let bytes = BASE64.decode(p.audio.as_bytes()).map_err(malformed)?;
            c.handle_utterance(sid, bytes).await
        }
        MessageType::GuestConfirm => {
            let p: GuestConfirmPayload = m.payload_as().map_err(malformed)?;
            c.confirm_guest(sid, p.answer).await
        }
        MessageType::Delivery => c.handle_delivery(sid).await,
        other => {
            return Err((
                error_code::REJECTED,
                format!("{other:?} is not a door request"),
            ))
        }
    };
    outcome.map(Some).map_err(rejected)
}

/// Messages the controller sends the door unit for one step outcome.
pub fn outcome_messages(session: &str, outcome: &StepOutcome) -> Vec<Message> {
    fn ctl<P: serde::Serialize>(session: &str, kind: MessageType, payload: &P) -> Message {
        Message::new(kind, Role::Controller, Some(session), payload)
    }
    let code_result = |ok, outcome, attempts_remaining| CodeResultPayload {
        ok,
        outcome,
        attempts_remaining,
        full_name: None,
        welcome: None,
    };
    match outcome {
        StepOutcome::ChallengeIssued {
            challenge_id,
            attempts_remaining,
        } => vec![ctl(
            session,
            MessageType::CodeChallenge,
            &CodeChallengePayload {
                challenge_id: challenge_id.clone(),
                attempts_remaining: *attempts_remaining,
            },
        )],
        StepOutcome::Denied => vec![ctl(
            session,
            MessageType::AuthResult,
            &AuthResultPayload { accepted: false },
        )],
        StepOutcome::Unlocked {
            full_name,
            welcome,
            window,
            ..
        } => vec![
            ctl(
                session,
                MessageType::CodeResult,
                &CodeResultPayload {
                    full_name: Some(full_name.clone()),
                    welcome: Some(welcome.clone()),
                    ..code_result(true, CodeOutcome::Unlocked, None)
                },
            ),
            ctl(
                session,
                MessageType::UnlockEvent,
                &UnlockEventPayload {
                    start_ms: window.start_ms,
                    end_ms: window.end_ms,
                },
            ),
        ],
        StepOutcome::NewChallenge {
            challenge_id,
            attempts_remaining,
        } => vec![
            ctl(
                session,
                MessageType::CodeResult,
                &code_result(false, CodeOutcome::NewChallenge, Some(*attempts_remaining)),
            ),
            ctl(
                session,
                MessageType::CodeChallenge,
                &CodeChallengePayload {
                    challenge_id: challenge_id.clone(),
                    attempts_remaining: *attempts_remaining,
                },
            ),
        ],
        StepOutcome::LockedOut => vec![ctl(
            session,
            MessageType::CodeResult,
            &code_result(false, CodeOutcome::LockedOut, Some(0)),
        )],
        StepOutcome::Expired => vec![ctl(
            session,
            MessageType::CodeResult,
            &code_result(false, CodeOutcome::Expired, None),
        )],
        StepOutcome::GuestNotified {
            employee_id,
            full_name,
        } => vec![ctl(
            session,
            MessageType::GuestResult,
            &GuestResultPayload {
                outcome: GuestOutcome::Notified,
                employee_id: Some(employee_id.clone()),
                full_name: Some(full_name.clone()),
            },
        )],
        StepOutcome::ConfirmRequested {
            employee_id,
            full_name,
            score,
        } => vec![ctl(
            session,
            MessageType::GuestMatch,
            &GuestMatchPayload {
                band: crate::transcription::Band::Confirm,
                score: *score,
                employee_id: Some(employee_id.clone()),
                full_name: Some(full_name.clone()),
            },
        )],
        StepOutcome::RetryPrompt { score } => vec![ctl(
            session,
            MessageType::GuestMatch,
            &GuestMatchPayload {
                band: crate::transcription::Band::Retry,
                score: *score,
                employee_id: None,
                full_name: None,
            },
        )],
        StepOutcome::BackToUtterance => vec![ctl(
            session,
            MessageType::GuestResult,
            &GuestResultPayload {
                outcome: GuestOutcome::BackToUtterance,
                employee_id: None,
                full_name: None,
            },
        )],
        StepOutcome::DeliveryNotified => vec![ctl(
            session,
            MessageType::Delivery,
            &DeliveryPayload {
                status: Some("notified".into()),
            },
        )],
        StepOutcome::Error { reason } => vec![Message::error(
            Role::Controller,
            Some(session),
            error_code::SESSION,
            reason.clone(),
        )],
    }
}
