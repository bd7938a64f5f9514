//! HTTP + WebSocket front end and the single event loop that owns the
//! kiosk bridge and the controller connection.

use super::bridge::{BridgeOutput, EventLog, KioskBridge};
use super::kiosk::{FromUi, ToUi};
use crate::protocol::{ProtocolClient, Role};
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{mpsc, watch};

#[derive(Debug, Clone)]
pub struct DoorUnitConfig {
    pub controller_addr: String,
    pub http_addr: SocketAddr,
    /// Kiosk UI build to serve at `/`. A placeholder page is served if unset.
    pub static_dir: Option<PathBuf>,
    /// How long result screens stay up before the main menu returns.
    pub result_hold: Duration,
    pub reconnect_min: Duration,
    pub reconnect_max: Duration,
}

impl DoorUnitConfig {
    pub fn new(controller_addr: impl Into<String>, http_addr: SocketAddr) -> Self {
        Self {
            controller_addr: controller_addr.into(),
            http_addr,
            static_dir: None,
            result_hold: Duration::from_secs(5),
            reconnect_min: Duration::from_millis(250),
            reconnect_max: Duration::from_secs(10),
        }
    }
}

enum Input {
    UiConnected(u64, mpsc::UnboundedSender<ToUi>),
    UiEvent(u64, Result<FromUi, String>),
    UiDisconnected(u64),
    HoldExpired(u64),
}

#[derive(Clone)]
struct AppState {
    inputs: mpsc::UnboundedSender<Input>,
    ui_busy: Arc<AtomicBool>,
    next_ui: Arc<AtomicU64>,
}

pub struct DoorUnitHandle {
    http_addr: SocketAddr,
    log: EventLog,
    online: watch::Receiver<bool>,
    stop: watch::Sender<bool>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl DoorUnitHandle {
    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn log(&self) -> EventLog {
        self.log.clone()
    }

    pub fn is_online(&self) -> bool {
        *self.online.borrow()
    }

    /// Waits until the controller connection is up (or down).
    pub async fn wait_online(&mut self, online: bool, limit: Duration) -> bool {
        tokio::time::timeout(limit, self.online.wait_for(|v| *v == online))
            .await
            .is_ok_and(|r| r.is_ok())
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

const PLACEHOLDER: &str = "<!doctype html><title>door unit</title>\
<p>No kiosk UI is installed. Connect a kiosk client to the <code>/kiosk</code> WebSocket.</p>";

pub async fn spawn_door_unit(
    cfg: DoorUnitConfig,
    bridge: KioskBridge,
) -> std::io::Result<DoorUnitHandle> {
    let (inputs, inputs_rx) = mpsc::unbounded_channel();
    let (stop, stop_rx) = watch::channel(false);
    let (online_tx, online) = watch::channel(false);
    let state = AppState {
        inputs: inputs.clone(),
        ui_busy: Arc::new(AtomicBool::new(false)),
        next_ui: Arc::new(AtomicU64::new(1)),
    };
    let mut app = Router::new().route("/kiosk", get(kiosk_ws));
    app = match &cfg.static_dir {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    let app = app.with_state(state);

    let listener = tokio::net::TcpListener::bind(cfg.http_addr).await?;
    let http_addr = listener.local_addr()?;
    let mut http_stop = stop_rx.clone();
    let http = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async move {
            let _ = http_stop.changed().await;
        });
        if let Err(e) = serve.await {
            tracing::error!(error = %e, "kiosk http server failed");
        }
    });
    let log = bridge.log();
    let core = tokio::spawn(event_loop(
        cfg, bridge, inputs, inputs_rx, online_tx, stop_rx,
    ));
    tracing::info!(%http_addr, "kiosk gateway listening");
    Ok(DoorUnitHandle {
        http_addr,
        log,
        online,
        stop,
        tasks: vec![http, core],
    })
}

async fn kiosk_ws(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    if state
        .ui_busy
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
    {
        return (StatusCode::CONFLICT, "a kiosk UI is already connected").into_response();
    }
    ws.on_upgrade(move |socket| ui_connection(socket, state))
}

async fn ui_connection(mut socket: WebSocket, state: AppState) {
    let id = state.next_ui.fetch_add(1, Ordering::Relaxed);
    let (tx, mut rx) = mpsc::unbounded_channel();
    let _ = state.inputs.send(Input::UiConnected(id, tx));
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(WsMessage::Text(text))) => {
                    let ev = FromUi::parse(text.as_str()).map_err(|e| e.to_string());
                    let _ = state.inputs.send(Input::UiEvent(id, ev));
                }
                Some(Ok(WsMessage::Binary(_))) => {
                    let _ = state.inputs.send(Input::UiEvent(id, Err("binary frames are not kiosk events".into())));
                }
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            outgoing = rx.recv() => match outgoing {
                Some(ev) => {
                    let text = serde_json::to_string(&ev.to_event()).expect("kiosk events serialize");
                    if socket.send(WsMessage::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
    let _ = state.inputs.send(Input::UiDisconnected(id));
    state.ui_busy.store(false, Ordering::SeqCst);
}

async fn next_from(client: &mut Option<ProtocolClient>) -> Option<crate::protocol::Message> {
    match client {
        Some(c) => c.recv().await,
        None => std::future::pending().await,
    }
}

async fn event_loop(
    cfg: DoorUnitConfig,
    mut bridge: KioskBridge,
    inputs: mpsc::UnboundedSender<Input>,
    mut rx: mpsc::UnboundedReceiver<Input>,
    online: watch::Sender<bool>,
    mut stop: watch::Receiver<bool>,
) {
    let mut client: Option<ProtocolClient> = None;
    let mut ui: Option<(u64, mpsc::UnboundedSender<ToUi>)> = None;
    let mut backoff = cfg.reconnect_min;
    let mut retry_at = tokio::time::Instant::now();

    loop {
        let out = tokio::select! {
            _ = stop.changed() => return,
            _ = tokio::time::sleep_until(retry_at), if client.is_none() => {
                let attempt = tokio::time::timeout(
                    Duration::from_secs(2),
                    ProtocolClient::connect(cfg.controller_addr.as_str(), Role::Door, "doorunit"),
                ).await;
                match attempt {
                    Ok(Ok(c)) => {
                        tracing::info!(addr = %cfg.controller_addr, "connected to controller");
                        client = Some(c);
                        backoff = cfg.reconnect_min;
                        let _ = online.send(true);
                        bridge.set_online(true)
                    }
                    failed => {
                        let reason = match failed {
                            Ok(Err(e)) => e.to_string(),
                            _ => "timed out".into(),
                        };
                        tracing::warn!(addr = %cfg.controller_addr, %reason, retry_in = ?backoff, "controller unreachable");
                        retry_at = tokio::time::Instant::now() + backoff;
                        backoff = (backoff * 2).min(cfg.reconnect_max);
                        BridgeOutput::default()
                    }
                }
            }
            msg = next_from(&mut client) => match msg {
                Some(m) => bridge.on_controller(&m),
                None => {
                    tracing::warn!("controller connection lost");
                    client = None;
                    retry_at = tokio::time::Instant::now() + backoff;
                    let _ = online.send(false);
                    bridge.set_online(false)
                }
            },
            input = rx.recv() => match input {
                None => return,
                Some(Input::UiConnected(id, tx)) => {
                    ui = Some((id, tx));
                    bridge.ui_connected()
                }
                Some(Input::UiEvent(id, ev)) if ui.as_ref().is_some_and(|(u, _)| *u == id) => match ev {
                    Ok(ev) => bridge.on_ui(ev),
                    Err(reason) => bridge.ui_invalid(&reason),
                },
                Some(Input::UiEvent(..)) => BridgeOutput::default(),
                Some(Input::UiDisconnected(id)) => {
                    if ui.as_ref().is_some_and(|(u, _)| *u == id) {
                        ui = None;
                        bridge.ui_disconnected()
                    } else {
                        BridgeOutput::default()
                    }
                }
                Some(Input::HoldExpired(token)) => bridge.hold_expired(token),
            },
        };

        let mut lost = false;
        for m in out.to_controller {
            if let Some(c) = &client {
                if c.send(m).is_err() {
                    lost = true;
                }
            }
        }
        let mut screens = out.to_ui;
        if lost {
            client = None;
            retry_at = tokio::time::Instant::now() + backoff;
            let _ = online.send(false);
            screens.extend(bridge.set_online(false).to_ui);
        }
        if let Some((_, tx)) = &ui {
            for s in screens {
                let _ = tx.send(s);
            }
        }
        if let Some(token) = out.hold {
            let inputs = inputs.clone();
            let hold = cfg.result_hold;
            tokio::spawn(async move {
                tokio::time::sleep(hold).await;
                let _ = inputs.send(Input::HoldExpired(token));
            });
        }
    }
}
