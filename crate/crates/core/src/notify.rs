//! Chat notifications: direct messages to employees and channel messages.
//!
//! The outbound wire shape is a JSON `POST {"target": ..., "text": ...}` to a
//! configured webhook, which a thin bridge can forward to the chat service.
//! There is no retry: a failed send surfaces as an error and the calling
//! flow fails closed.

use crate::directory::EmployeeRecord;
use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Direct,
    Channel,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Notification {
    pub target_kind: TargetKind,
    pub target: String,
    pub text: String,
    pub dispatched_at: u64,
}

// Direct texts can carry door codes, so Debug never prints them.
impl fmt::Debug for Notification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Notification")
            .field("target_kind", &self.target_kind)
            .field("target", &self.target)
            .field("text", &format_args!("<{} bytes>", self.text.len()))
            .field("dispatched_at", &self.dispatched_at)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReceipt {
    pub id: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum NotifyError {
    #[error("employee {0:?} has no notification handle")]
    MissingHandle(String),
    #[error("notification text is empty")]
    EmptyText,
    #[error("no channel configured")]
    NoChannel,
    #[error("notification transport: {0}")]
    Transport(String),
    #[error("webhook answered HTTP {0}")]
    Status(u16),
    #[error("notifier is not connected")]
    Disconnected,
    #[error("notifier did not acknowledge in time")]
    Timeout,
}

#[async_trait]
pub trait NotificationSink: Send + Sync {
    async fn dispatch(&self, notification: &Notification) -> Result<DeliveryReceipt, NotifyError>;
}

pub async fn send_direct(
    sink: &dyn NotificationSink,
    employee: &EmployeeRecord,
    text: &str,
    now_ms: u64,
) -> Result<DeliveryReceipt, NotifyError> {
    let handle = employee
        .notify_handle
        .as_deref()
        .ok_or_else(|| NotifyError::MissingHandle(employee.id.clone()))?;
    if text.is_empty() {
        return Err(NotifyError::EmptyText);
    }
    sink.dispatch(&Notification {
        target_kind: TargetKind::Direct,
        target: handle.to_string(),
        text: text.to_string(),
        dispatched_at: now_ms,
    })
    .await
}

pub async fn send_channel(
    sink: &dyn NotificationSink,
    channel: &str,
    text: &str,
    now_ms: u64,
) -> Result<DeliveryReceipt, NotifyError> {
    if channel.trim().is_empty() {
        return Err(NotifyError::NoChannel);
    }
    if text.is_empty() {
        return Err(NotifyError::EmptyText);
    }
    sink.dispatch(&Notification {
        target_kind: TargetKind::Channel,
        target: channel.to_string(),
        text: text.to_string(),
        dispatched_at: now_ms,
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordedNotification {
    pub receipt_id: String,
    #[serde(flatten)]
    pub notification: Notification,
}

/// In-memory sink that records every dispatch. Can be switched off to
/// simulate an outage.
#[derive(Debug, Default)]
pub struct RecordingSink {
    sent: Mutex<Vec<RecordedNotification>>,
    next_id: AtomicU64,
    down: AtomicBool,
}

impl RecordingSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }

    pub fn sent(&self) -> Vec<RecordedNotification> {
        self.sent.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.sent.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn direct_to(&self, target: &str) -> Vec<Notification> {
        self.sent
            .lock()
            .unwrap()
            .iter()
            .filter(|r| {
                r.notification.target_kind == TargetKind::Direct && r.notification.target == target
            })
            .map(|r| r.notification.clone())
            .collect()
    }

    /// Writes one JSON document per recorded notification.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in self.sent.lock().unwrap().iter() {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[async_trait]
impl NotificationSink for RecordingSink {
    async fn dispatch(&self, notification: &Notification) -> Result<DeliveryReceipt, NotifyError> {
        if self.down.load(Ordering::SeqCst) {
            return Err(NotifyError::Transport("recording sink is down".into()));
        }
        let id = format!("mock-{}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1);
        self.sent.lock().unwrap().push(RecordedNotification {
            receipt_id: id.clone(),
            notification: notification.clone(),
        });
        Ok(DeliveryReceipt { id })
    }
}

/// Appends each notification as one JSON line, in the same format as
/// [`RecordingSink::dump_jsonl`]. Meant for offline runs of the notifier.
pub struct JsonlSink {
    out: Mutex<Box<dyn Write + Send>>,
    next_id: AtomicU64,
}

impl JsonlSink {
    pub fn new(out: impl Write + Send + 'static) -> Self {
        Self {
            out: Mutex::new(Box::new(out)),
            next_id: AtomicU64::new(0),
        }
    }
}

#[async_trait]
impl NotificationSink for JsonlSink {
    async fn dispatch(&self, notification: &Notification) -> Result<DeliveryReceipt, NotifyError> {
        let id = format!("line-{}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1);
        let record = RecordedNotification {
            receipt_id: id.clone(),
            notification: notification.clone(),
        };
        let mut line =
            serde_json::to_vec(&record).map_err(|e| NotifyError::Transport(e.to_string()))?;
        line.push(b'\n');
        let mut out = self.out.lock().unwrap();
        out.write_all(&line)
            .and_then(|_| out.flush())
            .map_err(|e| NotifyError::Transport(e.to_string()))?;
        Ok(DeliveryReceipt { id })
    }
}

#[derive(Serialize)]
struct WebhookBody<'a> {
    target: &'a str,
    text: &'a str,
}

/// Posts notifications to an HTTP webhook.
#[derive(Debug, Clone)]
pub struct WebhookSink {
    client: reqwest::Client,
    url: String,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>) -> Result<Self, NotifyError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| NotifyError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
        })
    }
}

#[async_trait]
impl NotificationSink for WebhookSink {
    async fn dispatch(&self, notification: &Notification) -> Result<DeliveryReceipt, NotifyError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&WebhookBody {
                target: &notification.target,
                text: &notification.text,
            })
            .send()
            .await
            .map_err(|e| NotifyError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(NotifyError::Status(status.as_u16()));
        }
        // A bridge may return {"id": "..."}; otherwise the receipt id is local.
        let body = resp.bytes().await.unwrap_or_default();
        let id = serde_json::from_slice::<serde_json::Value>(&body)
            .ok()
            .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string))
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        Ok(DeliveryReceipt { id })
    }
}
