use super::message::{Message, MessageType, NotifyAckPayload, NotifyPayload, Role};
use crate::notify::{DeliveryReceipt, Notification, NotificationSink, NotifyError};
use async_trait::async_trait;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use tokio::sync::{mpsc, oneshot};

#[derive(Default)]
struct LinkState {
    conn: Option<(u64, mpsc::UnboundedSender<Message>)>,
    pending: HashMap<String, oneshot::Sender<NotifyAckPayload>>,
}

/// Controller-side sink that forwards notifications to the connected
/// notifier client as NOTIFY and waits for its NOTIFY_ACK.
pub struct NotifierLink {
    state: Mutex<LinkState>,
    next_id: AtomicU64,
    ack_timeout: Duration,
}

impl NotifierLink {
    pub fn new(ack_timeout: Duration) -> Self {
        Self {
            state: Mutex::new(LinkState::default()),
            next_id: AtomicU64::new(1),
            ack_timeout,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.state.lock().unwrap().conn.is_some()
    }

    /// Returns false if a notifier is already attached.
    pub(crate) fn attach(&self, conn_id: u64, tx: mpsc::UnboundedSender<Message>) -> bool {
        let mut st = self.state.lock().unwrap();
        if st.conn.is_some() {
            return false;
        }
        st.conn = Some((conn_id, tx));
        true
    }

    /// Drops the connection; sends in flight fail with `Disconnected`.
    pub(crate) fn detach(&self, conn_id: u64) {
        let mut st = self.state.lock().unwrap();
        if st.conn.as_ref().is_some_and(|(id, _)| *id == conn_id) {
            st.conn = None;
            st.pending.clear();
        }
    }

    pub(crate) fn acknowledge(&self, ack: NotifyAckPayload) {
        let waiter = self.state.lock().unwrap().pending.remove(&ack.id);
        match waiter {
            Some(w) => {
                let _ = w.send(ack);
            }
            None => tracing::debug!(id = %ack.id, "ack for unknown notification"),
        }
    }
}

#[async_trait]
impl NotificationSink for NotifierLink {
    async fn dispatch(&self, n: &Notification) -> Result<DeliveryReceipt, NotifyError> {
        let id = format!("n-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let rx = {
            let mut st = self.state.lock().unwrap();
            let Some((_, tx)) = &st.conn else {
                return Err(NotifyError::Disconnected);
            };
            let msg = Message::new(
                MessageType::Notify,
                Role::Controller,
                None,
                &NotifyPayload {
                    id: id.clone(),
                    target_kind: n.target_kind,
                    target: n.target.clone(),
                    text: n.text.clone(),
                    dispatched_at: n.dispatched_at,
                },
            );
            if tx.send(msg).is_err() {
                return Err(NotifyError::Disconnected);
            }
            let (wtx, wrx) = oneshot::channel();
            st.pending.insert(id.clone(), wtx);
            wrx
        };
        match tokio::time::timeout(self.ack_timeout, rx).await {
            Ok(Ok(ack)) if ack.ok => Ok(DeliveryReceipt {
                id: ack.receipt_id.unwrap_or(id),
            }),
            Ok(Ok(ack)) => Err(NotifyError::Transport(
                ack.error.unwrap_or_else(|| "notifier refused".into()),
            )),
            Ok(Err(_)) => Err(NotifyError::Disconnected),
            Err(_) => {
                self.state.lock().unwrap().pending.remove(&id);
                Err(NotifyError::Timeout)
            }
        }
    }
}
