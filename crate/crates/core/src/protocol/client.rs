use super::io::{spawn_writer, FrameReader, ReadError};
use super::message::*;
use crate::notify::{Notification, NotificationSink};
use std::sync::Arc;
use std::time::Duration;
use tokio::net::{TcpStream, ToSocketAddrs};
use tokio::sync::mpsc;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("handshake refused: {0}")]
    Handshake(String),
    #[error("connection closed")]
    Closed,
    #[error("timed out waiting for the controller")]
    Timeout,
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// A door-unit or notifier connection to the controller. PINGs are
/// answered in the background.
pub struct ProtocolClient {
    role: Role,
    outbox: mpsc::UnboundedSender<Message>,
    inbox: mpsc::UnboundedReceiver<Message>,
    reader: tokio::task::JoinHandle<()>,
}

impl ProtocolClient {
    pub async fn connect(
        addr: impl ToSocketAddrs,
        role: Role,
        name: &str,
    ) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).await?;
        let _ = stream.set_nodelay(true);
        let (r, w) = stream.into_split();
        let (outbox, _writer) = spawn_writer(w);
        let (inbox_tx, mut inbox) = mpsc::unbounded_channel();
        let pong = outbox.clone();
        let reader = tokio::spawn(async move {
            let mut reader = FrameReader::new(r);
            loop {
                match reader.next().await {
                    Ok(Some(m)) if m.kind == MessageType::Ping => {
                        let _ = pong.send(Message::empty(MessageType::Pong, role, None));
                    }
                    Ok(Some(m)) => {
                        if inbox_tx.send(m).is_err() {
                            return;
                        }
                    }
                    Err(ReadError::Frame(e)) if !e.is_fatal() => {
                        tracing::warn!(error = %e, "skipping malformed frame from controller");
                    }
                    Ok(None) | Err(_) => return,
                }
            }
        });
        let hello = Message::new(
            MessageType::Hello,
            role,
            None,
            &HelloPayload {
                client: Some(name.to_string()),
            },
        );
        outbox.send(hello).map_err(|_| ClientError::Closed)?;
        match inbox.recv().await {
            Some(m) if m.kind == MessageType::Hello => {}
            Some(m) if m.kind == MessageType::Error => {
                let reason = m
                    .payload_as::<ErrorPayload>()
                    .map(|p| format!("{}: {}", p.code, p.message))
                    .unwrap_or_default();
                return Err(ClientError::Handshake(reason));
            }
            Some(m) => return Err(ClientError::Handshake(format!("unexpected {:?}", m.kind))),
            None => return Err(ClientError::Closed),
        }
        Ok(Self {
            role,
            outbox,
            inbox,
            reader,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn send(&self, message: Message) -> Result<(), ClientError> {
        if message.role != self.role {
            return Err(SchemaError::Direction {
                role: message.role,
                kind: message.kind,
            }
            .into());
        }
        message.validate()?;
        self.outbox.send(message).map_err(|_| ClientError::Closed)
    }

    pub fn send_payload<P: serde::Serialize>(
        &self,
        kind: MessageType,
        session: Option<&str>,
        payload: &P,
    ) -> Result<(), ClientError> {
        self.send(Message::new(kind, self.role, session, payload))
    }

    /// `None` once the controller has closed the connection.
    pub async fn recv(&mut self) -> Option<Message> {
        self.inbox.recv().await
    }

    pub async fn recv_timeout(&mut self, limit: Duration) -> Result<Message, ClientError> {
        match tokio::time::timeout(limit, self.inbox.recv()).await {
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(ClientError::Closed),
            Err(_) => Err(ClientError::Timeout),
        }
    }
}

impl Drop for ProtocolClient {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

/// Notifier loop: forwards every NOTIFY to `sink` and acknowledges it.
/// Returns when the controller closes the connection.
pub async fn serve_notifications(
    mut client: ProtocolClient,
    sink: Arc<dyn NotificationSink>,
) -> Result<(), ClientError> {
    while let Some(m) = client.recv().await {
        match m.kind {
            MessageType::Notify => {
                let p: NotifyPayload = match m.payload_as() {
                    Ok(p) => p,
                    Err(e) => {
                        client.send(Message::error(
                            Role::Notifier,
                            None,
                            error_code::MALFORMED,
                            e.to_string(),
                        ))?;
                        continue;
                    }
                };
                let n = Notification {
                    target_kind: p.target_kind,
                    target: p.target,
                    text: p.text,
                    dispatched_at: p.dispatched_at,
                };
                let ack = match sink.dispatch(&n).await {
                    Ok(receipt) => NotifyAckPayload {
                        id: p.id,
                        ok: true,
                        receipt_id: Some(receipt.id),
                        error: None,
                    },
                    Err(e) => NotifyAckPayload {
                        id: p.id,
                        ok: false,
                        receipt_id: None,
                        error: Some(e.to_string()),
                    },
                };
                client.send_payload(MessageType::NotifyAck, None, &ack)?;
            }
            MessageType::Error => {
                if let Ok(p) = m.payload_as::<ErrorPayload>() {
                    tracing::warn!(code = %p.code, message = %p.message, "controller reported an error");
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Connects as the notifier and serves until the controller goes away.
pub async fn run_notifier(
    addr: impl ToSocketAddrs,
    sink: Arc<dyn NotificationSink>,
) -> Result<(), ClientError> {
    let client = ProtocolClient::connect(addr, Role::Notifier, "notifier").await?;
    serve_notifications(client, sink).await
}
