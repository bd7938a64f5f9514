use crate::crypto::{xor_transform, CipherKey};
use crate::flows::{ConfirmAnswer, SessionKind};
use crate::protocol::*;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use std::time::Duration;
use tokio::net::ToSocketAddrs;

#[derive(Debug, thiserror::Error)]
pub enum UploadError {
    #[error("refusing to upload an empty buffer")]
    Empty,
    #[error(transparent)]
    Client(#[from] ClientError),
}

pub fn new_session_id() -> String {
    format!("d-{}", uuid::Uuid::new_v4().simple())
}

/// CAPTURE_UPLOAD carrying `base64(xor(image, key))`. Both the plaintext
/// and the ciphertext buffer are zeroed before returning.
pub fn capture_upload_message(
    session: &str,
    mut image: Vec<u8>,
    key: &CipherKey,
    capture_ms: Option<u64>,
) -> Result<Message, UploadError> {
    if image.is_empty() {
        return Err(UploadError::Empty);
    }
    let mut cipher = xor_transform(&image, key);
    image.fill(0);
    let encoded = BASE64.encode(&cipher);
    cipher.fill(0);
    Ok(Message::new(
        MessageType::CaptureUpload,
        Role::Door,
        Some(session),
        &CaptureUploadPayload {
            image: encoded,
            capture_ms,
        },
    ))
}

/// GUEST_AUDIO carrying the recording; the buffer is zeroed.
pub fn guest_audio_message(session: &str, mut audio: Vec<u8>) -> Result<Message, UploadError> {
    if audio.is_empty() {
        return Err(UploadError::Empty);
    }
    let encoded = BASE64.encode(&audio);
    audio.fill(0);
    Ok(Message::new(
        MessageType::GuestAudio,
        Role::Door,
        Some(session),
        &GuestAudioPayload { audio: encoded },
    ))
}

pub fn door_message<P: serde::Serialize>(kind: MessageType, session: &str, payload: &P) -> Message {
    Message::new(kind, Role::Door, Some(session), payload)
}

/// The door unit's connection to the controller, one method per request.
pub struct DoorLink {
    client: ProtocolClient,
    key: CipherKey,
}

impl DoorLink {
    pub async fn connect(addr: impl ToSocketAddrs, key: CipherKey) -> Result<Self, ClientError> {
        let client = ProtocolClient::connect(addr, Role::Door, "doorunit").await?;
        Ok(Self { client, key })
    }

    pub fn start_session(&self, kind: SessionKind) -> Result<String, ClientError> {
        let id = new_session_id();
        self.client.send(door_message(
            MessageType::SessionStart,
            &id,
            &SessionStartPayload { kind },
        ))?;
        Ok(id)
    }

    pub fn upload_probe(
        &self,
        session: &str,
        image: Vec<u8>,
        capture_ms: Option<u64>,
    ) -> Result<(), UploadError> {
        let m = capture_upload_message(session, image, &self.key, capture_ms)?;
        Ok(self.client.send(m)?)
    }

    pub fn submit_code(&self, session: &str, code: &str) -> Result<(), ClientError> {
        self.client.send(door_message(
            MessageType::CodeSubmit,
            session,
            &CodeSubmitPayload {
                code: code.to_string(),
            },
        ))
    }

    pub fn send_audio(&self, session: &str, audio: Vec<u8>) -> Result<(), UploadError> {
        Ok(self.client.send(guest_audio_message(session, audio)?)?)
    }

    pub fn confirm(&self, session: &str, answer: ConfirmAnswer) -> Result<(), ClientError> {
        self.client.send(door_message(
            MessageType::GuestConfirm,
            session,
            &GuestConfirmPayload { answer },
        ))
    }

    pub fn request_delivery(&self, session: &str) -> Result<(), ClientError> {
        self.client.send(door_message(
            MessageType::Delivery,
            session,
            &DeliveryPayload::default(),
        ))
    }

    pub fn abort(&self, session: &str, reason: &str) -> Result<(), ClientError> {
        self.client.send(Message::error(
            Role::Door,
            Some(session),
            error_code::ABORTED,
            reason,
        ))
    }

    pub async fn recv(&mut self) -> Option<Message> {
        self.client.recv().await
    }

    pub async fn recv_timeout(&mut self, limit: Duration) -> Result<Message, ClientError> {
        self.client.recv_timeout(limit).await
    }
}
