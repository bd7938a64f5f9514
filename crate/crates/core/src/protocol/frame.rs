//! Length-prefixed framing: a 4-byte big-endian payload length followed by
//! that many bytes of UTF-8 JSON.

use super::message::{Message, SchemaError};

pub const HEADER_LEN: usize = 4;
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    /// Not enough bytes for a whole frame; nothing was consumed.
    Incomplete,
    Frame {
        message: Message,
        consumed: usize,
    },
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum FrameError {
    /// Fatal: the stream cannot be resynchronized.
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_LEN} byte limit")]
    TooLarge(usize),
    /// The frame was well delimited but its content is not a valid message.
    /// `consumed` bytes can be skipped to continue with the next frame.
    #[error("malformed frame: {reason}")]
    Malformed { consumed: usize, reason: String },
}

impl FrameError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, FrameError::TooLarge(_))
    }
}

/// Frames raw payload bytes.
pub fn frame_bytes(payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn encode_frame(message: &Message) -> Result<Vec<u8>, FrameError> {
    message.validate().map_err(|e| FrameError::Malformed {
        consumed: 0,
        reason: e.to_string(),
    })?;
    let payload = serde_json::to_vec(message).map_err(|e| FrameError::Malformed {
        consumed: 0,
        reason: e.to_string(),
    })?;
    frame_bytes(&payload)
}

/// Decodes the first frame in `buf`.
pub fn decode_frame(buf: &[u8]) -> Result<Decoded, FrameError> {
    let Some(header) = buf.get(..HEADER_LEN) else {
        return Ok(Decoded::Incomplete);
    };
    let len = u32::from_be_bytes(header.try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(len));
    }
    let consumed = HEADER_LEN + len;
    let Some(body) = buf.get(HEADER_LEN..consumed) else {
        return Ok(Decoded::Incomplete);
    };
    let malformed = |reason: String| FrameError::Malformed { consumed, reason };
    let text = std::str::from_utf8(body).map_err(|e| malformed(e.to_string()))?;
    let message: Message = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    message
        .validate()
        .map_err(|e: SchemaError| malformed(e.to_string()))?;
    Ok(Decoded::Frame { message, consumed })
}
