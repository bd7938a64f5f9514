//! Framed TCP protocol between the door unit, the controller and the
//! notifier.
//!
//! Each frame is a 4-byte big-endian length and a JSON [`Message`]. Image
//! and audio bytes travel base64 encoded; images are XOR-encrypted by the
//! door unit first. The transport itself is plain TCP with no TLS, and the
//! XOR cipher gives no real confidentiality, so the link between the two
//! nodes must be a trusted network.

mod client;
mod frame;
mod io;
mod link;
mod message;
mod server;
mod trace;

pub use client::{run_notifier, serve_notifications, ClientError, ProtocolClient};
pub use frame::{
    decode_frame, encode_frame, frame_bytes, Decoded, FrameError, HEADER_LEN, MAX_FRAME_LEN,
};
pub use io::{write_message, FrameReader, ReadError};
pub use link::NotifierLink;
pub use message::*;
pub use server::{outcome_messages, ControllerServer, ServerConfig, ServerHandle};
pub use trace::{split_by_session, validate_trace, TraceError, TraceVerdict};
