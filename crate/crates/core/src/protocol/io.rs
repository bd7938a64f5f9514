use super::frame::{decode_frame, encode_frame, Decoded, FrameError};
use super::message::Message;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};
use tokio::sync::mpsc;

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Buffers a byte stream and yields whole messages.
///
/// `next` is cancel safe: bytes already read stay buffered.
pub struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: AsyncRead + Unpin> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            buf: Vec::new(),
        }
    }

    /// `Ok(None)` on a clean end of stream. A `Malformed` error has already
    /// skipped the bad frame, so reading can continue.
    pub async fn next(&mut self) -> Result<Option<Message>, ReadError> {
        let mut chunk = [0u8; 8192];
        loop {
            match decode_frame(&self.buf) {
                Ok(Decoded::Frame { message, consumed }) => {
                    self.buf.drain(..consumed);
                    return Ok(Some(message));
                }
                Err(FrameError::Malformed { consumed, reason }) => {
                    self.buf.drain(..consumed);
                    return Err(FrameError::Malformed { consumed, reason }.into());
                }
                Err(e) => return Err(e.into()),
                Ok(Decoded::Incomplete) => {}
            }
            let n = self.inner.read(&mut chunk).await?;
            if n == 0 {
                if self.buf.is_empty() {
                    return Ok(None);
                }
                return Err(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "stream ended mid-frame",
                )
                .into());
            }
            self.buf.extend_from_slice(&chunk[..n]);
        }
    }
}

pub async fn write_message<W: AsyncWrite + Unpin>(
    w: &mut W,
    message: &Message,
) -> std::io::Result<()> {
    let bytes = encode_frame(message)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    w.write_all(&bytes).await
}

/// Spawns a task that writes queued messages until the queue closes.
pub(crate) fn spawn_writer<W>(
    mut w: W,
) -> (mpsc::UnboundedSender<Message>, tokio::task::JoinHandle<()>)
where
    W: AsyncWrite + Unpin + Send + 'static,
{
    let (tx, mut rx) = mpsc::unbounded_channel::<Message>();
    let task = tokio::spawn(async move {
        while let Some(m) = rx.recv().await {
            if let Err(e) = write_message(&mut w, &m).await {
                tracing::debug!(error = %e, "write failed");
                break;
            }
        }
        let _ = w.shutdown().await;
    });
    (tx, task)
}
