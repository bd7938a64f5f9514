//! Opaque buffer tags used by the scripted providers.
//!
//! A tagged buffer carries its tag in the first [`TAG_LEN`] bytes, right
//! padded with spaces. Scripts refer to buffers by that tag, so mock
//! providers never have to understand image or audio content.

use std::fmt;

pub const TAG_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferTag(Vec<u8>);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TagError {
    #[error("tag must be 1..={TAG_LEN} bytes, got {0}")]
    Length(usize),
    #[error("tag may not end with a space")]
    TrailingSpace,
}

impl BufferTag {
    pub fn new(tag: &str) -> Result<Self, TagError> {
        let bytes = tag.as_bytes();
        if bytes.is_empty() || bytes.len() > TAG_LEN {
            return Err(TagError::Length(bytes.len()));
        }
        if bytes.ends_with(b" ") {
            return Err(TagError::TrailingSpace);
        }
        Ok(Self(bytes.to_vec()))
    }

    /// Reads the tag off the front of a buffer.
    pub fn of_buffer(buf: &[u8]) -> Self {
        let head = &buf[..buf.len().min(TAG_LEN)];
        let end = head.iter().rposition(|&b| b != b' ').map_or(0, |i| i + 1);
        Self(head[..end].to_vec())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for BufferTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

/// Builds a buffer whose first eight bytes carry `tag`, followed by `body`.
pub fn tagged_buffer(tag: &str, body: &[u8]) -> Vec<u8> {
    let mut out = format!("{tag:<width$}", width = TAG_LEN).into_bytes();
    out.truncate(TAG_LEN);
    out.extend_from_slice(body);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_tag_round_trips_through_padding() {
        let buf = tagged_buffer("a1", b"\x00\x01payload");
        assert_eq!(&buf[..8], b"a1      ");
        assert_eq!(BufferTag::of_buffer(&buf), BufferTag::new("a1").unwrap());
    }

    #[test]
    fn full_width_tag() {
        let buf = tagged_buffer("probe007", b"jpeg");
        assert_eq!(BufferTag::of_buffer(&buf).to_string(), "probe007");
    }

    #[test]
    fn rejects_bad_tags() {
        assert_eq!(BufferTag::new(""), Err(TagError::Length(0)));
        assert_eq!(BufferTag::new("123456789"), Err(TagError::Length(9)));
        assert_eq!(BufferTag::new("a "), Err(TagError::TrailingSpace));
    }
}
