//! Client-side XOR cipher for probe images.
//!
//! The door unit XORs the probe bytes with a repeating key before upload and
//! the controller applies the same transform before comparison. This is a
//! repeating-key XOR and is **not** cryptographically strong: a single known
//! plaintext reveals the key. It keeps probes unreadable to a casual observer
//! of the upload path and nothing more. Transport is not otherwise encrypted.

use std::fmt;

/// Shortest accepted key, in bytes.
pub const MIN_KEY_LEN: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("cipher key must be at least {MIN_KEY_LEN} bytes, got {0}")]
    TooShort(usize),
    #[error("cipher key must not be all zero bytes")]
    AllZero,
    #[error("cipher key hex is invalid: {0}")]
    Hex(String),
}

/// Symmetric key shared out of band between door unit and controller.
#[derive(Clone, PartialEq, Eq)]
pub struct CipherKey(Vec<u8>);

impl CipherKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, KeyError> {
        let bytes = bytes.into();
        if bytes.len() < MIN_KEY_LEN {
            return Err(KeyError::TooShort(bytes.len()));
        }
        if bytes.iter().all(|&b| b == 0) {
            return Err(KeyError::AllZero);
        }
        Ok(Self(bytes))
    }

    /// Parses the `cipher_key_hex` config value (even length, at least 32 hex chars).
    pub fn from_hex(s: &str) -> Result<Self, KeyError> {
        let bytes = hex::decode(s.trim()).map_err(|e| KeyError::Hex(e.to_string()))?;
        Self::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for CipherKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CipherKey({} bytes)", self.0.len())
    }
}

/// `out[i] = data[i] ^ key[i % key.len()]`. Encrypts and decrypts.
pub fn xor_transform(data: &[u8], key: &CipherKey) -> Vec<u8> {
    let mut out = data.to_vec();
    xor_in_place(&mut out, key);
    out
}

pub fn xor_in_place(data: &mut [u8], key: &CipherKey) {
    for (b, k) in data.iter_mut().zip(key.0.iter().cycle()) {
        *b ^= k;
    }
}
