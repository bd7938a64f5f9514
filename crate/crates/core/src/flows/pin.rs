use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt;

/// One issued door code.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PinChallenge {
    // Never serialized: session dumps and protocol messages must not carry it.
    #[serde(skip)]
    code: String,
    pub challenge_id: String,
    pub issued_at: u64,
}

impl fmt::Debug for PinChallenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PinChallenge")
            .field("code", &"****")
            .field("challenge_id", &self.challenge_id)
            .field("issued_at", &self.issued_at)
            .finish()
    }
}

impl PinChallenge {
    pub fn code(&self) -> &str {
        &self.code
    }

    /// Constant-time comparison against an entered code.
    pub fn matches(&self, entered: &str) -> bool {
        let a = self.code.as_bytes();
        let b = entered.as_bytes();
        if a.len() != b.len() {
            return false;
        }
        a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
    }
}

/// Draws a uniform four-digit code, keeping leading zeros.
pub fn generate_code<R: RngCore + ?Sized>(rng: &mut R, now_ms: u64) -> PinChallenge {
    // Rejection sampling keeps the draw exactly uniform over 0..10000.
    const ZONE: u32 = u32::MAX - (u32::MAX % 10_000);
    let n = loop {
        let x = rng.next_u32();
        if x < ZONE {
            break x % 10_000;
        }
    };
    PinChallenge {
        code: format!("{n:04}"),
        challenge_id: format!("c-{:016x}", rng.next_u64()),
        issued_at: now_ms,
    }
}

/// True for exactly four ASCII digits.
pub fn is_well_formed(entered: &str) -> bool {
    entered.len() == 4 && entered.bytes().all(|b| b.is_ascii_digit())
}
