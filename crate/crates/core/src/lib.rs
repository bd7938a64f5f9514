//! Office door access control.
//!
//! Two cooperating services: an indoor *controller* that owns the employee
//! directory, face matching decisions, PIN challenges and the lock line, and
//! an outdoor *door unit* that captures images and audio, encrypts probes and
//! drives the kiosk. A third client, the notifier, relays direct and channel
//! messages to a chat webhook.
//!
//! Cloud recognition and transcription are reached through provider traits;
//! this crate ships scripted mock providers, which is also what the scenario
//! replay harness uses to reproduce reports offline.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod clock;
pub mod config;
pub mod crypto;
pub mod directory;
pub mod doorunit;
pub mod flows;
pub mod harness;
pub mod notify;
pub mod protocol;
pub mod recognition;
pub mod tag;
pub mod transcription;

pub use clock::{Clock, SimClock, SystemClock};
pub use crypto::{xor_transform, CipherKey};
pub use directory::{Directory, EmployeeRecord};
