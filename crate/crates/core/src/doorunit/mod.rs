//! The outdoor door unit: capture devices, client-side encryption, the
//! controller connection and the kiosk gateway.
//!
//! The door unit holds no directory data and no thresholds. It captures
//! only when the kiosk user presses a button, encrypts the picture before
//! it leaves the device, and relays controller decisions to the screen.

mod bridge;
mod device;
mod gateway;
mod kiosk;
mod link;

pub use bridge::{BridgeOutput, EventLog, KioskBridge, LogEntry, Stage, OUT_OF_SERVICE};
pub use device::{CaptureDevice, Consent, DeviceError, DeviceKind, Source};
pub use gateway::{spawn_door_unit, DoorUnitConfig, DoorUnitHandle};
pub use kiosk::{Direction, FromUi, KioskError, KioskEvent, ToUi, FROM_UI_NAMES, TO_UI_NAMES};
pub use link::{
    capture_upload_message, door_message, guest_audio_message, new_session_id, DoorLink,
    UploadError,
};
