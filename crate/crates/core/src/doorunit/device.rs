use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    Camera,
    Microphone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// Real hardware. No driver is bundled, so capture always fails.
    Live,
    /// Files returned in order, wrapping around.
    FileBacked(Vec<PathBuf>),
}

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("{0:?} is unavailable")]
    Unavailable(DeviceKind),
    #[error("{0:?} has no source files")]
    NoSource(DeviceKind),
    #[error("{kind:?} consent came from {trigger:?}")]
    WrongTrigger { kind: DeviceKind, trigger: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Proof that the kiosk user asked for a capture. Only obtainable from a
/// UI trigger event, see [`super::FromUi::consent`].
#[derive(Debug)]
pub struct Consent {
    pub(super) trigger: &'static str,
}

impl Consent {
    pub fn trigger(&self) -> &'static str {
        self.trigger
    }
}

pub struct CaptureDevice {
    kind: DeviceKind,
    source: Source,
    cursor: AtomicUsize,
}

impl CaptureDevice {
    pub fn new(kind: DeviceKind, source: Source) -> Self {
        Self {
            kind,
            source,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn file_backed(kind: DeviceKind, paths: Vec<PathBuf>) -> Self {
        Self::new(kind, Source::FileBacked(paths))
    }

    /// All regular files in `dir`, in name order.
    pub fn from_dir(kind: DeviceKind, dir: &Path) -> std::io::Result<Self> {
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                paths.push(entry.path());
            }
        }
        paths.sort();
        Ok(Self::file_backed(kind, paths))
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Takes one picture or recording. The consent is consumed.
    pub fn capture(&self, consent: Consent) -> Result<Vec<u8>, DeviceError> {
        let expected = match self.kind {
            DeviceKind::Camera => "pressEmployee",
            DeviceKind::Microphone => "recordDone",
        };
        if consent.trigger != expected {
            return Err(DeviceError::WrongTrigger {
                kind: self.kind,
                trigger: consent.trigger.to_string(),
            });
        }
        match &self.source {
            Source::Live => Err(DeviceError::Unavailable(self.kind)),
            Source::FileBacked(paths) if paths.is_empty() => Err(DeviceError::NoSource(self.kind)),
            Source::FileBacked(paths) => {
                let i = self.cursor.fetch_add(1, Ordering::Relaxed) % paths.len();
                let path = &paths[i];
                std::fs::read(path).map_err(|source| DeviceError::Io {
                    path: path.clone(),
                    source,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera_consent() -> Consent {
        Consent {
            trigger: "pressEmployee",
        }
    }

    #[test]
    fn cycles_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.jpg"), b"AAAA").unwrap();
        std::fs::write(dir.path().join("b.jpg"), b"BB").unwrap();
        let cam = CaptureDevice::from_dir(DeviceKind::Camera, dir.path()).unwrap();
        assert_eq!(cam.capture(camera_consent()).unwrap(), b"AAAA");
        assert_eq!(cam.capture(camera_consent()).unwrap(), b"BB");
        assert_eq!(cam.capture(camera_consent()).unwrap(), b"AAAA");
    }

    #[test]
    fn no_files_and_live_fail() {
        let cam = CaptureDevice::file_backed(DeviceKind::Camera, vec![]);
        assert!(matches!(
            cam.capture(camera_consent()),
            Err(DeviceError::NoSource(_))
        ));
        let live = CaptureDevice::new(DeviceKind::Camera, Source::Live);
        assert!(matches!(
            live.capture(camera_consent()),
            Err(DeviceError::Unavailable(_))
        ));
    }

    #[test]
    fn microphone_needs_record_trigger() {
        let mic = CaptureDevice::file_backed(DeviceKind::Microphone, vec!["x".into()]);
        assert!(matches!(
            mic.capture(camera_consent()),
            Err(DeviceError::WrongTrigger { .. })
        ));
    }
}
