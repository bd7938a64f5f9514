//! Door lock line.
//!
//! The lock circuit is held closed by a constant 12 V. Dropping the line to
//! 0 V and releasing it back to 12 V opens the door for a fixed window
//! (5 s by default). Pulses while a window is open are refused.

use crate::clock::Clock;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineState {
    Held,
    Pulsed,
    UnlockedWindowStart,
    UnlockedWindowEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LockEvent {
    pub at_ms: u64,
    pub line_state: LineState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LockWindow {
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockTimeline {
    pub events: Vec<LockEvent>,
}

impl LockTimeline {
    pub fn windows(&self) -> Vec<LockWindow> {
        let mut out = Vec::new();
        let mut start = None;
        for e in &self.events {
            match e.line_state {
                LineState::UnlockedWindowStart => start = Some(e.at_ms),
                LineState::UnlockedWindowEnd => {
                    if let Some(s) = start.take() {
                        out.push(LockWindow {
                            start_ms: s,
                            end_ms: e.at_ms,
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn unlock_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.line_state == LineState::UnlockedWindowStart)
            .count()
    }

    /// Checks that every window lasts exactly `window_ms` and that windows
    /// never overlap.
    pub fn validate(&self, window_ms: u64) -> Result<(), String> {
        let starts = self.unlock_count();
        let windows = self.windows();
        if windows.len() != starts {
            return Err(format!(
                "{starts} window starts but {} closed windows",
                windows.len()
            ));
        }
        for w in &windows {
            if w.end_ms - w.start_ms != window_ms {
                return Err(format!("window {w:?} is not {window_ms} ms"));
            }
        }
        for pair in windows.windows(2) {
            if pair[1].start_ms < pair[0].end_ms {
                return Err(format!("windows {:?} and {:?} overlap", pair[0], pair[1]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum LockError {
    #[error("unlock window open until {open_until_ms} ms")]
    WindowOpen { open_until_ms: u64 },
}

pub trait LockActuator: Send + Sync {
    fn pulse(&self) -> Result<LockWindow, LockError>;
    fn timeline(&self) -> LockTimeline;
    fn window_ms(&self) -> u64;
}

/// Lock line driven by a clock instead of GPIO. With a [`crate::SimClock`]
/// it is fully deterministic; with the system clock it stands in for the
/// real relay and only logs.
pub struct SimulatedLock {
    clock: Arc<dyn Clock>,
    window_ms: u64,
    state: Mutex<LockState>,
}

#[derive(Default)]
struct LockState {
    events: Vec<LockEvent>,
    open_until: Option<u64>,
}

impl SimulatedLock {
    pub fn new(clock: Arc<dyn Clock>, window_ms: u64) -> Self {
        Self {
            clock,
            window_ms,
            state: Mutex::new(LockState::default()),
        }
    }
}

impl LockActuator for SimulatedLock {
    fn pulse(&self) -> Result<LockWindow, LockError> {
        let now = self.clock.now_ms();
        let mut st = self.state.lock().unwrap();
        if let Some(until) = st.open_until {
            if now < until {
                return Err(LockError::WindowOpen {
                    open_until_ms: until,
                });
            }
        }
        let end = now + self.window_ms;
        st.events.extend([
            LockEvent {
                at_ms: now,
                line_state: LineState::Pulsed,
            },
            LockEvent {
                at_ms: now,
                line_state: LineState::UnlockedWindowStart,
            },
            LockEvent {
                at_ms: end,
                line_state: LineState::UnlockedWindowEnd,
            },
            LockEvent {
                at_ms: end,
                line_state: LineState::Held,
            },
        ]);
        st.open_until = Some(end);
        tracing::info!(start_ms = now, end_ms = end, "door unlocked");
        Ok(LockWindow {
            start_ms: now,
            end_ms: end,
        })
    }

    fn timeline(&self) -> LockTimeline {
        LockTimeline {
            events: self.state.lock().unwrap().events.clone(),
        }
    }

    fn window_ms(&self) -> u64 {
        self.window_ms
    }
}
