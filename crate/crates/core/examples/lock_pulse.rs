//! Lock line pulses on a simulated clock. A pulse opens the door for a fixed
//! window; asking again while it is open is refused.

use officegate::flows::{LockActuator, SimulatedLock};
use officegate::{Clock, SimClock};
use std::sync::Arc;

fn main() {
    let clock = Arc::new(SimClock::new(0));
    let lock = SimulatedLock::new(clock.clone(), 5000);

    for gap in [0, 2000, 3000, 9000, 4999, 1] {
        clock.advance(gap);
        match lock.pulse() {
            Ok(w) => println!("t={:6} open {}..{}", w.start_ms, w.start_ms, w.end_ms),
            Err(e) => println!("t={:6} refused: {e}", clock.now_ms()),
        }
    }
    let timeline = lock.timeline();
    println!(
        "{} unlocks, valid: {:?}",
        timeline.unlock_count(),
        timeline.validate(5000)
    );
}
