//! The employee flow driven straight against the controller: face match,
//! a door code sent as a direct message, one wrong try, then the right one.

use officegate::flows::{FlowConfig, SessionKind, StepOutcome};
use officegate::harness::Rig;
use officegate::tag::tagged_buffer;
use officegate::{xor_transform, CipherKey, Directory};
use std::io::BufReader;
use std::path::Path;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = Directory::load(BufReader::new(std::fs::File::open(
        data.join("directory.ndjson"),
    )?))?;
    let face = serde_json::from_str(&std::fs::read_to_string(data.join("face_script.json"))?)?;
    let speech = serde_json::from_str(&std::fs::read_to_string(data.join("speech_script.json"))?)?;
    let key = CipherKey::from_hex("6f6666696365676174652d64656d6f2d6b6579")?;
    let rig = Rig::new(dir, face, speech, key.clone(), 5000)?;
    let mut c = rig.controller(FlowConfig::default(), 7);

    let s = c.start_session(SessionKind::Employee)?;
    let probe = xor_transform(&tagged_buffer("anna01", b"frame"), &key);
    println!(
        "capture   -> {:?}",
        c.handle_capture(&s.session_id, probe).await?
    );

    let code = rig.last_code_for("@anna1").expect("code sent");
    let wrong = format!("{:04}", (code.parse::<u32>()? + 1) % 10_000);
    println!(
        "wrong     -> {:?}",
        c.submit_code(&s.session_id, &wrong).await?
    );

    // A wrong try replaces the code; the old one is dead.
    let fresh = rig.last_code_for("@anna1").expect("new code sent");
    match c.submit_code(&s.session_id, &fresh).await? {
        StepOutcome::Unlocked {
            full_name,
            welcome,
            window,
            ..
        } => {
            println!(
                "correct   -> {welcome} ({full_name}), open {}..{} ms",
                window.start_ms, window.end_ms
            )
        }
        other => println!("correct   -> {other:?}"),
    }

    let done = &c.finished()[0];
    println!(
        "session {} ended {:?} after {} failed attempt(s)",
        done.session_id, done.state, done.attempts_used
    );
    for n in rig.sink.sent() {
        // Door codes only ever travel to the direct-message sink.
        println!(
            "sent to {:<8} {:?}",
            n.notification.target, n.notification.target_kind
        );
    }
    Ok(())
}
