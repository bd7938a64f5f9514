//! Controller server, notifier client and a door link over localhost TCP.
//! Prints the framed messages the server saw.

use officegate::doorunit::DoorLink;
use officegate::flows::{FlowConfig, SessionKind};
use officegate::harness::{LoopbackStack, Rig};
use officegate::protocol::ServerConfig;
use officegate::tag::tagged_buffer;
use officegate::{CipherKey, Directory};
use std::io::BufReader;
use std::path::Path;
use std::time::Duration;

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

    let cfg = ServerConfig {
        record_trace: true,
        ..ServerConfig::default()
    };
    let stack = LoopbackStack::start(&rig, FlowConfig::default(), cfg, Some(1)).await?;
    println!("controller on {}", stack.addr());
    let mut door = DoorLink::connect(stack.addr(), key).await?;
    let wait = Duration::from_secs(5);

    let sid = door.start_session(SessionKind::Employee)?;
    door.upload_probe(&sid, tagged_buffer("anna01", b"frame"), Some(1200))?;
    door.recv_timeout(wait).await?;
    door.submit_code(&sid, &rig.last_code_for("@anna1").unwrap())?;
    door.recv_timeout(wait).await?;
    door.recv_timeout(wait).await?;

    let sid = door.start_session(SessionKind::Guest)?;
    door.send_audio(&sid, tagged_buffer("guest01", b"audio"))?;
    door.recv_timeout(wait).await?;

    for m in stack.server.trace() {
        println!("{:<9?} {:<14?} {}", m.role, m.kind, m.payload);
    }
    stack.shutdown().await;
    Ok(())
}
