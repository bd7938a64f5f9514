//! A full door unit: file-backed camera and microphone, the controller link
//! and the kiosk WebSocket. Drives it the way the kiosk UI would.

use futures::{SinkExt, StreamExt};
use officegate::clock::SystemClock;
use officegate::doorunit::{
    spawn_door_unit, CaptureDevice, DeviceKind, DoorUnitConfig, FromUi, KioskBridge, KioskEvent,
    ToUi,
};
use officegate::flows::FlowConfig;
use officegate::harness::{LoopbackStack, Rig};
use officegate::protocol::ServerConfig;
use officegate::{CipherKey, Directory};
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;
use tokio_tungstenite::tungstenite::Message as WsMessage;

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
    let stack =
        LoopbackStack::start(&rig, FlowConfig::default(), ServerConfig::default(), None).await?;

    let camera = CaptureDevice::from_dir(DeviceKind::Camera, &data.join("camera"))?;
    let mic = CaptureDevice::from_dir(DeviceKind::Microphone, &data.join("audio"))?;
    let bridge = KioskBridge::new(key, camera, mic, Arc::new(SystemClock::new()));
    let mut cfg = DoorUnitConfig::new(stack.addr().to_string(), "127.0.0.1:0".parse()?);
    cfg.result_hold = Duration::from_millis(300);
    let mut unit = spawn_door_unit(cfg, bridge).await?;
    unit.wait_online(true, Duration::from_secs(5)).await;

    let (mut ws, _) =
        tokio_tungstenite::connect_async(format!("ws://{}/kiosk", unit.http_addr())).await?;
    drain(&mut ws).await?;

    press(&mut ws, FromUi::PressEmployee).await?;
    drain(&mut ws).await?;
    let code = rig.last_code_for("@anna1").expect("door code sent");
    press(&mut ws, FromUi::KeypadSubmit { code }).await?;
    drain(&mut ws).await?;

    press(&mut ws, FromUi::PressGuest).await?;
    drain(&mut ws).await?;
    press(&mut ws, FromUi::RecordDone).await?;
    drain(&mut ws).await?;

    unit.shutdown().await;
    stack.shutdown().await;
    Ok(())
}

type Ws =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn press(ws: &mut Ws, ev: FromUi) -> Result<(), Box<dyn std::error::Error>> {
    println!("-> {}", ev.name());
    ws.send(WsMessage::Text(
        serde_json::to_string(&ev.to_event())?.into(),
    ))
    .await?;
    Ok(())
}

/// Prints screens until the kiosk goes quiet for a moment.
async fn drain(ws: &mut Ws) -> Result<(), Box<dyn std::error::Error>> {
    while let Ok(Some(m)) = tokio::time::timeout(Duration::from_millis(700), ws.next()).await {
        if let WsMessage::Text(t) = m? {
            let ev: KioskEvent = serde_json::from_str(t.as_str())?;
            let screen = ToUi::from_event(&ev)?;
            println!("   {screen:?}");
        }
    }
    Ok(())
}
