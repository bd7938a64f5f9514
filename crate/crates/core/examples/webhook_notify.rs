//! Posts a direct and a channel notification to a local stand-in webhook.

use axum::routing::post;
use axum::{Json, Router};
use officegate::notify::{send_channel, send_direct, WebhookSink};
use officegate::Directory;
use serde_json::{json, Value};
use std::io::BufReader;
use std::path::Path;

async fn hook(Json(body): Json<Value>) -> Json<Value> {
    println!("webhook got {body}");
    Json(json!({"id": "msg-1"}))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let url = format!("http://{}/hook", listener.local_addr()?);
    tokio::spawn(
        async move { axum::serve(listener, Router::new().route("/hook", post(hook))).await },
    );

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = Directory::load(BufReader::new(std::fs::File::open(
        data.join("directory.ndjson"),
    )?))?;
    let anna = dir.get("e1").unwrap();

    let sink = WebhookSink::new(url)?;
    let r = send_direct(
        &sink,
        anna,
        "Anna Lindberg, you have a guest at the door",
        1,
    )
    .await?;
    println!("direct receipt {}", r.id);
    let r = send_channel(&sink, "#deliveries", "There is a delivery at the door", 2).await?;
    println!("channel receipt {}", r.id);
    Ok(())
}
