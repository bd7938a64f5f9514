//! Runs the scripted face provider over the sample camera frames and
//! applies the access threshold.

use officegate::recognition::{compare_probe, decide_access, MockFaceProvider, RecognitionConfig};
use officegate::Directory;
use std::io::BufReader;
use std::path::Path;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = Directory::load(BufReader::new(std::fs::File::open(
        data.join("directory.ndjson"),
    )?))?;
    let face =
        MockFaceProvider::from_json(&std::fs::read_to_string(data.join("face_script.json"))?)?;
    let cfg = RecognitionConfig::default();

    let mut frames: Vec<_> = std::fs::read_dir(data.join("camera"))?
        .flatten()
        .map(|e| e.path())
        .collect();
    frames.sort();
    for path in frames {
        let probe = std::fs::read(&path)?;
        let result = compare_probe(&face, &probe, &dir).await?;
        let decision = decide_access(&result, &cfg);
        println!(
            "{:<16} {:<5} {:6.2} -> {decision:?}",
            path.file_name().unwrap().to_string_lossy(),
            result.employee_id.as_deref().unwrap_or("-"),
            result.similarity
        );
    }

    // The threshold is strict: exactly 90 is not enough.
    let edge = officegate::recognition::MatchResult::new(Some("e1".into()), 90.0)?;
    println!("score 90.00 -> {:?}", decide_access(&edge, &cfg));
    Ok(())
}
