//! Fuzzy matching of a spoken name against the directory.

use officegate::transcription::{match_name, similarity, TranscriptionConfig};
use officegate::Directory;
use std::io::BufReader;
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = Directory::load(BufReader::new(std::fs::File::open(
        data.join("directory.ndjson"),
    )?))?;
    let cfg = TranscriptionConfig::default();

    for heard in ["anna lindberg", "ana lindberi", "bo e", "carl", "mumble"] {
        let m = match_name(heard, &dir, &cfg);
        let who = m
            .employee_id
            .as_deref()
            .and_then(|id| dir.get(id))
            .map(|e| e.full_name.as_str())
            .unwrap_or("-");
        println!(
            "{heard:<16} {:3} {:<8} {who}",
            m.score,
            format!("{:?}", m.band)
        );
    }
    println!(
        "similarity(\"kitten\", \"sitting\") = {}",
        similarity("kitten", "sitting")
    );
    Ok(())
}
