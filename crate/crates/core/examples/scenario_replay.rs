//! Replays the bundled scenarios offline and prints their reports.
//!
//! `cargo run --example scenario_replay [file.json]`

use officegate::harness::{report_render, run_scenario, ReportFormat, Scenario};
use std::path::{Path, PathBuf};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let files: Vec<PathBuf> = match std::env::args().nth(1) {
        Some(f) => vec![f.into()],
        None => {
            let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios");
            let mut v: Vec<_> = std::fs::read_dir(dir)?
                .flatten()
                .map(|e| e.path())
                .collect();
            v.sort();
            v
        }
    };
    for file in files {
        let scenario = Scenario::from_json(&std::fs::read_to_string(&file)?)?;
        let report = run_scenario(&scenario, None).await?;
        println!("== {}", file.display());
        print!("{}", report_render(&report, ReportFormat::Text));
    }
    Ok(())
}
