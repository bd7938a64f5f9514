//! Loads the employee directory and keeps face templates on disk.
//!
//! Only probes accepted with a very high score become templates, and each
//! employee keeps the newest few.

use officegate::directory::{DirectoryConfig, StoreOutcome, TemplateStore};
use officegate::tag::tagged_buffer;
use officegate::Directory;
use std::io::BufReader;
use std::path::Path;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let dir = Directory::load(BufReader::new(std::fs::File::open(
        data.join("directory.ndjson"),
    )?))?;
    println!("{} employees", dir.len());
    if let Some(e) = dir.lookup_first_by_name("anna lindberg") {
        println!("lookup 'anna lindberg' -> {} {:?}", e.id, e.notify_handle);
    }

    let root = tempfile::tempdir()?;
    let cfg = DirectoryConfig::default();
    let store = TemplateStore::open(root.path(), &dir, cfg)?;
    for (t, score) in [99.8, 99.5, 99.9, 100.0]
        .into_iter()
        .cycle()
        .take(14)
        .enumerate()
    {
        let image = tagged_buffer("anna01", format!("capture {t}").as_bytes());
        match store.maybe_store_template("e1", &image, score, t as u64)? {
            StoreOutcome::Stored(r) => {
                println!("t={t:2} score {score:5.1} stored {}", r.template_id)
            }
            StoreOutcome::Skipped => println!("t={t:2} score {score:5.1} skipped"),
        }
    }
    let kept: Vec<u64> = store
        .list_templates("e1")?
        .iter()
        .map(|t| t.stored_at)
        .collect();
    println!("kept for e1, newest first: {kept:?}");
    Ok(())
}
