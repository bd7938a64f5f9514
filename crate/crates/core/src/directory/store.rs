//! Face-template store with newest-N retention.
//!
//! Only images whose match score is strictly above the update threshold are
//! kept. Each employee keeps at most `retention_capacity` templates; storing
//! one more overwrites the oldest. On disk, blobs are content addressed under
//! `<root>/<employee>/blobs/<sha256>` and each employee has a JSON manifest
//! that is rewritten with write-temp-then-rename.

use super::Directory;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DirectoryConfig {
    pub retention_capacity: usize,
    pub update_threshold: f64,
}

impl Default for DirectoryConfig {
    fn default() -> Self {
        Self {
            retention_capacity: 10,
            update_threshold: 99.5,
        }
    }
}

impl DirectoryConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.retention_capacity == 0 {
            return Err(StoreError::Config("retention_capacity must be >= 1".into()));
        }
        if !(self.update_threshold > 0.0 && self.update_threshold < 100.0) {
            return Err(StoreError::Config(format!(
                "update_threshold must be in (0, 100), got {}",
                self.update_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemplateRef {
    pub template_id: String,
    pub stored_at: u64,
    pub source_score: f64,
    /// SHA-256 of the image bytes, hex encoded.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreOutcome {
    Stored(TemplateRef),
    Skipped,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown employee {0:?}")]
    NotFound(String),
    #[error("timestamp {given} is older than newest template at {newest}")]
    NonMonotonic { given: u64, newest: u64 },
    #[error("score {0} outside [0, 100]")]
    Score(f64),
    #[error("invalid store config: {0}")]
    Config(String),
    #[error("template store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("template manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

enum Blobs {
    Memory(Mutex<HashMap<(String, String), Vec<u8>>>),
    Disk(PathBuf),
}

pub struct TemplateStore {
    config: DirectoryConfig,
    blobs: Blobs,
    // Newest first. One lock per employee so writers for different employees
    // do not contend and readers of one employee proceed concurrently.
    employees: HashMap<String, Arc<RwLock<VecDeque<TemplateRef>>>>,
}

impl std::fmt::Debug for TemplateStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TemplateStore")
            .field("config", &self.config)
            .field("root", &self.root())
            .field("employees", &self.employees.len())
            .finish()
    }
}

impl TemplateStore {
    pub fn in_memory(directory: &Directory, config: DirectoryConfig) -> Result<Self, StoreError> {
        config.validate()?;
        Ok(Self {
            config,
            blobs: Blobs::Memory(Mutex::new(HashMap::new())),
            employees: empty_lists(directory),
        })
    }

    /// Opens (or creates) a store rooted at `root`, reading existing manifests.
    pub fn open(
        root: impl Into<PathBuf>,
        directory: &Directory,
        config: DirectoryConfig,
    ) -> Result<Self, StoreError> {
        config.validate()?;
        let root = root.into();
        fs::create_dir_all(&root)?;
        let employees = empty_lists(directory);
        for (id, list) in &employees {
            let manifest = manifest_path(&root, id);
            if manifest.exists() {
                let mut refs: Vec<TemplateRef> = serde_json::from_slice(&fs::read(&manifest)?)?;
                refs.truncate(config.retention_capacity);
                *list.write().unwrap() = refs.into();
            }
        }
        Ok(Self {
            config,
            blobs: Blobs::Disk(root),
            employees,
        })
    }

    pub fn config(&self) -> &DirectoryConfig {
        &self.config
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.blobs {
            Blobs::Disk(root) => Some(root),
            Blobs::Memory(_) => None,
        }
    }

    fn list(&self, employee_id: &str) -> Result<&Arc<RwLock<VecDeque<TemplateRef>>>, StoreError> {
        self.employees
            .get(employee_id)
            .ok_or_else(|| StoreError::NotFound(employee_id.to_string()))
    }

    /// Keeps `image` as a new template if `score` is strictly above the update
    /// threshold. Skipped images are not written anywhere.
    pub fn maybe_store_template(
        &self,
        employee_id: &str,
        image: &[u8],
        score: f64,
        stored_at: u64,
    ) -> Result<StoreOutcome, StoreError> {
        let list = self.list(employee_id)?;
        if !(0.0..=100.0).contains(&score) {
            return Err(StoreError::Score(score));
        }
        if score <= self.config.update_threshold {
            return Ok(StoreOutcome::Skipped);
        }

        let mut templates = list.write().unwrap();
        if let Some(newest) = templates.front() {
            if stored_at < newest.stored_at {
                return Err(StoreError::NonMonotonic {
                    given: stored_at,
                    newest: newest.stored_at,
                });
            }
        }

        let digest = hex::encode(Sha256::digest(image));
        let template = TemplateRef {
            template_id: format!("{stored_at}-{}", &digest[..16]),
            stored_at,
            source_score: score,
            digest: digest.clone(),
        };
        self.put_blob(employee_id, &digest, image)?;
        templates.push_front(template.clone());
        let mut evicted = Vec::new();
        while templates.len() > self.config.retention_capacity {
            evicted.extend(templates.pop_back());
        }
        self.write_manifest(employee_id, &templates)?;
        for old in evicted {
            if !templates.iter().any(|t| t.digest == old.digest) {
                self.remove_blob(employee_id, &old.digest)?;
            }
        }
        Ok(StoreOutcome::Stored(template))
    }

    /// Templates for one employee, newest first.
    pub fn list_templates(&self, employee_id: &str) -> Result<Vec<TemplateRef>, StoreError> {
        Ok(self
            .list(employee_id)?
            .read()
            .unwrap()
            .iter()
            .cloned()
            .collect())
    }

    pub fn template_bytes(
        &self,
        employee_id: &str,
        digest: &str,
    ) -> Result<Option<Vec<u8>>, StoreError> {
        self.list(employee_id)?;
        match &self.blobs {
            Blobs::Memory(m) => Ok(m
                .lock()
                .unwrap()
                .get(&(employee_id.to_string(), digest.to_string()))
                .cloned()),
            Blobs::Disk(root) => {
                let path = blob_path(root, employee_id, digest);
                match fs::read(path) {
                    Ok(b) => Ok(Some(b)),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn put_blob(&self, employee_id: &str, digest: &str, image: &[u8]) -> Result<(), StoreError> {
        match &self.blobs {
            Blobs::Memory(m) => {
                m.lock().unwrap().insert(
                    (employee_id.to_string(), digest.to_string()),
                    image.to_vec(),
                );
            }
            Blobs::Disk(root) => {
                let path = blob_path(root, employee_id, digest);
                if !path.exists() {
                    let dir = path.parent().expect("blob path has a parent");
                    fs::create_dir_all(dir)?;
                    atomic_write(dir, &path, image)?;
                }
            }
        }
        Ok(())
    }

    fn remove_blob(&self, employee_id: &str, digest: &str) -> Result<(), StoreError> {
        match &self.blobs {
            Blobs::Memory(m) => {
                m.lock()
                    .unwrap()
                    .remove(&(employee_id.to_string(), digest.to_string()));
            }
            Blobs::Disk(root) => match fs::remove_file(blob_path(root, employee_id, digest)) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            },
        }
        Ok(())
    }

    fn write_manifest(
        &self,
        employee_id: &str,
        templates: &VecDeque<TemplateRef>,
    ) -> Result<(), StoreError> {
        if let Blobs::Disk(root) = &self.blobs {
            let path = manifest_path(root, employee_id);
            let dir = path.parent().expect("manifest path has a parent");
            fs::create_dir_all(dir)?;
            let body = serde_json::to_vec_pretty(templates)?;
            atomic_write(dir, &path, &body)?;
        }
        Ok(())
    }
}

fn empty_lists(directory: &Directory) -> HashMap<String, Arc<RwLock<VecDeque<TemplateRef>>>> {
    directory
        .iter()
        .map(|r| (r.id.clone(), Arc::new(RwLock::new(VecDeque::new()))))
        .collect()
}

// Employee ids are opaque, so they are hex encoded before becoming path components.
fn employee_dir(root: &Path, employee_id: &str) -> PathBuf {
    root.join(hex::encode(employee_id.as_bytes()))
}

fn manifest_path(root: &Path, employee_id: &str) -> PathBuf {
    employee_dir(root, employee_id).join("manifest.json")
}

fn blob_path(root: &Path, employee_id: &str, digest: &str) -> PathBuf {
    employee_dir(root, employee_id).join("blobs").join(digest)
}

fn atomic_write(dir: &Path, target: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(target).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn directory() -> Directory {
        Directory::from_documents([
            json!({"id": "e1", "firstName": "Anna", "lastName": "Lindberg"}),
            json!({"id": "e2", "firstName": "Bo", "lastName": "Ek"}),
        ])
        .unwrap()
    }

    fn image(n: u64) -> Vec<u8> {
        format!("face-image-{n}").into_bytes()
    }

    #[test]
    fn stores_above_threshold() {
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        for t in 1..=3 {
            store
                .maybe_store_template("e1", &image(t), 99.9, t)
                .unwrap();
        }
        let out = store
            .maybe_store_template("e1", &image(4), 99.7, 4)
            .unwrap();
        assert!(matches!(out, StoreOutcome::Stored(_)));
        assert_eq!(store.list_templates("e1").unwrap().len(), 4);
    }

    #[test]
    fn exact_threshold_is_skipped_and_not_retained() {
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        let img = image(1);
        let out = store.maybe_store_template("e1", &img, 99.5, 1).unwrap();
        assert_eq!(out, StoreOutcome::Skipped);
        assert!(store.list_templates("e1").unwrap().is_empty());
        let digest = hex::encode(Sha256::digest(&img));
        assert_eq!(store.template_bytes("e1", &digest).unwrap(), None);
    }

    #[test]
    fn newest_first_ordering() {
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        assert!(store.list_templates("e1").unwrap().is_empty());
        store
            .maybe_store_template("e1", &image(1), 99.6, 10)
            .unwrap();
        store
            .maybe_store_template("e1", &image(2), 99.6, 20)
            .unwrap();
        let stamps: Vec<_> = store
            .list_templates("e1")
            .unwrap()
            .iter()
            .map(|t| t.stored_at)
            .collect();
        assert_eq!(stamps, [20, 10]);
    }

    #[test]
    fn ring_keeps_ten_most_recent() {
        // Hand simulation: stores at t=1..=15 into capacity 10 leave t=15..=6.
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        for t in 1..=15 {
            store
                .maybe_store_template("e1", &image(t), 99.8, t)
                .unwrap();
        }
        let stamps: Vec<_> = store
            .list_templates("e1")
            .unwrap()
            .iter()
            .map(|t| t.stored_at)
            .collect();
        assert_eq!(stamps, (6..=15).rev().collect::<Vec<_>>());
        let evicted = hex::encode(Sha256::digest(image(5)));
        assert_eq!(store.template_bytes("e1", &evicted).unwrap(), None);
    }

    #[test]
    fn wrap_drops_oldest() {
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        for t in 1..=11 {
            store
                .maybe_store_template("e1", &image(t), 100.0, t)
                .unwrap();
        }
        let list = store.list_templates("e1").unwrap();
        assert_eq!(list.len(), 10);
        assert!(list.iter().all(|t| t.stored_at != 1));
    }

    #[test]
    fn errors() {
        let store = TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap();
        assert!(matches!(
            store.maybe_store_template("nobody", b"x", 99.9, 1),
            Err(StoreError::NotFound(_))
        ));
        assert!(matches!(
            store.list_templates("nobody"),
            Err(StoreError::NotFound(_))
        ));
        store.maybe_store_template("e1", b"x", 99.9, 5).unwrap();
        assert!(matches!(
            store.maybe_store_template("e1", b"y", 99.9, 4),
            Err(StoreError::NonMonotonic { .. })
        ));
        assert!(TemplateStore::in_memory(
            &directory(),
            DirectoryConfig {
                retention_capacity: 0,
                update_threshold: 99.5
            }
        )
        .is_err());
        assert!(TemplateStore::in_memory(
            &directory(),
            DirectoryConfig {
                retention_capacity: 1,
                update_threshold: 100.0
            }
        )
        .is_err());
    }

    #[test]
    fn disk_store_persists_and_reopens() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = directory();
        let cfg = DirectoryConfig {
            retention_capacity: 2,
            update_threshold: 99.5,
        };
        {
            let store = TemplateStore::open(tmp.path(), &dir, cfg).unwrap();
            for t in 1..=3 {
                store
                    .maybe_store_template("e2", &image(t), 99.9, t)
                    .unwrap();
            }
            store
                .maybe_store_template("e2", &image(99), 50.0, 4)
                .unwrap();
        }
        let store = TemplateStore::open(tmp.path(), &dir, cfg).unwrap();
        let list = store.list_templates("e2").unwrap();
        assert_eq!(list.iter().map(|t| t.stored_at).collect::<Vec<_>>(), [3, 2]);
        assert_eq!(
            store
                .template_bytes("e2", &list[0].digest)
                .unwrap()
                .unwrap(),
            image(3)
        );

        let blob_dir = tmp.path().join(hex::encode("e2")).join("blobs");
        let mut blobs: Vec<_> = fs::read_dir(blob_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        blobs.sort();
        assert_eq!(blobs.len(), 2);
        // no stray temp files next to the manifest
        let entries = fs::read_dir(tmp.path().join(hex::encode("e2")))
            .unwrap()
            .count();
        assert_eq!(entries, 2);
    }

    #[test]
    fn concurrent_writers_respect_capacity() {
        let store =
            Arc::new(TemplateStore::in_memory(&directory(), DirectoryConfig::default()).unwrap());
        let handles: Vec<_> = ["e1", "e2"]
            .into_iter()
            .map(|id| {
                let store = Arc::clone(&store);
                std::thread::spawn(move || {
                    for t in 0..50 {
                        store.maybe_store_template(id, &image(t), 99.9, t).unwrap();
                        assert!(store.list_templates(id).unwrap().len() <= 10);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(store.list_templates("e1").unwrap().len(), 10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn retention_invariants(
                scores in proptest::collection::vec(0.0f64..=100.0, 0..40),
                capacity in 1usize..12,
            ) {
                let cfg = DirectoryConfig { retention_capacity: capacity, update_threshold: 99.5 };
                let store = TemplateStore::in_memory(&directory(), cfg).unwrap();
                let mut kept = Vec::new();
                for (t, s) in scores.iter().enumerate() {
                    let out = store.maybe_store_template("e1", &image(t as u64), *s, t as u64).unwrap();
                    if *s > 99.5 {
                        kept.push(t as u64);
                        prop_assert!(matches!(out, StoreOutcome::Stored(_)));
                    } else {
                        prop_assert_eq!(out, StoreOutcome::Skipped);
                    }
                }
                let list = store.list_templates("e1").unwrap();
                prop_assert!(list.len() <= capacity);
                prop_assert!(list.iter().all(|t| t.source_score > 99.5));
                let expect: Vec<u64> = kept.iter().rev().take(capacity).copied().collect();
                prop_assert_eq!(list.iter().map(|t| t.stored_at).collect::<Vec<_>>(), expect);
            }
        }
    }
}
