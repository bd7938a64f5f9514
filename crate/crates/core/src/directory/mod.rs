//! Employee directory and face-template store.
//!
//! The directory is loaded once from newline-delimited JSON documents and is
//! immutable afterwards. Ingestion order matters: it decides which record wins
//! when two employees share a name.

mod store;

pub use store::{DirectoryConfig, StoreError, StoreOutcome, TemplateRef, TemplateStore};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::BufRead;

/// Raw source document, one per employee.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct EmployeeDocument {
    pub id: String,
    pub first_name: String,
    pub last_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notify_handle: Option<String>,
    #[serde(default)]
    pub image_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmployeeRecord {
    pub id: String,
    pub full_name: String,
    pub notify_handle: Option<String>,
    /// Enrollment image references carried over from the source document.
    pub image_refs: Vec<String>,
}

impl EmployeeRecord {
    pub fn normalized_name(&self) -> String {
        normalize_name(&self.full_name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("record {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("record {index}: duplicate employee id {id:?}")]
    DuplicateId { index: usize, id: String },
    #[error("reading directory: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercase, trim, and collapse whitespace runs to a single space.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directory {
    records: Vec<EmployeeRecord>,
}

impl Directory {
    /// Loads newline-delimited JSON documents. Blank lines are ignored and do
    /// not count towards the record index.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut docs = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let index = docs.len();
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
                    index,
                    reason: e.to_string(),
                })?;
            docs.push(value);
        }
        Self::from_documents(docs)
    }

    pub fn from_documents<I>(docs: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = serde_json::Value>,
    {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (index, value) in docs.into_iter().enumerate() {
            let doc: EmployeeDocument =
                serde_json::from_value(value).map_err(|e| IngestError::Malformed {
                    index,
                    reason: e.to_string(),
                })?;
            let record = Self::record_from(index, doc)?;
            if !seen.insert(record.id.clone()) {
                return Err(IngestError::DuplicateId {
                    index,
                    id: record.id,
                });
            }
            records.push(record);
        }
        Ok(Self { records })
    }

    fn record_from(index: usize, doc: EmployeeDocument) -> Result<EmployeeRecord, IngestError> {
        if doc.id.trim().is_empty() {
            return Err(IngestError::Malformed {
                index,
                reason: "empty id".into(),
            });
        }
        let full_name = format!("{} {}", doc.first_name.trim(), doc.last_name.trim())
            .trim()
            .to_string();
        if full_name.is_empty() {
            return Err(IngestError::Malformed {
                index,
                reason: "empty name".into(),
            });
        }
        Ok(EmployeeRecord {
            id: doc.id,
            full_name,
            notify_handle: doc.notify_handle.filter(|h| !h.trim().is_empty()),
            image_refs: doc.image_refs,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ingestion order.
    pub fn iter(&self) -> impl Iterator<Item = &EmployeeRecord> {
        self.records.iter()
    }

    pub fn get(&self, id: &str) -> Option<&EmployeeRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// First record, in ingestion order, whose normalized name equals the
    /// normalized query.
    pub fn lookup_first_by_name(&self, name: &str) -> Option<&EmployeeRecord> {
        let query = normalize_name(name);
        self.records.iter().find(|r| r.normalized_name() == query)
    }
}

impl<'a> IntoIterator for &'a Directory {
    type Item = &'a EmployeeRecord;
    type IntoIter = std::slice::Iter<'a, EmployeeRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
