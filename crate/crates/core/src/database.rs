//! On-disk scenario databases: `<dir>/<safety_group>/<id>.json` plus an optional
//! `<dir>/test_requests.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scenario::{validate_concrete, ConcreteScenario, SafetyGroupRegistry, ValidationReport};

pub const TEST_REQUESTS_FILE: &str = "test_requests.json";

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("database {0} contains no scenarios")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestRequestStatus {
    Open,
    InProgress,
    Complete,
}

/// Tracks one batch of generated scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRequest {
    pub id: String,
    pub parent_safety_group: String,
    pub specification: String,
    pub author: String,
    pub status: TestRequestStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    pub root: PathBuf,
    /// Sorted by id.
    pub scenarios: Vec<ConcreteScenario>,
    pub test_requests: Vec<TestRequest>,
    /// SHA-256 over every file path and its bytes, in sorted order.
    pub content_hash: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatabaseError + '_ {
    move |source| DatabaseError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), DatabaseError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            json_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

impl Database {
    pub fn load(root: &Path) -> Result<Self, DatabaseError> {
        let mut files = Vec::new();
        json_files(root, &mut files)?;
        let mut rel: Vec<(String, PathBuf)> = files
            .into_iter()
            .map(|p| {
                let r = p
                    .strip_prefix(root)
                    .unwrap_or(&p)
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                (r, p)
            })
            .collect();
        rel.sort();

        let mut hasher = Sha256::new();
        let mut scenarios = Vec::new();
        let mut test_requests = Vec::new();
        for (name, path) in &rel {
            let bytes = fs::read(path).map_err(io_err(path))?;
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(&bytes);
            hasher.update([0]);
            let json_err = |source| DatabaseError::Json {
                path: path.clone(),
                source,
            };
            if name == TEST_REQUESTS_FILE {
                test_requests = serde_json::from_slice(&bytes).map_err(json_err)?;
            } else {
                scenarios
                    .push(serde_json::from_slice::<ConcreteScenario>(&bytes).map_err(json_err)?);
            }
        }
        scenarios.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            root: root.to_path_buf(),
            scenarios,
            test_requests,
            content_hash: hex::encode(hasher.finalize()),
        })
    }

    /// Writes scenarios and test requests under `root`, replacing same-named files.
    pub fn write(
        root: &Path,
        scenarios: &[ConcreteScenario],
        test_requests: &[TestRequest],
    ) -> Result<(), DatabaseError> {
        for s in scenarios {
            let dir = root.join(&s.safety_group);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let path = dir.join(format!("{}.json", s.id));
            let text = serde_json::to_string_pretty(s).expect("scenario serializes");
            fs::write(&path, text + "\n").map_err(io_err(&path))?;
        }
        if !test_requests.is_empty() {
            fs::create_dir_all(root).map_err(io_err(root))?;
            let mut sorted = test_requests.to_vec();
            sorted.sort_by(|a, b| a.id.cmp(&b.id));
            let path = root.join(TEST_REQUESTS_FILE);
            let text = serde_json::to_string_pretty(&sorted).expect("requests serialize");
            fs::write(&path, text + "\n").map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Structural problems per scenario id, plus database-level problems under `""`.
    /// Empty when the database is usable.
    pub fn validate(&self, registry: &SafetyGroupRegistry) -> BTreeMap<String, ValidationReport> {
        let mut out = BTreeMap::new();
        let mut db_level = ValidationReport::default();
        if self.scenarios.is_empty() {
            db_level.push("non-empty database", self.root.display().to_string());
        }
        let requests: BTreeMap<&str, &TestRequest> = self
            .test_requests
            .iter()
            .map(|r| (r.id.as_str(), r))
            .collect();
        if requests.len() != self.test_requests.len() {
            db_level.push("unique test request ids", TEST_REQUESTS_FILE);
        }
        let mut seen = BTreeMap::new();
        for s in &self.scenarios {
            let mut report = validate_concrete(s, registry);
            if !requests.is_empty() && !requests.contains_key(s.test_request.as_str()) {
                report.push("known test request", "test_request");
            }
            if seen.insert(s.id.as_str(), ()).is_some() {
                report.push("unique scenario id", "id");
            }
            if !report.is_empty() {
                out.insert(s.id.clone(), report);
            }
        }
        if !db_level.is_empty() {
            out.insert(String::new(), db_level);
        }
        out
    }
}
