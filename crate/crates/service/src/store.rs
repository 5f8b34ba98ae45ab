//! On-disk layout, one directory per chart:
//!
//! ```text
//! <root>/charts/<chart_id>/
//!     record.json      chart metadata and dataset digest
//!     dataset.csv      the uploaded bytes
//!     spec.json
//!     chart.svg
//!     document.json    full chart document with contexts
//!     elements.json    GET /charts/{id}/elements body
//!     knowledge.json   GET /charts/{id}/knowledge body
//!     sessions/<session_id>.jsonl
//! ```
//!
//! Charts are written under `<root>/tmp` and renamed into place, so a
//! chart directory is either complete or absent.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chartalk_core::agent::{replay_log, ChatSession, Turn};
use chartalk_core::chart::{ChartDocument, ChartSpec, ElementId, VisualElement};
use chartalk_core::semantics::KnowledgeFile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub schema_version: u32,
    pub chart_id: String,
    pub spec: ChartSpec,
    /// `sha256:<hex>` of dataset.csv.
    pub dataset_digest: String,
    pub created_at: u64,
    pub data_description: Option<String>,
    pub visual_features: Option<String>,
    pub template_version: u32,
    pub prompts_version: u32,
    pub warnings: Vec<String>,
}

/// Body of `GET /charts/{id}/elements`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementsView {
    pub chart_id: String,
    pub width: f64,
    pub height: f64,
    pub id_list: Vec<ElementId>,
    pub groups: Vec<ElementId>,
    pub registry: BTreeMap<ElementId, VisualElement>,
}

/// A chart ready to be written: everything derived from the upload.
#[derive(Debug, Clone)]
pub struct NewChart {
    pub record: ChartRecord,
    pub dataset: Vec<u8>,
    pub document: ChartDocument,
    pub knowledge: KnowledgeFile,
}

/// A chart as served. The JSON bodies are kept as written so responses
/// stay byte-identical across restarts.
#[derive(Debug, Clone)]
pub struct StoredChart {
    pub record: ChartRecord,
    pub document: ChartDocument,
    pub knowledge: KnowledgeFile,
    pub svg: String,
    pub elements_json: String,
    pub knowledge_json: String,
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, StoreError> {
    serde_json::from_str(text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn elements_view(chart_id: &str, doc: &ChartDocument) -> ElementsView {
    ElementsView {
        chart_id: chart_id.to_string(),
        width: doc.width,
        height: doc.height,
        id_list: doc.id_list.clone(),
        groups: doc.groups.clone(),
        registry: doc.registry.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for d in [root.join("charts"), root.join("tmp")] {
            fs::create_dir_all(&d).map_err(io(&d))?;
        }
        // Leftovers of interrupted creations.
        let tmp = root.join("tmp");
        for entry in fs::read_dir(&tmp).map_err(io(&tmp))? {
            let p = entry.map_err(io(&tmp))?.path();
            let _ = fs::remove_dir_all(&p);
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn chart_dir(&self, chart_id: &str) -> PathBuf {
        self.root.join("charts").join(chart_id)
    }

    fn session_path(&self, chart_id: &str, session_id: &str) -> PathBuf {
        self.chart_dir(chart_id).join("sessions").join(format!("{session_id}.jsonl"))
    }

    pub fn commit_chart(&self, new: NewChart) -> Result<StoredChart, StoreError> {
        let id = new.record.chart_id.clone();
        let dataset = new.dataset;
        let stored = StoredChart {
            svg: new.document.svg.clone(),
            elements_json: pretty(&elements_view(&id, &new.document)),
            knowledge_json: pretty(&new.knowledge),
            record: new.record,
            document: new.document,
            knowledge: new.knowledge,
        };
        let tmp = self.root.join("tmp").join(format!("{id}.{}", uuid::Uuid::new_v4().simple()));
        let sessions = tmp.join("sessions");
        fs::create_dir_all(&sessions).map_err(io(&sessions))?;
        let spec = pretty(&stored.record.spec);
        let document = pretty(&stored.document);
        let record = pretty(&stored.record);
        let files: [(&str, &[u8]); 7] = [
            ("dataset.csv", &dataset),
            ("spec.json", spec.as_bytes()),
            ("chart.svg", stored.svg.as_bytes()),
            ("document.json", document.as_bytes()),
            ("elements.json", stored.elements_json.as_bytes()),
            ("knowledge.json", stored.knowledge_json.as_bytes()),
            ("record.json", record.as_bytes()),
        ];
        for (name, bytes) in files {
            let p = tmp.join(name);
            fs::write(&p, bytes).map_err(io(&p))?;
        }
        let dest = self.chart_dir(&id);
        if let Err(e) = fs::rename(&tmp, &dest) {
            let _ = fs::remove_dir_all(&tmp);
            return Err(io(&dest)(e));
        }
        Ok(stored)
    }

    pub fn load_chart(&self, chart_id: &str) -> Result<StoredChart, StoreError> {
        let dir = self.chart_dir(chart_id);
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(io(&p))
        };
        let record: ChartRecord = parse_json(&dir.join("record.json"), &read("record.json")?)?;
        let dataset_path = dir.join("dataset.csv");
        let dataset = fs::read(&dataset_path).map_err(io(&dataset_path))?;
        if digest(&dataset) != record.dataset_digest {
            return Err(StoreError::Corrupt {
                path: dataset_path,
                message: "digest does not match record.json".into(),
            });
        }
        let document: ChartDocument = parse_json(&dir.join("document.json"), &read("document.json")?)?;
        let knowledge_json = read("knowledge.json")?;
        let knowledge: KnowledgeFile = parse_json(&dir.join("knowledge.json"), &knowledge_json)?;
        Ok(StoredChart {
            svg: read("chart.svg")?,
            elements_json: read("elements.json")?,
            knowledge_json,
            record,
            document,
            knowledge,
        })
    }

    pub fn chart_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("charts");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io(&dir))? {
            let entry = entry.map_err(io(&dir))?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_sessions(&self, chart_id: &str) -> Result<Vec<ChatSession>, StoreError> {
        let dir = self.chart_dir(chart_id).join("sessions");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let text = fs::read_to_string(&p).map_err(io(&p))?;
                replay_log(&text).map_err(|e| StoreError::Corrupt {
                    path: p.clone(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn create_session(&self, session: &ChatSession) -> Result<(), StoreError> {
        let p = self.session_path(&session.chart_id, &session.id);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&p).map_err(io(&p))?;
        f.write_all(session.to_log().as_bytes()).map_err(io(&p))?;
        f.sync_data().map_err(io(&p))
    }

    pub fn append_turn(&self, chart_id: &str, session_id: &str, turn: &Turn) -> Result<(), StoreError> {
        let p = self.session_path(chart_id, session_id);
        let mut line = serde_json::to_string(&chartalk_core::agent::LogRecord::Turn(turn.clone())).expect("turn serializes");
        line.push('\n');
        let mut f = OpenOptions::new().append(true).open(&p).map_err(io(&p))?;
        f.write_all(line.as_bytes()).map_err(io(&p))?;
        f.sync_data().map_err(io(&p))
    }
}
