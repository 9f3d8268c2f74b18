//! Append-only store of solved designs, one JSON object per line.
//!
//! Writers take an exclusive lock on the file and re-read it before
//! appending, so several processes can share a store without duplicating
//! entries. Readers work from an in-memory snapshot.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use menter_core::{emit, parse_netlist, SpecRequirement};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bm25::{Bm25Params, TermStats};

/// One Chain-of-Stage step as sent to and returned by the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub index: usize,
    pub stage_name: String,
    pub prompt_sent: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CttEntry {
    pub entry_id: String,
    pub circuit_name: String,
    pub specifications: SpecRequirement,
    pub reasoning_stages: Vec<StageRecord>,
    /// Canonical deck text.
    pub netlist: String,
    /// Path of the transcript that produced this design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_history: Option<String>,
    pub created_at: String,
}

#[derive(Debug, Error)]
pub enum CttError {
    #[error("store I/O failed: {0}")]
    Storage(#[from] io::Error),
    #[error("netlist does not parse: {0}")]
    InvalidNetlist(String),
    #[error("entry id {found} does not match its content (expected {expected})")]
    IdMismatch { expected: String, found: String },
    #[error("{path}:{line}: corrupt record: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
}

/// Content hash of `(circuit_name, netlist)`.
pub fn entry_id(circuit_name: &str, netlist: &str) -> String {
    let mut h = Sha256::new();
    h.update(circuit_name.as_bytes());
    h.update([0u8]);
    h.update(netlist.as_bytes());
    hex::encode(h.finalize())
}

fn check_netlist(text: &str) -> Result<(), CttError> {
    parse_netlist(text)
        .into_result()
        .map(|_| ())
        .map_err(|e| CttError::InvalidNetlist(e.to_string()))
}

impl CttEntry {
    /// Build an entry; the deck is stored in canonical form.
    pub fn new(
        circuit_name: &str,
        specifications: SpecRequirement,
        reasoning_stages: Vec<StageRecord>,
        netlist: &str,
        interaction_history: Option<String>,
    ) -> Result<Self, CttError> {
        let deck = parse_netlist(netlist)
            .into_result()
            .map_err(|e| CttError::InvalidNetlist(e.to_string()))?;
        let netlist = emit(&deck);
        Ok(CttEntry {
            entry_id: entry_id(circuit_name, &netlist),
            circuit_name: circuit_name.to_string(),
            specifications,
            reasoning_stages,
            netlist,
            interaction_history,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    fn search_text(&self) -> String {
        format!("{} {}", self.circuit_name, self.specifications.describe())
    }
}

#[derive(Default)]
struct Snapshot {
    entries: Vec<CttEntry>,
    stats: TermStats,
}

impl Snapshot {
    fn from_entries(entries: Vec<CttEntry>) -> Self {
        let texts: Vec<String> = entries.iter().map(CttEntry::search_text).collect();
        let stats = TermStats::from_texts(texts.iter().map(String::as_str));
        Snapshot { entries, stats }
    }

    fn query(&self, params: Bm25Params, text: &str, k: usize) -> Vec<(CttEntry, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .stats
            .scores(text, params)
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|(i, a), (j, b)| {
            b.total_cmp(a)
                .then_with(|| self.entries[*i].entry_id.cmp(&self.entries[*j].entry_id))
        });
        ranked
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.entries[i].clone(), s))
            .collect()
    }
}

/// Read-only snapshot of a [`CttStore`], ranked the same way.
pub struct CttView {
    params: Bm25Params,
    snapshot: Snapshot,
}

impl CttView {
    pub fn len(&self) -> usize {
        self.snapshot.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot.entries.is_empty()
    }

    pub fn query(&self, text: &str, k: usize) -> Vec<(CttEntry, f64)> {
        self.snapshot.query(self.params, text, k)
    }
}

pub struct CttStore {
    path: PathBuf,
    params: Bm25Params,
    state: RwLock<Snapshot>,
    writer: Mutex<()>,
}

fn parse_lines(path: &Path, text: &str) -> Result<Vec<CttEntry>, CttError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CttError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

impl CttStore {
    /// Open a store; a missing file is an empty store, created on first write.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CttError> {
        let store = CttStore {
            path: path.into(),
            params: Bm25Params::default(),
            state: RwLock::new(Snapshot::default()),
            writer: Mutex::new(()),
        };
        store.reload()?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Refresh the snapshot from disk.
    pub fn reload(&self) -> Result<(), CttError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let entries = parse_lines(&self.path, &text)?;
        *self.state.write().unwrap() = Snapshot::from_entries(entries);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.read().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<CttEntry> {
        self.state.read().unwrap().entries.clone()
    }

    pub fn get(&self, id: &str) -> Option<CttEntry> {
        self.state.read().unwrap().entries.iter().find(|e| e.entry_id == id).cloned()
    }

    /// Append `entry` unless an entry with the same id already exists.
    pub fn put(&self, entry: &CttEntry) -> Result<String, CttError> {
        check_netlist(&entry.netlist)?;
        let expected = entry_id(&entry.circuit_name, &entry.netlist);
        if expected != entry.entry_id {
            return Err(CttError::IdMismatch {
                expected,
                found: entry.entry_id.clone(),
            });
        }
        let _guard = self.writer.lock().unwrap();
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&self.path)?;
        file.lock()?;
        let result = self.append_locked(&mut file, entry);
        file.unlock()?;
        result
    }

    fn append_locked(&self, file: &mut File, entry: &CttEntry) -> Result<String, CttError> {
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let mut entries = parse_lines(&self.path, &text)?;
        if !entries.iter().any(|e| e.entry_id == entry.entry_id) {
            let mut line = serde_json::to_string(entry).map_err(io::Error::other)?;
            line.push('\n');
            if !text.is_empty() && !text.ends_with('\n') {
                line.insert(0, '\n');
            }
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
            entries.push(entry.clone());
        }
        *self.state.write().unwrap() = Snapshot::from_entries(entries);
        Ok(entry.entry_id.clone())
    }

    /// Rank entries by BM25 over name and specification text.
    /// Ties are broken by ascending entry id; zero scores are dropped.
    pub fn query(&self, text: &str, k: usize) -> Vec<(CttEntry, f64)> {
        self.state.read().unwrap().query(self.params, text, k)
    }

    /// A frozen copy of the current entries. Later writes do not show up in it.
    pub fn view(&self) -> CttView {
        let state = self.state.read().unwrap();
        CttView {
            params: self.params,
            snapshot: Snapshot { entries: state.entries.clone(), stats: state.stats.clone() },
        }
    }

    /// The store file verbatim.
    pub fn export(&self) -> Result<String, CttError> {
        match fs::read_to_string(&self.path) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
            Err(e) => Err(e.into()),
        }
    }
}
