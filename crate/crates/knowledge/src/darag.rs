//! Markdown ingestion with diagrams turned into text, and BM25 retrieval.
//!
//! Documents are split at headings; prose longer than [`MAX_CHUNK_CHARS`]
//! is split again at paragraph breaks. Every image reference becomes its own
//! chunk whose text describes the figure. Chunk spans partition the source
//! document byte for byte.

use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use menter_llm::{ChatBackend, ChatMessage};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::bm25::{Bm25Params, TermStats};

pub const MAX_CHUNK_CHARS: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkKind {
    Prose,
    DiagramDescription,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_id: usize,
    pub text: String,
    pub kind: ChunkKind,
    /// Byte range in the source document.
    pub source_span: Range<usize>,
    /// Image target for diagram chunks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure_ref: Option<String>,
}

/// Turns an image reference into a textual description.
pub trait DiagramDescriber {
    fn describe(&mut self, alt: &str, target: &str) -> Result<String, String>;
}

/// Asks a chat backend to describe each figure.
pub struct BackendDescriber {
    backend: Box<dyn ChatBackend>,
}

impl BackendDescriber {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        BackendDescriber { backend }
    }
}

const DESCRIBE_PROMPT: &str = "You convert circuit diagrams into precise text. Name the topology, \
every device and how the nodes connect. Reply with the description only.";

impl DiagramDescriber for BackendDescriber {
    fn describe(&mut self, alt: &str, target: &str) -> Result<String, String> {
        let messages = [
            ChatMessage::system(DESCRIBE_PROMPT),
            ChatMessage::user(format!("Figure `{target}` (caption: {alt}).")),
        ];
        self.backend
            .complete(&messages)
            .map(|c| c.content.trim().to_string())
            .map_err(|e| e.to_string())
    }
}

fn image_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"!\[([^\]]*)\]\(\s*([^)\s]*)(?:\s+"[^"]*")?\s*\)"#).unwrap())
}

fn is_heading(line: &str) -> bool {
    let hashes = line.bytes().take_while(|&b| b == b'#').count();
    (1..=6).contains(&hashes) && line[hashes..].chars().next().is_none_or(|c| c == ' ' || c == '\t')
}

/// Start offsets of every heading line outside fenced code.
fn section_starts(doc: &str) -> Vec<usize> {
    let mut starts = vec![0];
    let mut fenced = false;
    let mut pos = 0;
    for line in doc.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with("```") || t.starts_with("~~~") {
            fenced = !fenced;
        } else if !fenced && pos > 0 && is_heading(line) {
            starts.push(pos);
        }
        pos += line.len();
    }
    starts
}

fn trimmed_chars(s: &str) -> usize {
    s.trim().chars().count()
}

/// Cut `[start, end)` into ranges whose trimmed text fits the limit,
/// preferring paragraph breaks, then whitespace, then a hard cut.
fn split_prose(doc: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = start;
    while s < end {
        if trimmed_chars(&doc[s..end]) <= MAX_CHUNK_CHARS {
            out.push((s, end));
            break;
        }
        let fits = |b: usize| b > s && !doc[s..b].trim().is_empty() && trimmed_chars(&doc[s..b]) <= MAX_CHUNK_CHARS;
        let para = doc[s..end]
            .match_indices("\n\n")
            .map(|(i, _)| s + i + 2)
            .take_while(|&b| fits(b))
            .last();
        let word = || {
            doc[s..end]
                .char_indices()
                .filter(|(_, c)| c.is_whitespace())
                .map(|(i, _)| s + i)
                .take_while(|&b| b == s || fits(b) || doc[s..b].trim().is_empty())
                .filter(|&b| fits(b))
                .last()
        };
        let hard = || {
            let lead = doc[s..end].len() - doc[s..end].trim_start().len();
            let body = &doc[s + lead..end];
            s + lead + body.char_indices().nth(MAX_CHUNK_CHARS).map_or(body.len(), |(i, _)| i)
        };
        let cut = para.or_else(word).unwrap_or_else(hard);
        out.push((s, cut));
        s = cut;
    }
    out
}

enum Segment {
    Prose(usize, usize),
    Figure(usize, usize, String, String),
}

/// Split one markdown document into chunks.
pub fn ingest_document(doc_id: &str, doc: &str, mut hook: Option<&mut dyn DiagramDescriber>) -> Vec<Chunk> {
    let mut starts = section_starts(doc);
    starts.push(doc.len());
    let mut segments = Vec::new();
    for w in starts.windows(2) {
        let (sec_start, sec_end) = (w[0], w[1]);
        let mut cursor = sec_start;
        for cap in image_re().captures_iter(&doc[sec_start..sec_end]) {
            let m = cap.get(0).unwrap();
            let (a, b) = (sec_start + m.start(), sec_start + m.end());
            if a > cursor {
                segments.extend(split_prose(doc, cursor, a).into_iter().map(|(x, y)| Segment::Prose(x, y)));
            }
            segments.push(Segment::Figure(a, b, cap[1].to_string(), cap[2].to_string()));
            cursor = b;
        }
        if sec_end > cursor {
            segments.extend(split_prose(doc, cursor, sec_end).into_iter().map(|(x, y)| Segment::Prose(x, y)));
        }
    }

    let mut chunks: Vec<Chunk> = Vec::new();
    let mut pending: Option<usize> = None;
    for seg in segments {
        let (start, end, text, kind, figure) = match seg {
            Segment::Prose(a, b) => {
                let text = doc[a..b].trim();
                if text.is_empty() {
                    // Whitespace joins the neighbouring chunk so spans stay a partition.
                    match chunks.last_mut() {
                        Some(prev) => prev.source_span.end = b,
                        None => pending = Some(pending.unwrap_or(a)),
                    }
                    continue;
                }
                (a, b, text.to_string(), ChunkKind::Prose, None)
            }
            Segment::Figure(a, b, alt, target) => {
                let placeholder = format!("figure: {}", alt.trim());
                let text = match hook.as_deref_mut().map(|h| h.describe(&alt, &target)) {
                    Some(Ok(d)) if !d.trim().is_empty() => d.trim().to_string(),
                    Some(Ok(_)) => {
                        log::warn!("{doc_id}: empty description for {target}; using placeholder");
                        placeholder
                    }
                    Some(Err(e)) => {
                        log::warn!("{doc_id}: describing {target} failed ({e}); using placeholder");
                        placeholder
                    }
                    None => placeholder,
                };
                (a, b, text, ChunkKind::DiagramDescription, Some(target))
            }
        };
        chunks.push(Chunk {
            doc_id: doc_id.to_string(),
            chunk_id: chunks.len(),
            text,
            kind,
            source_span: pending.take().unwrap_or(start)..end,
            figure_ref: figure,
        });
    }
    chunks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk: Chunk,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub params: Bm25Params,
    pub chunks: Vec<Chunk>,
    pub stats: TermStats,
}

impl CorpusIndex {
    pub fn new(params: Bm25Params) -> Self {
        CorpusIndex {
            params,
            chunks: Vec::new(),
            stats: TermStats::default(),
        }
    }

    pub fn from_chunks(params: Bm25Params, chunks: Vec<Chunk>) -> Self {
        let mut idx = CorpusIndex::new(params);
        idx.add_chunks(chunks);
        idx
    }

    pub fn add_chunks(&mut self, chunks: impl IntoIterator<Item = Chunk>) {
        for c in chunks {
            self.stats.add(&c.text);
            self.chunks.push(c);
        }
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Statistics agree with a from-scratch rebuild over the same chunks.
    pub fn is_consistent(&self) -> bool {
        self.stats == TermStats::from_texts(self.chunks.iter().map(|c| c.text.as_str()))
    }

    /// Top `k` chunks with a positive score, ties broken by `(doc_id, chunk_id)`.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<Hit> {
        let scores = self.stats.scores(query, self.params);
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|(i, a), (j, b)| {
            b.total_cmp(a).then_with(|| {
                let (x, y) = (&self.chunks[*i], &self.chunks[*j]);
                (&x.doc_id, x.chunk_id).cmp(&(&y.doc_id, y.chunk_id))
            })
        });
        ranked
            .into_iter()
            .take(k)
            .map(|(i, score)| Hit {
                chunk: self.chunks[i].clone(),
                score,
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(path, text + "\n")
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let idx: CorpusIndex =
            serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        if !idx.is_consistent() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: term statistics disagree with chunks", path.display()),
            ));
        }
        Ok(idx)
    }
}

fn markdown_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            markdown_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("md")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Ingest every `*.md` under `dir` in path order. Document ids are paths
/// relative to `dir` with `/` separators.
pub fn ingest_dir(dir: &Path, mut hook: Option<&mut dyn DiagramDescriber>) -> io::Result<CorpusIndex> {
    let mut files = Vec::new();
    markdown_files(dir, &mut files)?;
    files.sort();
    let mut idx = CorpusIndex::new(Bm25Params::default());
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(&f);
        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let text = fs::read_to_string(&f)?;
        let h = hook.as_mut().map(|h| &mut **h as &mut dyn DiagramDescriber);
        idx.add_chunks(ingest_document(&id, &text, h));
    }
    Ok(idx)
}
