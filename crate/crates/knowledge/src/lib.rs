//! Design knowledge: a BM25 scorer shared by the document index ([`darag`])
//! and the store of solved circuits ([`ctt`]).

pub mod bm25;
pub mod ctt;
pub mod darag;

pub use bm25::{tokenize, Bm25Params, TermStats};
pub use ctt::{entry_id, CttEntry, CttError, CttStore, CttView, StageRecord};
pub use darag::{
    ingest_dir, ingest_document, BackendDescriber, Chunk, ChunkKind, CorpusIndex, DiagramDescriber, Hit,
    MAX_CHUNK_CHARS,
};
