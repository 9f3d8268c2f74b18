use std::path::PathBuf;

use proptest::prelude::*;

use menter_knowledge::{
    ingest_dir, ingest_document, BackendDescriber, Bm25Params, Chunk, ChunkKind, CorpusIndex,
    MAX_CHUNK_CHARS,
};
use menter_llm::MockBackend;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn queries() -> Vec<String> {
    std::fs::read_to_string(fixtures().join("corpus_queries.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn chunk(doc: &str, id: usize, text: &str) -> Chunk {
    Chunk {
        doc_id: doc.into(),
        chunk_id: id,
        text: text.into(),
        kind: ChunkKind::Prose,
        source_span: 0..text.len(),
        figure_ref: None,
    }
}

/// Okapi BM25 written out term by term for a single-term query.
fn bm25_by_hand(tf: f64, len: f64, avgdl: f64, n: f64, df: f64) -> f64 {
    let (k1, b) = (1.2, 0.75);
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl))
}

#[test]
fn two_chunk_scores_match_closed_form() {
    let idx = CorpusIndex::from_chunks(
        Bm25Params::default(),
        vec![chunk("a", 0, "bandgap reference core"), chunk("b", 0, "bandgap bandgap core")],
    );
    let hits = idx.retrieve("bandgap", 10);
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0].chunk.doc_id, "b");
    let hi = bm25_by_hand(2.0, 3.0, 3.0, 2.0, 2.0);
    let lo = bm25_by_hand(1.0, 3.0, 3.0, 2.0, 2.0);
    assert!((hits[0].score - hi).abs() <= 1e-12);
    assert!((hits[1].score - lo).abs() <= 1e-12);
    // With equal lengths the ratio is (2(k1+1)/(2+k1)) / ((k1+1)/(1+k1)) = 2.2/1.6.
    assert!((hits[0].score / hits[1].score - 4.4 / 3.2).abs() <= 1e-12);
}

#[test]
fn unique_term_wins_and_absent_terms_return_nothing() {
    let idx = CorpusIndex::from_chunks(
        Bm25Params::default(),
        vec![
            chunk("d", 0, "current mirror output resistance"),
            chunk("d", 1, "bandgap reference startup"),
            chunk("d", 2, "folded cascode amplifier"),
        ],
    );
    assert_eq!(idx.retrieve("bandgap", 3)[0].chunk.chunk_id, 1);
    assert!(idx.retrieve("phase locked loop", 3).is_empty());
    assert!(CorpusIndex::default().retrieve("bandgap", 3).is_empty());
}

#[test]
fn ties_break_on_document_then_chunk() {
    let idx = CorpusIndex::from_chunks(
        Bm25Params::default(),
        vec![chunk("z", 0, "mirror"), chunk("a", 1, "mirror"), chunk("a", 0, "mirror"), chunk("q", 0, "other")],
    );
    let order: Vec<(String, usize)> =
        idx.retrieve("mirror", 10).into_iter().map(|h| (h.chunk.doc_id, h.chunk.chunk_id)).collect();
    assert_eq!(order, [("a".into(), 0), ("a".into(), 1), ("z".into(), 0)]);
}

#[test]
fn fixture_corpus_incremental_equals_rebuild() {
    let idx = ingest_dir(&fixtures().join("corpus"), None).unwrap();
    assert_eq!(idx.len(), 50);
    assert_eq!(idx.chunks.iter().filter(|c| c.kind == ChunkKind::DiagramDescription).count(), 5);
    let rebuilt = CorpusIndex::from_chunks(idx.params, idx.chunks.clone());
    assert_eq!(rebuilt, idx);
    assert!(idx.is_consistent());
    let qs = queries();
    assert_eq!(qs.len(), 20);
    for q in &qs {
        let a = idx.retrieve(q, 10);
        assert!(!a.is_empty(), "{q}");
        assert_eq!(a, rebuilt.retrieve(q, 10), "{q}");
    }
    assert_eq!(idx.retrieve("bandgap reference temperature", 1)[0].chunk.doc_id, "bandgap.md");
    assert_eq!(idx.retrieve("figure schematic", 10).len(), 10);
}

#[test]
fn index_survives_save_and_load() {
    let idx = ingest_dir(&fixtures().join("corpus"), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    idx.save(&path).unwrap();
    assert_eq!(CorpusIndex::load(&path).unwrap(), idx);

    let mut tampered = idx.clone();
    tampered.stats.total_len += 1;
    tampered.save(&path).unwrap();
    assert!(CorpusIndex::load(&path).is_err());
}

#[test]
fn diagram_hook_supplies_description() {
    let doc = "# Mirror\n![m](fig.png)\n";
    let mut hook = BackendDescriber::new(Box::new(MockBackend::new(vec!["cascode current mirror schematic".into()])));
    let chunks = ingest_document("d", doc, Some(&mut hook));
    assert_eq!(chunks.len(), 2);
    assert_eq!(chunks[1].kind, ChunkKind::DiagramDescription);
    assert_eq!(chunks[1].text, "cascode current mirror schematic");

    // The script is spent, so the next figure falls back to its placeholder.
    let again = ingest_document("d", doc, Some(&mut hook));
    assert_eq!(again[1].text, "figure: m");
}

#[test]
fn examples_from_the_chunking_contract() {
    let two = ingest_document("d", "# A\nalpha\n# B\nbeta\n", None);
    assert_eq!(two.len(), 2);
    assert!(two.iter().all(|c| c.kind == ChunkKind::Prose));
    let fig = ingest_document("d", "![opamp symbol](x.svg)", None);
    assert_eq!(fig.len(), 1);
    assert_eq!(fig[0].text, "figure: opamp symbol");
}

fn block() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}( [a-z]{1,8}){0,20}".prop_map(|s| format!("{s}\n")),
        "[A-Za-z ]{0,10}".prop_map(|s| format!("# {s}\n")),
        "[a-z ]{0,10}".prop_map(|alt| format!("![{alt}](f/{}.png)", alt.len())),
        Just("\n".to_string()),
        Just("```\n# fenced\n```\n".to_string()),
        (1usize..400).prop_map(|n| format!("{}\n\n", "lorem ipsum ".repeat(n))),
        Just("  \t\n".to_string()),
        Just("µ-amp ±5 Ω\n".to_string()),
    ]
}

proptest! {
    #[test]
    fn spans_partition_the_document(blocks in prop::collection::vec(block(), 0..25)) {
        let doc: String = blocks.concat();
        let chunks = ingest_document("d", &doc, None);
        if doc.trim().is_empty() {
            prop_assert!(chunks.is_empty());
        } else {
            prop_assert_eq!(chunks[0].source_span.start, 0);
            prop_assert_eq!(chunks.last().unwrap().source_span.end, doc.len());
            for w in chunks.windows(2) {
                prop_assert_eq!(w[0].source_span.end, w[1].source_span.start);
            }
        }
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.chunk_id, i);
            prop_assert!(!c.text.trim().is_empty());
            prop_assert!(c.source_span.start < c.source_span.end);
            if c.kind == ChunkKind::Prose {
                prop_assert!(c.text.chars().count() <= MAX_CHUNK_CHARS);
                prop_assert!(doc[c.source_span.clone()].contains(&c.text));
            } else {
                prop_assert!(c.figure_ref.is_some());
            }
        }
    }

    #[test]
    fn incremental_build_matches_rebuild(texts in prop::collection::vec("[a-d ]{1,30}", 1..30), q in "[a-d ]{1,8}") {
        let chunks: Vec<Chunk> = texts.iter().enumerate().map(|(i, t)| chunk("d", i, t)).collect();
        let mut inc = CorpusIndex::new(Bm25Params::default());
        for c in chunks.clone() {
            inc.add_chunks([c]);
        }
        let full = CorpusIndex::from_chunks(Bm25Params::default(), chunks);
        prop_assert_eq!(&inc, &full);
        prop_assert_eq!(inc.retrieve(&q, 10), full.retrieve(&q, 10));
    }
}
