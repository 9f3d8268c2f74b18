//! Okapi BM25 with the Lucene idf, `ln(1 + (N - df + 0.5) / (df + 0.5))`,
//! which stays positive for terms present in every document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Case-fold and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTerms {
    pub counts: BTreeMap<String, u32>,
    pub len: u32,
}

/// Collection statistics: per-document term counts plus document frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermStats {
    pub doc_freq: BTreeMap<String, u32>,
    pub docs: Vec<DocTerms>,
    pub total_len: u64,
}

impl TermStats {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut s = TermStats::default();
        for t in texts {
            s.add(t);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Append a document; returns its position.
    pub fn add(&mut self, text: &str) -> usize {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        let tokens = tokenize(text);
        for t in &tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for term in counts.keys() {
            *self.doc_freq.entry(term.clone()).or_default() += 1;
        }
        self.total_len += tokens.len() as u64;
        self.docs.push(DocTerms {
            counts,
            len: tokens.len() as u32,
        });
        self.docs.len() - 1
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Score every document against `query`. Repeated query terms count once.
    pub fn scores(&self, query: &str, p: Bm25Params) -> Vec<f64> {
        let mut out = vec![0.0; self.docs.len()];
        if self.docs.is_empty() {
            return out;
        }
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        let avgdl = self.total_len as f64 / self.docs.len() as f64;
        for term in terms.iter().filter(|t| self.doc_freq.contains_key(*t)) {
            let idf = self.idf(term);
            for (score, doc) in out.iter_mut().zip(&self.docs) {
                let Some(&tf) = doc.counts.get(term) else { continue };
                let tf = tf as f64;
                let norm = if avgdl > 0.0 { doc.len as f64 / avgdl } else { 0.0 };
                *score += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
            }
        }
        out
    }
}
