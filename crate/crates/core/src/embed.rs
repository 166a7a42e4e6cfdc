//! Word-vector similarity and windowed co-occurrence statistics (NPMI).

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::schema::SchemaNode;

pub const DEFAULT_EPS: f64 = 1e-12;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("undefined similarity: zero vector")]
    ZeroVector,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no embedding for any token of node {0}")]
    NoTokens(String),
    #[error("zero unigram count for {0:?}")]
    ZeroUnigram(String),
    #[error("embedding file line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::LengthMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Word vectors of one fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, v: Vec<f64>) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::LengthMismatch(v.len(), self.dim));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::Format {
                line: 0,
                detail: "non-finite component".into(),
            });
        }
        self.table.insert(word.into(), v);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(word).map(Vec::as_slice)
    }

    /// Reads the word2vec text layout: a `<vocab> <dim>` header, then one
    /// `<word> <v1> ... <vdim>` line per word.
    pub fn read(reader: impl BufRead) -> Result<Self, EmbedError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or(EmbedError::Format {
            line: 1,
            detail: "missing header".into(),
        })?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| EmbedError::Format {
                line: 1,
                detail: format!("bad header: {e}"),
            })?;
        let [vocab, dim] = nums[..] else {
            return Err(EmbedError::Format {
                line: 1,
                detail: "header must be `<vocab_size> <dim>`".into(),
            });
        };
        if dim == 0 {
            return Err(EmbedError::Format {
                line: 1,
                detail: "dim must be positive".into(),
            });
        }
        let mut store = EmbeddingStore::new(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|s| !s.is_empty());
            let word = parts.next().unwrap_or_default().to_string();
            let v: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| EmbedError::Format {
                    line: i + 2,
                    detail: format!("{e}"),
                })?;
            store.insert(word, v).map_err(|e| EmbedError::Format {
                line: i + 2,
                detail: e.to_string(),
            })?;
        }
        if store.len() != vocab {
            log::warn!(
                "embedding header declares {vocab} words, read {}",
                store.len()
            );
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// The word2vec text layout with words in sorted order.
    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.table.keys().collect();
        words.sort();
        let mut s = format!("{} {}\n", words.len(), self.dim);
        for w in words {
            s.push_str(w);
            for x in &self.table[w] {
                s.push(' ');
                s.push_str(&x.to_string());
            }
            s.push('\n');
        }
        s
    }
}

/// Mean vector of a node's name tokens, with the tokens that had no vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVector {
    pub vector: Vec<f64>,
    pub skipped: Vec<String>,
}

pub fn node_vector(node: &SchemaNode, store: &EmbeddingStore) -> Result<NodeVector, EmbedError> {
    let mut sum = vec![0.0; store.dim()];
    let mut found = 0usize;
    let mut skipped = Vec::new();
    for tok in node.name.tokens() {
        match store.get(tok) {
            Some(v) => {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
            None => skipped.push(tok.clone()),
        }
    }
    if found == 0 {
        return Err(EmbedError::NoTokens(node.name.to_string()));
    }
    if !skipped.is_empty() {
        log::warn!("node {}: no vector for {:?}", node.name, skipped);
    }
    for s in &mut sum {
        *s /= found as f64;
    }
    Ok(NodeVector {
        vector: sum,
        skipped,
    })
}

fn pair_key<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Window-level co-occurrence counts.
///
/// Every token position opens one window covering that token and the next
/// `window` tokens (truncated at the sentence end). `unigram(w)` counts the
/// windows containing `w`, `pair(w, w')` the windows containing both (for
/// `w == w'`, at least two occurrences), and `total` the number of windows.
/// Probabilities are counts over `total`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoocTable {
    window: usize,
    unigram: BTreeMap<String, u64>,
    pair: BTreeMap<(String, String), u64>,
    total: u64,
}

impl CoocTable {
    /// A table from explicit counts. Pair keys are unordered.
    pub fn from_counts(
        window: usize,
        total: u64,
        unigram: impl IntoIterator<Item = (String, u64)>,
        pairs: impl IntoIterator<Item = ((String, String), u64)>,
    ) -> Self {
        let pair = pairs
            .into_iter()
            .map(|((a, b), c)| {
                let (x, y) = pair_key(&a, &b);
                ((x.to_string(), y.to_string()), c)
            })
            .collect();
        CoocTable {
            window,
            unigram: unigram.into_iter().collect(),
            pair,
            total,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unigram(&self, w: &str) -> u64 {
        self.unigram.get(w).copied().unwrap_or(0)
    }

    pub fn pair(&self, a: &str, b: &str) -> u64 {
        let (x, y) = pair_key(a, b);
        // BTreeMap<(String, String)> cannot be probed with borrowed tuples
        self.pair
            .get(&(x.to_string(), y.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Words with a nonzero count, sorted.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.unigram
            .iter()
            .filter(|(_, c)| **c > 0)
            .map(|(w, _)| w.as_str())
    }
}

pub fn build_cooc<S: AsRef<str>>(corpus: &[Vec<S>], window: usize) -> CoocTable {
    let window = window.max(1);
    let mut unigram: BTreeMap<String, u64> = BTreeMap::new();
    let mut pair: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut total = 0u64;
    for sent in corpus {
        for i in 0..sent.len() {
            total += 1;
            let end = (i + window + 1).min(sent.len());
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &sent[i..end] {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
            for w in counts.keys() {
                *unigram.entry(w.to_string()).or_default() += 1;
            }
            let words: Vec<(&str, u32)> = counts.into_iter().collect();
            for (a, (wa, ca)) in words.iter().enumerate() {
                if *ca >= 2 {
                    *pair.entry((wa.to_string(), wa.to_string())).or_default() += 1;
                }
                for (wb, _) in &words[a + 1..] {
                    *pair.entry((wa.to_string(), wb.to_string())).or_default() += 1;
                }
            }
        }
    }
    CoocTable {
        window,
        unigram,
        pair,
        total,
    }
}

/// Normalized PMI with smoothing `eps`, raised to `gamma`:
/// `(ln((p_ij + eps) / (p_i p_j)) / -ln(p_ij + eps))^gamma`.
///
/// Limits: never co-occurring with `eps = 0` gives -1; a pair present in
/// every window (`p_ij + eps = 1`) gives 1. Negative bases keep their sign
/// under the power.
pub fn npmi(
    wi: &str,
    wj: &str,
    table: &CoocTable,
    eps: f64,
    gamma: f64,
) -> Result<f64, EmbedError> {
    for w in [wi, wj] {
        if table.unigram(w) == 0 || table.total() == 0 {
            return Err(EmbedError::ZeroUnigram(w.to_string()));
        }
    }
    let total = table.total() as f64;
    let pi = table.unigram(wi) as f64 / total;
    let pj = table.unigram(wj) as f64 / total;
    let pij = table.pair(wi, wj) as f64 / total + eps;
    let base = if pij <= 0.0 {
        -1.0
    } else if pij >= 1.0 {
        1.0
    } else {
        (pij / (pi * pj)).ln() / -pij.ln()
    };
    Ok(base.signum() * base.abs().powf(gamma))
}

/// For each lexicon word `w_j`, the sum over `candidates` of `npmi(w_i, w_j)`.
/// Gamma is applied once, inside [`npmi`].
pub fn analogy_scores<S: AsRef<str>, T: AsRef<str>>(
    candidates: &[S],
    lexicon: &[T],
    table: &CoocTable,
    eps: f64,
    gamma: f64,
) -> Result<Vec<f64>, EmbedError> {
    lexicon
        .iter()
        .map(|wj| {
            candidates
                .iter()
                .map(|wi| npmi(wi.as_ref(), wj.as_ref(), table, eps, gamma))
                .sum()
        })
        .collect()
}
