//! Pretrained vector space models: storage, lookup and exact cosine search.
//!
//! A [`VectorSpaceModel`] stores its rows as 32-bit floats in one row-major
//! buffer together with per-row L2 norms. All scoring accumulates in 64-bit.
//! Rankings are always taken over the full vocabulary; nothing is filtered.

mod format;
mod kernel;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{
    load_vsm, load_vsm_with, read_cache, write_cache, write_glove_text, VsmFormat,
};
pub use kernel::{dot_mixed, dot_f64};

/// A dense embedding-space vector. Query points and training rows are
/// handled in 64-bit even though stored rows are 32-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordVector(pub Vec<f64>);

impl WordVector {
    pub fn zeros(dim: usize) -> Self {
        WordVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        dot_f64(&self.0, &self.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn sub(&self, other: &WordVector) -> WordVector {
        WordVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &WordVector) -> WordVector {
        WordVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self + scale * other`
    pub fn add_scaled(&self, scale: f64, other: &WordVector) -> WordVector {
        WordVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn scaled(&self, scale: f64) -> WordVector {
        WordVector(self.0.iter().map(|a| a * scale).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WordVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for WordVector {
    fn from(v: Vec<f64>) -> Self {
        WordVector(v)
    }
}

impl From<&[f32]> for WordVector {
    fn from(v: &[f32]) -> Self {
        WordVector(v.iter().map(|&x| x as f64).collect())
    }
}

/// Cosine similarity of two vectors of equal dimension.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = dot_f64(a, a).sqrt();
    let nb = dot_f64(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::numeric("cosine of a zero vector"));
    }
    Ok((dot_f64(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Euclidean distance between two vectors of equal dimension.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMode {
    Exact,
    #[default]
    LowercaseFallback,
}

impl FromStr for CaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CaseMode::Exact),
            "lowercase_fallback" => Ok(CaseMode::LowercaseFallback),
            other => Err(Error::invalid(format!("unknown case mode {other:?}"))),
        }
    }
}

impl fmt::Display for CaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseMode::Exact => "exact",
            CaseMode::LowercaseFallback => "lowercase_fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedToken {
    pub token: String,
    pub score: f64,
}

/// Immutable token to vector store.
#[derive(Debug, Clone)]
pub struct VectorSpaceModel {
    name: String,
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    norms: Vec<f64>,
    case_mode: CaseMode,
    duplicates_dropped: usize,
}

/// Accumulates rows while a model is being read.
///
/// Later duplicates of a token are dropped and counted. Zero-norm and
/// non-finite rows are rejected.
#[derive(Debug)]
pub struct VsmBuilder {
    name: String,
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    norms: Vec<f64>,
    duplicates_dropped: usize,
}

#[derive(Debug)]
pub enum PushError {
    DimMismatch { expected: usize, found: usize },
    NonFinite,
    ZeroNorm,
}

impl fmt::Display for PushError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PushError::DimMismatch { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            PushError::NonFinite => f.write_str("non-finite component"),
            PushError::ZeroNorm => f.write_str("zero-norm vector"),
        }
    }
}

impl VsmBuilder {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        VsmBuilder {
            name: name.into(),
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            matrix: Vec::new(),
            norms: Vec::new(),
            duplicates_dropped: 0,
        }
    }

    pub fn with_capacity(name: impl Into<String>, dim: usize, rows: usize) -> Self {
        let mut b = Self::new(name, dim);
        b.tokens.reserve(rows);
        b.index.reserve(rows);
        b.matrix.reserve(rows * dim);
        b.norms.reserve(rows);
        b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Returns `Ok(false)` when the token was already present and the row
    /// was dropped.
    pub fn push(&mut self, token: &str, row: &[f32]) -> std::result::Result<bool, PushError> {
        if row.len() != self.dim {
            return Err(PushError::DimMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(PushError::NonFinite);
        }
        if self.index.contains_key(token) {
            self.duplicates_dropped += 1;
            return Ok(false);
        }
        let norm = kernel::norm_f32(row);
        if norm == 0.0 {
            return Err(PushError::ZeroNorm);
        }
        self.index.insert(token.to_owned(), self.tokens.len());
        self.tokens.push(token.to_owned());
        self.matrix.extend_from_slice(row);
        self.norms.push(norm);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn finish(self, case_mode: CaseMode) -> Result<VectorSpaceModel> {
        if self.tokens.is_empty() {
            return Err(Error::invalid(format!("vector space model {:?} is empty", self.name)));
        }
        if self.duplicates_dropped > 0 {
            log::warn!(
                "{}: dropped {} duplicate token rows (kept first occurrence)",
                self.name,
                self.duplicates_dropped
            );
        }
        Ok(VectorSpaceModel {
            name: self.name,
            dim: self.dim,
            tokens: self.tokens,
            index: self.index,
            matrix: self.matrix,
            norms: self.norms,
            case_mode,
            duplicates_dropped: self.duplicates_dropped,
        })
    }
}

impl VectorSpaceModel {
    /// Builds a model from `(token, row)` pairs held in memory.
    pub fn from_rows<S, R>(
        name: &str,
        rows: impl IntoIterator<Item = (S, R)>,
        case_mode: CaseMode,
    ) -> Result<Self>
    where
        S: AsRef<str>,
        R: AsRef<[f32]>,
    {
        let mut builder: Option<VsmBuilder> = None;
        for (i, (token, row)) in rows.into_iter().enumerate() {
            let row = row.as_ref();
            let b = builder.get_or_insert_with(|| VsmBuilder::new(name, row.len()));
            if b.dim() == 0 {
                return Err(Error::invalid("zero-dimensional rows"));
            }
            b.push(token.as_ref(), row).map_err(|e| {
                Error::invalid(format!("row {i} ({:?}): {e}", token.as_ref()))
            })?;
        }
        builder
            .ok_or_else(|| Error::invalid(format!("vector space model {name:?} is empty")))?
            .finish(case_mode)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn case_mode(&self) -> CaseMode {
        self.case_mode
    }

    pub fn set_case_mode(&mut self, mode: CaseMode) {
        self.case_mode = mode;
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, row: usize) -> &str {
        &self.tokens[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.matrix[row * self.dim..(row + 1) * self.dim]
    }

    pub fn norm(&self, row: usize) -> f64 {
        self.norms[row]
    }

    pub fn vector(&self, row: usize) -> WordVector {
        WordVector::from(self.row(row))
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    /// Row index for `token`, honoring the case mode.
    pub fn row_of(&self, token: &str) -> Option<usize> {
        if let Some(&i) = self.index.get(token) {
            return Some(i);
        }
        match self.case_mode {
            CaseMode::Exact => None,
            CaseMode::LowercaseFallback => {
                let lower = token.to_lowercase();
                if lower == token {
                    None
                } else {
                    self.index.get(&lower).copied()
                }
            }
        }
    }

    /// `None` marks an out-of-vocabulary token.
    pub fn lookup(&self, token: &str) -> Option<WordVector> {
        self.row_of(token).map(|i| self.vector(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.row_of(token).is_some()
    }

    fn check_query(&self, query: &[f64]) -> Result<f64> {
        if query.len() != self.dim {
            return Err(Error::invalid(format!(
                "query has dimension {}, model has {}",
                query.len(),
                self.dim
            )));
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("query vector has non-finite components"));
        }
        let qn = dot_f64(query, query).sqrt();
        if qn == 0.0 {
            return Err(Error::numeric("zero query vector"));
        }
        Ok(qn)
    }

    /// Cosine of `query` against every row, in row order.
    pub fn score_all(&self, query: &[f64]) -> Result<Vec<f64>> {
        let qn = self.check_query(query)?;
        let dim = self.dim;
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(4096)
            .enumerate()
            .for_each(|(chunk, slot)| {
                let start = chunk * 4096;
                for (j, s) in slot.iter_mut().enumerate() {
                    let i = start + j;
                    let row = &self.matrix[i * dim..(i + 1) * dim];
                    *s = dot_mixed(row, query) / (self.norms[i] * qn);
                }
            });
        Ok(out)
    }

    /// Raw dot products `w . row + b` for every row.
    pub fn affine_all(&self, w: &[f64], b: f64) -> Result<Vec<f64>> {
        if w.len() != self.dim {
            return Err(Error::invalid("weight dimension mismatch"));
        }
        let dim = self.dim;
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(4096)
            .enumerate()
            .for_each(|(chunk, slot)| {
                let start = chunk * 4096;
                for (j, s) in slot.iter_mut().enumerate() {
                    let i = start + j;
                    *s = dot_mixed(&self.matrix[i * dim..(i + 1) * dim], w) + b;
                }
            });
        Ok(out)
    }

    /// The `k` rows most cosine-similar to `query`; ties go to the lower row.
    pub fn top_k_cosine(&self, query: &[f64], k: usize) -> Result<Vec<RankedToken>> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "k must be in 1..={}, got {k}",
                self.len()
            )));
        }
        let scores = self.score_all(query)?;
        Ok(top_k_indices(&scores, k)
            .into_iter()
            .map(|i| RankedToken {
                token: self.tokens[i].clone(),
                score: scores[i],
            })
            .collect())
    }
}

/// Descending by score, ascending by index on ties.
#[inline]
pub fn ranking_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Indices of the `k` best scores in ranking order.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    if k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| ranking_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| ranking_order(scores, a, b));
    idx
}

/// 1-based position of `target` in the full ranking induced by `scores`.
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < target))
        .count()
}
