//! Leave-one-out evaluation and retrieval metrics.
//!
//! Every resolved pair of a category is held out once; the model is fit on
//! the remaining pairs and the full vocabulary is ranked for the held-out
//! source. Gold ranks always come from the full ranking; `k_eval` only
//! limits how many ranked tokens are kept for display.
//!
//! Dataset metrics are micro-averaged: hits and possible golds are pooled
//! over all queries, and MAP is the mean AP over all queries.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{RelationPair, ResolvedCategory};
use crate::error::{Error, Result};
use crate::relmodels::{fit, query_point, score_tokens, ModelConfig, ModelKind, NeighborCache};
use crate::seed::derive_seed;
use crate::vsm::{rank_of, top_k_indices, RankedToken, VectorSpaceModel};

/// Rank cutoff used for sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensitivityCutoff {
    /// The number of gold targets of the query.
    #[default]
    GoldCount,
    Fixed(usize),
}

impl SensitivityCutoff {
    pub fn cutoff(self, n_gold: usize) -> usize {
        match self {
            SensitivityCutoff::GoldCount => n_gold,
            SensitivityCutoff::Fixed(k) => k,
        }
    }
}

impl fmt::Display for SensitivityCutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensitivityCutoff::GoldCount => f.write_str("gold_count"),
            SensitivityCutoff::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for SensitivityCutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gold_count" {
            return Ok(SensitivityCutoff::GoldCount);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(SensitivityCutoff::Fixed(k)),
            _ => Err(Error::invalid(format!(
                "sensitivity cutoff must be `gold_count` or a positive integer, got {s:?}"
            ))),
        }
    }
}

impl Serialize for SensitivityCutoff {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SensitivityCutoff {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k_eval: usize,
    pub k_sens: SensitivityCutoff,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_eval: 10,
            k_sens: SensitivityCutoff::GoldCount,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldPosition {
    pub token: String,
    /// 1-based rank in the full-vocabulary ranking.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub category_id: String,
    pub held_out_source: String,
    pub gold_targets: Vec<String>,
    pub ranking: Vec<RankedToken>,
    pub gold_positions: Vec<GoldPosition>,
    pub hits: usize,
    pub possible: usize,
    pub average_precision: f64,
}

/// Folds of one category, or the reason it was skipped.
#[derive(Debug, Clone)]
pub struct CategoryEval {
    pub category_id: String,
    pub category_name: String,
    pub n_pairs: usize,
    pub n_dropped: usize,
    pub folds: Vec<FoldResult>,
    pub skipped: Option<String>,
}

/// `(1 / n_gold) * sum over retrieved golds of (golds at rank <= r) / r`.
pub fn average_precision(gold_positions: &[usize], n_gold: usize) -> Result<f64> {
    if n_gold == 0 {
        return Err(Error::invalid("average precision needs at least one gold target"));
    }
    if gold_positions.len() > n_gold {
        return Err(Error::invalid("more gold positions than gold targets"));
    }
    if gold_positions.first().is_some_and(|&r| r == 0)
        || gold_positions.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::invalid("gold positions must be 1-based and strictly increasing"));
    }
    let sum: f64 = gold_positions
        .iter()
        .enumerate()
        .map(|(i, &r)| (i + 1) as f64 / r as f64)
        .sum();
    Ok(sum / n_gold as f64)
}

/// `(golds within the first k_sens ranked tokens, number of golds)`.
pub fn sensitivity_at(
    gold_tokens: &HashSet<&str>,
    ranking: &[RankedToken],
    k_sens: usize,
) -> Result<(usize, usize)> {
    if gold_tokens.is_empty() {
        return Err(Error::invalid("sensitivity needs at least one gold target"));
    }
    let hits = ranking
        .iter()
        .take(k_sens)
        .filter(|r| gold_tokens.contains(r.token.as_str()))
        .count();
    Ok((hits, gold_tokens.len()))
}

pub fn f1(sensitivity: f64, map: f64) -> f64 {
    if sensitivity <= 0.0 || map <= 0.0 {
        0.0
    } else {
        2.0 * sensitivity * map / (sensitivity + map)
    }
}

fn fold_seed(base: u64, category: &str, pair: &RelationPair, cfg: &ModelConfig) -> u64 {
    derive_seed(base, &[category, &pair.source, &pair.targets.join("/"), &cfg.label()])
}

/// Neighbor lists deep enough for every fold of `category`.
pub fn neighbor_cache_for(
    category: &ResolvedCategory,
    vsm: &VectorSpaceModel,
    cfg: &ModelConfig,
) -> Result<Option<NeighborCache>> {
    if cfg.kind != ModelKind::SvmCos {
        return Ok(None);
    }
    let rows: BTreeSet<usize> = category
        .resolved_pairs
        .iter()
        .filter_map(|p| vsm.row_of(&p.source))
        .collect();
    let targets: BTreeSet<usize> = category
        .resolved_pairs
        .iter()
        .flat_map(|p| p.targets.iter().filter_map(|t| vsm.row_of(t)))
        .collect();
    let depth = cfg.n_unlabeled + targets.len() + 1;
    NeighborCache::build(vsm, &rows.into_iter().collect::<Vec<_>>(), depth).map(Some)
}

/// Fits on all pairs but `held_out` and scores the held-out query.
pub fn evaluate_fold(
    category: &ResolvedCategory,
    held_out: usize,
    vsm: &VectorSpaceModel,
    cfg: &ModelConfig,
    eval: &EvalConfig,
    neighbors: Option<&NeighborCache>,
) -> Result<FoldResult> {
    let pairs = &category.resolved_pairs;
    let query = &pairs[held_out];
    let train: Vec<RelationPair> = pairs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != held_out)
        .map(|(_, p)| p.clone())
        .collect();
    let mut fold_cfg = cfg.clone();
    fold_cfg.seed = fold_seed(eval.seed, category.id(), query, cfg);
    let model = fit(&train, vsm, &fold_cfg, neighbors)?;
    let qp = query_point(&model, &query.source, vsm)?;
    let scores = score_tokens(&model, &qp, vsm)?;

    let mut gold_rows: Vec<(usize, &str)> = Vec::new();
    for t in &query.targets {
        let row = vsm.row_of(t).ok_or_else(|| Error::Oov(t.clone()))?;
        if !gold_rows.iter().any(|(r, _)| *r == row) {
            gold_rows.push((row, t.as_str()));
        }
    }
    let mut gold_positions: Vec<GoldPosition> = gold_rows
        .iter()
        .map(|&(row, tok)| GoldPosition {
            token: tok.to_owned(),
            rank: rank_of(&scores, row),
        })
        .collect();
    gold_positions.sort_by_key(|g| g.rank);
    let ranks: Vec<usize> = gold_positions.iter().map(|g| g.rank).collect();
    let n_gold = gold_rows.len();
    let cutoff = eval.k_sens.cutoff(n_gold);
    let hits = ranks.iter().filter(|&&r| r <= cutoff).count();
    let average_precision = average_precision(&ranks, n_gold)?;
    let ranking = top_k_indices(&scores, eval.k_eval)
        .into_iter()
        .map(|i| RankedToken {
            token: vsm.token(i).to_owned(),
            score: scores[i],
        })
        .collect();

    Ok(FoldResult {
        category_id: category.id().to_owned(),
        held_out_source: query.source.clone(),
        gold_targets: gold_rows.iter().map(|(_, t)| t.to_string()).collect(),
        ranking,
        gold_positions,
        hits,
        possible: n_gold,
        average_precision,
    })
}

/// Leave-one-out over every resolved pair of `category`.
pub fn loo_evaluate(
    category: &ResolvedCategory,
    vsm: &VectorSpaceModel,
    cfg: &ModelConfig,
    eval: &EvalConfig,
) -> Result<CategoryEval> {
    let mut out = CategoryEval {
        category_id: category.id().to_owned(),
        category_name: category.category.name.clone(),
        n_pairs: category.category.pairs.len(),
        n_dropped: category.dropped.len(),
        folds: Vec::new(),
        skipped: None,
    };
    let n = category.resolved_pairs.len();
    if n < 2 {
        let reason = format!("only {n} resolved pair(s); leave-one-out needs at least 2");
        log::warn!("skipping category {}: {reason}", category.id());
        out.skipped = Some(reason);
        return Ok(out);
    }
    let cache = neighbor_cache_for(category, vsm, cfg)?;
    let mut folds = (0..n)
        .into_par_iter()
        .map(|i| evaluate_fold(category, i, vsm, cfg, eval, cache.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    folds.sort_by(|a, b| {
        (&a.held_out_source, &a.gold_targets).cmp(&(&b.held_out_source, &b.gold_targets))
    });
    out.folds = folds;
    Ok(out)
}

/// Evaluates each category; results are in category-id order.
pub fn evaluate_dataset(
    categories: &[ResolvedCategory],
    vsm: &VectorSpaceModel,
    cfg: &ModelConfig,
    eval: &EvalConfig,
) -> Result<Vec<CategoryEval>> {
    let mut out = categories
        .iter()
        .map(|c| loo_evaluate(c, vsm, cfg, eval))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.category_id.cmp(&b.category_id));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub id: String,
    pub name: String,
    pub sensitivity: f64,
    pub map: f64,
    pub f1: f64,
    pub n_queries: usize,
    pub n_pairs: usize,
    pub n_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub sensitivity: f64,
    pub map: f64,
    pub f1: f64,
    pub n_queries: usize,
    pub n_categories: usize,
}

/// Identifies the run a report belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub vsm: String,
    pub k_eval: usize,
    pub k_sens: SensitivityCutoff,
    pub seed: u64,
    /// Effective configuration, keyed by config-file key.
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    #[serde(flatten)]
    pub meta: ReportMeta,
    pub per_category: Vec<CategoryMetrics>,
    pub dataset: DatasetMetrics,
}

pub use crate::report::FORMAT_VERSION as REPORT_FORMAT_VERSION;

/// Per-category and micro-averaged dataset metrics.
pub fn aggregate(categories: &[CategoryEval], meta: ReportMeta) -> Result<MetricsReport> {
    let mut per_category = Vec::with_capacity(categories.len());
    let (mut hits, mut possible, mut ap_sum, mut queries) = (0usize, 0usize, 0.0f64, 0usize);
    let mut sorted: Vec<&CategoryEval> = categories.iter().collect();
    sorted.sort_by(|a, b| a.category_id.cmp(&b.category_id));
    for c in sorted {
        let h: usize = c.folds.iter().map(|f| f.hits).sum();
        let p: usize = c.folds.iter().map(|f| f.possible).sum();
        let ap: f64 = c.folds.iter().map(|f| f.average_precision).sum();
        let n = c.folds.len();
        let sens = if p > 0 { h as f64 / p as f64 } else { 0.0 };
        let map = if n > 0 { ap / n as f64 } else { 0.0 };
        per_category.push(CategoryMetrics {
            id: c.category_id.clone(),
            name: c.category_name.clone(),
            sensitivity: sens,
            map,
            f1: f1(sens, map),
            n_queries: n,
            n_pairs: c.n_pairs,
            n_dropped: c.n_dropped,
            skipped: c.skipped.clone(),
        });
        hits += h;
        possible += p;
        ap_sum += ap;
        queries += n;
    }
    if queries == 0 {
        return Err(Error::invalid("no evaluable queries in any category"));
    }
    let sensitivity = hits as f64 / possible as f64;
    let map = ap_sum / queries as f64;
    let n_categories = per_category.iter().filter(|c| c.n_queries > 0).count();
    Ok(MetricsReport {
        format_version: REPORT_FORMAT_VERSION,
        meta,
        per_category,
        dataset: DatasetMetrics {
            sensitivity,
            map,
            f1: f1(sensitivity, map),
            n_queries: queries,
            n_categories,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(tokens: &[&str]) -> Vec<RankedToken> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| RankedToken {
                token: t.to_string(),
                score: -(i as f64),
            })
            .collect()
    }

    #[test]
    fn ap_examples() {
        let oracle = 0.5 * (1.0 + 2.0 / 3.0);
        assert!((average_precision(&[1, 3], 2).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.8333).abs() < 1e-4);
        assert_eq!(average_precision(&[1], 1).unwrap(), 1.0);
        assert_eq!(average_precision(&[], 1).unwrap(), 0.0);
        assert!(average_precision(&[], 0).is_err());
        assert!(average_precision(&[3, 1], 2).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        let golds: HashSet<&str> = ["a", "b"].into_iter().collect();
        assert_eq!(sensitivity_at(&golds, &rt(&["a", "c", "b"]), 2).unwrap(), (1, 2));
        let one: HashSet<&str> = ["a"].into_iter().collect();
        assert_eq!(sensitivity_at(&one, &rt(&["a", "x"]), 1).unwrap(), (1, 1));
        assert_eq!(sensitivity_at(&one, &rt(&["x", "a"]), 1).unwrap(), (0, 1));
        assert!(sensitivity_at(&HashSet::new(), &rt(&["a"]), 1).is_err());
    }

    fn cat_eval(id: &str, folds: &[(usize, usize, f64)]) -> CategoryEval {
        CategoryEval {
            category_id: id.into(),
            category_name: id.into(),
            n_pairs: folds.len(),
            n_dropped: 0,
            folds: folds
                .iter()
                .map(|&(hits, possible, ap)| FoldResult {
                    category_id: id.into(),
                    held_out_source: String::new(),
                    gold_targets: vec![],
                    ranking: vec![],
                    gold_positions: vec![],
                    hits,
                    possible,
                    average_precision: ap,
                })
                .collect(),
            skipped: None,
        }
    }

    fn meta() -> ReportMeta {
        ReportMeta {
            model: "m".into(),
            vsm: "v".into(),
            k_eval: 10,
            k_sens: SensitivityCutoff::GoldCount,
            seed: 0,
            config: BTreeMap::new(),
        }
    }

    #[test]
    fn aggregate_examples() {
        let r = aggregate(&[cat_eval("A", &[(1, 1, 1.0), (0, 1, 0.0)])], meta()).unwrap();
        assert_eq!(r.dataset.sensitivity, 0.5);
        assert_eq!(r.dataset.map, 0.5);
        assert_eq!(r.dataset.f1, 0.5);

        let r = aggregate(&[cat_eval("A", &[(2, 2, 1.0)]), cat_eval("B", &[(1, 1, 1.0)])], meta())
            .unwrap();
        assert_eq!((r.dataset.sensitivity, r.dataset.map, r.dataset.f1), (1.0, 1.0, 1.0));

        assert!((f1(0.4, 0.6) - 0.48).abs() < 1e-12);
        assert_eq!(f1(0.0, 0.7), 0.0);
        assert!(aggregate(&[cat_eval("A", &[])], meta()).is_err());
    }

    #[test]
    fn micro_average_pools_queries() {
        // category A: 1 query, perfect; category B: 3 queries, all misses
        let r = aggregate(
            &[
                cat_eval("B", &[(0, 1, 0.0), (0, 1, 0.0), (0, 2, 0.0)]),
                cat_eval("A", &[(1, 1, 1.0)]),
            ],
            meta(),
        )
        .unwrap();
        assert_eq!(r.dataset.sensitivity, 0.2);
        assert_eq!(r.dataset.map, 0.25);
        assert_eq!(r.per_category[0].id, "A");
        assert_eq!(r.per_category[0].f1, 1.0);
    }

    #[test]
    fn cutoff_parsing() {
        assert_eq!("gold_count".parse::<SensitivityCutoff>().unwrap(), SensitivityCutoff::GoldCount);
        assert_eq!("5".parse::<SensitivityCutoff>().unwrap(), SensitivityCutoff::Fixed(5));
        assert!("0".parse::<SensitivityCutoff>().is_err());
        assert_eq!(SensitivityCutoff::GoldCount.cutoff(3), 3);
    }
}
