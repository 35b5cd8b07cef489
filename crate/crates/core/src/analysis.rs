//! Offset geometry and query-point diagnostics.
//!
//! Offsets are `target - source` vectors. Their mean pairwise cosine shows
//! how far a relation is from a constant offset. The diagnostics record,
//! per held-out query and model, how far the query point lies from the gold
//! targets (Euclidean), how well it aligns with them (cosine), and how it
//! aligns with nearby non-targets, as plot-ready rows.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{RelationPair, ResolvedCategory};
use crate::error::{Error, Result};
use crate::numerics::percentile;
use crate::relmodels::{fit, query_point, ModelConfig};
use crate::report::fmt_sig9;
use crate::seed::derive_seed;
use crate::vsm::{cosine, dot_f64, euclidean, top_k_indices, VectorSpaceModel, WordVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetStats {
    pub category_id: String,
    pub n_offsets: usize,
    /// Number of unordered offset pairs compared.
    pub n_comparisons: usize,
    pub mean_pairwise_cosine: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

/// `target - source` for every resolved (source, target) alternative.
/// Zero-length offsets (a target sharing the source's row) are skipped.
pub fn offsets(category: &ResolvedCategory, vsm: &VectorSpaceModel) -> Result<Vec<WordVector>> {
    let mut out = Vec::new();
    for p in &category.resolved_pairs {
        let s = vsm.lookup(&p.source).ok_or_else(|| Error::Oov(p.source.clone()))?;
        for t in &p.targets {
            let t = vsm.lookup(t).ok_or_else(|| Error::Oov(t.clone()))?;
            let o = t.sub(&s);
            if o.norm() > 0.0 {
                out.push(o);
            }
        }
    }
    Ok(out)
}

/// Cosines over all unordered distinct pairs of `vectors`.
pub fn pairwise_cosines(vectors: &[WordVector]) -> Result<Vec<f64>> {
    // squared norms, so identical vectors give exactly 1
    let sq: Vec<f64> = vectors.iter().map(|v| dot_f64(v, v)).collect();
    if sq.iter().any(|&n| n == 0.0) {
        return Err(Error::numeric("zero-length offset"));
    }
    let mut out = Vec::with_capacity(vectors.len() * vectors.len().saturating_sub(1) / 2);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let c = dot_f64(&vectors[i], &vectors[j]) / (sq[i] * sq[j]).sqrt();
            out.push(c.clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

fn summarize(id: &str, n_offsets: usize, cosines: &[f64]) -> Result<OffsetStats> {
    if cosines.is_empty() {
        return Err(Error::invalid(format!(
            "{id}: need at least two offsets for pairwise statistics"
        )));
    }
    Ok(OffsetStats {
        category_id: id.to_owned(),
        n_offsets,
        n_comparisons: cosines.len(),
        mean_pairwise_cosine: cosines.iter().sum::<f64>() / cosines.len() as f64,
        min: percentile(cosines, 0.0)?,
        p25: percentile(cosines, 25.0)?,
        median: percentile(cosines, 50.0)?,
        p75: percentile(cosines, 75.0)?,
        max: percentile(cosines, 100.0)?,
    })
}

pub fn offset_stats_of(id: &str, offsets: &[WordVector]) -> Result<OffsetStats> {
    summarize(id, offsets.len(), &pairwise_cosines(offsets)?)
}

pub fn offset_stats(category: &ResolvedCategory, vsm: &VectorSpaceModel) -> Result<OffsetStats> {
    offset_stats_of(category.id(), &offsets(category, vsm)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    pub format_version: u32,
    pub vsm: String,
    pub per_category: BTreeMap<String, OffsetStats>,
    /// Pools the within-category comparisons of every category.
    pub dataset: OffsetStats,
    /// Mean pairwise cosine of offsets between random token pairs. Not part
    /// of the relation statistics; provided as a reference level.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub random_pair_baseline: Option<OffsetStats>,
    pub skipped: BTreeMap<String, String>,
}

/// Offset statistics for every category with at least two offsets.
pub fn offset_report(
    categories: &[ResolvedCategory],
    vsm: &VectorSpaceModel,
    random_baseline: Option<(usize, u64)>,
) -> Result<OffsetReport> {
    let mut per_category = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let mut pooled = Vec::new();
    let mut pooled_offsets = 0;
    for c in categories {
        let offs = offsets(c, vsm)?;
        if offs.len() < 2 {
            skipped.insert(c.id().to_owned(), format!("{} offset(s)", offs.len()));
            continue;
        }
        let cos = pairwise_cosines(&offs)?;
        per_category.insert(c.id().to_owned(), summarize(c.id(), offs.len(), &cos)?);
        pooled_offsets += offs.len();
        pooled.extend(cos);
    }
    let dataset = summarize("dataset", pooled_offsets, &pooled)?;
    let random_pair_baseline = random_baseline
        .map(|(n, seed)| random_offset_baseline(vsm, n, seed))
        .transpose()?;
    Ok(OffsetReport {
        format_version: crate::report::FORMAT_VERSION,
        vsm: vsm.name().to_owned(),
        per_category,
        dataset,
        random_pair_baseline,
        skipped,
    })
}

/// Offsets between `n` random disjoint token pairs.
pub fn random_offset_baseline(vsm: &VectorSpaceModel, n: usize, seed: u64) -> Result<OffsetStats> {
    if n < 2 || 2 * n > vsm.len() {
        return Err(Error::invalid(format!(
            "random baseline needs 2 <= n and 2n <= vocabulary size, got n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = index::sample(&mut rng, vsm.len(), 2 * n).into_vec();
    let offs: Vec<WordVector> = rows
        .chunks_exact(2)
        .map(|p| vsm.vector(p[1]).sub(&vsm.vector(p[0])))
        .collect();
    offset_stats_of("random_pairs", &offs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub model: String,
    pub category_id: String,
    pub source: String,
    pub target: String,
    pub euclid_qp_target: f64,
    pub cos_qp_target: f64,
    /// Cosines to the nearest non-gold tokens of the query point.
    pub cos_qp_nontargets: Vec<f64>,
}

/// Per held-out query and per model: query-point distances and cosines to
/// the gold targets and to nearby true negatives.
pub fn query_point_diagnostics(
    category: &ResolvedCategory,
    vsm: &VectorSpaceModel,
    models: &[ModelConfig],
    n_nontargets: usize,
    seed: u64,
) -> Result<Vec<DiagnosticsRecord>> {
    if n_nontargets == 0 {
        return Err(Error::invalid("n_nontargets must be positive"));
    }
    let pairs = &category.resolved_pairs;
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "category {} has {} resolved pair(s); diagnostics need at least 2",
            category.id(),
            pairs.len()
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|i| (0..models.len()).map(move |m| (i, m)))
        .collect();
    let caches = models
        .iter()
        .map(|cfg| crate::eval::neighbor_cache_for(category, vsm, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut records: Vec<(usize, Vec<DiagnosticsRecord>)> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let held = &pairs[i];
            let train: Vec<RelationPair> = pairs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let mut cfg = models[m].clone();
            cfg.seed = derive_seed(
                seed,
                &[category.id(), &held.source, &held.targets.join("/"), &cfg.label()],
            );
            let model = fit(&train, vsm, &cfg, caches[m].as_ref())?;
            let qp = query_point(&model, &held.source, vsm)?;

            let gold_rows: HashSet<usize> =
                held.targets.iter().filter_map(|t| vsm.row_of(t)).collect();
            let scores = vsm.score_all(&qp.vector)?;
            let nontargets: Vec<f64> = top_k_indices(&scores, n_nontargets + gold_rows.len())
                .into_iter()
                .filter(|r| !gold_rows.contains(r))
                .take(n_nontargets)
                .map(|r| scores[r])
                .collect();

            let recs = held
                .targets
                .iter()
                .map(|t| {
                    let tv = vsm.lookup(t).ok_or_else(|| Error::Oov(t.clone()))?;
                    Ok(DiagnosticsRecord {
                        model: cfg.label(),
                        category_id: category.id().to_owned(),
                        source: held.source.clone(),
                        target: t.clone(),
                        euclid_qp_target: euclidean(&qp.vector, &tv),
                        cos_qp_target: cosine(&qp.vector, &tv)?,
                        cos_qp_nontargets: nontargets.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((m, recs))
        })
        .collect::<Result<Vec<_>>>()?;

    records.sort_by(|(ma, a), (mb, b)| {
        let ka = a.first().map(|r| (&r.source, &r.target));
        let kb = b.first().map(|r| (&r.source, &r.target));
        ka.cmp(&kb).then(ma.cmp(mb))
    });
    Ok(records.into_iter().flat_map(|(_, r)| r).collect())
}

/// Long-format CSV: `model,category_id,metric,value`, one row per
/// measurement, values at 9 significant digits.
pub fn emit_kde_data<W: Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no diagnostics records to write"));
    }
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(["model", "category_id", "metric", "value"]).map_err(err)?;
    for r in records {
        let cat = r.category_id.as_str();
        w.write_record([&r.model, cat, "euclid_target", &fmt_sig9(r.euclid_qp_target)])
            .map_err(err)?;
        w.write_record([&r.model, cat, "cos_target", &fmt_sig9(r.cos_qp_target)])
            .map_err(err)?;
        for v in &r.cos_qp_nontargets {
            w.write_record([&r.model, cat, "cos_nontarget", &fmt_sig9(*v)])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV flush failed: {e}")))?;
    Ok(())
}

/// Medians of the three diagnostics for one model within one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticMedians {
    pub euclid_target: f64,
    pub cos_target: f64,
    pub cos_nontarget: f64,
}

/// Per-category median comparison between two models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianComparison {
    pub category_id: String,
    pub a: DiagnosticMedians,
    pub b: DiagnosticMedians,
}

impl MedianComparison {
    /// `a` lies further from the targets than `b`.
    pub fn further(&self) -> bool {
        self.a.euclid_target > self.b.euclid_target
    }

    /// `a` aligns better with the targets than `b`.
    pub fn closer_in_angle(&self) -> bool {
        self.a.cos_target > self.b.cos_target
    }

    /// `a` aligns less with nearby non-targets than `b`.
    pub fn fewer_confusers(&self) -> bool {
        self.a.cos_nontarget < self.b.cos_nontarget
    }
}

fn medians(records: &[&DiagnosticsRecord]) -> Result<DiagnosticMedians> {
    let e: Vec<f64> = records.iter().map(|r| r.euclid_qp_target).collect();
    let c: Vec<f64> = records.iter().map(|r| r.cos_qp_target).collect();
    let n: Vec<f64> = records.iter().flat_map(|r| r.cos_qp_nontargets.iter().copied()).collect();
    Ok(DiagnosticMedians {
        euclid_target: percentile(&e, 50.0)?,
        cos_target: percentile(&c, 50.0)?,
        cos_nontarget: percentile(&n, 50.0)?,
    })
}

/// Compares models `a` and `b` (by label) category by category.
pub fn compare_medians(
    records: &[DiagnosticsRecord],
    a: &str,
    b: &str,
) -> Result<Vec<MedianComparison>> {
    let mut by_cat: BTreeMap<&str, (Vec<&DiagnosticsRecord>, Vec<&DiagnosticsRecord>)> =
        BTreeMap::new();
    for r in records {
        let slot = by_cat.entry(&r.category_id).or_default();
        if r.model == a {
            slot.0.push(r);
        } else if r.model == b {
            slot.1.push(r);
        }
    }
    by_cat
        .into_iter()
        .filter(|(_, (ra, rb))| !ra.is_empty() && !rb.is_empty())
        .map(|(id, (ra, rb))| {
            Ok(MedianComparison {
                category_id: id.to_owned(),
                a: medians(&ra)?,
                b: medians(&rb)?,
            })
        })
        .collect()
}
