//! Serialization of metrics and offset reports.
//!
//! Every real number written by this module is rounded to 9 significant
//! digits, so reports are stable across platforms and diff cleanly.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::analysis::{OffsetReport, OffsetStats};
use crate::error::{Error, Result};
use crate::eval::{CategoryMetrics, MetricsReport};

pub const FORMAT_VERSION: u32 = 1;

/// `v` rounded to 9 significant digits; non-finite values pass through.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Shortest decimal string of `round_sig9(v)`.
pub fn fmt_sig9(v: f64) -> String {
    let r = round_sig9(v);
    if r == 0.0 {
        "0".to_owned()
    } else {
        r.to_string()
    }
}

fn round_category(c: &CategoryMetrics) -> CategoryMetrics {
    CategoryMetrics {
        sensitivity: round_sig9(c.sensitivity),
        map: round_sig9(c.map),
        f1: round_sig9(c.f1),
        ..c.clone()
    }
}

pub fn rounded_metrics(report: &MetricsReport) -> MetricsReport {
    let mut r = report.clone();
    r.per_category = r.per_category.iter().map(round_category).collect();
    r.dataset.sensitivity = round_sig9(r.dataset.sensitivity);
    r.dataset.map = round_sig9(r.dataset.map);
    r.dataset.f1 = round_sig9(r.dataset.f1);
    r
}

fn round_offsets(s: &OffsetStats) -> OffsetStats {
    OffsetStats {
        mean_pairwise_cosine: round_sig9(s.mean_pairwise_cosine),
        min: round_sig9(s.min),
        p25: round_sig9(s.p25),
        median: round_sig9(s.median),
        p75: round_sig9(s.p75),
        max: round_sig9(s.max),
        ..s.clone()
    }
}

pub fn rounded_offsets(report: &OffsetReport) -> OffsetReport {
    OffsetReport {
        per_category: report
            .per_category
            .iter()
            .map(|(k, v)| (k.clone(), round_offsets(v)))
            .collect(),
        dataset: round_offsets(&report.dataset),
        random_pair_baseline: report.random_pair_baseline.as_ref().map(round_offsets),
        ..report.clone()
    }
}

fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::invalid(format!("JSON write failed: {e}")))?;
    out.write_all(b"\n")
        .map_err(|e| Error::invalid(format!("write failed: {e}")))
}

pub fn write_metrics_json<W: Write>(report: &MetricsReport, out: W) -> Result<()> {
    write_json(&rounded_metrics(report), out)
}

/// Offset report JSON; `config` is embedded alongside.
pub fn write_offsets_json<W: Write>(
    report: &OffsetReport,
    config: &BTreeMap<String, String>,
    out: W,
) -> Result<()> {
    #[derive(Serialize)]
    struct WithConfig<'a> {
        config: &'a BTreeMap<String, String>,
        #[serde(flatten)]
        report: OffsetReport,
    }
    write_json(
        &WithConfig {
            config,
            report: rounded_offsets(report),
        },
        out,
    )
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("CSV write failed: {e}"))
}

/// One row per category plus a final `dataset` row.
pub fn write_metrics_csv<W: Write>(report: &MetricsReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "format_version",
        "model",
        "vsm",
        "category_id",
        "category_name",
        "sensitivity",
        "map",
        "f1",
        "n_queries",
        "n_pairs",
        "n_dropped",
        "skipped",
    ])
    .map_err(csv_err)?;
    let version = report.format_version.to_string();
    for c in &report.per_category {
        w.write_record([
            version.as_str(),
            &report.meta.model,
            &report.meta.vsm,
            &c.id,
            &c.name,
            &fmt_sig9(c.sensitivity),
            &fmt_sig9(c.map),
            &fmt_sig9(c.f1),
            &c.n_queries.to_string(),
            &c.n_pairs.to_string(),
            &c.n_dropped.to_string(),
            c.skipped.as_deref().unwrap_or(""),
        ])
        .map_err(csv_err)?;
    }
    let d = &report.dataset;
    let n_pairs: usize = report.per_category.iter().map(|c| c.n_pairs).sum();
    let n_dropped: usize = report.per_category.iter().map(|c| c.n_dropped).sum();
    w.write_record([
        version.as_str(),
        &report.meta.model,
        &report.meta.vsm,
        "dataset",
        "",
        &fmt_sig9(d.sensitivity),
        &fmt_sig9(d.map),
        &fmt_sig9(d.f1),
        &d.n_queries.to_string(),
        &n_pairs.to_string(),
        &n_dropped.to_string(),
        "",
    ])
    .map_err(csv_err)?;
    w.flush().map_err(|e| Error::invalid(format!("CSV flush failed: {e}")))
}

/// Dataset F1 table: one row per VSM, one column per model label, in
/// first-seen order.
pub fn write_f1_table<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut vsms: Vec<&str> = Vec::new();
    let mut models: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in reports {
        if !vsms.contains(&r.meta.vsm.as_str()) {
            vsms.push(&r.meta.vsm);
        }
        if !models.contains(&r.meta.model.as_str()) {
            models.push(&r.meta.model);
        }
        cells.insert((&r.meta.vsm, &r.meta.model), r.dataset.f1);
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["vsm"];
    header.extend(&models);
    w.write_record(&header).map_err(csv_err)?;
    for v in &vsms {
        let mut row = vec![v.to_string()];
        row.extend(
            models
                .iter()
                .map(|m| cells.get(&(*v, *m)).map(|f| fmt_sig9(*f)).unwrap_or_default()),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV flush failed: {e}")))
}
