//! BATS-style relation files.
//!
//! One pair per line: `source<TAB>target1/target2/...`. Blank lines and
//! lines starting with `#` are skipped. A file named
//! `E01 [country - capital].txt` yields id `E01` and name
//! `country - capital`.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vsm::VectorSpaceModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationPair {
    pub source: String,
    pub targets: Vec<String>,
}

impl RelationPair {
    pub fn new(source: impl Into<String>, targets: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut seen = HashSet::new();
        let targets = targets
            .into_iter()
            .map(Into::into)
            .filter(|t: &String| seen.insert(t.clone()))
            .collect();
        RelationPair {
            source: source.into(),
            targets,
        }
    }

    /// `source<TAB>t1/t2`
    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.source, self.targets.join("/"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationCategory {
    pub id: String,
    pub name: String,
    pub pairs: Vec<RelationPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    SourceOov,
    AllTargetsOov,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::SourceOov => "source_oov",
            DropReason::AllTargetsOov => "all_targets_oov",
        })
    }
}

/// A category checked against one vector space model.
#[derive(Debug, Clone)]
pub struct ResolvedCategory {
    pub category: RelationCategory,
    /// Pairs whose source and at least one target are in vocabulary; OOV
    /// targets have been pruned.
    pub resolved_pairs: Vec<RelationPair>,
    pub dropped: Vec<(RelationPair, DropReason)>,
}

impl ResolvedCategory {
    pub fn id(&self) -> &str {
        &self.category.id
    }

    /// A category holding only the surviving pairs.
    pub fn as_category(&self) -> RelationCategory {
        RelationCategory {
            id: self.category.id.clone(),
            name: self.category.name.clone(),
            pairs: self.resolved_pairs.clone(),
        }
    }
}

fn id_and_name(path: &Path) -> (String, String) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.split_once(' ') {
        Some((id, rest)) => {
            let name = rest.trim().trim_start_matches('[').trim_end_matches(']').trim();
            (id.to_owned(), name.to_owned())
        }
        None => (stem.clone(), stem),
    }
}

/// Parses relation text. `path` is only used for naming and error messages.
pub fn parse_bats_str(text: &str, path: &Path) -> Result<RelationCategory> {
    let (id, name) = id_and_name(path);
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            path: path.to_owned(),
            line,
            msg: msg.to_owned(),
        };
        let (source, targets) = raw.split_once('\t').ok_or_else(|| err("missing TAB separator"))?;
        let source = source.trim();
        if source.is_empty() {
            return Err(err("empty source"));
        }
        let targets: Vec<&str> = targets
            .split('/')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .collect();
        if targets.is_empty() {
            return Err(err("empty targets field"));
        }
        pairs.push(RelationPair::new(source, targets));
    }
    Ok(RelationCategory { id, name, pairs })
}

pub fn parse_bats_file(path: impl AsRef<Path>) -> Result<RelationCategory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bats_str(&text, path)
}

/// Parses every `.txt` file below `dir`, sorted by category id.
pub fn parse_bats_directory(dir: impl AsRef<Path>) -> Result<Vec<RelationCategory>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut cats = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_owned();
            Error::io(path, e.into())
        })?;
        let p = entry.path();
        let hidden = p
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if entry.file_type().is_file() && !hidden && p.extension().is_some_and(|e| e == "txt") {
            cats.push(parse_bats_file(p)?);
        }
    }
    cats.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.name.cmp(&b.name)));
    if cats.is_empty() {
        log::warn!("no relation files found under {}", dir.display());
    } else {
        let pairs: usize = cats.iter().map(|c| c.pairs.len()).sum();
        log::info!("parsed {} categories, {pairs} pairs", cats.len());
    }
    Ok(cats)
}

/// Drops pairs with an OOV source or with every target OOV; prunes OOV
/// targets from the pairs that survive.
pub fn resolve(category: &RelationCategory, vsm: &VectorSpaceModel) -> ResolvedCategory {
    let mut resolved_pairs = Vec::new();
    let mut dropped = Vec::new();
    for pair in &category.pairs {
        if !vsm.contains(&pair.source) {
            dropped.push((pair.clone(), DropReason::SourceOov));
            continue;
        }
        let targets: Vec<String> = pair
            .targets
            .iter()
            .filter(|t| vsm.contains(t))
            .cloned()
            .collect();
        if targets.is_empty() {
            dropped.push((pair.clone(), DropReason::AllTargetsOov));
        } else {
            resolved_pairs.push(RelationPair {
                source: pair.source.clone(),
                targets,
            });
        }
    }
    ResolvedCategory {
        category: category.clone(),
        resolved_pairs,
        dropped,
    }
}

/// CSV with columns `category_id,source,reason`.
pub fn write_drop_report<W: Write>(out: W, resolved: &[ResolvedCategory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(["category_id", "source", "reason"]).map_err(csv_err)?;
    for rc in resolved {
        for (pair, reason) in &rc.dropped {
            w.write_record([rc.id(), pair.source.as_str(), &reason.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV flush failed: {e}")))?;
    Ok(())
}
