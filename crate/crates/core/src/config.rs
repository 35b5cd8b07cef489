//! Run configuration: a flat `key = value` text format.
//!
//! ```text
//! # one VSM; use vsm.0.path, vsm.1.path, ... for several
//! vsm.path = glove.6B.300d.txt
//! vsm.format = glove_text
//! bats.dir = BATS_3.0
//! seed = 7
//! model.0.kind = svmcos
//! model.1.kind = lrcos
//! model.1.use_target_classifier = false
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Unknown and
//! repeated keys are errors. Model indices must be contiguous from 0; when
//! no model is given, all six model kinds run with their defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, SensitivityCutoff};
use crate::relmodels::{ModelConfig, ModelKind};
use crate::vsm::{CaseMode, VsmFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct VsmSpec {
    pub path: PathBuf,
    pub format: VsmFormat,
    pub case_mode: CaseMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub vsms: Vec<VsmSpec>,
    pub bats_dir: Option<PathBuf>,
    pub models: Vec<ModelConfig>,
    pub k_eval: usize,
    pub k_sens: SensitivityCutoff,
    pub n_nontargets: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// `None` uses all available cores.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            vsms: Vec::new(),
            bats_dir: None,
            models: ModelKind::ALL.into_iter().map(ModelConfig::new).collect(),
            k_eval: 10,
            k_sens: SensitivityCutoff::GoldCount,
            n_nontargets: 10,
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

struct Entry<'a> {
    value: &'a str,
    line: usize,
}

fn value<T: FromStr>(e: &Entry<'_>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value.parse().map_err(|err| Error::Config {
        line: e.line,
        msg: format!("{key}: {err}"),
    })
}

fn bool_value(e: &Entry<'_>, key: &str) -> Result<bool> {
    match e.value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config {
            line: e.line,
            msg: format!("{key}: expected true or false, got {other:?}"),
        }),
    }
}

/// Splits `prefix.N.rest` (or `prefix.rest`, meaning index 0).
fn indexed<'k>(key: &'k str, prefix: &str) -> Option<(usize, &'k str)> {
    let rest = key.strip_prefix(prefix)?.strip_prefix('.')?;
    match rest.split_once('.') {
        Some((i, field)) if i.bytes().all(|b| b.is_ascii_digit()) && !i.is_empty() => {
            Some((i.parse().ok()?, field))
        }
        _ => Some((0, rest)),
    }
}

fn contiguous<T>(items: BTreeMap<usize, T>, what: &str, line: usize) -> Result<Vec<T>> {
    for (expected, idx) in items.keys().enumerate() {
        if *idx != expected {
            return Err(Error::Config {
                line,
                msg: format!("{what} indices must be contiguous from 0; missing {what}.{expected}"),
            });
        }
    }
    Ok(items.into_values().collect())
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, Entry<'_>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (k, v) = trimmed.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected key=value, got {trimmed:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config { line, msg: "empty key".into() });
            }
            if let Some(prev) = entries.insert(k, Entry { value: v, line }) {
                return Err(Error::Config {
                    line,
                    msg: format!("{k} already set on line {}", prev.line),
                });
            }
        }

        let mut cfg = RunConfig::default();
        let mut vsm_fields: BTreeMap<usize, BTreeMap<&str, &Entry<'_>>> = BTreeMap::new();
        let mut model_fields: BTreeMap<usize, BTreeMap<&str, &Entry<'_>>> = BTreeMap::new();
        let last_line = entries.values().map(|e| e.line).max().unwrap_or(0);

        for (key, e) in &entries {
            match *key {
                "bats.dir" => cfg.bats_dir = Some(PathBuf::from(e.value)),
                "k_eval" => cfg.k_eval = value(e, key)?,
                "k_sens" => cfg.k_sens = value(e, key)?,
                "n_nontargets" => cfg.n_nontargets = value(e, key)?,
                "seed" => cfg.seed = value(e, key)?,
                "out" => cfg.out = PathBuf::from(e.value),
                "threads" => {
                    let n: usize = value(e, key)?;
                    cfg.threads = (n > 0).then_some(n);
                }
                k => {
                    if let Some((i, field)) = indexed(k, "vsm") {
                        vsm_fields.entry(i).or_default().insert(field, e);
                    } else if let Some((i, field)) = indexed(k, "model") {
                        model_fields.entry(i).or_default().insert(field, e);
                    } else {
                        return Err(Error::Config {
                            line: e.line,
                            msg: format!("unknown key {k:?}"),
                        });
                    }
                }
            }
        }

        let mut vsms = BTreeMap::new();
        for (i, fields) in vsm_fields {
            vsms.insert(i, parse_vsm(i, &fields)?);
        }
        cfg.vsms = contiguous(vsms, "vsm", last_line)?;

        if !model_fields.is_empty() {
            let mut models = BTreeMap::new();
            for (i, fields) in model_fields {
                models.insert(i, parse_model(i, &fields)?);
            }
            cfg.models = contiguous(models, "model", last_line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.k_eval == 0 {
            return bad("k_eval must be positive".into());
        }
        if self.n_nontargets == 0 {
            return bad("n_nontargets must be positive".into());
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        let mut labels: Vec<String> = self.models.iter().map(|m| m.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("model {} configured twice", w[0]));
        }
        for m in &self.models {
            m.validate()?;
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            k_eval: self.k_eval,
            k_sens: self.k_sens,
            seed: self.seed,
        }
    }

    /// The effective configuration as canonical key/value pairs. Output
    /// location and thread count are left out: they never affect results.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: String, v: String| {
            m.insert(k, v);
        };
        for (i, v) in self.vsms.iter().enumerate() {
            put(format!("vsm.{i}.path"), v.path.display().to_string());
            put(format!("vsm.{i}.format"), v.format.to_string());
            put(format!("vsm.{i}.case_mode"), v.case_mode.to_string());
        }
        if let Some(d) = &self.bats_dir {
            put("bats.dir".into(), d.display().to_string());
        }
        put("k_eval".into(), self.k_eval.to_string());
        put("k_sens".into(), self.k_sens.to_string());
        put("n_nontargets".into(), self.n_nontargets.to_string());
        put("seed".into(), self.seed.to_string());
        for (i, c) in self.models.iter().enumerate() {
            let p = format!("model.{i}");
            put(format!("{p}.kind"), c.kind.to_string());
            put(format!("{p}.use_target_classifier"), c.use_target_classifier.to_string());
            put(format!("{p}.alpha"), c.alpha.to_string());
            put(format!("{p}.n_unlabeled"), c.n_unlabeled.to_string());
            put(format!("{p}.lr_negative_multiplier"), c.lr_negative_multiplier.to_string());
            put(format!("{p}.svm.c"), c.svm.c.to_string());
            put(format!("{p}.svm.tol"), c.svm.tol.to_string());
            put(format!("{p}.svm.max_iter"), c.svm.max_iter.to_string());
            put(format!("{p}.lr.l2"), c.logistic.l2.to_string());
            put(format!("{p}.lr.tol"), c.logistic.tol.to_string());
            put(format!("{p}.lr.max_iter"), c.logistic.max_iter.to_string());
            put(
                format!("{p}.mlp.hidden_dim"),
                c.mlp.hidden_dim.map_or_else(|| "input".into(), |h| h.to_string()),
            );
            put(format!("{p}.mlp.lr"), c.mlp.lr.to_string());
            put(format!("{p}.mlp.epochs"), c.mlp.epochs.to_string());
        }
        m
    }

    /// Canonical config text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s: String = self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        s.push_str(&format!("out = {}\n", self.out.display()));
        s.push_str(&format!("threads = {}\n", self.threads.unwrap_or(0)));
        s
    }
}

fn parse_vsm(i: usize, fields: &BTreeMap<&str, &Entry<'_>>) -> Result<VsmSpec> {
    let mut spec = VsmSpec {
        path: PathBuf::new(),
        format: VsmFormat::GloveText,
        case_mode: CaseMode::default(),
    };
    let mut has_path = false;
    let mut line = 0;
    for (field, e) in fields {
        line = e.line;
        let key = format!("vsm.{i}.{field}");
        match *field {
            "path" => {
                spec.path = PathBuf::from(e.value);
                has_path = true;
            }
            "format" => spec.format = value(e, &key)?,
            "case_mode" => spec.case_mode = value(e, &key)?,
            _ => {
                return Err(Error::Config {
                    line: e.line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
    }
    if !has_path {
        return Err(Error::Config { line, msg: format!("vsm.{i}.path is required") });
    }
    Ok(spec)
}

fn parse_model(i: usize, fields: &BTreeMap<&str, &Entry<'_>>) -> Result<ModelConfig> {
    let kind_entry = fields.get("kind").ok_or_else(|| Error::Config {
        line: fields.values().map(|e| e.line).min().unwrap_or(0),
        msg: format!("model.{i}.kind is required"),
    })?;
    let mut c = ModelConfig::new(value(kind_entry, &format!("model.{i}.kind"))?);
    for (field, e) in fields {
        let key = format!("model.{i}.{field}");
        match *field {
            "kind" => {}
            "use_target_classifier" => c.use_target_classifier = bool_value(e, &key)?,
            "alpha" => c.alpha = value(e, &key)?,
            "n_unlabeled" => c.n_unlabeled = value(e, &key)?,
            "lr_negative_multiplier" => c.lr_negative_multiplier = value(e, &key)?,
            "svm.c" => c.svm.c = value(e, &key)?,
            "svm.tol" => c.svm.tol = value(e, &key)?,
            "svm.max_iter" => c.svm.max_iter = value(e, &key)?,
            "lr.l2" => c.logistic.l2 = value(e, &key)?,
            "lr.tol" => c.logistic.tol = value(e, &key)?,
            "lr.max_iter" => c.logistic.max_iter = value(e, &key)?,
            "mlp.hidden_dim" => {
                c.mlp.hidden_dim = match e.value {
                    "input" => None,
                    _ => Some(value(e, &key)?),
                }
            }
            "mlp.lr" => c.mlp.lr = value(e, &key)?,
            "mlp.epochs" => c.mlp.epochs = value(e, &key)?,
            _ => {
                return Err(Error::Config {
                    line: e.line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let c = RunConfig::parse(
            "# demo\n\nvsm.path = a.txt\nbats.dir=BATS\nseed = 9\nmodel.0.kind = svmcos\n\
             model.1.kind = lrcos\nmodel.1.use_target_classifier = false\nk_sens = 3\n",
        )
        .unwrap();
        assert_eq!(c.vsms.len(), 1);
        assert_eq!(c.vsms[0].format, VsmFormat::GloveText);
        assert_eq!(c.seed, 9);
        assert_eq!(c.k_sens, SensitivityCutoff::Fixed(3));
        let labels: Vec<String> = c.models.iter().map(|m| m.label()).collect();
        assert_eq!(labels, ["svmcos", "lrcos-lr"]);
        assert_eq!(c.models[0].svm.c, 0.001);
        assert_eq!(c.models[0].alpha, 25.0);
    }

    #[test]
    fn all_models_by_default() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.models.len(), 6);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match RunConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("seed = 1\nbogus = 2\n"), 2);
        assert_eq!(line_of("seed = 1\n\nseed = 2\n"), 3);
        assert_eq!(line_of("k_eval = ten\n"), 1);
        assert_eq!(line_of("model.0.kind = svm\n"), 1);
        assert_eq!(line_of("model.0.svm.c = 1\n"), 1);
        assert_eq!(line_of("no equals sign\n"), 1);
        assert_eq!(line_of("model.0.kind = svmcos\nmodel.2.kind = lrcos\n"), 2);
    }

    #[test]
    fn semantic_validation() {
        assert!(RunConfig::parse("k_eval = 0\n").is_err());
        assert!(RunConfig::parse("model.0.kind=svmcos\nmodel.1.kind=svmcos\n").is_err());
        assert!(RunConfig::parse("model.0.kind=svmcos\nmodel.0.alpha=101\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig::parse(
            "vsm.0.path=a\nvsm.1.path=b\nvsm.1.format=native_cache\nvsm.1.case_mode=exact\n\
             model.0.kind=pca_lr\nmodel.0.mlp.hidden_dim=7\nmodel.0.svm.c=0.25\nthreads=2\n",
        )
        .unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.echo(), c.echo());
        assert!(!c.echo().contains_key("threads"));
    }
}
