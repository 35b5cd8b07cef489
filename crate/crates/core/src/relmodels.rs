//! Relation models: each turns a source token into a query point, and some
//! additionally rescore the vocabulary with a target-class classifier.
//!
//! | kind          | query point                          | classifier by default |
//! |---------------|--------------------------------------|-----------------------|
//! | `svmcos`      | source + magnitude * SVM unit normal | yes                   |
//! | `lrcos`       | source                               | yes                   |
//! | `cosavg3`     | source + mean training offset        | no                    |
//! | `pca_lr`      | source + magnitude * first PC        | yes                   |
//! | `nn_linear`   | affine regressor(source)             | no                    |
//! | `nn_nonlinear`| one-hidden-layer ReLU regressor      | no                    |
//!
//! Scores are cosine similarity to the query point, multiplied by the
//! classifier probability when a classifier is present. No token is ever
//! excluded from a ranking.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::RelationPair;
use crate::error::{Error, Result};
use crate::numerics::{
    first_principal_component, percentile, predict_mlp, train_linear_svm, train_logistic,
    train_mlp, Hyperplane, LogisticConfig, LogisticModel, MlpConfig, MlpLayout, MlpRegressor,
    SvmConfig,
};
use crate::vsm::{top_k_indices, RankedToken, VectorSpaceModel, WordVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "svmcos")]
    SvmCos,
    #[serde(rename = "lrcos")]
    LrCos,
    #[serde(rename = "cosavg3")]
    CosAvg3,
    #[serde(rename = "pca_lr")]
    PcaLr,
    #[serde(rename = "nn_linear")]
    NnLinear,
    #[serde(rename = "nn_nonlinear")]
    NnNonlinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::SvmCos,
        ModelKind::LrCos,
        ModelKind::CosAvg3,
        ModelKind::PcaLr,
        ModelKind::NnLinear,
        ModelKind::NnNonlinear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SvmCos => "svmcos",
            ModelKind::LrCos => "lrcos",
            ModelKind::CosAvg3 => "cosavg3",
            ModelKind::PcaLr => "pca_lr",
            ModelKind::NnLinear => "nn_linear",
            ModelKind::NnNonlinear => "nn_nonlinear",
        }
    }

    pub fn default_uses_classifier(self) -> bool {
        matches!(self, ModelKind::SvmCos | ModelKind::LrCos | ModelKind::PcaLr)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub use_target_classifier: bool,
    /// Percentile of training offset norms used as the step length.
    pub alpha: f64,
    /// Nearest neighbors per source added as negatives (svmcos).
    pub n_unlabeled: usize,
    /// Classifier negatives per positive.
    pub lr_negative_multiplier: usize,
    pub svm: SvmConfig,
    pub logistic: LogisticConfig,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            use_target_classifier: kind.default_uses_classifier(),
            alpha: 25.0,
            n_unlabeled: 20,
            lr_negative_multiplier: 5,
            svm: SvmConfig::default(),
            logistic: LogisticConfig::default(),
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }

    pub fn without_classifier(mut self) -> Self {
        self.use_target_classifier = false;
        self
    }

    /// `svmcos`, or `svmcos-lr` / `cosavg3+lr` when the classifier setting
    /// departs from the kind's default.
    pub fn label(&self) -> String {
        match (self.kind.default_uses_classifier(), self.use_target_classifier) {
            (true, false) => format!("{}-lr", self.kind),
            (false, true) => format!("{}+lr", self.kind),
            _ => self.kind.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 100]", self.alpha)));
        }
        if self.lr_negative_multiplier == 0 {
            return Err(Error::invalid("lr_negative_multiplier must be positive"));
        }
        if !(self.svm.c > 0.0) {
            return Err(Error::invalid("svm C must be positive"));
        }
        if !(self.mlp.lr > 0.0) || self.mlp.epochs == 0 {
            return Err(Error::invalid("regressor lr and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub pairs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub unlabeled: usize,
    pub classifier_positives: usize,
    pub classifier_negatives: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRelationModel {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub direction: Option<WordVector>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_offset: Option<WordVector>,
    /// The separating hyperplane behind an svmcos direction.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hyperplane: Option<Hyperplane>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regressor: Option<MlpRegressor>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classifier: Option<LogisticModel>,
    pub training_summary: TrainingSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPoint {
    pub vector: WordVector,
    pub source: String,
}

/// Precomputed cosine neighbors for a set of rows, nearest first. Each
/// list includes the row itself.
#[derive(Debug, Clone, Default)]
pub struct NeighborCache {
    depth: usize,
    lists: HashMap<usize, Vec<usize>>,
}

impl NeighborCache {
    pub fn build(vsm: &VectorSpaceModel, rows: &[usize], depth: usize) -> Result<Self> {
        let depth = depth.min(vsm.len());
        let lists = rows
            .par_iter()
            .map(|&r| {
                let scores = vsm.score_all(&vsm.vector(r))?;
                Ok((r, top_k_indices(&scores, depth)))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(NeighborCache { depth, lists })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn get(&self, row: usize) -> Option<&[usize]> {
        self.lists.get(&row).map(Vec::as_slice)
    }
}

fn row_of(vsm: &VectorSpaceModel, token: &str) -> Result<usize> {
    vsm.row_of(token).ok_or_else(|| Error::Oov(token.to_owned()))
}

/// `n` nearest rows to `row` that are neither `row` itself nor in `skip`.
fn unlabeled_neighbors(
    vsm: &VectorSpaceModel,
    row: usize,
    n: usize,
    skip: &BTreeSet<usize>,
    cache: Option<&NeighborCache>,
) -> Result<Vec<usize>> {
    let pick = |list: &[usize]| -> Vec<usize> {
        list.iter()
            .copied()
            .filter(|r| *r != row && !skip.contains(r))
            .take(n)
            .collect()
    };
    if let Some(list) = cache.and_then(|c| c.get(row)) {
        let got = pick(list);
        if got.len() == n || list.len() == vsm.len() {
            return Ok(got);
        }
    }
    let depth = (n + skip.len() + 1).min(vsm.len());
    let scores = vsm.score_all(&vsm.vector(row))?;
    Ok(pick(&top_k_indices(&scores, depth)))
}

/// Row indices for `amount` vocabulary tokens outside `exclude`, sampled
/// uniformly without replacement.
fn sample_negatives(
    vsm: &VectorSpaceModel,
    exclude: &BTreeSet<usize>,
    amount: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = vsm.len();
    let draw = (amount + exclude.len()).min(n);
    let mut picked: Vec<usize> = index::sample(rng, n, draw)
        .into_iter()
        .filter(|r| !exclude.contains(r))
        .collect();
    picked.sort_unstable();
    picked.shuffle(rng);
    picked.truncate(amount);
    picked.sort_unstable();
    picked
}

/// Fits a relation model on training pairs whose tokens are all in
/// vocabulary. Pair order does not affect the result.
pub fn fit(
    train: &[RelationPair],
    vsm: &VectorSpaceModel,
    cfg: &ModelConfig,
    neighbors: Option<&NeighborCache>,
) -> Result<TrainedRelationModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("a relation model needs at least one training pair"));
    }
    // canonical order so that results do not depend on input order
    let mut pairs: Vec<(usize, Vec<usize>)> = train
        .iter()
        .map(|p| {
            let s = row_of(vsm, &p.source)?;
            let mut t = p
                .targets
                .iter()
                .map(|t| row_of(vsm, t))
                .collect::<Result<Vec<_>>>()?;
            t.sort_unstable();
            t.dedup();
            Ok((s, t))
        })
        .collect::<Result<_>>()?;
    pairs.sort();

    let source_rows: BTreeSet<usize> = pairs.iter().map(|(s, _)| *s).collect();
    let target_rows: BTreeSet<usize> = pairs.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let offsets: Vec<WordVector> = pairs
        .iter()
        .flat_map(|(s, ts)| ts.iter().map(move |t| (*s, *t)))
        .map(|(s, t)| vsm.vector(t).sub(&vsm.vector(s)))
        .collect();
    let offset_norms: Vec<f64> = offsets.iter().map(|o| o.norm()).collect();

    let mut summary = TrainingSummary {
        pairs: pairs.len(),
        ..Default::default()
    };
    let mut model = TrainedRelationModel {
        kind: cfg.kind,
        direction: None,
        magnitude: None,
        mean_offset: None,
        hyperplane: None,
        regressor: None,
        classifier: None,
        training_summary: TrainingSummary::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    match cfg.kind {
        ModelKind::SvmCos => {
            let mut unlabeled = BTreeSet::new();
            for &s in &source_rows {
                for r in unlabeled_neighbors(vsm, s, cfg.n_unlabeled, &target_rows, neighbors)? {
                    if !source_rows.contains(&r) {
                        unlabeled.insert(r);
                    }
                }
            }
            let pos: Vec<WordVector> = target_rows.iter().map(|&r| vsm.vector(r)).collect();
            let neg: Vec<WordVector> = source_rows
                .iter()
                .chain(&unlabeled)
                .map(|&r| vsm.vector(r))
                .collect();
            let svm_cfg = SvmConfig {
                seed: cfg.seed,
                ..cfg.svm.clone()
            };
            let sol = train_linear_svm(
                &pos.iter().collect::<Vec<_>>(),
                &neg.iter().collect::<Vec<_>>(),
                &svm_cfg,
            )?;
            let norm = sol.hyperplane.norm();
            if !(norm > 0.0) {
                return Err(Error::numeric("SVM returned a zero normal vector"));
            }
            summary.positives = pos.len();
            summary.negatives = neg.len();
            summary.unlabeled = unlabeled.len();
            summary.warnings.extend(sol.warning);
            model.direction = Some(WordVector(sol.hyperplane.w.iter().map(|v| v / norm).collect()));
            model.magnitude = Some(percentile(&offset_norms, cfg.alpha)?);
            model.hyperplane = Some(sol.hyperplane);
        }
        ModelKind::CosAvg3 => {
            let mut mean = WordVector::zeros(vsm.dim());
            for o in &offsets {
                mean = mean.add(o);
            }
            model.mean_offset = Some(mean.scaled(1.0 / offsets.len() as f64));
        }
        ModelKind::PcaLr => {
            let refs: Vec<&WordVector> = offsets.iter().collect();
            let direction = match first_principal_component(&refs) {
                Ok(pc) => pc,
                Err(e) => {
                    // one offset, or all offsets identical: the spread has no
                    // axis, so fall back to the mean offset's direction
                    let mut mean = WordVector::zeros(vsm.dim());
                    for o in &offsets {
                        mean = mean.add(o);
                    }
                    let n = mean.norm();
                    if n == 0.0 {
                        return Err(e);
                    }
                    summary
                        .warnings
                        .push(format!("principal component undefined ({e}); used mean offset"));
                    mean.scaled(1.0 / n)
                }
            };
            model.direction = Some(direction);
            model.magnitude = Some(percentile(&offset_norms, cfg.alpha)?);
        }
        ModelKind::LrCos => {}
        ModelKind::NnLinear | ModelKind::NnNonlinear => {
            let (inputs, labels): (Vec<WordVector>, Vec<WordVector>) = pairs
                .iter()
                .flat_map(|(s, ts)| ts.iter().map(move |t| (vsm.vector(*s), vsm.vector(*t))))
                .unzip();
            let layout = if cfg.kind == ModelKind::NnLinear {
                MlpLayout::Linear
            } else {
                MlpLayout::OneHiddenRelu
            };
            model.regressor = Some(train_mlp(
                &inputs.iter().collect::<Vec<_>>(),
                &labels.iter().collect::<Vec<_>>(),
                layout,
                &cfg.mlp,
                cfg.seed,
            )?);
        }
    }

    if cfg.use_target_classifier {
        let amount = cfg.lr_negative_multiplier * target_rows.len();
        let neg_rows = sample_negatives(vsm, &target_rows, amount, &mut rng);
        if neg_rows.is_empty() {
            return Err(Error::invalid(
                "vocabulary has no tokens outside the training targets to use as negatives",
            ));
        }
        let pos: Vec<WordVector> = target_rows.iter().map(|&r| vsm.vector(r)).collect();
        let neg: Vec<WordVector> = neg_rows.iter().map(|&r| vsm.vector(r)).collect();
        let clf = train_logistic(
            &pos.iter().collect::<Vec<_>>(),
            &neg.iter().collect::<Vec<_>>(),
            &cfg.logistic,
        )?;
        summary.classifier_positives = pos.len();
        summary.classifier_negatives = neg.len();
        model.classifier = Some(clf);
    }
    model.training_summary = summary;
    Ok(model)
}

/// Where `model` expects the targets of `source` to be.
pub fn query_point(
    model: &TrainedRelationModel,
    source: &str,
    vsm: &VectorSpaceModel,
) -> Result<QueryPoint> {
    let s = vsm.lookup(source).ok_or_else(|| Error::Oov(source.to_owned()))?;
    let missing = || Error::invalid(format!("{} model is missing parameters", model.kind));
    let vector = match model.kind {
        ModelKind::SvmCos | ModelKind::PcaLr => {
            let dir = model.direction.as_ref().ok_or_else(missing)?;
            let mag = model.magnitude.ok_or_else(missing)?;
            s.add_scaled(mag, dir)
        }
        ModelKind::CosAvg3 => s.add(model.mean_offset.as_ref().ok_or_else(missing)?),
        ModelKind::LrCos => s,
        ModelKind::NnLinear | ModelKind::NnNonlinear => {
            predict_mlp(model.regressor.as_ref().ok_or_else(missing)?, &s)?
        }
    };
    if vector.dim() != vsm.dim() || !vector.is_finite() {
        return Err(Error::numeric(format!("invalid query point for {source:?}")));
    }
    Ok(QueryPoint {
        vector,
        source: source.to_owned(),
    })
}

/// Model score for every vocabulary row.
pub fn score_tokens(
    model: &TrainedRelationModel,
    qp: &QueryPoint,
    vsm: &VectorSpaceModel,
) -> Result<Vec<f64>> {
    let mut scores = vsm.score_all(&qp.vector)?;
    if let Some(clf) = &model.classifier {
        let mut probs = vsm.affine_all(&clf.w, clf.b)?;
        LogisticModel::probabilities_from_logits(&mut probs);
        for (s, p) in scores.iter_mut().zip(&probs) {
            *s *= p;
        }
    }
    Ok(scores)
}

/// Top-`k` tokens for `source`.
pub fn rank(
    model: &TrainedRelationModel,
    source: &str,
    vsm: &VectorSpaceModel,
    k: usize,
) -> Result<Vec<RankedToken>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let qp = query_point(model, source, vsm)?;
    let scores = score_tokens(model, &qp, vsm)?;
    Ok(top_k_indices(&scores, k)
        .into_iter()
        .map(|i| RankedToken {
            token: vsm.token(i).to_owned(),
            score: scores[i],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsm::CaseMode;

    fn vsm2(rows: &[(&str, [f32; 2])]) -> VectorSpaceModel {
        VectorSpaceModel::from_rows("t", rows.iter().map(|(t, r)| (*t, *r)), CaseMode::Exact)
            .unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("3cosadd".parse::<ModelKind>().is_err());
        assert_eq!(ModelConfig::new(ModelKind::SvmCos).label(), "svmcos");
        assert_eq!(
            ModelConfig::new(ModelKind::SvmCos).without_classifier().label(),
            "svmcos-lr"
        );
        let mut c = ModelConfig::new(ModelKind::CosAvg3);
        c.use_target_classifier = true;
        assert_eq!(c.label(), "cosavg3+lr");
    }

    #[test]
    fn cosavg3_mean_offset() {
        let vsm = vsm2(&[
            ("a", [1.0, 1.0]),
            ("b", [2.0, 1.0]),
            ("c", [1.0, 2.0]),
            ("d", [4.0, 2.0]),
        ]);
        let train = [RelationPair::new("a", ["b"]), RelationPair::new("c", ["d"])];
        let m = fit(&train, &vsm, &ModelConfig::new(ModelKind::CosAvg3), None).unwrap();
        assert_eq!(m.mean_offset.as_ref().unwrap().0, vec![2.0, 0.0]);
        assert!(m.classifier.is_none() && m.direction.is_none());
        let qp = query_point(&m, "a", &vsm).unwrap();
        assert_eq!(qp.vector.0, vec![3.0, 1.0]);
    }

    #[test]
    fn single_pair_cosavg3_lands_on_target() {
        let vsm = vsm2(&[("a", [1.0, 1.0]), ("b", [2.5, -1.0]), ("c", [0.3, 2.0])]);
        let m = fit(
            &[RelationPair::new("a", ["b"])],
            &vsm,
            &ModelConfig::new(ModelKind::CosAvg3),
            None,
        )
        .unwrap();
        assert_eq!(query_point(&m, "a", &vsm).unwrap().vector.0, vec![2.5, -1.0]);
    }

    #[test]
    fn lrcos_query_is_source_and_ranks_itself_first() {
        let vsm = vsm2(&[("france", [1.0, 0.2]), ("paris", [0.9, 0.5]), ("x", [-1.0, 0.3])]);
        let m = fit(
            &[RelationPair::new("france", ["paris"])],
            &vsm,
            &ModelConfig::new(ModelKind::LrCos).without_classifier(),
            None,
        )
        .unwrap();
        let qp = query_point(&m, "france", &vsm).unwrap();
        assert_eq!(qp.vector, vsm.lookup("france").unwrap());
        assert_eq!(rank(&m, "france", &vsm, 1).unwrap()[0].token, "france");
        let all = rank(&m, "france", &vsm, 3).unwrap();
        assert_eq!(all.len(), 3);
        assert!(rank(&m, "france", &vsm, 0).is_err());
        assert!(matches!(query_point(&m, "zqxw", &vsm), Err(Error::Oov(_))));
    }

    #[test]
    fn svmcos_step_definition() {
        let vsm = vsm2(&[("o", [0.0, 0.0 + 1e-3]), ("p", [1.0, 0.0])]);
        let m = TrainedRelationModel {
            kind: ModelKind::SvmCos,
            direction: Some(WordVector(vec![1.0, 0.0])),
            magnitude: Some(2.0),
            mean_offset: None,
            hyperplane: None,
            regressor: None,
            classifier: None,
            training_summary: TrainingSummary::default(),
        };
        let qp = query_point(&m, "o", &vsm).unwrap();
        assert!((qp.vector[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn classifier_product_rule() {
        let vsm = vsm2(&[("a", [1.0, 0.0]), ("b", [0.6, 0.8]), ("c", [0.0, 1.0])]);
        let mut m = TrainedRelationModel {
            kind: ModelKind::LrCos,
            direction: None,
            magnitude: None,
            mean_offset: None,
            hyperplane: None,
            regressor: None,
            classifier: None,
            training_summary: TrainingSummary::default(),
        };
        let qp = QueryPoint {
            vector: WordVector(vec![1.0, 0.0]),
            source: "a".into(),
        };
        let plain = score_tokens(&m, &qp, &vsm).unwrap();
        assert_eq!(plain, vsm.score_all(&qp.vector).unwrap());
        // w = 0, b = 0 gives probability 0.5 everywhere
        m.classifier = Some(LogisticModel {
            w: vec![0.0, 0.0],
            b: 0.0,
            grad_norm: 0.0,
            iterations: 0,
        });
        let rescored = score_tokens(&m, &qp, &vsm).unwrap();
        assert!((plain[1] - 0.6).abs() < 1e-7);
        assert!((rescored[1] - 0.3).abs() < 1e-7);
        for (p, r) in plain.iter().zip(&rescored) {
            assert!(*p <= 0.0 || *r > 0.0);
        }
    }

    #[test]
    fn negative_sampling_avoids_targets() {
        let rows: Vec<(String, [f32; 2])> = (0..40)
            .map(|i| (format!("w{i}"), [1.0 + i as f32, (i % 7) as f32 - 3.0]))
            .collect();
        let vsm = VectorSpaceModel::from_rows("n", rows, CaseMode::Exact).unwrap();
        let exclude: BTreeSet<usize> = [3, 5, 8].into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let picked = sample_negatives(&vsm, &exclude, 15, &mut rng);
        assert_eq!(picked.len(), 15);
        assert!(picked.iter().all(|r| !exclude.contains(r)));
        let uniq: BTreeSet<_> = picked.iter().collect();
        assert_eq!(uniq.len(), 15);
        let all = sample_negatives(&vsm, &exclude, 100, &mut rng);
        assert_eq!(all.len(), 37);
    }
}
