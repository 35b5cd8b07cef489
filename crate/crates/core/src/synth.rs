//! Synthetic vector spaces with known relation structure, for tests,
//! benchmarks, and sanity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{RelationCategory, RelationPair};
use crate::error::Result;
use crate::vsm::{CaseMode, VectorSpaceModel};

/// A generated space plus the relation planted in it.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub vsm: VectorSpaceModel,
    pub category: RelationCategory,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Random Gaussian tokens `w0, w1, ...`.
pub fn random_vsm(n: usize, dim: usize, seed: u64) -> Result<VectorSpaceModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<(String, Vec<f32>)> = (0..n)
        .map(|i| (format!("w{i}"), to_f32(&gaussian(&mut rng, dim))))
        .collect();
    VectorSpaceModel::from_rows(&format!("random-{n}x{dim}"), rows, CaseMode::Exact)
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub dim: usize,
    pub n_distractors: usize,
    pub n_pairs: usize,
    pub offset_norm: f64,
    /// Per-coordinate noise standard deviation, as a fraction of
    /// `offset_norm`.
    pub noise_frac: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            dim: 50,
            n_distractors: 500,
            n_pairs: 50,
            offset_norm: 5.0,
            noise_frac: 0.0,
            seed: 0,
        }
    }
}

/// Sources and distractors are standard Gaussian; each target is its
/// source plus one fixed offset plus Gaussian noise.
pub fn planted(spec: &PlantedSpec) -> Result<SyntheticSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offset: Vec<f64> = unit(gaussian(&mut rng, spec.dim))
        .into_iter()
        .map(|x| x * spec.offset_norm)
        .collect();
    let sigma = spec.noise_frac * spec.offset_norm;
    let mut rows = Vec::with_capacity(2 * spec.n_pairs + spec.n_distractors);
    let mut pairs = Vec::with_capacity(spec.n_pairs);
    for i in 0..spec.n_pairs {
        let s = gaussian(&mut rng, spec.dim);
        let t: Vec<f64> = s
            .iter()
            .zip(&offset)
            .map(|(a, o)| a + o + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        rows.push((format!("src{i}"), to_f32(&s)));
        rows.push((format!("tgt{i}"), to_f32(&t)));
        pairs.push(RelationPair::new(format!("src{i}"), [format!("tgt{i}")]));
    }
    for j in 0..spec.n_distractors {
        rows.push((format!("d{j}"), to_f32(&gaussian(&mut rng, spec.dim))));
    }
    Ok(SyntheticSet {
        vsm: VectorSpaceModel::from_rows("planted", rows, CaseMode::Exact)?,
        category: RelationCategory {
            id: "P01".into(),
            name: "planted offset".into(),
            pairs,
        },
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NonParallelSpec {
    pub dim: usize,
    pub n_distractors: usize,
    pub n_pairs: usize,
    /// Norm of the per-pair random offset component.
    pub spread: f64,
    /// Shared shift along the separating axis.
    pub shift: f64,
    pub seed: u64,
}

impl Default for NonParallelSpec {
    fn default() -> Self {
        NonParallelSpec {
            dim: 50,
            n_distractors: 500,
            n_pairs: 50,
            spread: 4.5,
            shift: 2.0,
            seed: 0,
        }
    }
}

/// Targets sit at `shift` along the first axis while every other token sits
/// at 0, so targets are linearly separable from everything else. Each offset
/// also carries its own random component of norm `spread` orthogonal to
/// that axis, which keeps offsets far from parallel.
pub fn separable_nonparallel(spec: &NonParallelSpec) -> Result<SyntheticSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let off_axis = |rng: &mut ChaCha8Rng| {
        let mut v = gaussian(rng, spec.dim);
        v[0] = 0.0;
        v
    };
    let mut rows = Vec::with_capacity(2 * spec.n_pairs + spec.n_distractors);
    let mut pairs = Vec::with_capacity(spec.n_pairs);
    for i in 0..spec.n_pairs {
        let s = off_axis(&mut rng);
        let r: Vec<f64> = unit(off_axis(&mut rng))
            .into_iter()
            .map(|x| x * spec.spread)
            .collect();
        let mut t: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + b).collect();
        t[0] = spec.shift;
        rows.push((format!("src{i}"), to_f32(&s)));
        rows.push((format!("tgt{i}"), to_f32(&t)));
        pairs.push(RelationPair::new(format!("src{i}"), [format!("tgt{i}")]));
    }
    for j in 0..spec.n_distractors {
        rows.push((format!("d{j}"), to_f32(&off_axis(&mut rng))));
    }
    Ok(SyntheticSet {
        vsm: VectorSpaceModel::from_rows("nonparallel", rows, CaseMode::Exact)?,
        category: RelationCategory {
            id: "S01".into(),
            name: "separable non-parallel".into(),
            pairs,
        },
    })
}

/// Country/capital pairs over a planted offset, with named tokens.
pub fn capitals(seed: u64) -> Result<SyntheticSet> {
    const PAIRS: [(&str, &str); 8] = [
        ("france", "paris"),
        ("germany", "berlin"),
        ("italy", "rome"),
        ("spain", "madrid"),
        ("japan", "tokyo"),
        ("egypt", "cairo"),
        ("peru", "lima"),
        ("kenya", "nairobi"),
    ];
    let base = planted(&PlantedSpec {
        dim: 20,
        n_distractors: 60,
        n_pairs: PAIRS.len(),
        offset_norm: 4.0,
        noise_frac: 0.0,
        seed,
    })?;
    let rename = |tok: &str| -> String {
        let idx = |p: &str| tok.strip_prefix(p).and_then(|n| n.parse::<usize>().ok());
        if let Some(i) = idx("src") {
            PAIRS[i].0.to_owned()
        } else if let Some(i) = idx("tgt") {
            PAIRS[i].1.to_owned()
        } else {
            tok.replacen('d', "filler", 1)
        }
    };
    let rows: Vec<(String, Vec<f32>)> = (0..base.vsm.len())
        .map(|r| (rename(base.vsm.token(r)), base.vsm.row(r).to_vec()))
        .collect();
    Ok(SyntheticSet {
        vsm: VectorSpaceModel::from_rows("capitals", rows, CaseMode::default())?,
        category: RelationCategory {
            id: "E01".into(),
            name: "country - capital".into(),
            pairs: PAIRS.iter().map(|(s, t)| RelationPair::new(*s, [*t])).collect(),
        },
    })
}
