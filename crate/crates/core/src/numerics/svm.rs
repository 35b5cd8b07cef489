//! Soft-margin linear SVM with an unregularized intercept.
//!
//! Minimizes `0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))` through
//! its dual, `min 0.5 a'Qa - sum a` subject to `0 <= a_i <= C` and
//! `sum_i y_i a_i = 0`. The equality constraint is what keeps the bias out
//! of the regularizer, so the dual is solved by sequential minimal
//! optimization on pairs of multipliers (second-order working-set
//! selection). With a linear kernel the gradient is recomputed from the
//! primal weights after every step, which keeps it free of drift.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flatten;
use crate::error::{Error, Result};
use crate::vsm::{dot_f64, WordVector};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Soft-margin penalty.
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Maximum number of pair updates.
    pub max_iter: usize,
    /// Shuffles the order in which samples are scanned; only affects ties
    /// in working-set selection.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 0.001,
            tol: 1e-6,
            max_iter: 20_000,
            seed: 0,
        }
    }
}

/// `decision(x) = w . x + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot_f64(&self.w, x) + self.b
    }

    pub fn norm(&self) -> f64 {
        dot_f64(&self.w, &self.w).sqrt()
    }

    /// Primal soft-margin objective over labelled samples.
    pub fn objective(&self, c: f64, samples: &[(&[f64], f64)]) -> f64 {
        let hinge: f64 = samples
            .iter()
            .map(|(x, y)| (1.0 - y * self.decision(x)).max(0.0))
            .sum();
        0.5 * dot_f64(&self.w, &self.w) + c * hinge
    }
}

#[derive(Debug, Clone)]
pub struct SvmSolution {
    pub hyperplane: Hyperplane,
    /// Primal objective at the returned hyperplane.
    pub objective: f64,
    pub iterations: usize,
    /// Set when `max_iter` was reached before the KKT tolerance.
    pub warning: Option<String>,
}

/// Trains on `positives` (label +1) against `negatives` (label -1).
pub fn train_linear_svm(
    positives: &[&WordVector],
    negatives: &[&WordVector],
    cfg: &SvmConfig,
) -> Result<SvmSolution> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("SVM needs at least one sample in each class"));
    }
    if !(cfg.c > 0.0 && cfg.c.is_finite()) || !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::invalid(format!("bad SVM config {cfg:?}")));
    }
    let rows: Vec<&WordVector> = positives.iter().chain(negatives).copied().collect();
    let (x, dim) = flatten(&rows)?;
    let n = rows.len();
    let mut y = vec![-1.0; n];
    y[..positives.len()].fill(1.0);

    // scan order, permuted once from the seed
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let row = |i: usize| &x[i * dim..(i + 1) * dim];
    let qd: Vec<f64> = (0..n).map(|i| dot_f64(row(i), row(i))).collect();
    let c = cfg.c;

    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; dim];
    let mut grad = vec![-1.0f64; n];
    let mut k_i = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    while iterations < cfg.max_iter {
        // i: maximal violator from the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for &t in &order {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        for &t in &order {
            if in_low(alpha[t], y[t]) {
                gmax2 = gmax2.max(y[t] * grad[t]);
            }
        }
        if i_sel == usize::MAX || gmax + gmax2 < cfg.tol {
            converged = true;
            break;
        }
        let i = i_sel;
        for t in 0..n {
            k_i[t] = dot_f64(row(i), row(t));
        }

        // j: second-order choice from the "low" set
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for &t in &order {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let a = (qd[i] + qd[t] - 2.0 * k_i[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            converged = true;
            break;
        }
        let j = j_sel;
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (qd[i] + qd[j] - 2.0 * k_i[j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for (k, wk) in w.iter_mut().enumerate() {
            *wk += di * x[i * dim + k] + dj * x[j * dim + k];
        }
        for t in 0..n {
            grad[t] = y[t] * dot_f64(row(t), &w) - 1.0;
        }
    }

    let b = intercept(&alpha, &y, &grad, c);
    let hyperplane = Hyperplane { w, b };
    let samples: Vec<(&[f64], f64)> = (0..n).map(|i| (row(i), y[i])).collect();
    let objective = hyperplane.objective(c, &samples);
    let warning = (!converged).then(|| {
        let msg = format!(
            "SVM stopped after {iterations} updates without reaching tol {}",
            cfg.tol
        );
        log::warn!("{msg}");
        msg
    });
    Ok(SvmSolution {
        hyperplane,
        objective,
        iterations,
        warning,
    })
}

/// Intercept from free multipliers, or the midpoint of the feasible range
/// when every multiplier sits at a bound.
fn intercept(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    -rho
}
