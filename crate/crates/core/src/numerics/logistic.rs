//! Binary logistic regression, `p(x) = 1 / (1 + exp(-(w . x + b)))`.
//!
//! Minimizes the mean log-loss plus `0.5 * l2 * |w|^2` (intercept not
//! penalized) with a line-searched Newton method whose inner system is
//! solved by conjugate gradients on Hessian-vector products.

use serde::{Deserialize, Serialize};

use super::flatten;
use crate::error::{Error, Result};
use crate::vsm::{dot_f64, dot_mixed, WordVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    /// Stop once `|grad| <= tol * max(1, |grad_0|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-3,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub w: Vec<f64>,
    pub b: f64,
    /// Final gradient norm, kept for audits.
    pub grad_norm: f64,
    pub iterations: usize,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow.
#[inline]
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        dot_f64(&self.w, x) + self.b
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn probability_f32(&self, x: &[f32]) -> f64 {
        sigmoid(dot_mixed(x, &self.w) + self.b)
    }

    /// Converts raw logits to probabilities in place.
    pub fn probabilities_from_logits(logits: &mut [f64]) {
        for z in logits {
            *z = sigmoid(*z);
        }
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    dim: usize,
    l2: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Parameters are `[w..., b]`.
    fn margins(&self, theta: &[f64]) -> Vec<f64> {
        let (w, b) = theta.split_at(self.dim);
        (0..self.n())
            .map(|i| self.y[i] * (dot_f64(self.row(i), w) + b[0]))
            .collect()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let w = &theta[..self.dim];
        let data: f64 = self.margins(theta).iter().map(|&m| softplus_neg(m)).sum();
        data / self.n() as f64 + 0.5 * self.l2 * dot_f64(w, w)
    }

    /// Gradient and per-sample curvature weights at `theta`.
    fn gradient(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n() as f64;
        let margins = self.margins(theta);
        let mut g = vec![0.0; self.dim + 1];
        let mut curv = Vec::with_capacity(self.n());
        for (i, &m) in margins.iter().enumerate() {
            // d/dz of softplus(-y z) is -y * sigmoid(-m)
            let s = sigmoid(-m);
            let coef = -self.y[i] * s / n;
            for (gk, xk) in g[..self.dim].iter_mut().zip(self.row(i)) {
                *gk += coef * xk;
            }
            g[self.dim] += coef;
            curv.push(s * (1.0 - s) / n);
        }
        for k in 0..self.dim {
            g[k] += self.l2 * theta[k];
        }
        (g, curv)
    }

    fn hess_vec(&self, curv: &[f64], v: &[f64]) -> Vec<f64> {
        let (vw, vb) = v.split_at(self.dim);
        let mut out = vec![0.0; self.dim + 1];
        for (i, &c) in curv.iter().enumerate() {
            let xi = self.row(i);
            let s = c * (dot_f64(xi, vw) + vb[0]);
            for (ok, xk) in out[..self.dim].iter_mut().zip(xi) {
                *ok += s * xk;
            }
            out[self.dim] += s;
        }
        for k in 0..self.dim {
            out[k] += self.l2 * vw[k];
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    dot_f64(v, v).sqrt()
}

/// Solves `H p = -g` approximately by conjugate gradients.
fn newton_direction(p: &Problem, curv: &[f64], g: &[f64]) -> Vec<f64> {
    let m = g.len();
    let gnorm = norm(g);
    let cg_tol = (0.1f64).min(gnorm.sqrt()) * gnorm;
    let mut step = vec![0.0; m];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut d = r.clone();
    let mut rr = dot_f64(&r, &r);
    for _ in 0..(2 * m).max(10) {
        if rr.sqrt() <= cg_tol {
            break;
        }
        let hd = p.hess_vec(curv, &d);
        let dhd = dot_f64(&d, &hd);
        if dhd <= 1e-300 {
            break;
        }
        let a = rr / dhd;
        for k in 0..m {
            step[k] += a * d[k];
            r[k] -= a * hd[k];
        }
        let rr_new = dot_f64(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            d[k] = r[k] + beta * d[k];
        }
    }
    if dot_f64(&step, g) >= 0.0 {
        // not a descent direction; fall back to steepest descent
        return g.iter().map(|v| -v).collect();
    }
    step
}

pub fn train_logistic(
    positives: &[&WordVector],
    negatives: &[&WordVector],
    cfg: &LogisticConfig,
) -> Result<LogisticModel> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid(
            "logistic regression needs at least one sample in each class",
        ));
    }
    if !(cfg.l2 >= 0.0) || !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::invalid(format!("bad logistic config {cfg:?}")));
    }
    let rows: Vec<&WordVector> = positives.iter().chain(negatives).copied().collect();
    let (x, dim) = flatten(&rows)?;
    let mut y = vec![-1.0; rows.len()];
    y[..positives.len()].fill(1.0);
    let prob = Problem {
        x: &x,
        y: &y,
        dim,
        l2: cfg.l2,
    };

    let mut theta = vec![0.0; dim + 1];
    let mut loss = prob.loss(&theta);
    let (mut g, mut curv) = prob.gradient(&theta);
    let g0 = norm(&g);
    let target = cfg.tol * g0.max(1.0);
    let mut iterations = 0;

    while norm(&g) > target && iterations < cfg.max_iter {
        iterations += 1;
        let dir = newton_direction(&prob, &curv, &g);
        let slope = dot_f64(&dir, &g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let l = prob.loss(&cand);
            if l <= loss + 1e-4 * t * slope {
                theta = cand;
                loss = l;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        (g, curv) = prob.gradient(&theta);
        if !loss.is_finite() {
            return Err(Error::numeric("logistic regression diverged"));
        }
    }
    let grad_norm = norm(&g);
    if grad_norm > target {
        log::warn!(
            "logistic regression stopped after {iterations} iterations with |grad| = {grad_norm:.3e}"
        );
    }
    let b = theta.pop().unwrap_or(0.0);
    Ok(LogisticModel {
        w: theta,
        b,
        grad_norm,
        iterations,
    })
}
