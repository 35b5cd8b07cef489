//! Small regressors mapping a source embedding to a predicted target
//! embedding: an affine map, or one ReLU hidden layer followed by an affine
//! output. Trained by full-batch gradient descent on squared error.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vsm::WordVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpLayout {
    Linear,
    OneHiddenRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden width; `None` means the input dimension.
    pub hidden_dim: Option<usize>,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_dim: None,
            lr: 0.01,
            epochs: 200,
        }
    }
}

/// Weight matrices are stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    pub layout: MlpLayout,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// Per-element mean squared error before and after training.
    pub initial_mse: f64,
    pub final_mse: f64,
}

/// Gradients of the loss, shaped like the model parameters.
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpRegressor {
    /// Seeded `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
    pub fn init(layout: MlpLayout, dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |out: usize, inp: usize| {
            let bound = 1.0 / (inp as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let w = Array2::from_shape_simple_fn((out, inp), || dist.sample(&mut rng));
            let b = Array1::from_shape_simple_fn(out, || dist.sample(&mut rng));
            (w, b)
        };
        let (weights, biases) = match layout {
            MlpLayout::Linear => {
                let (w, b) = layer(dim, dim);
                (vec![w], vec![b])
            }
            MlpLayout::OneHiddenRelu => {
                let (w1, b1) = layer(hidden_dim, dim);
                let (w2, b2) = layer(dim, hidden_dim);
                (vec![w1, w2], vec![b1, b2])
            }
        };
        MlpRegressor {
            layout,
            weights,
            biases,
            initial_mse: f64::NAN,
            final_mse: f64::NAN,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        match self.layout {
            MlpLayout::Linear => x.dot(&self.weights[0].t()) + &self.biases[0],
            MlpLayout::OneHiddenRelu => {
                let h = (x.dot(&self.weights[0].t()) + &self.biases[0]).mapv(|v| v.max(0.0));
                h.dot(&self.weights[1].t()) + &self.biases[1]
            }
        }
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self.layout {
            MlpLayout::Linear => self.weights[0].dot(&x) + &self.biases[0],
            MlpLayout::OneHiddenRelu => {
                let h = (self.weights[0].dot(&x) + &self.biases[0]).mapv(|v| v.max(0.0));
                self.weights[1].dot(&h) + &self.biases[1]
            }
        }
    }

    /// Loss `sum |y_hat - y|^2 / (2 M)` and its gradients.
    pub fn loss_and_gradients(&self, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Gradients) {
        let m = x.nrows() as f64;
        match self.layout {
            MlpLayout::Linear => {
                let err = self.forward_batch(x) - y;
                let loss = err.mapv(|v| v * v).sum() / (2.0 * m);
                let gw = err.t().dot(x) / m;
                let gb = err.sum_axis(Axis(0)) / m;
                (
                    loss,
                    Gradients {
                        weights: vec![gw],
                        biases: vec![gb],
                    },
                )
            }
            MlpLayout::OneHiddenRelu => {
                let pre = x.dot(&self.weights[0].t()) + &self.biases[0];
                let h = pre.mapv(|v| v.max(0.0));
                let err = h.dot(&self.weights[1].t()) + &self.biases[1] - y;
                let loss = err.mapv(|v| v * v).sum() / (2.0 * m);
                let gw2 = err.t().dot(&h) / m;
                let gb2 = err.sum_axis(Axis(0)) / m;
                let mut dh = err.dot(&self.weights[1]);
                dh.zip_mut_with(&pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
                let gw1 = dh.t().dot(x) / m;
                let gb1 = dh.sum_axis(Axis(0)) / m;
                (
                    loss,
                    Gradients {
                        weights: vec![gw1, gw2],
                        biases: vec![gb1, gb2],
                    },
                )
            }
        }
    }

    fn mse(&self, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let err = self.forward_batch(x) - y;
        err.mapv(|v| v * v).mean().unwrap_or(0.0)
    }
}

fn to_matrix(rows: &[&WordVector]) -> Result<Array2<f64>> {
    let (flat, dim) = super::flatten(rows)?;
    Array2::from_shape_vec((rows.len(), dim), flat).map_err(|e| Error::invalid(e.to_string()))
}

/// Trains a regressor from `inputs[i]` to `labels[i]`.
pub fn train_mlp(
    inputs: &[&WordVector],
    labels: &[&WordVector],
    layout: MlpLayout,
    cfg: &MlpConfig,
    seed: u64,
) -> Result<MlpRegressor> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "regressor needs matching non-empty inputs and labels ({} vs {})",
            inputs.len(),
            labels.len()
        )));
    }
    if !(cfg.lr > 0.0) || cfg.epochs == 0 {
        return Err(Error::invalid(format!("bad regressor config {cfg:?}")));
    }
    let x = to_matrix(inputs)?;
    let y = to_matrix(labels)?;
    if x.ncols() != y.ncols() {
        return Err(Error::invalid("input and label dimensions differ"));
    }
    let dim = x.ncols();
    let hidden = cfg.hidden_dim.unwrap_or(dim);
    if hidden == 0 {
        return Err(Error::invalid("hidden_dim must be positive"));
    }
    let mut model = MlpRegressor::init(layout, dim, hidden, seed);
    let initial = model.mse(&x, &y);
    for _ in 0..cfg.epochs {
        let (loss, grads) = model.loss_and_gradients(&x, &y);
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "regressor training diverged at lr={}; try a smaller learning rate",
                cfg.lr
            )));
        }
        for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-cfg.lr, g);
        }
        for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-cfg.lr, g);
        }
    }
    let fin = model.mse(&x, &y);
    if !fin.is_finite() || fin > initial {
        return Err(Error::numeric(format!(
            "regressor training diverged (mse {initial:.3e} -> {fin:.3e}) at lr={}; \
             try a smaller learning rate",
            cfg.lr
        )));
    }
    model.initial_mse = initial;
    model.final_mse = fin;
    Ok(model)
}

pub fn predict_mlp(model: &MlpRegressor, x: &WordVector) -> Result<WordVector> {
    if x.dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "regressor expects dimension {}, got {}",
            model.input_dim(),
            x.dim()
        )));
    }
    Ok(WordVector(model.forward(ArrayView1::from(&x.0[..])).to_vec()))
}
