//! Numerical routines used by the relation models: a soft-margin linear
//! SVM, L2-regularized logistic regression, the first principal component,
//! percentiles and two small feed-forward regressors.
//!
//! Every trainer is single-threaded and bit-deterministic for fixed inputs.

mod logistic;
mod mlp;
mod pca;
mod stats;
mod svm;

pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use mlp::{predict_mlp, train_mlp, Gradients, MlpConfig, MlpLayout, MlpRegressor};
pub use pca::{first_principal_component, symmetric_eigen};
pub use stats::{mean, percentile};
pub use svm::{train_linear_svm, Hyperplane, SvmConfig, SvmSolution};

use crate::error::{Error, Result};
use crate::vsm::WordVector;

/// Row-major copy of `rows`, checking that all share one dimension.
pub(crate) fn flatten(rows: &[&WordVector]) -> Result<(Vec<f64>, usize)> {
    let dim = rows.first().map(|r| r.dim()).unwrap_or(0);
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for (i, r) in rows.iter().enumerate() {
        if r.dim() != dim {
            return Err(Error::invalid(format!(
                "row {i} has dimension {}, expected {dim}",
                r.dim()
            )));
        }
        if !r.is_finite() {
            return Err(Error::invalid(format!("row {i} has non-finite values")));
        }
        flat.extend_from_slice(r);
    }
    Ok((flat, dim))
}
