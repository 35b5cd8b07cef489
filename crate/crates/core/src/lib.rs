//! Relation discovery in word-embedding spaces.
//!
//! Given related word pairs (a country and its capital, a noun and its
//! plural), the models here learn where the targets of a relation lie
//! relative to their sources and rank the vocabulary for unseen sources.
//! The main model, [`relmodels::ModelKind::SvmCos`], fits a max-margin
//! hyperplane between target tokens and source tokens (plus the sources'
//! nearest neighbors) and steps from a source along the hyperplane normal.
//! Baselines, leave-one-out evaluation, and offset-geometry diagnostics
//! complete the toolkit.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod relmodels;
pub mod report;
pub mod seed;
pub mod synth;
pub mod vsm;

pub use dataset::{RelationCategory, RelationPair, ResolvedCategory};
pub use error::{Error, Result};
pub use eval::{FoldResult, MetricsReport};

pub use numerics::{Hyperplane, LogisticModel, MlpRegressor, SvmConfig};
pub use relmodels::{ModelConfig, ModelKind, QueryPoint, TrainedRelationModel};

pub use vsm::{CaseMode, RankedToken, VectorSpaceModel, VsmFormat, WordVector};
