//! Listwise learning-to-rank with gradient-boosted regression trees.
//!
//! The ranker is trained against a soft-rank mean squared error: both the
//! relevance labels and the model scores of every query are mapped through a
//! differentiable rank operator (a Euclidean projection onto the permutahedron,
//! solved with pool-adjacent-violators), and the per-query squared difference
//! of the two soft-rank vectors is minimised by functional gradient descent.
//!
//! Modules:
//!
//! - [`softrank`]: the soft-rank operator and its Jacobian-vector product.
//! - [`loss`]: SoftRankMSE and the ablation losses, with their residuals.
//! - [`gbm`]: histogram regression trees, ensembles and the boosting driver.
//! - [`data`]: LETOR / SVMLight-with-qid ingestion.
//! - [`metrics`]: NDCG@k and MAP@k.
//! - [`synth`]: seeded synthetic ranking datasets.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod data;
mod error;
pub mod gbm;
pub mod loss;
pub mod metrics;
pub mod softrank;
pub mod synth;

pub use data::{parse_letor, write_letor, DatasetStats, FeatureMatrix, ParseOptions, QueryDataset};
pub use error::{Error, Result};
pub use gbm::{train, BinMapping, LearningCurve, RegressionTree, TrainConfig, TreeEnsemble};
pub use loss::{LossSpec, LossVariant, Objective};
pub use metrics::{evaluate, map_at_k, ndcg_at_k, EvalReport};
pub use softrank::{isotonic_pav, permutahedron_project, soft_rank, soft_rank_vjp, SoftRankResult};
