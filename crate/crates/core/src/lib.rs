//! Volume-based active learning: kernel sparsification followed by an EM
//! center representation, the Random, Margin and TED baselines, an RLSC
//! evaluation classifier, Monte Carlo checks of the version-space geometry
//! and an experiment harness producing error-rate curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kernel;
pub mod represent;
pub mod sparsify;
pub mod strategies;

pub use classifier::{error_rate, knn_predict, predict, train_rlsc, RlscModel, DEFAULT_LAMBDA};
pub use dataset::{gen_synthetic, load_csv, Dataset, LabelColumn, LabelOracle, SyntheticShape, SyntheticSpec};
pub use error::{Result, ValError};
pub use geometry::{Ball, TheoremReport};
pub use harness::{emit_csv, emit_svg, run_experiment, ErrorCurve, ExperimentConfig};
pub use kernel::{kernel_eval, kernel_matrix, mmd_squared, KernelKind, KernelMatrix, KernelSpec};
pub use represent::{em_representation, EmInit, EmParams, Representation};
pub use sparsify::{sparsify_halve, ScoreVariant, SparsifyParams, SubsetIndices};
pub use strategies::{build_strategy, QueryStrategy, SeedSet, StrategyConfig, StrategyName};
