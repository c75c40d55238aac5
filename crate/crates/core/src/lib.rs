//! Self-paced multi-task learning for linear regression.
//!
//! Each task's predictor is a sparse combination `p_i = U v_i` of `k` shared
//! latent basis vectors. Training alternates three blocks: per-instance pace
//! weights `w` (closed form), the basis `U` (matrix-free conjugate gradient)
//! and the coefficients `V` (one proximal-gradient step with soft
//! thresholding). A task-level group penalty on `w` lets easy tasks enter
//! first, and the pace schedule admits harder tasks and instances over time.
//!
//! The crate also ships a synthetic benchmark generator, evaluation metrics
//! and a sweep harness used by the `spmtl` command-line tool.

pub mod basis;
pub mod coeff;
pub mod dataset;
mod error;
pub mod metrics;
pub mod model;
pub mod pace;
pub mod parallel;
pub mod sweep;
pub mod toy;
pub mod trainer;

pub use dataset::{MultiTaskDataset, SplitSpec, TaskData};
pub use error::{Error, Result};
pub use trainer::{fit, FitReport, Mode, ModelState, TrainConfig};
