//! Clustered inverse-rig solving for blendshape facial models.
//!
//! The pipeline clusters a blendshape model simultaneously in mesh-vertex
//! space and deformation-controller space, then fits one small
//! Gaussian-process regressor per cluster instead of a single whole-face
//! model. Stages:
//!
//! 1. [`offsets::compute_offsets`] builds the column-normalized matrix of
//!    per-vertex deformation magnitudes.
//! 2. [`clustering::cluster_model`] runs K-means over its rows, assigns
//!    each controller to the clusters where its average activation is
//!    high, and merges cluster pairs with excessive controller overlap.
//! 3. [`solver::train`] / [`solver::predict`] fit an independent
//!    dot-product-kernel regressor per cluster and average duplicated
//!    controllers into one weight vector.
//! 4. [`metrics`] scores predictions (CE, ME) and clustering structure
//!    (NCV, CpC, VpC).
//!
//! [`synth`] generates planted-structure models for testing; all stages
//! are deterministic given their seeds, with data-parallel inner loops
//! that gather in fixed order (see [`exec`]).

pub mod clustering;
pub mod exec;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod offsets;
pub mod solver;
pub mod synth;

pub use clustering::{cluster_model, Clustering};
pub use metrics::SolveReport;
pub use model::{AnimationSet, BlendshapeModel};
pub use offsets::{compute_offsets, OffsetMatrix};
pub use solver::{predict, solve_baseline, train, Prediction};
pub use synth::SynthSpec;
