//! Per-cluster inverse-rig solving with Gaussian-process regression.
//!
//! Each cluster with a nonempty controller set gets its own regressor: the
//! inputs are training-mesh offsets from the neutral restricted to the
//! cluster's coordinates, the kernel is the plain dot product, and one set
//! of dual coefficients per output controller shares a single Cholesky
//! factorization of (G + noise*I). Offsets-from-neutral as features make
//! the neutral face predict exactly zero weights.
//!
//! Submodels are independent; training and prediction fan out over
//! clusters and gather in cluster order, so parallel runs match serial
//! runs bit for bit.

use crate::clustering::Clustering;
use crate::exec;
use crate::linalg;
use crate::metrics::{self, FrameError, MetricsError, ReportConfig, SolveReport};
use crate::model::{AnimationSet, BlendshapeModel};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("Gram matrix for cluster {cluster} is not positive definite; increase noise")]
    SingularGram { cluster: usize },
    #[error("frame {frame} has no mesh")]
    MissingMesh { frame: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("noise must be positive, got {noise}")]
    InvalidNoise { noise: f64 },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One trained regressor: mesh coordinates of a cluster in, weights of the
/// cluster's controllers out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmodelGpr {
    pub cluster_index: usize,
    /// Coordinate indices into a stacked mesh vector, three per vertex.
    pub input_indices: Vec<usize>,
    /// Controller indices this submodel predicts.
    pub output_indices: Vec<usize>,
    /// Training offsets, row-major T x input_indices.len().
    train_inputs: Vec<f64>,
    /// Dual coefficients, column-major: one length-T column per output.
    dual_coef: Vec<f64>,
    noise: f64,
}

impl SubmodelGpr {
    /// Regularization this submodel was trained with.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    fn num_train(&self) -> usize {
        if self.input_indices.is_empty() {
            0
        } else {
            self.train_inputs.len() / self.input_indices.len()
        }
    }

    /// Predicts this cluster's controller weights for one mesh.
    fn predict_cluster(&self, mesh: &[f64], neutral: &[f64]) -> Vec<f64> {
        let d = self.input_indices.len();
        let t = self.num_train();
        let features: Vec<f64> = self
            .input_indices
            .iter()
            .map(|&idx| mesh[idx] - neutral[idx])
            .collect();
        let mut kernel = vec![0.0f64; t];
        for (s, slot) in kernel.iter_mut().enumerate() {
            let row = &self.train_inputs[s * d..(s + 1) * d];
            let mut acc = 0.0;
            for (x, z) in row.iter().zip(&features) {
                acc += x * z;
            }
            *slot = acc;
        }
        self.output_indices
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let coef = &self.dual_coef[j * t..(j + 1) * t];
                let mut acc = 0.0;
                for (a, k) in coef.iter().zip(&kernel) {
                    acc += a * k;
                }
                acc
            })
            .collect()
    }
}

/// Aggregated prediction for one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Final weight vector, length m. Controllers predicted by several
    /// clusters hold the mean of those predictions; controllers predicted
    /// by none are zero.
    pub weights: Vec<f64>,
    /// Per-cluster sub-vectors, aligned with the clustering (empty for
    /// clusters without controllers).
    pub per_cluster: Vec<Vec<f64>>,
    /// How many clusters predicted each controller.
    pub coverage_count: Vec<usize>,
}

impl Prediction {
    /// Clamps the aggregated weights to [0, 1]. Off by default; the raw
    /// regression output is kept unless the caller asks for clamping.
    pub fn clamp_weights(&mut self) {
        for w in self.weights.iter_mut() {
            *w = w.clamp(0.0, 1.0);
        }
    }
}

fn check_training_set(model: &BlendshapeModel, train_set: &AnimationSet) -> Result<(), SolveError> {
    if train_set.frames.is_empty() {
        return Err(SolveError::EmptyTrainingSet);
    }
    let rows = 3 * model.num_vertices();
    let m = model.num_controllers();
    for (t, frame) in train_set.frames.iter().enumerate() {
        let Some(mesh) = &frame.mesh else {
            return Err(SolveError::MissingMesh { frame: t });
        };
        if mesh.len() != rows {
            return Err(SolveError::Dimension {
                expected: rows,
                got: mesh.len(),
            });
        }
        if frame.weights.len() != m {
            return Err(SolveError::Dimension {
                expected: m,
                got: frame.weights.len(),
            });
        }
    }
    Ok(())
}

/// Trains one regressor per cluster with a nonempty controller set.
pub fn train(
    model: &BlendshapeModel,
    clustering: &Clustering,
    train_set: &AnimationSet,
    noise: f64,
) -> Result<Vec<SubmodelGpr>, SolveError> {
    if !(noise > 0.0) {
        return Err(SolveError::InvalidNoise { noise });
    }
    check_training_set(model, train_set)?;
    let neutral = model.neutral();
    let num_frames = train_set.frames.len();

    let cluster_ids: Vec<usize> = (0..clustering.len()).collect();
    let results = exec::map_collect(
        &cluster_ids,
        |&k| -> Result<Option<SubmodelGpr>, SolveError> {
            let outputs = &clustering.controller_clusters[k];
            if outputs.is_empty() {
                return Ok(None);
            }
            let input_indices: Vec<usize> = clustering.mesh_clusters[k]
                .iter()
                .flat_map(|&l| [3 * l, 3 * l + 1, 3 * l + 2])
                .collect();
            let d = input_indices.len();

            let mut train_inputs = vec![0.0f64; num_frames * d];
            for (t, frame) in train_set.frames.iter().enumerate() {
                let mesh = frame.mesh.as_ref().expect("checked above");
                for (slot, &idx) in train_inputs[t * d..(t + 1) * d]
                    .iter_mut()
                    .zip(&input_indices)
                {
                    *slot = mesh[idx] - neutral[idx];
                }
            }

            // Gram matrix of the dot-product kernel, plus noise on the diagonal.
            let mut gram = vec![0.0f64; num_frames * num_frames];
            for s in 0..num_frames {
                let xs = &train_inputs[s * d..(s + 1) * d];
                for t in s..num_frames {
                    let xt = &train_inputs[t * d..(t + 1) * d];
                    let mut acc = 0.0;
                    for (a, b) in xs.iter().zip(xt) {
                        acc += a * b;
                    }
                    gram[s * num_frames + t] = acc;
                    gram[t * num_frames + s] = acc;
                }
                gram[s * num_frames + s] += noise;
            }
            let factor = linalg::cholesky(&gram, num_frames)
                .ok_or(SolveError::SingularGram { cluster: k })?;

            let mut dual_coef = vec![0.0f64; outputs.len() * num_frames];
            for (j, &ctrl) in outputs.iter().enumerate() {
                let col = &mut dual_coef[j * num_frames..(j + 1) * num_frames];
                for (t, frame) in train_set.frames.iter().enumerate() {
                    col[t] = frame.weights[ctrl];
                }
                factor.solve_in_place(col);
            }

            Ok(Some(SubmodelGpr {
                cluster_index: k,
                input_indices,
                output_indices: outputs.clone(),
                train_inputs,
                dual_coef,
                noise,
            }))
        },
    );

    let mut submodels = Vec::new();
    for r in results {
        if let Some(s) = r? {
            submodels.push(s);
        }
    }
    Ok(submodels)
}

/// Predicts controller weights for one mesh and aggregates the per-cluster
/// outputs: duplicated controllers are averaged, unassigned ones are zero.
pub fn predict(
    submodels: &[SubmodelGpr],
    model: &BlendshapeModel,
    clustering: &Clustering,
    mesh: &[f64],
) -> Result<Prediction, SolveError> {
    let rows = 3 * model.num_vertices();
    if mesh.len() != rows {
        return Err(SolveError::Dimension {
            expected: rows,
            got: mesh.len(),
        });
    }
    let neutral = model.neutral();
    let outputs = exec::map_collect(submodels, |s| s.predict_cluster(mesh, neutral));

    let m = model.num_controllers();
    let mut sums = vec![0.0f64; m];
    let mut coverage_count = vec![0usize; m];
    let mut per_cluster = vec![Vec::new(); clustering.len()];
    for (submodel, values) in submodels.iter().zip(outputs) {
        for (&ctrl, &v) in submodel.output_indices.iter().zip(&values) {
            sums[ctrl] += v;
            coverage_count[ctrl] += 1;
        }
        per_cluster[submodel.cluster_index] = values;
    }
    let weights = sums
        .iter()
        .zip(&coverage_count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(Prediction {
        weights,
        per_cluster,
        coverage_count,
    })
}

/// Whole-face solve: train on the trivial single-cluster clustering and
/// predict the given mesh. Identical to running the clustered pipeline
/// with one cluster.
pub fn solve_baseline(
    model: &BlendshapeModel,
    train_set: &AnimationSet,
    mesh: &[f64],
    noise: f64,
) -> Result<Prediction, SolveError> {
    let offsets = crate::offsets::compute_offsets(model);
    let clustering = Clustering::whole_face(&offsets, 1.0, 0);
    let submodels = train(model, &clustering, train_set, noise)?;
    predict(&submodels, model, &clustering, mesh)
}

/// Predicts every test frame and assembles the full report (per-frame CE
/// and ME, their means, and the structural metrics of the clustering).
pub fn evaluate(
    model: &BlendshapeModel,
    clustering: &Clustering,
    submodels: &[SubmodelGpr],
    test_set: &AnimationSet,
    noise: f64,
    clamp: bool,
) -> Result<SolveReport, SolveError> {
    let n = model.num_vertices();
    let frame_ids: Vec<usize> = (0..test_set.frames.len()).collect();
    let per_frame_results = exec::map_collect(&frame_ids, |&t| -> Result<FrameError, SolveError> {
        let frame = &test_set.frames[t];
        let mesh = frame
            .mesh
            .as_ref()
            .ok_or(SolveError::MissingMesh { frame: t })?;
        let mut prediction = predict(submodels, model, clustering, mesh)?;
        if clamp {
            prediction.clamp_weights();
        }
        let ce = metrics::controller_error(&prediction.weights, &frame.weights, n)?;
        let me = metrics::mesh_error(&prediction.weights, &frame.weights, model)?;
        Ok(FrameError { ce, me })
    });
    let mut per_frame = Vec::with_capacity(per_frame_results.len());
    for r in per_frame_results {
        per_frame.push(r?);
    }
    let structure = metrics::structural_metrics(clustering)?;
    let config = ReportConfig {
        k: clustering.params.k_requested,
        p: clustering.params.p,
        seed: clustering.params.seed,
        noise,
    };
    Ok(SolveReport::new(per_frame, structure, config))
}

/// Convenience pipeline: train on `train_set`, evaluate on `test_set`.
pub fn solve_and_evaluate(
    model: &BlendshapeModel,
    clustering: &Clustering,
    train_set: &AnimationSet,
    test_set: &AnimationSet,
    noise: f64,
    clamp: bool,
) -> Result<SolveReport, SolveError> {
    let submodels = train(model, clustering, train_set, noise)?;
    evaluate(model, clustering, &submodels, test_set, noise, clamp)
}

pub fn save_submodels(submodels: &[SubmodelGpr], path: impl AsRef<Path>) -> Result<(), SolveError> {
    fs::write(path, serde_json::to_string(submodels)?)?;
    Ok(())
}

pub fn load_submodels(path: impl AsRef<Path>) -> Result<Vec<SubmodelGpr>, SolveError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
