//! Evaluation measures for inverse-rig solutions.
//!
//! CE and ME are Euclidean error norms in controller and mesh space, both
//! divided by the vertex count n (the controller-space norm is divided by
//! n as well, deliberately, so scores stay comparable across cluster
//! counts on one model). The structural measures size the clustered
//! problem: NCV counts vertices in clusters that still have controllers,
//! CpC and VpC measure the largest subproblem.

use crate::clustering::Clustering;
use crate::model::BlendshapeModel;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no cluster has any assigned controller")]
    AllClustersEmpty,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Controller prediction error: ||c_hat - c||_2 / n.
pub fn controller_error(c_hat: &[f64], c: &[f64], n: usize) -> Result<f64, MetricsError> {
    if c_hat.len() != c.len() {
        return Err(MetricsError::Dimension {
            expected: c.len(),
            got: c_hat.len(),
        });
    }
    assert!(n > 0);
    let mut sum = 0.0;
    for (a, b) in c_hat.iter().zip(c) {
        let d = a - b;
        sum += d * d;
    }
    Ok(sum.sqrt() / n as f64)
}

/// Mesh prediction error: ||B (c_hat - c)||_2 / n.
pub fn mesh_error(c_hat: &[f64], c: &[f64], model: &BlendshapeModel) -> Result<f64, MetricsError> {
    let m = model.num_controllers();
    if c_hat.len() != m {
        return Err(MetricsError::Dimension {
            expected: m,
            got: c_hat.len(),
        });
    }
    if c.len() != m {
        return Err(MetricsError::Dimension {
            expected: m,
            got: c.len(),
        });
    }
    let rows = 3 * model.num_vertices();
    let mut diff_mesh = vec![0.0f64; rows];
    for i in 0..m {
        let d = c_hat[i] - c[i];
        if d == 0.0 {
            continue;
        }
        for (out, &b) in diff_mesh.iter_mut().zip(model.blendshape(i)) {
            *out += d * b;
        }
    }
    let norm: f64 = diff_mesh.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(norm / model.num_vertices() as f64)
}

/// Problem-size measures of a clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralMetrics {
    /// Vertices living in clusters that have at least one controller.
    pub ncv: usize,
    /// Largest controller cluster.
    pub cpc: usize,
    /// Largest mesh cluster among clusters with controllers.
    pub vpc: usize,
}

pub fn structural_metrics(clustering: &Clustering) -> Result<StructuralMetrics, MetricsError> {
    let mut ncv = 0;
    let mut cpc = 0;
    let mut vpc = 0;
    let mut any = false;
    for (mesh, ctrl) in clustering
        .mesh_clusters
        .iter()
        .zip(&clustering.controller_clusters)
    {
        if ctrl.is_empty() {
            continue;
        }
        any = true;
        ncv += mesh.len();
        cpc = cpc.max(ctrl.len());
        vpc = vpc.max(mesh.len());
    }
    if !any {
        return Err(MetricsError::AllClustersEmpty);
    }
    Ok(StructuralMetrics { ncv, cpc, vpc })
}

/// Per-frame prediction errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    #[serde(rename = "CE")]
    pub ce: f64,
    #[serde(rename = "ME")]
    pub me: f64,
}

/// Configuration a report was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub seed: u64,
    pub noise: f64,
}

/// Full evaluation of one clustered solve over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub per_frame: Vec<FrameError>,
    #[serde(rename = "mean_CE")]
    pub mean_ce: f64,
    #[serde(rename = "mean_ME")]
    pub mean_me: f64,
    #[serde(rename = "NCV")]
    pub ncv: usize,
    #[serde(rename = "CpC")]
    pub cpc: usize,
    #[serde(rename = "VpC")]
    pub vpc: usize,
    pub config: ReportConfig,
}

impl SolveReport {
    /// Assembles a report from per-frame errors and structural metrics.
    /// Means are arithmetic, summed in frame order.
    pub fn new(
        per_frame: Vec<FrameError>,
        structure: StructuralMetrics,
        config: ReportConfig,
    ) -> Self {
        let count = per_frame.len().max(1) as f64;
        let mean_ce = per_frame.iter().map(|f| f.ce).sum::<f64>() / count;
        let mean_me = per_frame.iter().map(|f| f.me).sum::<f64>() / count;
        SolveReport {
            per_frame,
            mean_ce,
            mean_me,
            ncv: structure.ncv,
            cpc: structure.cpc,
            vpc: structure.vpc,
            config,
        }
    }

    /// `frame,CE,ME` rows plus a trailing summary row.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "frame,CE,ME")?;
        for (t, f) in self.per_frame.iter().enumerate() {
            writeln!(out, "{},{},{}", t, f.ce, f.me)?;
        }
        writeln!(out, "mean,{},{}", self.mean_ce, self.mean_me)
    }
}

pub fn save_report(report: &SolveReport, path: impl AsRef<Path>) -> Result<(), MetricsError> {
    fs::write(path, serde_json::to_string(report)?)?;
    Ok(())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<SolveReport, MetricsError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
