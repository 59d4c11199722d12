//! Two-fold clustering: mesh clusters from K-means over offset rows,
//! controller clusters from a per-controller high/low split of cluster
//! activation averages, then overlap-driven merging.
//!
//! The result is a list of paired index sets (R^k, C^k): R^k partitions the
//! vertices, C^k holds the controllers relevant to that region. Controller
//! clusters may overlap; pairs whose controller overlap exceeds the allowed
//! fraction `p` of the smaller set are merged until no pair qualifies.

use crate::exec;
use crate::kmeans::{self, KMeansError, KMeansParams};
use crate::model::BlendshapeModel;
use crate::offsets::{self, OffsetMatrix};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    KMeans(#[from] KMeansError),
    #[error("k = {k} is out of range (1 ..= {n} vertices)")]
    KOutOfRange { k: usize, n: usize },
    #[error("p = {p} must lie in (0, 1]")]
    InvalidP { p: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Parameters the clustering was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    #[serde(rename = "K")]
    pub k_requested: usize,
    pub p: f64,
    pub seed: u64,
}

/// Paired mesh/controller clusters.
///
/// `mesh_clusters` partition the vertex indices; `controller_clusters[k]`
/// lists the controllers assigned to mesh cluster `k` (possibly empty,
/// possibly overlapping other clusters). All index sets are sorted
/// ascending. `provenance[k]` records which pre-merge cluster ids were
/// folded into cluster `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub mesh_clusters: Vec<Vec<usize>>,
    pub controller_clusters: Vec<Vec<usize>>,
    pub params: ClusterParams,
    pub provenance: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ClusterEntry {
    vertices: Vec<usize>,
    controllers: Vec<usize>,
    merged_from: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ClusteringFile {
    params: ClusterParams,
    clusters: Vec<ClusterEntry>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.mesh_clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh_clusters.is_empty()
    }

    /// Cluster label per vertex. Panics if the clusters do not partition
    /// `0..n`.
    pub fn vertex_labels(&self, n: usize) -> Vec<usize> {
        let mut labels = vec![usize::MAX; n];
        for (k, cluster) in self.mesh_clusters.iter().enumerate() {
            for &v in cluster {
                assert_eq!(labels[v], usize::MAX, "vertex {v} in two clusters");
                labels[v] = k;
            }
        }
        assert!(labels.iter().all(|&l| l != usize::MAX), "unassigned vertex");
        labels
    }

    /// The trivial whole-face clustering: one cluster holding every vertex
    /// and every non-null controller.
    pub fn whole_face(offsets: &OffsetMatrix, p: f64, seed: u64) -> Self {
        let controllers: Vec<usize> = (0..offsets.num_controllers())
            .filter(|i| !offsets.null_controllers().contains(i))
            .collect();
        Clustering {
            mesh_clusters: vec![(0..offsets.num_vertices()).collect()],
            controller_clusters: vec![controllers],
            params: ClusterParams {
                k_requested: 1,
                p,
                seed,
            },
            provenance: vec![vec![0]],
        }
    }
}

pub fn save_clustering(
    clustering: &Clustering,
    path: impl AsRef<Path>,
) -> Result<(), ClusterError> {
    let file = ClusteringFile {
        params: clustering.params,
        clusters: clustering
            .mesh_clusters
            .iter()
            .zip(&clustering.controller_clusters)
            .zip(&clustering.provenance)
            .map(|((v, c), pr)| ClusterEntry {
                vertices: v.clone(),
                controllers: c.clone(),
                merged_from: pr.clone(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_clustering(path: impl AsRef<Path>) -> Result<Clustering, ClusterError> {
    let text = fs::read_to_string(path)?;
    let file: ClusteringFile = serde_json::from_str(&text)?;
    let mut mesh_clusters = Vec::with_capacity(file.clusters.len());
    let mut controller_clusters = Vec::with_capacity(file.clusters.len());
    let mut provenance = Vec::with_capacity(file.clusters.len());
    for entry in file.clusters {
        mesh_clusters.push(entry.vertices);
        controller_clusters.push(entry.controllers);
        provenance.push(entry.merged_from);
    }
    Ok(Clustering {
        mesh_clusters,
        controller_clusters,
        params: file.params,
        provenance,
    })
}

/// K-means over the rows of the offset matrix; returns K vertex index sets.
pub fn cluster_mesh(
    offsets: &OffsetMatrix,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ClusterError> {
    let n = offsets.num_vertices();
    if k < 1 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    let rows: Vec<&[f64]> = (0..n).map(|l| offsets.row(l)).collect();
    let result = kmeans::kmeans(&rows, k, &KMeansParams::new(seed))?;
    let mut clusters = vec![Vec::new(); k];
    for (vertex, &cluster) in result.assignments.iter().enumerate() {
        clusters[cluster].push(vertex);
    }
    Ok(clusters)
}

/// Compresses controller `i`'s offset column to one mean activation per
/// mesh cluster.
pub fn compress_controller(
    offsets: &OffsetMatrix,
    mesh_clusters: &[Vec<usize>],
    i: usize,
) -> Vec<f64> {
    debug_assert!(!offsets.null_controllers().contains(&i));
    mesh_clusters
        .iter()
        .map(|cluster| {
            let sum: f64 = cluster.iter().map(|&l| offsets.value(l, i)).sum();
            sum / cluster.len() as f64
        })
        .collect()
}

/// Assigns every non-null controller to the mesh clusters where its mean
/// activation is high.
///
/// Each controller's compressed profile is split by the exact 1-D 2-means;
/// the controller joins every cluster in the high group. With a single
/// cluster all non-null controllers join it; a controller whose profile is
/// constant joins every cluster (its activation peaks nowhere) and a
/// warning is logged.
pub fn assign_controllers(offsets: &OffsetMatrix, mesh_clusters: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let k = mesh_clusters.len();
    let m = offsets.num_controllers();

    let ids: Vec<usize> = (0..m).collect();
    let high_sets = exec::map_collect(&ids, |&i| {
        if offsets.null_controllers().contains(&i) {
            return Vec::new();
        }
        if k == 1 {
            return vec![0];
        }
        let profile = compress_controller(offsets, mesh_clusters, i);
        match kmeans::two_means_1d(&profile) {
            Ok(split) => split.high,
            Err(KMeansError::ConstantInput) => {
                log::warn!(
                    "controller {i} has a constant activation profile; assigning to all {k} clusters"
                );
                (0..k).collect()
            }
            Err(e) => unreachable!("offset means are finite: {e}"),
        }
    });

    let mut controller_clusters = vec![Vec::new(); k];
    for (i, highs) in high_sets.iter().enumerate() {
        for &cluster in highs {
            controller_clusters[cluster].push(i);
        }
    }
    controller_clusters
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// True when the pair's controller overlap exceeds the allowed fraction of
/// the smaller set: |C^k ∩ C^j| > p * min(|C^k|, |C^j|).
fn merge_condition(a: &[usize], b: &[usize], p: f64) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let inter = intersection_size(a, b);
    inter as f64 > p * a.len().min(b.len()) as f64
}

/// Merges cluster pairs whose controller overlap exceeds `p` until no pair
/// qualifies.
///
/// Greedy: each round merges the qualifying pair with the largest overlap
/// ratio (ties to the lexicographically smallest pair); the union replaces
/// the smaller index. Empty controller clusters never participate.
pub fn merge_overlapping(mut clustering: Clustering, p: f64) -> Clustering {
    loop {
        let n = clustering.controller_clusters.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for k in 0..n {
            for j in (k + 1)..n {
                let (a, b) = (
                    &clustering.controller_clusters[k],
                    &clustering.controller_clusters[j],
                );
                if !merge_condition(a, b, p) {
                    continue;
                }
                let ratio = intersection_size(a, b) as f64 / a.len().min(b.len()) as f64;
                if best.map_or(true, |(_, _, r)| ratio > r) {
                    best = Some((k, j, ratio));
                }
            }
        }
        let Some((k, j, _)) = best else {
            return clustering;
        };
        let mesh_j = clustering.mesh_clusters.remove(j);
        let ctrl_j = clustering.controller_clusters.remove(j);
        let prov_j = clustering.provenance.remove(j);
        clustering.mesh_clusters[k] = sorted_union(&clustering.mesh_clusters[k], &mesh_j);
        clustering.controller_clusters[k] =
            sorted_union(&clustering.controller_clusters[k], &ctrl_j);
        clustering.provenance[k].extend(prov_j);
        clustering.provenance[k].sort_unstable();
    }
}

/// Full pipeline: offsets, mesh K-means, controller assignment, merging.
pub fn cluster_model(
    model: &BlendshapeModel,
    k: usize,
    p: f64,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ClusterError::InvalidP { p });
    }
    let offsets = offsets::compute_offsets(model);
    cluster_offsets(&offsets, k, p, seed)
}

/// Same as [`cluster_model`] but reuses an already-computed offset matrix.
pub fn cluster_offsets(
    offsets: &OffsetMatrix,
    k: usize,
    p: f64,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ClusterError::InvalidP { p });
    }
    let mesh_clusters = cluster_mesh(offsets, k, seed)?;
    let controller_clusters = assign_controllers(offsets, &mesh_clusters);
    let provenance = (0..mesh_clusters.len()).map(|i| vec![i]).collect();
    let clustering = Clustering {
        mesh_clusters,
        controller_clusters,
        params: ClusterParams {
            k_requested: k,
            p,
            seed,
        },
        provenance,
    };
    Ok(merge_overlapping(clustering, p))
}
