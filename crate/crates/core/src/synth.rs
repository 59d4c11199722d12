//! Synthetic blendshape models with planted block structure, used for all
//! testing and benchmarking in place of proprietary face data.
//!
//! Vertices are split into `k_true` active blocks plus an optional
//! controller-free "skull" block of inactive vertices. Every controller
//! belongs to exactly one block and deforms it with a smooth bump (Gaussian
//! falloff around a random center, with a magnitude floor so every vertex
//! of the block responds). `cross_talk` adds a small leakage bump onto
//! active vertices of other blocks; with `cross_talk = 0` the offset
//! matrix is exactly block diagonal.

use crate::clustering::{ClusterParams, Clustering};
use crate::model::{AnimationSet, BlendshapeModel, Frame};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Spec(String),
}

/// Parameters of a planted synthetic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub m: usize,
    pub k_true: usize,
    /// Fraction of vertices placed in the inactive skull block.
    pub inactive_fraction: f64,
    /// Magnitude of off-block influence relative to in-block amplitude.
    pub cross_talk: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 || self.m == 0 || self.k_true == 0 {
            return Err(SynthError::Spec("n, m and k_true must be positive".into()));
        }
        if self.m < self.k_true {
            return Err(SynthError::Spec(format!(
                "m = {} must be at least k_true = {}",
                self.m, self.k_true
            )));
        }
        if !(0.0..1.0).contains(&self.inactive_fraction) {
            return Err(SynthError::Spec(format!(
                "inactive_fraction = {} must lie in [0, 1)",
                self.inactive_fraction
            )));
        }
        if !(0.0..=0.2).contains(&self.cross_talk) {
            return Err(SynthError::Spec(format!(
                "cross_talk = {} must lie in [0, 0.2]",
                self.cross_talk
            )));
        }
        let inactive = (self.inactive_fraction * self.n as f64).round() as usize;
        if self.n - inactive < self.k_true {
            return Err(SynthError::Spec(format!(
                "only {} active vertices for {} blocks",
                self.n - inactive,
                self.k_true
            )));
        }
        Ok(())
    }

    fn inactive_count(&self) -> usize {
        (self.inactive_fraction * self.n as f64).round() as usize
    }
}

/// Contiguous vertex ranges: `k_true` active blocks followed by the skull.
fn block_ranges(spec: &SynthSpec) -> (Vec<(usize, usize)>, usize) {
    let active = spec.n - spec.inactive_count();
    let base = active / spec.k_true;
    let extra = active % spec.k_true;
    let mut ranges = Vec::with_capacity(spec.k_true);
    let mut start = 0;
    for b in 0..spec.k_true {
        let len = base + usize::from(b < extra);
        ranges.push((start, start + len));
        start += len;
    }
    (ranges, active)
}

fn unit_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        if norm2 > 1e-4 && norm2 <= 1.0 {
            let norm = norm2.sqrt();
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

// In-block magnitudes never fall below this floor, keeping every vertex of
// a block clearly tied to its controllers and the within-block spread of
// offset rows well under the between-block separation.
const MAG_FLOOR: f64 = 0.5;

/// Generates a model and its ground-truth clustering.
///
/// The returned clustering holds one pair per active block (its vertices
/// and its controllers) plus, when `inactive_fraction > 0`, a final
/// controller-free pair for the skull block.
pub fn generate_model(spec: &SynthSpec) -> Result<(BlendshapeModel, Clustering), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ranges, active) = block_ranges(spec);

    // Smooth random neutral surface: low-frequency sinusoids per axis.
    let mut neutral = Vec::with_capacity(3 * spec.n);
    let freqs: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(1.0..4.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.5..1.5),
            )
        })
        .collect();
    for l in 0..spec.n {
        let t = l as f64 / spec.n as f64;
        for &(f, phase, amp) in &freqs {
            neutral.push(amp * (std::f64::consts::TAU * f * t + phase).sin());
        }
    }

    let block_of_controller = |i: usize| i % spec.k_true;
    let mut columns = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let block = block_of_controller(i);
        let (lo, hi) = ranges[block];
        let len = (hi - lo) as f64;
        let center = rng.random_range(lo..hi) as f64;
        let width = len * rng.random_range(0.35..0.7);
        let amplitude = rng.random_range(0.5..2.0);
        let dir = unit_direction(&mut rng);

        let mut col = vec![0.0f64; 3 * spec.n];
        for l in lo..hi {
            let d = l as f64 - center;
            let mag = MAG_FLOOR + (1.0 - MAG_FLOOR) * (-d * d / (2.0 * width * width)).exp();
            let scale = amplitude * mag;
            col[3 * l] = scale * dir[0];
            col[3 * l + 1] = scale * dir[1];
            col[3 * l + 2] = scale * dir[2];
        }

        // Leakage: a narrow bump at a random spot in the other active
        // blocks, peaking at cross_talk of the controller's amplitude.
        if spec.cross_talk > 0.0 && spec.k_true > 1 {
            let outside = active - (hi - lo);
            let pick = rng.random_range(0..outside);
            let leak_center = if pick < lo { pick } else { pick + (hi - lo) };
            let leak_width = rng.random_range(2.0..8.0);
            let leak_dir = unit_direction(&mut rng);
            let leak = spec.cross_talk * amplitude;
            for l in 0..active {
                if l >= lo && l < hi {
                    continue;
                }
                let d = l as f64 - leak_center as f64;
                let mag = (-d * d / (2.0 * leak_width * leak_width)).exp();
                if mag < 1e-12 {
                    continue;
                }
                col[3 * l] = leak * mag * leak_dir[0];
                col[3 * l + 1] = leak * mag * leak_dir[1];
                col[3 * l + 2] = leak * mag * leak_dir[2];
            }
        }
        columns.push(col);
    }

    let names = (0..spec.m)
        .map(|i| format!("block{}_ctrl{}", block_of_controller(i), i))
        .collect();
    let model = BlendshapeModel::new(spec.n, spec.m, neutral, columns, names)
        .expect("generated model satisfies its own invariants");

    let mut mesh_clusters: Vec<Vec<usize>> =
        ranges.iter().map(|&(lo, hi)| (lo..hi).collect()).collect();
    let mut controller_clusters: Vec<Vec<usize>> = (0..spec.k_true)
        .map(|b| {
            (0..spec.m)
                .filter(|&i| block_of_controller(i) == b)
                .collect()
        })
        .collect();
    if spec.inactive_count() > 0 {
        mesh_clusters.push((active..spec.n).collect());
        controller_clusters.push(Vec::new());
    }
    let count = mesh_clusters.len();
    let planted = Clustering {
        mesh_clusters,
        controller_clusters,
        params: ClusterParams {
            k_requested: count,
            p: 1.0,
            seed: spec.seed,
        },
        provenance: (0..count).map(|i| vec![i]).collect(),
    };
    Ok((model, planted))
}

/// Draws `num_frames` sparse random weight vectors and synthesizes their
/// meshes. Each controller is active with probability `sparsity`, with a
/// uniform weight in [0, 1].
pub fn generate_animation(
    model: &BlendshapeModel,
    num_frames: usize,
    sparsity: f64,
    seed: u64,
) -> Result<AnimationSet, SynthError> {
    if num_frames == 0 {
        return Err(SynthError::Spec("num_frames must be at least 1".into()));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(SynthError::Spec(format!(
            "sparsity = {sparsity} must lie in (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.num_controllers();
    let frames = (0..num_frames)
        .map(|_| {
            let weights: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.random::<f64>() < sparsity {
                        rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let mesh = model
                .synthesize_mesh(&weights)
                .expect("weights have length m");
            Frame {
                weights,
                mesh: Some(mesh),
            }
        })
        .collect();
    Ok(AnimationSet {
        model_ref: "synthetic".into(),
        frames,
    })
}

/// Adjusted Rand index between two labelings of the same items.
/// 1.0 means identical partitions up to relabeling.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |&x| x + 1);
    let kb = b.iter().max().map_or(0, |&x| x + 1);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_table: f64 = table.iter().map(|&x| choose2(x)).sum();
    let sum_rows: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let sum_cols: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0;
    }
    (sum_table - expected) / (max_index - expected)
}
