//! Blendshape model and animation data: types, JSON formats, validation.
//!
//! A model is a neutral mesh `b0` (3n stacked vertex coordinates, xyz
//! interleaved per vertex) plus a delta matrix `B` of shape 3n x m whose
//! columns are the controller blendshapes. The linear rig maps a weight
//! vector `c` to the mesh `b0 + B c`.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Neutral mesh plus blendshape deltas, with one named controller per column.
///
/// Vertex `l` (0-based) occupies coordinates `3l, 3l+1, 3l+2` of `neutral`
/// and of every blendshape column.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendshapeModel {
    num_vertices: usize,
    num_controllers: usize,
    neutral: Vec<f64>,
    /// Column-major 3n x m: column `i` occupies `[i*3n, (i+1)*3n)`.
    blendshapes: Vec<f64>,
    controller_names: Vec<String>,
}

/// On-disk model document. Blendshapes are stored one array per controller.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    num_vertices: usize,
    num_controllers: usize,
    neutral: Vec<f64>,
    controller_names: Vec<String>,
    blendshapes: Vec<Vec<f64>>,
}

impl BlendshapeModel {
    /// Builds a model from parts, checking every invariant.
    pub fn new(
        num_vertices: usize,
        num_controllers: usize,
        neutral: Vec<f64>,
        blendshape_columns: Vec<Vec<f64>>,
        controller_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        if num_vertices == 0 {
            return Err(ModelError::Validation(
                "num_vertices must be positive".into(),
            ));
        }
        if num_controllers == 0 {
            return Err(ModelError::Validation(
                "num_controllers must be positive".into(),
            ));
        }
        let rows = 3 * num_vertices;
        if neutral.len() != rows {
            return Err(ModelError::Validation(format!(
                "neutral has {} entries, expected 3*{} = {}",
                neutral.len(),
                num_vertices,
                rows
            )));
        }
        if blendshape_columns.len() != num_controllers {
            return Err(ModelError::Validation(format!(
                "{} blendshape columns, expected {}",
                blendshape_columns.len(),
                num_controllers
            )));
        }
        if controller_names.len() != num_controllers {
            return Err(ModelError::Validation(format!(
                "{} controller names, expected {}",
                controller_names.len(),
                num_controllers
            )));
        }
        for (i, name) in controller_names.iter().enumerate() {
            if name.is_empty() {
                return Err(ModelError::Validation(format!(
                    "controller {i} has an empty name"
                )));
            }
            if controller_names[..i].contains(name) {
                return Err(ModelError::Validation(format!(
                    "duplicate controller name {name:?}"
                )));
            }
        }
        if neutral.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Validation("non-finite entry in neutral".into()));
        }
        let mut blendshapes = Vec::with_capacity(rows * num_controllers);
        for (i, col) in blendshape_columns.into_iter().enumerate() {
            if col.len() != rows {
                return Err(ModelError::Validation(format!(
                    "blendshape column {} has {} entries, expected {}",
                    i,
                    col.len(),
                    rows
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Validation(format!(
                    "non-finite entry in blendshape column {i}"
                )));
            }
            blendshapes.extend_from_slice(&col);
        }
        Ok(Self {
            num_vertices,
            num_controllers,
            neutral,
            blendshapes,
            controller_names,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_controllers(&self) -> usize {
        self.num_controllers
    }

    /// Stacked neutral mesh, length 3n.
    pub fn neutral(&self) -> &[f64] {
        &self.neutral
    }

    pub fn controller_names(&self) -> &[String] {
        &self.controller_names
    }

    /// Delta column for controller `i`, length 3n.
    pub fn blendshape(&self, i: usize) -> &[f64] {
        let rows = 3 * self.num_vertices;
        &self.blendshapes[i * rows..(i + 1) * rows]
    }

    /// Applies the linear rig: `b0 + B c`.
    pub fn synthesize_mesh(&self, weights: &[f64]) -> Result<Vec<f64>, ModelError> {
        if weights.len() != self.num_controllers {
            return Err(ModelError::Dimension {
                expected: self.num_controllers,
                got: weights.len(),
            });
        }
        let mut mesh = self.neutral.clone();
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = self.blendshape(i);
            for (out, &d) in mesh.iter_mut().zip(col) {
                *out += w * d;
            }
        }
        Ok(mesh)
    }
}

/// Reads and validates a model document.
pub fn load_model(path: impl AsRef<Path>) -> Result<BlendshapeModel, ModelError> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    BlendshapeModel::new(
        file.num_vertices,
        file.num_controllers,
        file.neutral,
        file.blendshapes,
        file.controller_names,
    )
}

/// Writes the canonical model document. `load_model` of the result
/// reproduces the model exactly.
pub fn save_model(model: &BlendshapeModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let file = ModelFile {
        num_vertices: model.num_vertices,
        num_controllers: model.num_controllers,
        neutral: model.neutral.clone(),
        controller_names: model.controller_names.clone(),
        blendshapes: (0..model.num_controllers)
            .map(|i| model.blendshape(i).to_vec())
            .collect(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// One animation frame: ground-truth weights and, when available, the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub weights: Vec<f64>,
    pub mesh: Option<Vec<f64>>,
}

/// A sequence of frames tied to a model by an opaque identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationSet {
    pub model_ref: String,
    pub frames: Vec<Frame>,
}

impl AnimationSet {
    /// Checks frame dimensions and finiteness against a model. Weights
    /// outside [0, 1] are legal; a warning is logged once per set.
    pub fn validate_against(&self, model: &BlendshapeModel) -> Result<(), ModelError> {
        let m = model.num_controllers();
        let rows = 3 * model.num_vertices();
        let mut out_of_range = 0usize;
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.weights.len() != m {
                return Err(ModelError::Validation(format!(
                    "frame {} has {} weights, expected {}",
                    t,
                    frame.weights.len(),
                    m
                )));
            }
            if frame.weights.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Validation(format!(
                    "non-finite weight in frame {t}"
                )));
            }
            out_of_range += frame
                .weights
                .iter()
                .filter(|&&w| !(0.0..=1.0).contains(&w))
                .count();
            if let Some(mesh) = &frame.mesh {
                if mesh.len() != rows {
                    return Err(ModelError::Validation(format!(
                        "frame {} mesh has {} entries, expected {}",
                        t,
                        mesh.len(),
                        rows
                    )));
                }
                if mesh.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::Validation(format!(
                        "non-finite mesh entry in frame {t}"
                    )));
                }
            }
        }
        if out_of_range > 0 {
            log::warn!("{out_of_range} weight entries fall outside [0, 1]; accepted as-is");
        }
        Ok(())
    }
}

/// Reads an animation document. Call [`AnimationSet::validate_against`]
/// before using it with a model.
pub fn load_animation(path: impl AsRef<Path>) -> Result<AnimationSet, ModelError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_animation(set: &AnimationSet, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, serde_json::to_string(set)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> BlendshapeModel {
        // n=2, m=1: smallest valid shape.
        BlendshapeModel::new(
            2,
            1,
            vec![0.0; 6],
            vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]],
            vec!["jaw_open".into()],
        )
        .unwrap()
    }

    #[test]
    fn smallest_valid_model_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"num_vertices":2,"num_controllers":1,
                "neutral":[0,0,0,0,0,0],
                "controller_names":["a"],
                "blendshapes":[[1,2,3,4,5,6]]}"#,
        )
        .unwrap();
        let model = load_model(&path).unwrap();
        assert_eq!(model.num_vertices(), 2);
        assert_eq!(model.num_controllers(), 1);
        assert_eq!(model.blendshape(0).len(), 6);
    }

    #[test]
    fn wrong_row_count_rejected() {
        let err = BlendshapeModel::new(2, 1, vec![0.0; 6], vec![vec![1.0; 5]], vec!["a".into()])
            .unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)));
    }

    #[test]
    fn nan_in_neutral_rejected() {
        let err = BlendshapeModel::new(
            2,
            1,
            vec![0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0],
            vec![vec![0.0; 6]],
            vec!["a".into()],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = BlendshapeModel::new(
            1,
            2,
            vec![0.0; 3],
            vec![vec![0.0; 3], vec![0.0; 3]],
            vec!["a".into(), "a".into()],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)));
    }

    #[test]
    fn zero_weights_reproduce_neutral() {
        let model = tiny_model();
        assert_eq!(model.synthesize_mesh(&[0.0]).unwrap(), model.neutral());
    }

    #[test]
    fn unit_weight_adds_one_column() {
        let model = tiny_model();
        let mesh = model.synthesize_mesh(&[1.0]).unwrap();
        assert_eq!(mesh, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn wrong_weight_length_is_dimension_error() {
        let model = tiny_model();
        assert!(matches!(
            model.synthesize_mesh(&[0.0, 0.0]),
            Err(ModelError::Dimension {
                expected: 1,
                got: 2
            })
        ));
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BlendshapeModel {
        let neutral: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let names = (0..m).map(|i| format!("c{i}")).collect();
        BlendshapeModel::new(n, m, neutral, cols, names).unwrap()
    }

    // Independent oracle: naive triple-loop mat-vec over the column list.
    fn matvec_oracle(model: &BlendshapeModel, weights: &[f64]) -> Vec<f64> {
        let rows = 3 * model.num_vertices();
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            let mut acc = model.neutral()[r];
            for (i, &w) in weights.iter().enumerate() {
                acc += model.blendshape(i)[r] * w;
            }
            out[r] = acc;
        }
        out
    }

    #[test]
    fn synthesize_matches_matvec_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = random_model(&mut rng, 4, 3);
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = model.synthesize_mesh(&weights).unwrap();
        let want = matvec_oracle(&model, &weights);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn rig_is_linear_in_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let model = random_model(&mut rng, 5, 4);
            let c1: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c2: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let combo: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
            let lhs = model.synthesize_mesh(&combo).unwrap();
            let f1 = model.synthesize_mesh(&c1).unwrap();
            let f2 = model.synthesize_mesh(&c2).unwrap();
            let scale: f64 = lhs.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for r in 0..lhs.len() {
                let rhs = model.neutral()[r]
                    + a * (f1[r] - model.neutral()[r])
                    + b * (f2[r] - model.neutral()[r]);
                assert!((lhs[r] - rhs).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn model_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng, 6, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
        // Saving the reloaded model reproduces the bytes.
        let path2 = dir.path().join("m2.json");
        save_model(&back, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn animation_round_trip_and_validation() {
        let model = tiny_model();
        let set = AnimationSet {
            model_ref: "tiny".into(),
            frames: vec![
                Frame {
                    weights: vec![0.5],
                    mesh: Some(model.synthesize_mesh(&[0.5]).unwrap()),
                },
                Frame {
                    weights: vec![1.0],
                    mesh: None,
                },
            ],
        };
        set.validate_against(&model).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        save_animation(&set, &path).unwrap();
        assert_eq!(load_animation(&path).unwrap(), set);

        let bad = AnimationSet {
            model_ref: "tiny".into(),
            frames: vec![Frame {
                weights: vec![0.5, 0.5],
                mesh: None,
            }],
        };
        assert!(bad.validate_against(&model).is_err());
    }
}
