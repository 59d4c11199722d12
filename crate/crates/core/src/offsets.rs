//! Per-vertex offset magnitudes: the n x m matrix `D` whose entry (l, i)
//! is the Euclidean norm of vertex l's delta under controller i, with each
//! column scaled so its maximum is 1.
//!
//! Collapsing the three coordinates of a vertex to one row guarantees a
//! row clustering can never split a vertex, and the per-column scaling
//! removes the raw deformation amplitude from the clustering signal.

use crate::exec;
use crate::model::BlendshapeModel;
use std::collections::BTreeSet;
use std::io::Write;

/// Column-normalized offset-magnitude matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetMatrix {
    /// Row-major n x m; row `l` occupies `[l*m, (l+1)*m)`.
    values: Vec<f64>,
    num_vertices: usize,
    num_controllers: usize,
    /// Pre-normalization column maxima, in scene units.
    column_max: Vec<f64>,
    /// Controllers whose blendshape column is identically zero.
    null_controllers: BTreeSet<usize>,
}

impl OffsetMatrix {
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_controllers(&self) -> usize {
        self.num_controllers
    }

    /// Row for vertex `l`: one normalized magnitude per controller.
    pub fn row(&self, l: usize) -> &[f64] {
        &self.values[l * self.num_controllers..(l + 1) * self.num_controllers]
    }

    pub fn value(&self, l: usize, i: usize) -> f64 {
        self.values[l * self.num_controllers + i]
    }

    pub fn column_max(&self) -> &[f64] {
        &self.column_max
    }

    pub fn null_controllers(&self) -> &BTreeSet<usize> {
        &self.null_controllers
    }

    /// Writes the matrix as CSV: one row per vertex, one column per
    /// controller, header of controller names.
    pub fn write_csv<W: Write>(&self, model: &BlendshapeModel, out: &mut W) -> std::io::Result<()> {
        let names: Vec<&str> = model
            .controller_names()
            .iter()
            .map(String::as_str)
            .collect();
        writeln!(out, "{}", names.join(","))?;
        for l in 0..self.num_vertices {
            let row: Vec<String> = self.row(l).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Builds the offset matrix of a model: vertex-wise delta norms, then each
/// column divided by its maximum. All-zero columns are left as zeros and
/// recorded as null controllers.
pub fn compute_offsets(model: &BlendshapeModel) -> OffsetMatrix {
    let n = model.num_vertices();
    let m = model.num_controllers();

    // Rows are independent given the model; norms are order-free.
    let rows = exec::map_indices(n, |l| {
        let mut row = vec![0.0f64; m];
        for (i, slot) in row.iter_mut().enumerate() {
            let col = model.blendshape(i);
            let (x, y, z) = (col[3 * l], col[3 * l + 1], col[3 * l + 2]);
            *slot = (x * x + y * y + z * z).sqrt();
        }
        row
    });

    let mut values = Vec::with_capacity(n * m);
    for row in rows {
        values.extend_from_slice(&row);
    }

    let mut column_max = vec![0.0f64; m];
    for l in 0..n {
        for i in 0..m {
            let v = values[l * m + i];
            if v > column_max[i] {
                column_max[i] = v;
            }
        }
    }

    let mut null_controllers = BTreeSet::new();
    for (i, &mx) in column_max.iter().enumerate() {
        if mx == 0.0 {
            null_controllers.insert(i);
        } else {
            for l in 0..n {
                values[l * m + i] /= mx;
            }
        }
    }
    if !null_controllers.is_empty() {
        log::warn!(
            "{} null controller(s) (all-zero blendshape column): {:?}",
            null_controllers.len(),
            null_controllers
        );
    }

    OffsetMatrix {
        values,
        num_vertices: n,
        num_controllers: m,
        column_max,
        null_controllers,
    }
}
