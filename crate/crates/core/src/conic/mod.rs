//! Solver-agnostic conic programs: minimize a linear objective over a vector of
//! scalar decision variables subject to affine slacks lying in nonnegative,
//! second-order or positive semidefinite cones.
//!
//! Slack layout per cone kind:
//!
//! * `non_neg`, dim `d`: `d` rows, each `>= 0`.
//! * `second_order`, dim `d`: rows `(t, v_1, .., v_{d-1})` with `t >= |v|`.
//! * `psd`, dim `d`: `d(d+1)/2` rows holding the lower triangle of a symmetric
//!   matrix row by row; entry `(i, j)` with `i >= j` is row `i(i+1)/2 + j` and
//!   stands for both `(i, j)` and `(j, i)`.
//!
//! Every slack is `constant + sum coeff * x[var]`, stored as sparse triplets.
//! [`ConicProgram::to_json`] emits exactly this structure for cross-checking
//! with external tools.

mod barrier;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

pub use barrier::{solve, SolverError, SolverOutput, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    NonNeg,
    SecondOrder,
    Psd,
}

/// Why a cone is in the program; lets callers tell synthesis conditions
/// apart from supplementary conditions, objective epigraphs and variable
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeRole {
    Design,
    Auxiliary,
    Objective,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub name: String,
    pub kind: ConeKind,
    pub dim: usize,
    pub role: ConeRole,
    /// `(row, value)` pairs.
    pub constant: Vec<(usize, f64)>,
    /// `(row, var, value)` triplets.
    pub coefficients: Vec<(usize, usize, f64)>,
}

impl Cone {
    pub fn rows(&self) -> usize {
        slack_rows(self.kind, self.dim)
    }

    /// Barrier parameter of the standard logarithmic barrier for this cone.
    pub fn barrier_parameter(&self) -> f64 {
        match self.kind {
            ConeKind::NonNeg => self.dim as f64,
            ConeKind::SecondOrder => 2.0,
            ConeKind::Psd => self.dim as f64,
        }
    }

    /// Dense slack vector at `x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.rows()];
        for &(r, v) in &self.constant {
            s[r] += v;
        }
        for &(r, k, v) in &self.coefficients {
            s[r] += v * x[k];
        }
        s
    }
}

pub fn slack_rows(kind: ConeKind, dim: usize) -> usize {
    match kind {
        ConeKind::NonNeg | ConeKind::SecondOrder => dim,
        ConeKind::Psd => dim * (dim + 1) / 2,
    }
}

/// Packed row of entry `(i, j)` of a symmetric matrix.
pub fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

pub fn unpack_symmetric(dim: usize, packed: &[f64]) -> Mat {
    Mat::from_fn(dim, dim, |i, j| packed[packed_index(i, j)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VarShape {
    Scalar,
    /// Lower triangle, packed like a PSD slack.
    Symmetric { dim: usize },
    /// Row-major.
    Dense { rows: usize, cols: usize },
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Scalar => 1,
            VarShape::Symmetric { dim } => dim * (dim + 1) / 2,
            VarShape::Dense { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

impl VarBlock {
    /// Variable index of entry `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        match self.shape {
            VarShape::Scalar => self.offset,
            VarShape::Symmetric { .. } => self.offset + packed_index(i, j),
            VarShape::Dense { cols, .. } => self.offset + i * cols + j,
        }
    }

    /// Rebuilds the matrix value of this block from a solution vector.
    pub fn value(&self, x: &[f64]) -> Mat {
        match self.shape {
            VarShape::Scalar => Mat::from_element(1, 1, x[self.offset]),
            VarShape::Symmetric { dim } => {
                unpack_symmetric(dim, &x[self.offset..self.offset + self.shape.len()])
            }
            VarShape::Dense { rows, cols } => Mat::from_fn(rows, cols, |i, j| x[self.index(i, j)]),
        }
    }
}

/// Affine vector expression `constant + sum_var coeffs[var] * x[var]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    constant: Vec<f64>,
    terms: BTreeMap<usize, Vec<f64>>,
}

impl AffineExpr {
    pub fn new(rows: usize) -> Self {
        AffineExpr {
            rows,
            constant: vec![0.0; rows],
            terms: BTreeMap::new(),
        }
    }

    pub fn add_constant(&mut self, row: usize, value: f64) {
        self.constant[row] += value;
    }

    pub fn add_term(&mut self, row: usize, var: usize, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let rows = self.rows;
        self.terms.entry(var).or_insert_with(|| vec![0.0; rows])[row] += coeff;
    }

    /// True when no decision variable enters the expression.
    pub fn is_constant(&self) -> bool {
        self.terms.values().all(|c| c.iter().all(|v| *v == 0.0))
    }

    pub fn into_cone(self, name: impl Into<String>, kind: ConeKind, dim: usize, role: ConeRole) -> Cone {
        debug_assert_eq!(slack_rows(kind, dim), self.rows);
        let constant = self
            .constant
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(r, v)| (r, *v))
            .collect();
        let mut coefficients = Vec::new();
        for (var, coeffs) in &self.terms {
            for (r, v) in coeffs.iter().enumerate() {
                if *v != 0.0 {
                    coefficients.push((r, *var, *v));
                }
            }
        }
        coefficients.sort_by_key(|&(r, k, _)| (r, k));
        Cone {
            name: name.into(),
            kind,
            dim,
            role,
            constant,
            coefficients,
        }
    }
}

/// Affine symmetric-matrix expression, stored packed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymExpr {
    dim: usize,
    inner: AffineExpr,
}

impl SymExpr {
    pub fn new(dim: usize) -> Self {
        SymExpr {
            dim,
            inner: AffineExpr::new(dim * (dim + 1) / 2),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `m` placed at `(r0, c0)`. Diagonal blocks (`r0 == c0`) must be
    /// symmetric and only their lower triangle is read; off-diagonal blocks
    /// must lie below the diagonal and stand for themselves and their mirror.
    pub fn add_constant_block(&mut self, r0: usize, c0: usize, m: &Mat) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let (gi, gj) = (r0 + i, c0 + j);
                let v = m[(i, j)];
                if v != 0.0 && (r0 != c0 || gi >= gj) {
                    self.inner.add_constant(packed_index(gi, gj), v);
                }
            }
        }
    }

    pub fn add_constant(&mut self, m: &Mat) {
        self.add_constant_block(0, 0, m);
    }

    /// Adds `m * x[var]` placed at `(r0, c0)`, with the same block rules as
    /// [`SymExpr::add_constant_block`].
    pub fn add_term_block(&mut self, r0: usize, c0: usize, var: usize, m: &Mat) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let (gi, gj) = (r0 + i, c0 + j);
                let v = m[(i, j)];
                if v != 0.0 && (r0 != c0 || gi >= gj) {
                    self.inner.add_term(packed_index(gi, gj), var, v);
                }
            }
        }
    }

    pub fn add_term(&mut self, var: usize, m: &Mat) {
        self.add_term_block(0, 0, var, m);
    }

    pub fn into_cone(self, name: impl Into<String>, role: ConeRole) -> Cone {
        let dim = self.dim;
        self.inner.into_cone(name, ConeKind::Psd, dim, role)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub variables: Vec<VarBlock>,
    pub n_vars: usize,
    /// Sparse objective `(var, coeff)`; the program minimizes `sum coeff * x[var]`.
    pub objective: Vec<(usize, f64)>,
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, shape: VarShape) -> VarBlock {
        let block = VarBlock {
            name: name.into(),
            shape,
            offset: self.n_vars,
        };
        self.n_vars += shape.len();
        self.variables.push(block.clone());
        block
    }

    pub fn add_cone(&mut self, cone: Cone) {
        self.cones.push(cone);
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        if let Some(entry) = self.objective.iter_mut().find(|(k, _)| *k == var) {
            entry.1 += coeff;
        } else {
            self.objective.push((var, coeff));
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(k, c)| c * x[k]).sum()
    }

    pub fn barrier_parameter(&self) -> f64 {
        self.cones.iter().map(Cone::barrier_parameter).sum()
    }

    pub fn cone(&self, name: &str) -> Option<&Cone> {
        self.cones.iter().find(|c| c.name == name)
    }

    /// Debug JSON: variable blocks, objective, and per-cone triplets.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": "tsobs-conic-v1",
            "sense": "minimize",
            "psd_packing": "lower triangle, row by row; row i(i+1)/2 + j holds entries (i,j) and (j,i)",
            "program": self,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        serde_json::from_value(value["program"].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout() {
        assert_eq!(packed_index(0, 0), 0);
        assert_eq!(packed_index(1, 0), 1);
        assert_eq!(packed_index(0, 1), 1);
        assert_eq!(packed_index(1, 1), 2);
        assert_eq!(packed_index(2, 1), 4);
        let m = unpack_symmetric(2, &[1.0, 2.0, 3.0]);
        assert_eq!(m, Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn off_diagonal_block_is_mirrored() {
        let mut prog = ConicProgram::new();
        let x = prog.add_variable("x", VarShape::Scalar);
        let mut e = SymExpr::new(2);
        e.add_term_block(1, 0, x.offset, &Mat::from_element(1, 1, 1.0));
        e.add_constant(&Mat::identity(2, 2));
        let cone = e.into_cone("blk", ConeRole::Design);
        let s = unpack_symmetric(2, &cone.slack(&[0.5]));
        assert_eq!(s, Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
    }

    #[test]
    fn json_round_trip() {
        let mut prog = ConicProgram::new();
        let p = prog.add_variable("P", VarShape::Symmetric { dim: 2 });
        let mut e = SymExpr::new(2);
        for i in 0..2 {
            for j in 0..=i {
                let mut basis = Mat::zeros(2, 2);
                basis[(i, j)] = 1.0;
                basis[(j, i)] = 1.0;
                e.add_term(p.index(i, j), &basis);
            }
        }
        e.add_constant(&(-Mat::identity(2, 2) * 1e-6));
        prog.add_cone(e.into_cone("pd_P", ConeRole::Design));
        prog.add_objective(p.index(0, 0), 1.0);
        let back = ConicProgram::from_json(&prog.to_json()).unwrap();
        assert_eq!(back, prog);
    }
}
