//! Takagi-Sugeno models with multiplicative unknown parameters.
//!
//! A [`TsModel`] is a convex blend of `r = 2^n_p` vertex submodels
//!
//! ```text
//! dx/dt = sum_i mu_i(z) { (A_i + sum_j theta_j Abar_ij) x
//!                       + (B_i + sum_j theta_j Bbar_ij) u
//!                       + (F_i + sum_j theta_j Fbar_ij) }
//! y     = C x
//! ```
//!
//! where the premise vector `z` is a linear function of the measured `(y, u)`.
//! [`snl_decompose`] builds such a model from a [`ParamAffineModel`], whose
//! matrices are affine in `z`, by evaluating every family at the corners of the
//! premise box (sector nonlinearity). Inside the box the blend reproduces the
//! affine families exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{numerical_rank, Mat, Vector, RANK_TOLERANCE};

/// Largest supported premise count; keeps `2^n_p` submodels manageable.
pub const MAX_PREMISES: usize = 16;

/// Tolerance on `|sum mu - 1|` and on negative weights accepted by
/// [`TsModel::assemble`].
pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("dimension mismatch for {what}: expected {expected}, got {found}")]
    DimensionMismatch {
        what: String,
        expected: String,
        found: String,
    },
    #[error("weights are not a convex combination (deviation {deviation:e})")]
    NonConvexWeights { deviation: f64 },
}

pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

fn mismatch(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> ModelError {
    ModelError::DimensionMismatch {
        what: what.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub(crate) fn check_shape(path: &str, m: &Mat, rows: usize, cols: usize) -> Result<(), ModelError> {
    if m.shape() != (rows, cols) {
        return Err(invalid(
            path,
            format!(
                "expected a {rows}x{cols} matrix, found {}x{}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid(path, "matrix entries must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
    pub n_theta: usize,
    pub r: usize,
}

impl Dimensions {
    pub fn new(
        n: usize,
        n_u: usize,
        n_y: usize,
        n_p: usize,
        n_theta: usize,
    ) -> Result<Self, ModelError> {
        let dims = Dimensions {
            n,
            n_u,
            n_y,
            n_p,
            n_theta,
            r: 1usize << n_p.min(MAX_PREMISES),
        };
        dims.validate("$.dimensions")?;
        Ok(dims)
    }

    pub(crate) fn validate(&self, path: &str) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(invalid(format!("{path}.n"), "state dimension must be at least 1"));
        }
        if self.n_y == 0 || self.n_y > self.n {
            return Err(invalid(
                format!("{path}.n_y"),
                format!("output count must be in 1..={}", self.n),
            ));
        }
        if self.n_p > MAX_PREMISES {
            return Err(invalid(
                format!("{path}.n_p"),
                format!("at most {MAX_PREMISES} premise variables are supported"),
            ));
        }
        if self.r != 1usize << self.n_p {
            return Err(invalid(
                format!("{path}.r"),
                format!("submodel count must be 2^n_p = {}", 1usize << self.n_p),
            ));
        }
        Ok(())
    }

    /// Length of the stacked measurement vector `(y, u)`.
    pub fn io_len(&self) -> usize {
        self.n_y + self.n_u
    }
}

/// One measured premise variable `z_j = s_j . (y, u)` with its sector bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Premise {
    pub min: f64,
    pub max: f64,
    pub selector: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiseSpec {
    premises: Vec<Premise>,
}

/// Premise vector computed from measurements, clamped into the sector box.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiseValue {
    pub z: Vector,
    pub saturated: bool,
}

impl PremiseSpec {
    pub fn new(premises: Vec<Premise>, io_len: usize) -> Result<Self, ModelError> {
        for (j, p) in premises.iter().enumerate() {
            let path = format!("$.premises[{j}]");
            if !p.min.is_finite() || !p.max.is_finite() {
                return Err(invalid(path, "premise bounds must be finite"));
            }
            if p.min >= p.max {
                return Err(invalid(
                    path,
                    format!("premise bounds require min < max (min = {}, max = {})", p.min, p.max),
                ));
            }
            if p.selector.len() != io_len {
                return Err(invalid(
                    format!("{path}.selector"),
                    format!("selector must have length n_y + n_u = {io_len}"),
                ));
            }
            if p.selector.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{path}.selector"), "selector entries must be finite"));
            }
        }
        Ok(PremiseSpec { premises })
    }

    pub fn premises(&self) -> &[Premise] {
        &self.premises
    }

    pub fn len(&self) -> usize {
        self.premises.len()
    }

    pub fn is_empty(&self) -> bool {
        self.premises.is_empty()
    }

    /// `z_j = s_j . (y, u)`, clamped to `[min_j, max_j]`.
    pub fn evaluate(&self, y: &Vector, u: &Vector) -> PremiseValue {
        let mut saturated = false;
        let z = Vector::from_iterator(
            self.premises.len(),
            self.premises.iter().map(|p| {
                let ny = y.len();
                let mut raw = 0.0;
                for (k, s) in p.selector.iter().enumerate() {
                    if *s != 0.0 {
                        raw += s * if k < ny { y[k] } else { u[k - ny] };
                    }
                }
                if raw < p.min {
                    saturated = true;
                    p.min
                } else if raw > p.max {
                    saturated = true;
                    p.max
                } else {
                    raw
                }
            }),
        );
        PremiseValue { z, saturated }
    }

    /// Premise vector at the box corner selected by `pattern` (true = upper).
    pub fn corner(&self, pattern: &[bool]) -> Vector {
        Vector::from_iterator(
            self.premises.len(),
            self.premises
                .iter()
                .zip(pattern)
                .map(|(p, &upper)| if upper { p.max } else { p.min }),
        )
    }
}

/// Bit pattern of submodel `i`: entry `j` is true when premise `j` sits at
/// its upper bound. Submodel 0 is the all-upper corner.
pub fn vertex_pattern(i: usize, n_p: usize) -> Vec<bool> {
    (0..n_p).map(|j| (i >> (n_p - 1 - j)) & 1 == 0).collect()
}

/// Matrix family affine in the premise vector: `M(z) = base + sum_j z_j slopes[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    pub base: Mat,
    pub slopes: Vec<Mat>,
}

impl AffineFamily {
    pub fn constant(base: Mat, n_p: usize) -> Self {
        let (r, c) = base.shape();
        AffineFamily {
            base,
            slopes: vec![Mat::zeros(r, c); n_p],
        }
    }

    pub fn zeros(rows: usize, cols: usize, n_p: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols), n_p)
    }

    pub fn at(&self, z: &Vector) -> Mat {
        let mut m = self.base.clone();
        for (zj, slope) in z.iter().zip(&self.slopes) {
            m += slope * *zj;
        }
        m
    }

    fn validate(&self, path: &str, rows: usize, cols: usize, n_p: usize) -> Result<(), ModelError> {
        check_shape(&format!("{path}.base"), &self.base, rows, cols)?;
        if self.slopes.len() != n_p {
            return Err(invalid(
                format!("{path}.slopes"),
                format!("expected {n_p} slope matrices (one per premise), found {}", self.slopes.len()),
            ));
        }
        for (j, s) in self.slopes.iter().enumerate() {
            check_shape(&format!("{path}.slopes[{j}]"), s, rows, cols)?;
        }
        Ok(())
    }
}

/// How one unknown parameter enters the dynamics, each term affine in `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTransmission {
    pub a: AffineFamily,
    pub b: AffineFamily,
    pub f: AffineFamily,
}

/// System whose right-hand side is affine in bounded premise variables and in
/// the unknown parameters; the input to the sector-nonlinearity transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamAffineModel {
    dims: Dimensions,
    a: AffineFamily,
    b: AffineFamily,
    f: AffineFamily,
    transmission: Vec<ParamTransmission>,
    c: Mat,
    premises: PremiseSpec,
}

/// Blended `(A, B, F)` at a given operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Blend {
    pub a: Mat,
    pub b: Mat,
    pub f: Mat,
}

fn check_output_matrix(c: &Mat, dims: &Dimensions) -> Result<(), ModelError> {
    check_shape("$.C", c, dims.n_y, dims.n)?;
    if numerical_rank(c, RANK_TOLERANCE) != dims.n_y {
        return Err(invalid("$.C", "output matrix must have full row rank"));
    }
    Ok(())
}

impl ParamAffineModel {
    pub fn new(
        dims: Dimensions,
        a: AffineFamily,
        b: AffineFamily,
        f: AffineFamily,
        transmission: Vec<ParamTransmission>,
        c: Mat,
        premises: PremiseSpec,
    ) -> Result<Self, ModelError> {
        dims.validate("$.dimensions")?;
        let (n, nu, np) = (dims.n, dims.n_u, dims.n_p);
        if premises.len() != np {
            return Err(invalid(
                "$.premises",
                format!("expected {np} premise definitions, found {}", premises.len()),
            ));
        }
        if np == 0 {
            return Err(invalid("$.premises", "sector decomposition needs at least one premise"));
        }
        a.validate("$.A", n, n, np)?;
        b.validate("$.B", n, nu, np)?;
        f.validate("$.F", n, 1, np)?;
        if transmission.len() != dims.n_theta {
            return Err(invalid(
                "$.transmission",
                format!("expected {} entries (one per parameter), found {}", dims.n_theta, transmission.len()),
            ));
        }
        for (k, t) in transmission.iter().enumerate() {
            t.a.validate(&format!("$.transmission[{k}].A"), n, n, np)?;
            t.b.validate(&format!("$.transmission[{k}].B"), n, nu, np)?;
            t.f.validate(&format!("$.transmission[{k}].F"), n, 1, np)?;
        }
        check_output_matrix(&c, &dims)?;
        Ok(ParamAffineModel {
            dims,
            a,
            b,
            f,
            transmission,
            c,
            premises,
        })
    }

    pub fn dims(&self) -> &Dimensions {
        &self.dims
    }
    pub fn a(&self) -> &AffineFamily {
        &self.a
    }
    pub fn b(&self) -> &AffineFamily {
        &self.b
    }
    pub fn f(&self) -> &AffineFamily {
        &self.f
    }
    pub fn transmission(&self) -> &[ParamTransmission] {
        &self.transmission
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn premises(&self) -> &PremiseSpec {
        &self.premises
    }

    /// `A(z) + sum_j theta_j Abar(z)_j` and the analogous `B`, `F`, evaluated
    /// directly on the affine families.
    pub fn evaluate(&self, z: &Vector, theta: &Vector) -> Blend {
        let mut out = Blend {
            a: self.a.at(z),
            b: self.b.at(z),
            f: self.f.at(z),
        };
        for (t, th) in self.transmission.iter().zip(theta.iter()) {
            out.a += t.a.at(z) * *th;
            out.b += t.b.at(z) * *th;
            out.f += t.f.at(z) * *th;
        }
        out
    }
}

/// Owned constituents of a [`TsModel`]; validated by [`TsModel::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct TsParts {
    pub dims: Dimensions,
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub f: Vec<Mat>,
    /// Indexed `[i][j]`: submodel `i`, parameter `j`.
    pub a_bar: Vec<Vec<Mat>>,
    pub b_bar: Vec<Vec<Mat>>,
    pub f_bar: Vec<Vec<Mat>>,
    pub c: Mat,
    pub premises: PremiseSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsModel {
    parts: TsParts,
    patterns: Vec<Vec<bool>>,
}

fn check_list(path: &str, list: &[Mat], r: usize, rows: usize, cols: usize) -> Result<(), ModelError> {
    if list.len() != r {
        return Err(invalid(path, format!("expected {r} vertex matrices, found {}", list.len())));
    }
    for (i, m) in list.iter().enumerate() {
        check_shape(&format!("{path}[{i}]"), m, rows, cols)?;
    }
    Ok(())
}

fn check_grid(
    path: &str,
    grid: &[Vec<Mat>],
    r: usize,
    nt: usize,
    rows: usize,
    cols: usize,
) -> Result<(), ModelError> {
    if grid.len() != r {
        return Err(invalid(path, format!("expected {r} rows (one per submodel), found {}", grid.len())));
    }
    for (i, row) in grid.iter().enumerate() {
        if row.len() != nt {
            return Err(invalid(
                format!("{path}[{i}]"),
                format!("expected {nt} matrices (one per parameter), found {}", row.len()),
            ));
        }
        for (j, m) in row.iter().enumerate() {
            check_shape(&format!("{path}[{i}][{j}]"), m, rows, cols)?;
        }
    }
    Ok(())
}

impl TsModel {
    pub fn from_parts(parts: TsParts) -> Result<Self, ModelError> {
        let d = parts.dims;
        d.validate("$.dimensions")?;
        if parts.premises.len() != d.n_p {
            return Err(invalid(
                "$.premises",
                format!("expected {} premise definitions, found {}", d.n_p, parts.premises.len()),
            ));
        }
        for (j, p) in parts.premises.premises().iter().enumerate() {
            if p.selector.len() != d.io_len() {
                return Err(invalid(
                    format!("$.premises[{j}].selector"),
                    format!("selector must have length n_y + n_u = {}", d.io_len()),
                ));
            }
        }
        check_list("$.A", &parts.a, d.r, d.n, d.n)?;
        check_list("$.B", &parts.b, d.r, d.n, d.n_u)?;
        check_list("$.F", &parts.f, d.r, d.n, 1)?;
        check_grid("$.A_bar", &parts.a_bar, d.r, d.n_theta, d.n, d.n)?;
        check_grid("$.B_bar", &parts.b_bar, d.r, d.n_theta, d.n, d.n_u)?;
        check_grid("$.F_bar", &parts.f_bar, d.r, d.n_theta, d.n, 1)?;
        check_output_matrix(&parts.c, &d)?;
        let patterns = (0..d.r).map(|i| vertex_pattern(i, d.n_p)).collect();
        Ok(TsModel { parts, patterns })
    }

    pub fn parts(&self) -> &TsParts {
        &self.parts
    }

    pub fn into_parts(self) -> TsParts {
        self.parts
    }

    pub fn dims(&self) -> &Dimensions {
        &self.parts.dims
    }
    pub fn a(&self, i: usize) -> &Mat {
        &self.parts.a[i]
    }
    pub fn b(&self, i: usize) -> &Mat {
        &self.parts.b[i]
    }
    pub fn f(&self, i: usize) -> &Mat {
        &self.parts.f[i]
    }
    pub fn a_bar(&self, i: usize, j: usize) -> &Mat {
        &self.parts.a_bar[i][j]
    }
    pub fn b_bar(&self, i: usize, j: usize) -> &Mat {
        &self.parts.b_bar[i][j]
    }
    pub fn f_bar(&self, i: usize, j: usize) -> &Mat {
        &self.parts.f_bar[i][j]
    }
    pub fn c(&self) -> &Mat {
        &self.parts.c
    }
    pub fn premises(&self) -> &PremiseSpec {
        &self.parts.premises
    }
    pub fn patterns(&self) -> &[Vec<bool>] {
        &self.patterns
    }

    /// Same model with a different premise definition (e.g. to pin the
    /// operating point at one vertex).
    pub fn with_premises(&self, premises: PremiseSpec) -> Result<Self, ModelError> {
        let mut parts = self.parts.clone();
        parts.premises = premises;
        TsModel::from_parts(parts)
    }

    /// Tensor-product weights `mu_i = prod_j eta_j^{b_ij} (1 - eta_j)^{1 - b_ij}`
    /// with normalized sector coordinates `eta_j`, clamped to `[0, 1]`.
    pub fn eval_weights(&self, z: &Vector) -> Result<Vector, ModelError> {
        let d = self.dims();
        if z.len() != d.n_p {
            return Err(mismatch("premise vector", d.n_p, z.len()));
        }
        let eta: Vec<f64> = self
            .premises()
            .premises()
            .iter()
            .zip(z.iter())
            .map(|(p, zj)| ((zj - p.min) / (p.max - p.min)).clamp(0.0, 1.0))
            .collect();
        Ok(Vector::from_iterator(
            d.r,
            self.patterns.iter().map(|bits| {
                bits.iter()
                    .zip(&eta)
                    .map(|(&upper, &e)| if upper { e } else { 1.0 - e })
                    .product::<f64>()
            }),
        ))
    }

    pub fn premise_from_io(&self, y: &Vector, u: &Vector) -> Result<PremiseValue, ModelError> {
        let d = self.dims();
        if y.len() != d.n_y {
            return Err(mismatch("output vector", d.n_y, y.len()));
        }
        if u.len() != d.n_u {
            return Err(mismatch("input vector", d.n_u, u.len()));
        }
        Ok(self.premises().evaluate(y, u))
    }

    /// `sum_i mu_i (A_i + sum_j theta_j Abar_ij)` and likewise for `B`, `F`.
    pub fn assemble(&self, mu: &Vector, theta: &Vector) -> Result<Blend, ModelError> {
        let d = self.dims();
        if mu.len() != d.r {
            return Err(mismatch("weight vector", d.r, mu.len()));
        }
        if theta.len() != d.n_theta {
            return Err(mismatch("parameter vector", d.n_theta, theta.len()));
        }
        let deviation = (mu.sum() - 1.0)
            .abs()
            .max(mu.iter().fold(0.0_f64, |acc, m| acc.max(-m)));
        if !(deviation <= CONVEXITY_TOLERANCE) {
            return Err(ModelError::NonConvexWeights { deviation });
        }
        Ok(self.blend_unchecked(mu, theta))
    }

    pub(crate) fn blend_unchecked(&self, mu: &Vector, theta: &Vector) -> Blend {
        let d = self.dims();
        let mut out = Blend {
            a: Mat::zeros(d.n, d.n),
            b: Mat::zeros(d.n, d.n_u),
            f: Mat::zeros(d.n, 1),
        };
        for i in 0..d.r {
            let w = mu[i];
            if w == 0.0 {
                continue;
            }
            let mut a = self.a(i).clone();
            let mut b = self.b(i).clone();
            let mut f = self.f(i).clone();
            for (j, th) in theta.iter().enumerate() {
                a += self.a_bar(i, j) * *th;
                b += self.b_bar(i, j) * *th;
                f += self.f_bar(i, j) * *th;
            }
            out.a += a * w;
            out.b += b * w;
            out.f += f * w;
        }
        out
    }
}

/// Sector-nonlinearity transform: evaluates every affine family at each
/// premise-box corner.
pub fn snl_decompose(pam: &ParamAffineModel) -> Result<TsModel, ModelError> {
    let d = *pam.dims();
    if d.n_p == 0 {
        return Err(invalid("$.premises", "sector decomposition needs at least one premise"));
    }
    let corners: Vec<Vector> = (0..d.r)
        .map(|i| pam.premises().corner(&vertex_pattern(i, d.n_p)))
        .collect();
    let at_corners = |fam: &AffineFamily| corners.iter().map(|z| fam.at(z)).collect::<Vec<_>>();
    let grid = |pick: fn(&ParamTransmission) -> &AffineFamily| {
        corners
            .iter()
            .map(|z| pam.transmission().iter().map(|t| pick(t).at(z)).collect())
            .collect::<Vec<Vec<Mat>>>()
    };
    TsModel::from_parts(TsParts {
        dims: d,
        a: at_corners(pam.a()),
        b: at_corners(pam.b()),
        f: at_corners(pam.f()),
        a_bar: grid(|t| &t.a),
        b_bar: grid(|t| &t.b),
        f_bar: grid(|t| &t.f),
        c: pam.c().clone(),
        premises: pam.premises().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;

    fn model() -> TsModel {
        snl_decompose(&example::param_affine_model()).unwrap()
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn weights_at_sector_points() {
        let m = model();
        assert_eq!(m.eval_weights(&v(&[1.0])).unwrap(), v(&[0.5, 0.5]));
        assert_eq!(m.eval_weights(&v(&[2.0])).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(m.eval_weights(&v(&[0.0])).unwrap(), v(&[0.0, 1.0]));
        assert!(matches!(
            m.eval_weights(&v(&[1.0, 2.0])),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn premise_from_outputs() {
        let m = model();
        let u = v(&[0.0]);
        let p = m.premise_from_io(&v(&[1.5, 0.5]), &u).unwrap();
        assert_eq!(p.z, v(&[1.0]));
        assert!(!p.saturated);
        let p = m.premise_from_io(&v(&[3.0, 0.0]), &u).unwrap();
        assert_eq!(p.z, v(&[2.0]));
        assert!(p.saturated);
        let p = m.premise_from_io(&v(&[0.0, 0.0]), &u).unwrap();
        assert_eq!(p.z, v(&[0.0]));
        assert!(!p.saturated);
    }

    #[test]
    fn decomposition_matches_reference_entries() {
        let m = model();
        assert_eq!(m.a(0)[(0, 0)], -1.4);
        assert_eq!(m.a(0)[(1, 2)], -2.0);
        assert_eq!(m.a(1)[(0, 0)], 0.0);
        assert_eq!(m.a(1)[(1, 2)], 0.0);
        let abar = Mat::from_diagonal(&v(&[-0.8, 1.0, 0.0]));
        assert_eq!(m.a_bar(0, 0), &abar);
        assert_eq!(m.a_bar(1, 0), &abar);
    }

    #[test]
    fn constant_family_gives_identical_vertices() {
        let d = Dimensions::new(2, 1, 1, 1, 0).unwrap();
        let a0 = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let prem = PremiseSpec::new(
            vec![Premise { min: -1.0, max: 1.0, selector: v(&[1.0, 0.0]) }],
            2,
        )
        .unwrap();
        let pam = ParamAffineModel::new(
            d,
            AffineFamily::constant(a0.clone(), 1),
            AffineFamily::zeros(2, 1, 1),
            AffineFamily::zeros(2, 1, 1),
            vec![],
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            prem,
        )
        .unwrap();
        let ts = snl_decompose(&pam).unwrap();
        assert_eq!(ts.a(0), &a0);
        assert_eq!(ts.a(1), &a0);
    }

    #[test]
    fn assemble_examples() {
        let m = model();
        let blend = m.assemble(&v(&[1.0, 0.0]), &v(&[0.0])).unwrap();
        assert_eq!(&blend.a, m.a(0));
        let blend = m.assemble(&v(&[1.0, 0.0]), &v(&[0.5])).unwrap();
        assert!((blend.a[(0, 0)] - (-1.8)).abs() < 1e-15);
        let blend = m.assemble(&v(&[0.5, 0.5]), &v(&[0.0])).unwrap();
        assert!((blend.a[(0, 0)] - (-0.7)).abs() < 1e-15);
        assert!(matches!(
            m.assemble(&v(&[0.7, 0.7]), &v(&[0.0])),
            Err(ModelError::NonConvexWeights { .. })
        ));
    }

    #[test]
    fn premise_bounds_validated() {
        let err = PremiseSpec::new(
            vec![Premise { min: 1.0, max: 1.0, selector: v(&[1.0]) }],
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("$.premises[0]"));
    }

    #[test]
    fn rank_deficient_output_rejected() {
        let mut parts = model().into_parts();
        parts.c = Mat::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let err = TsModel::from_parts(parts).unwrap_err();
        assert!(err.to_string().contains("full row rank"));
    }

    #[test]
    fn vertex_patterns_are_distinct() {
        for np in 0..5 {
            let pats: std::collections::HashSet<Vec<bool>> =
                (0..1usize << np).map(|i| vertex_pattern(i, np)).collect();
            assert_eq!(pats.len(), 1 << np);
        }
        assert_eq!(vertex_pattern(0, 2), vec![true, true]);
        assert_eq!(vertex_pattern(3, 2), vec![false, false]);
    }
}
