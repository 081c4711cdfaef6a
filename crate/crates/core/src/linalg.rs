//! Dense linear-algebra helpers shared by the design, certification and
//! simulation code.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below this fraction of the largest one are treated as zero
/// when forming the pseudo-inverse.
pub const PINV_TRUNCATION: f64 = 1e-12;

/// Relative singular-value threshold used for numerical rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Builds a matrix from row-major nested vectors. Returns `None` for ragged
/// input. An empty outer vector yields a `0 x cols_hint` matrix.
pub fn rows_to_matrix(rows: &[Vec<f64>], cols_hint: usize) -> Option<Mat> {
    if rows.is_empty() {
        return Some(Mat::zeros(0, cols_hint));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Moore-Penrose pseudo-inverse of an output matrix together with the
/// projector onto its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    /// `C^+`, shape `n x n_y`.
    pub pinv: Mat,
    /// `H = I - C^+ C`, shape `n x n`.
    pub annihilator: Mat,
    /// Number of singular values kept.
    pub rank: usize,
}

/// Singular triplets with `sigma > 0`, in decreasing order of `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplets {
    pub values: Vec<f64>,
    /// Left vectors as columns, `rows x k`.
    pub u: Mat,
    /// Right vectors as columns, `cols x k`.
    pub v: Mat,
}

/// Singular triplets read off the symmetric eigendecomposition of
/// `[[0, M], [M^T, 0]]`, whose eigenpairs are `+-sigma` with vectors
/// `(u, +-v) / sqrt(2)`. nalgebra's bidiagonal SVD occasionally returns
/// inaccurate singular vectors for rank-deficient input; the symmetric
/// eigensolver does not square the singular values and stays accurate.
pub fn singular_triplets(m: &Mat) -> SingularTriplets {
    let (rows, cols) = m.shape();
    let mut j = Mat::zeros(rows + cols, rows + cols);
    j.view_mut((0, rows), (rows, cols)).copy_from(m);
    j.view_mut((rows, 0), (cols, rows)).copy_from(&m.transpose());
    let eig = j.symmetric_eigen();
    let mut order: Vec<usize> = (0..rows + cols).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(rows.min(cols));
    let scale = std::f64::consts::SQRT_2;
    SingularTriplets {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        u: Mat::from_fn(rows, order.len(), |i, c| eig.eigenvectors[(i, order[c])] * scale),
        v: Mat::from_fn(cols, order.len(), |i, c| eig.eigenvectors[(rows + i, order[c])] * scale),
    }
}

/// Singular values in decreasing order, padded with zeros to `min(rows, cols)`.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let mut values = singular_triplets(m).values;
    values.resize(m.nrows().min(m.ncols()), 0.0);
    values
}

/// `C^+ = V S^+ U^T` with singular values below [`PINV_TRUNCATION`] relative
/// to the largest dropped, and the annihilator `H = I - C^+ C`.
pub fn pseudo_inverse(c: &Mat) -> PseudoInverse {
    let (rows, cols) = c.shape();
    if rows == 0 || cols == 0 {
        return PseudoInverse {
            pinv: Mat::zeros(cols, rows),
            annihilator: Mat::identity(cols, cols),
            rank: 0,
        };
    }
    let t = singular_triplets(c);
    let cutoff = PINV_TRUNCATION * t.values.first().copied().unwrap_or(0.0);
    let mut pinv = Mat::zeros(cols, rows);
    let mut rank = 0;
    for (k, &sigma) in t.values.iter().enumerate() {
        if sigma <= cutoff {
            break;
        }
        rank += 1;
        pinv += t.v.column(k) * t.u.column(k).transpose() / sigma;
    }
    let annihilator = Mat::identity(cols, cols) - &pinv * c;
    PseudoInverse {
        pinv,
        annihilator,
        rank,
    }
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_triplets(m).values;
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Largest singular value (0 for an empty matrix).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_triplets(m).values.first().copied().unwrap_or(0.0)
}

pub fn symmetric_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - m^T`.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = symmetric_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Horizontal concatenation `[a b]`; both must share the row count.
pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_identity() {
        let pi = pseudo_inverse(&Mat::identity(3, 3));
        assert!((pi.pinv - Mat::identity(3, 3)).norm() < 1e-14);
        assert!(pi.annihilator.norm() < 1e-14);
        assert_eq!(pi.rank, 3);
    }

    #[test]
    fn pinv_orthonormal_rows_is_transpose() {
        let s = 1.0 / 2f64.sqrt();
        let c = Mat::from_row_slice(2, 3, &[s, s, 0.0, 0.0, 0.0, 1.0]);
        let pi = pseudo_inverse(&c);
        assert!((pi.pinv - c.transpose()).norm() < 1e-14);
    }

    #[test]
    fn pinv_output_matrix_annihilator() {
        // Route through C^T (C C^T)^{-1}, independent of the SVD.
        let c = Mat::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let cct = &c * c.transpose();
        let oracle = c.transpose() * cct.try_inverse().unwrap();
        let pi = pseudo_inverse(&c);
        assert!((&pi.pinv - &oracle).norm() < 1e-12);
        let expected_h = Mat::from_diagonal(&Vector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!((pi.annihilator - expected_h).norm() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        // The last row is twice the first; nalgebra's SVD vectors were off by 7e-3 here.
        let mut c = Mat::from_row_slice(
            4,
            5,
            &[
                -0.049619067617529655, 0.22368060612459084, 0.6115300147493175, -0.10817386644881877, 0.36749789248775766,
                -0.6665575584291425, 0.8854517834958355, -0.6134709387386472, 0.8167453112150969, -0.2952845451292414,
                0.6769342607046873, -0.7647123834910037, -0.11245937844244835, 0.7741220354818861, 0.4474606175028666,
                0.0, 0.0, 0.0, 0.0, 0.0,
            ],
        );
        let first = c.row(0).clone_owned();
        c.row_mut(3).copy_from(&(first * 2.0));
        let pi = pseudo_inverse(&c);
        assert_eq!(pi.rank, 3);
        let g = &pi.pinv;
        assert!((&c * g * &c - &c).norm() < 1e-12);
        assert!((g * &c * g - g).norm() < 1e-12);
        let sv = singular_values(&c);
        assert_eq!(sv.len(), 4);
        assert!(sv[3] < 1e-12 && sv[0] >= sv[1] && sv[1] >= sv[2]);
    }

    #[test]
    fn rank_of_projection() {
        let m = Mat::from_diagonal(&Vector::from_vec(vec![-0.8, 1.0, 0.0]));
        assert_eq!(numerical_rank(&m, RANK_TOLERANCE), 2);
        assert_eq!(numerical_rank(&Mat::zeros(3, 3), RANK_TOLERANCE), 0);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(rows_to_matrix(&[vec![1.0, 2.0], vec![3.0]], 2).is_none());
        let m = rows_to_matrix(&[vec![], vec![]], 0).unwrap();
        assert_eq!(m.shape(), (2, 0));
    }
}
