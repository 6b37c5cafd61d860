//! Dense real linear-algebra primitives used across the pipeline: centering
//! operators, hollowing, constrained pseudo-inverses, sorted symmetric
//! eigendecomposition and SVD, rotations, and plain-CSV matrix I/O.

mod decomp;
mod io;
mod rotation;

pub use decomp::{sym_eig, svd, SvdDecomposition, SymEigDecomposition};
pub use io::{matrix_to_csv, parse_matrix_csv, read_matrix_csv, write_matrix_csv};
pub use rotation::{rotation_from_euler, EulerAngles, RotationMatrix};

use nalgebra::{DMatrix, DVector};

use crate::error::MatrixError;

/// Largest acceptable condition number for Gram matrices that get inverted.
/// Past this point double-precision inverses carry no information, so the
/// operations below refuse the input instead of returning garbage.
pub const CONDITION_CAP: f64 = 1e12;

/// Orthogonality / determinant tolerance for rotation matrices.
pub const SO3_TOL: f64 = 1e-9;

pub(crate) fn ensure_finite(m: &DMatrix<f64>) -> Result<(), MatrixError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MatrixError::NonFinite)
    }
}

/// The n-point centering matrix `J = I - (1/n) * 1 * 1^T`.
///
/// Symmetric, idempotent, and annihilates the all-ones vector.
pub fn centering_matrix(n: usize) -> Result<DMatrix<f64>, MatrixError> {
    if n == 0 {
        return Err(MatrixError::Empty);
    }
    let off = -1.0 / n as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + off
        } else {
            off
        }
    }))
}

/// Computes `-1/2 * J_m * M * J_n` for an `m x n` matrix without forming the
/// centering matrices: subtract row means, column means, add the grand mean,
/// then scale. Rows and columns of the result each sum to zero.
pub fn double_center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut row_mean = vec![0.0; rows];
    let mut col_mean = vec![0.0; cols];
    let mut grand = 0.0;
    for j in 0..cols {
        for i in 0..rows {
            let v = m[(i, j)];
            row_mean[i] += v;
            col_mean[j] += v;
            grand += v;
        }
    }
    for r in &mut row_mean {
        *r /= cols as f64;
    }
    for c in &mut col_mean {
        *c /= rows as f64;
    }
    grand /= (rows * cols) as f64;
    DMatrix::from_fn(rows, cols, |i, j| {
        -0.5 * (m[(i, j)] - row_mean[i] - col_mean[j] + grand)
    })
}

/// Zeroes the diagonal of a square matrix, leaving everything else unchanged.
pub fn hollow(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MatrixError> {
    if m.nrows() != m.ncols() {
        return Err(MatrixError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let mut out = m.clone();
    out.fill_diagonal(0.0);
    Ok(out)
}

/// Which one-sided pseudo-inverse of a wide `3 x N` matrix to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinvSide {
    /// `(C C^T)^{-1} C`, a left inverse of `C^T`: `pinv * C^T = I_3`.
    Left,
    /// `C^T (C C^T)^{-1}`, a right inverse of `C`: `C * pinv = I_3`.
    Right,
}

/// One-sided pseudo-inverse of a full-row-rank `3 x N` matrix (`N >= 3`).
///
/// Fails when `C C^T` is singular or its condition number exceeds
/// [`CONDITION_CAP`].
pub fn pseudo_inverse(c: &DMatrix<f64>, side: PinvSide) -> Result<DMatrix<f64>, MatrixError> {
    if c.nrows() != 3 || c.ncols() < 3 {
        return Err(MatrixError::BadConformation {
            rows: c.nrows(),
            cols: c.ncols(),
            min: 3,
        });
    }
    ensure_finite(c)?;
    let gram = c * c.transpose();
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !cond.is_finite() || cond > CONDITION_CAP {
        return Err(MatrixError::IllConditioned {
            cond,
            cap: CONDITION_CAP,
        });
    }
    let inv = gram.try_inverse().ok_or(MatrixError::IllConditioned {
        cond,
        cap: CONDITION_CAP,
    })?;
    Ok(match side {
        PinvSide::Left => inv * c,
        PinvSide::Right => c.transpose() * inv,
    })
}

/// Applies a 3x3 matrix to every column of a 3xN matrix.
pub fn rotate_columns(q: &nalgebra::Matrix3<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(m.nrows(), 3);
    DMatrix::from_fn(3, m.ncols(), |i, j| {
        q[(i, 0)] * m[(0, j)] + q[(i, 1)] * m[(1, j)] + q[(i, 2)] * m[(2, j)]
    })
}

/// Subtracts the column mean from every column; returns the centered matrix
/// and the mean column.
pub fn center_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.ncols() as f64;
    let mean = m.column_sum() / n;
    let mut centered = m.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (centered, mean)
}

/// Condition number estimate from the singular-value spectrum.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0_f64, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}
