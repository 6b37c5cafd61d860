//! Sorted symmetric eigendecomposition and singular value decomposition.

use nalgebra::{DMatrix, DVector};

use super::ensure_finite;
use crate::error::MatrixError;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending and eigenvector columns permuted to match.
#[derive(Debug, Clone)]
pub struct SymEigDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }
}

/// Thin SVD with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl SvdDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&self.singular_values);
        &self.u * sigma * &self.v_t
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// The input is symmetrized as `(M + M^T)/2` first, absorbing the rounding
/// asymmetry that double-centered matrices accumulate.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEigDecomposition, MatrixError> {
    if m.nrows() != m.ncols() {
        return Err(MatrixError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    ensure_finite(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let order = descending_order(eig.eigenvalues.as_slice());
    let n = m.nrows();
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin SVD with singular values sorted descending.
pub fn svd(m: &DMatrix<f64>) -> Result<SvdDecomposition, MatrixError> {
    ensure_finite(m)?;
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let order = descending_order(svd.singular_values.as_slice());
    let k = svd.singular_values.len();
    let singular_values = DVector::from_fn(k, |i, _| svd.singular_values[order[i]]);
    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_t_sorted = DMatrix::zeros(k, v_t.ncols());
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_t_sorted.set_row(dst, &v_t.row(src));
    }
    Ok(SvdDecomposition {
        u: u_sorted,
        singular_values,
        v_t: v_t_sorted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::centering_matrix;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn sym_eig_sorts_descending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = sym_eig(&m).unwrap();
        assert_relative_eq!(
            eig.eigenvalues,
            DVector::from_vec(vec![3.0, 2.0, 1.0]),
            epsilon = 1e-12
        );
        // Eigenvectors of a diagonal matrix form a signed permutation.
        for col in eig.eigenvectors.column_iter() {
            let big: Vec<f64> = col.iter().map(|x| x.abs()).collect();
            let max = big.iter().cloned().fold(0.0_f64, f64::max);
            assert_relative_eq!(max, 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(eig.reconstruct(), m, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_of_centering_matrix() {
        let j = centering_matrix(2).unwrap();
        let eig = sym_eig(&j).unwrap();
        assert_relative_eq!(eig.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig.eigenvalues[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn benchmark_target_gram_eigenvalues() {
        // The centered benchmark target has row variances 10, 20 and 1.4,
        // with exactly orthogonal coordinate rows.
        let c2 = crate::scene::benchmark_scene().c2.centered();
        let gram = &c2 * c2.transpose();
        let eig = sym_eig(&gram).unwrap();
        assert_relative_eq!(eig.eigenvalues[0], 20.0, epsilon = 1e-9);
        assert_relative_eq!(eig.eigenvalues[1], 10.0, epsilon = 1e-9);
        assert_relative_eq!(eig.eigenvalues[2], 1.4, epsilon = 1e-9);
    }

    #[test]
    fn sym_eig_rejects_rectangular() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(sym_eig(&m), Err(MatrixError::NotSquare { .. })));
    }

    #[test]
    fn sym_eig_reconstruction_residual() {
        let raw = DMatrix::from_fn(6, 6, |i, j| ((i * 5 + j) as f64 * 0.7).sin());
        let m = &raw + raw.transpose();
        let eig = sym_eig(&m).unwrap();
        let rel = (eig.reconstruct() - &m).norm() / m.norm();
        assert!(rel < 1e-9, "relative residual {rel}");
    }

    #[test]
    fn svd_identity() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let d = svd(&eye).unwrap();
        assert_relative_eq!(
            d.singular_values,
            DVector::from_element(3, 1.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(d.reconstruct(), eye, epsilon = 1e-12);
    }

    #[test]
    fn svd_orders_descending() {
        let m = dmatrix![0.0, 0.0; 0.0, 2.0];
        let d = svd(&m).unwrap();
        assert_relative_eq!(d.singular_values[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(d.singular_values[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_reconstruction_random() {
        let m = DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64 * 1.3).cos() * 2.0);
        let d = svd(&m).unwrap();
        let rel = (d.reconstruct() - &m).norm() / m.norm();
        assert!(rel < 1e-9, "relative residual {rel}");
        for w in d.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
            assert!(w[1] >= 0.0);
        }
    }
}
