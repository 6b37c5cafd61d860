//! Classical MDS embedding of a distance matrix and rigid re-anchoring of
//! the embedding into the observer's reference frame.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::EmbedError;
use crate::numkit::{self, center_columns, double_center, sym_eig};
use crate::scene::ConformationMatrix;

/// An MDS embedding: `dim x N` coordinates, the retained eigenvalues, and a
/// count of negative eigenvalues discarded from the spectrum (floored inside
/// the retained set, truncated outside it).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub points: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub negative_discarded: usize,
}

/// Classical MDS: embeds a hollow symmetric distance matrix into `dim`
/// dimensions through the top eigenpairs of the double-centered squared
/// matrix.
///
/// Negative eigenvalues inside the top `dim` (possible under noise) are
/// floored at zero and counted rather than treated as failures; the
/// degenerate-geometry error is reserved for inputs that admit no embedding
/// at all (fewer than `dim` points, or no nonnegative eigenvalue).
pub fn classical_mds(d_hat: &DMatrix<f64>, dim: usize) -> Result<Embedding, EmbedError> {
    let n = d_hat.nrows();
    if n != d_hat.ncols() {
        return Err(EmbedError::NotSquare {
            rows: n,
            cols: d_hat.ncols(),
        });
    }
    if dim == 0 || n < dim {
        return Err(EmbedError::DegenerateGeometry {
            dim,
            reason: format!("need at least {dim} points, got {n}"),
        });
    }
    let b = double_center(&d_hat.map(|x| x * x));
    let eig = sym_eig(&b).map_err(|e| EmbedError::DimensionMismatch {
        context: e.to_string(),
    })?;
    let scale = eig.eigenvalues[0].abs().max(1.0);
    if eig.eigenvalues[0] < -1e-9 * scale {
        return Err(EmbedError::DegenerateGeometry {
            dim,
            reason: "no nonnegative eigenvalue in the centered spectrum".to_string(),
        });
    }
    // Rounding-scale negatives are zeros of an exact configuration, not
    // evidence of non-Euclidean input; count only meaningful ones.
    let negative_floor = -1e-12 * scale;
    let negative_discarded = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < negative_floor)
        .count();
    let mut retained = Vec::with_capacity(dim);
    let mut points = DMatrix::zeros(dim, n);
    for r in 0..dim {
        let lambda = eig.eigenvalues[r].max(0.0);
        retained.push(lambda);
        let s = lambda.sqrt();
        for j in 0..n {
            points[(r, j)] = s * eig.eigenvectors[(j, r)];
        }
    }
    Ok(Embedding {
        points,
        eigenvalues: retained,
        negative_discarded,
    })
}

/// A rigid alignment: orthogonal rotation plus translation.
#[derive(Debug, Clone, Copy)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = numkit::rotate_columns(&self.rotation, points);
        for mut col in out.column_iter_mut() {
            col += self.translation;
        }
        out
    }
}

/// Closed-form orthogonal Procrustes fit of `source` onto `target`
/// (both `3 x N`, `N >= 3`): the proper rotation and translation minimizing
/// `|| target - (Q * source + t * 1^T) ||_F`.
///
/// Reflections are excluded; the determinant of the returned rotation is +1.
pub fn procrustes(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> Result<RigidTransform, EmbedError> {
    if source.nrows() != 3 || target.nrows() != 3 || source.ncols() != target.ncols() {
        return Err(EmbedError::DimensionMismatch {
            context: format!(
                "point sets must be 3xN with equal N, got {}x{} and {}x{}",
                source.nrows(),
                source.ncols(),
                target.nrows(),
                target.ncols()
            ),
        });
    }
    if source.ncols() < 3 {
        return Err(EmbedError::DimensionMismatch {
            context: format!("need at least 3 points, got {}", source.ncols()),
        });
    }
    let (src_c, src_mean) = center_columns(source);
    let (tgt_c, tgt_mean) = center_columns(target);
    // Cross-covariance of target against source.
    let h_dyn = &tgt_c * src_c.transpose();
    let h = Matrix3::from_fn(|i, j| h_dyn[(i, j)]);
    let svd = numkit::svd(&DMatrix::from_fn(3, 3, |i, j| h[(i, j)]))
        .map_err(|e| EmbedError::DimensionMismatch {
            context: e.to_string(),
        })?;
    let s1 = svd.singular_values[0];
    let s2 = svd.singular_values[1];
    if s2 <= 1e-12 * s1.max(1e-300) {
        return Err(EmbedError::AmbiguousRegistration {
            ratio: if s1 > 0.0 { s2 / s1 } else { 0.0 },
        });
    }
    let u = Matrix3::from_fn(|i, j| svd.u[(i, j)]);
    let v_t = Matrix3::from_fn(|i, j| svd.v_t[(i, j)]);
    let d = (u * v_t).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = u * correction * v_t;
    let src_mean3 = Vector3::new(src_mean[0], src_mean[1], src_mean[2]);
    let tgt_mean3 = Vector3::new(tgt_mean[0], tgt_mean[1], tgt_mean[2]);
    let translation = tgt_mean3 - rotation * src_mean3;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Registration residual `|| target - (Q * source + t) ||_F`.
pub fn alignment_residual(
    transform: &RigidTransform,
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> f64 {
    (target - transform.apply(source)).norm()
}

/// Re-anchors an embedding into the observer's frame: fits the first `N1`
/// embedded points onto the observer's conformation and applies the fitted
/// transform to the remaining columns.
///
/// An eigendecomposition fixes the embedding only up to an orthogonal
/// transform, so the raw points may be a mirror image of the true
/// configuration. Both orientations are tried and the one that fits the
/// observer better wins; the per-fit rotations themselves stay proper.
pub fn anchor_embedding(
    embedding: &Embedding,
    c1: &ConformationMatrix,
) -> Result<DMatrix<f64>, EmbedError> {
    let n1 = c1.landmark_count();
    let total = embedding.points.ncols();
    if embedding.points.nrows() != 3 {
        return Err(EmbedError::DimensionMismatch {
            context: format!("embedding must be 3xN, got {} rows", embedding.points.nrows()),
        });
    }
    if total <= n1 {
        return Err(EmbedError::DimensionMismatch {
            context: format!(
                "embedding has {total} columns but the observer alone has {n1}"
            ),
        });
    }
    let direct = embedding.points.clone();
    let mut mirrored = embedding.points.clone();
    for j in 0..total {
        mirrored[(2, j)] = -mirrored[(2, j)];
    }
    let mut best: Option<(f64, DMatrix<f64>, RigidTransform)> = None;
    for candidate in [direct, mirrored] {
        let head = candidate.columns(0, n1).into_owned();
        let fit = procrustes(&head, c1.matrix())?;
        let residual = alignment_residual(&fit, &head, c1.matrix());
        let better = match &best {
            None => true,
            Some((r, _, _)) => residual < *r,
        };
        if better {
            best = Some((residual, candidate, fit));
        }
    }
    let (_, points, fit) = best.expect("two candidates evaluated");
    let tail = points.columns(n1, total - n1).into_owned();
    Ok(fit.apply(&tail))
}
