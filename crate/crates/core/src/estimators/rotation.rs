//! Rotation estimation.
//!
//! The egoistic estimator projects the double-centered squared cross
//! distances through the observer's pseudo-inverse, eigendecomposes the
//! resulting 3x3 Gram, and searches candidate rotations over all eigenvector
//! column permutations and sign patterns. Assigning each candidate its
//! correspondingly permuted eigenvalues makes every proper candidate
//! reconstruct the Gram exactly, so the ambiguity set is inherent to the
//! measurement model; the estimate reports it instead of hiding it.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{MatrixError, PipelineError, Stage, StageFailure};
use crate::numkit::{
    center_columns, double_center, pseudo_inverse, svd, sym_eig, PinvSide, RotationMatrix,
};
use crate::scene::ConformationMatrix;

/// Relative eigenvalue gap below which permutation selection is unreliable.
pub const DEGENERATE_GAP: f64 = 1e-6;

/// A rotation estimate plus the diagnostics needed to interpret it.
#[derive(Debug, Clone)]
pub struct RotationEstimate {
    pub q_hat: RotationMatrix,
    pub objective_value: f64,
    /// Index into the 6 column permutations (lexicographic order).
    pub chosen_permutation: usize,
    /// Number of objective-tied proper candidates.
    pub ambiguity_set_size: usize,
    /// The objective-tied proper candidates themselves, enumeration order.
    pub candidates: Vec<Matrix3<f64>>,
    /// Set when eigenvalues are too close for reliable axis assignment.
    pub eigenvalue_gap_warning: bool,
}

impl RotationEstimate {
    /// Smallest Frobenius distance from any tied candidate to `q`.
    pub fn min_distance_to(&self, q: &Matrix3<f64>) -> f64 {
        self.candidates
            .iter()
            .map(|c| (c - q).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

const SIGNS: [[f64; 3]; 8] = [
    [1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [-1.0, -1.0, -1.0],
];

fn lex_less(a: &Matrix3<f64>, b: &Matrix3<f64>) -> bool {
    for i in 0..3 {
        for j in 0..3 {
            match a[(i, j)].total_cmp(&b[(i, j)]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}

fn to_matrix3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

fn gap_warning(eigenvalues: &[f64; 3]) -> bool {
    let scale = eigenvalues[0].abs().max(1e-300);
    let g1 = (eigenvalues[0] - eigenvalues[1]).abs() / scale;
    let g2 = (eigenvalues[1] - eigenvalues[2]).abs() / scale;
    g1 < DEGENERATE_GAP || g2 < DEGENERATE_GAP
}

/// Egoistic rotation recovery from the noisy cross-distance block alone.
///
/// Projects `-1/2 J D12^(.2) J` through the left pseudo-inverse of the
/// centered observer conformation, eigendecomposes the squared projection,
/// and enumerates all 6 column permutations x 8 sign patterns of the
/// eigenvector basis, keeping proper candidates. The reported minimizer is
/// the lexicographically smallest matrix among objective-tied candidates;
/// the whole tied set rides along for ambiguity-aware evaluation.
pub fn estimate_rotation_egoistic(
    c1: &ConformationMatrix,
    d12_noisy: &DMatrix<f64>,
) -> Result<RotationEstimate, PipelineError> {
    if d12_noisy.nrows() != c1.landmark_count() {
        return Err(PipelineError::new(
            Stage::Rotation,
            MatrixError::DimensionMismatch {
                context: format!(
                    "cross block has {} rows but the observer has {} sensors",
                    d12_noisy.nrows(),
                    c1.landmark_count()
                ),
            },
        ));
    }
    let centered = c1.centered();
    let pinv = pseudo_inverse(&centered, PinvSide::Left).map_err(|source| {
        PipelineError::new(Stage::Rotation, StageFailure::Conformation { body: 1, source })
    })?;
    let dbar = double_center(&d12_noisy.map(|x| x * x));
    let projected = &pinv * dbar;
    let ddt_dyn = &projected * projected.transpose();
    let eig = sym_eig(&ddt_dyn).map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    let ddt = to_matrix3(&ddt_dyn);
    let v = to_matrix3(&eig.eigenvectors);
    let lam = [
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.eigenvalues[2],
    ];

    let mut evaluated: Vec<(f64, Matrix3<f64>, usize)> = Vec::with_capacity(24);
    for (p_idx, perm) in PERMUTATIONS.iter().enumerate() {
        for signs in SIGNS.iter() {
            let mut cand = Matrix3::<f64>::zeros();
            for j in 0..3 {
                for i in 0..3 {
                    cand[(i, j)] = signs[j] * v[(i, perm[j])];
                }
            }
            if cand.determinant() <= 0.0 {
                continue;
            }
            let lam_p = Matrix3::from_diagonal(&Vector3::new(
                lam[perm[0]],
                lam[perm[1]],
                lam[perm[2]],
            ));
            let objective = (ddt - cand * lam_p * cand.transpose()).norm_squared();
            evaluated.push((objective, cand, p_idx));
        }
    }
    let best = evaluated
        .iter()
        .map(|(o, _, _)| *o)
        .fold(f64::INFINITY, f64::min);
    let tie_window = 1e-9 * ddt.norm_squared().max(1.0);
    let tied: Vec<&(f64, Matrix3<f64>, usize)> = evaluated
        .iter()
        .filter(|(o, _, _)| *o <= best + tie_window)
        .collect();
    let chosen = tied
        .iter()
        .min_by(|a, b| {
            if lex_less(&a.1, &b.1) {
                std::cmp::Ordering::Less
            } else if lex_less(&b.1, &a.1) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .expect("candidate set is never empty");
    let q_hat = RotationMatrix::from_matrix(chosen.1)
        .map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    Ok(RotationEstimate {
        q_hat,
        objective_value: chosen.0,
        chosen_permutation: chosen.2,
        ambiguity_set_size: tied.len(),
        candidates: tied.iter().map(|c| c.1).collect(),
        eigenvalue_gap_warning: gap_warning(&lam),
    })
}

/// Genie-aided orthogonal Procrustes rotation: both conformations known.
///
/// Solves `min_Q || Dcheck - C1bar^T Q ||_F` in closed form through the SVD
/// of `C1bar * Dcheck`, with the determinant corrected to +1.
pub fn estimate_rotation_opp_genie(
    c1: &ConformationMatrix,
    c2: &ConformationMatrix,
    d12_noisy: &DMatrix<f64>,
) -> Result<RotationEstimate, PipelineError> {
    if d12_noisy.shape() != (c1.landmark_count(), c2.landmark_count()) {
        return Err(PipelineError::new(
            Stage::Rotation,
            MatrixError::DimensionMismatch {
                context: format!(
                    "cross block must be {}x{}, got {}x{}",
                    c1.landmark_count(),
                    c2.landmark_count(),
                    d12_noisy.nrows(),
                    d12_noisy.ncols()
                ),
            },
        ));
    }
    let c1bar = c1.centered();
    let c2bar = c2.centered();
    // Validates the observer's rank through the same cap as the pseudo-inverse.
    pseudo_inverse(&c1bar, PinvSide::Left).map_err(|source| {
        PipelineError::new(Stage::Rotation, StageFailure::Conformation { body: 1, source })
    })?;
    let pinv2 = pseudo_inverse(&c2bar, PinvSide::Right).map_err(|source| {
        PipelineError::new(Stage::Rotation, StageFailure::Conformation { body: 2, source })
    })?;
    let dbar = double_center(&d12_noisy.map(|x| x * x));
    let dcheck = &dbar * pinv2;
    let m = &c1bar * &dcheck;
    let decomposition = svd(&m).map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    let u = to_matrix3(&decomposition.u);
    let v_t = to_matrix3(&decomposition.v_t);
    let d = (u * v_t).determinant();
    let q = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum())) * v_t;
    let q_hat =
        RotationMatrix::from_matrix(q).map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    let objective_value = (&dcheck - c1bar.transpose() * q).norm_squared();
    Ok(RotationEstimate {
        q_hat,
        objective_value,
        chosen_permutation: 0,
        ambiguity_set_size: 1,
        candidates: vec![q],
        eigenvalue_gap_warning: false,
    })
}

/// Reference eigenvector extraction from the anchored target positions.
///
/// Returns the determinant-corrected eigenvector basis of the centered
/// target Gram. Its columns follow the eigenvalue order, not the target's
/// axis order, so near-spherical targets make it swap axes; it exists as the
/// documented baseline for exactly that failure.
pub fn estimate_rotation_naive_eig(
    s2_hat: &DMatrix<f64>,
) -> Result<RotationEstimate, PipelineError> {
    if s2_hat.nrows() != 3 || s2_hat.ncols() < 3 {
        return Err(PipelineError::new(
            Stage::Rotation,
            MatrixError::DimensionMismatch {
                context: format!(
                    "target positions must be 3xN with N >= 3, got {}x{}",
                    s2_hat.nrows(),
                    s2_hat.ncols()
                ),
            },
        ));
    }
    let centered = center_columns(s2_hat).0;
    let gram = &centered * centered.transpose();
    let eig = sym_eig(&gram).map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    let lam = [
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.eigenvalues[2],
    ];
    if lam[0] <= 0.0 || lam[1] <= 1e-12 * lam[0] {
        return Err(PipelineError::new(
            Stage::Rotation,
            StageFailure::Conformation {
                body: 2,
                source: MatrixError::IllConditioned {
                    cond: if lam[1] > 0.0 { lam[0] / lam[1] } else { f64::INFINITY },
                    cap: 1e12,
                },
            },
        ));
    }
    let mut v = to_matrix3(&eig.eigenvectors);
    if v.determinant() < 0.0 {
        for i in 0..3 {
            v[(i, 2)] = -v[(i, 2)];
        }
    }
    let objective_value = {
        let lam_m = Matrix3::from_diagonal(&Vector3::new(lam[0], lam[1], lam[2]));
        (to_matrix3(&gram) - v * lam_m * v.transpose()).norm_squared()
    };
    let proper_signs = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let candidates: Vec<Matrix3<f64>> = proper_signs
        .iter()
        .map(|s| {
            let mut c = v;
            for j in 0..3 {
                for i in 0..3 {
                    c[(i, j)] *= s[j];
                }
            }
            c
        })
        .collect();
    let q_hat =
        RotationMatrix::from_matrix(v).map_err(|e| PipelineError::new(Stage::Rotation, e))?;
    Ok(RotationEstimate {
        q_hat,
        objective_value,
        chosen_permutation: 0,
        ambiguity_set_size: candidates.len(),
        candidates,
        eigenvalue_gap_warning: gap_warning(&lam),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{perturb_distances, NoiseModel};
    use crate::numkit::{rotation_from_euler, EulerAngles};
    use crate::scene::{benchmark_scene, build_scene, place_body, Pose, ScenarioSpec};
    use approx::assert_relative_eq;

    #[test]
    fn egoistic_identity_pose_contains_identity() {
        let spec = ScenarioSpec {
            euler_deg: [0.0, 0.0, 0.0],
            translation: [4.0, -2.0, 1.0],
            ..ScenarioSpec::benchmark()
        };
        let scene = spec.build().unwrap();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_egoistic(&scene.c1, &blocks.d12).unwrap();
        assert!(est.objective_value <= 1e-9);
        let dist = est.min_distance_to(&Matrix3::identity());
        assert!(dist <= 1e-6, "identity not in ambiguity set: {dist}");
    }

    #[test]
    fn egoistic_reconstructs_projected_gram() {
        let scene = benchmark_scene();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_egoistic(&scene.c1, &blocks.d12).unwrap();

        // Rebuild the projected Gram independently.
        let pinv = pseudo_inverse(&scene.c1.centered(), PinvSide::Left).unwrap();
        let dbar = double_center(&blocks.d12.map(|x| x * x));
        let projected = &pinv * dbar;
        let ddt = &projected * projected.transpose();

        // The target's centered Gram is diagonal with entries {10, 20, 1.4},
        // so the eigenvalues are {20, 10, 1.4} and the chosen candidate must
        // reproduce the Gram with its correspondingly permuted eigenvalues.
        let eig = sym_eig(&ddt).unwrap();
        assert_relative_eq!(eig.eigenvalues[0], 20.0, epsilon = 1e-9);
        assert_relative_eq!(eig.eigenvalues[1], 10.0, epsilon = 1e-9);
        assert_relative_eq!(eig.eigenvalues[2], 1.4, epsilon = 1e-9);

        let perm = PERMUTATIONS[est.chosen_permutation];
        let lam_p = Matrix3::from_diagonal(&Vector3::new(
            eig.eigenvalues[perm[0]],
            eig.eigenvalues[perm[1]],
            eig.eigenvalues[perm[2]],
        ));
        let q = est.q_hat.matrix();
        let rebuilt = q * lam_p * q.transpose();
        let rel = (to_matrix3(&ddt) - rebuilt).norm() / ddt.norm();
        assert!(rel <= 1e-9, "reconstruction residual {rel}");
    }

    #[test]
    fn egoistic_recovers_truth_modulo_ambiguity() {
        let scene = benchmark_scene();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_egoistic(&scene.c1, &blocks.d12).unwrap();
        let dist = est.min_distance_to(scene.pose.rotation.matrix());
        assert!(dist <= 1e-6, "truth not in ambiguity set: {dist}");
    }

    #[test]
    fn egoistic_rejects_coplanar_observer() {
        let mut rows = ScenarioSpec::benchmark().c1;
        rows[2] = vec![0.0; 12];
        let c1 = ConformationMatrix::new(DMatrix::from_fn(3, 12, |i, j| rows[i][j])).unwrap();
        let scene = benchmark_scene();
        let blocks = scene.edm_blocks();
        let err = estimate_rotation_egoistic(&c1, &blocks.d12).unwrap_err();
        assert_eq!(err.stage, Stage::Rotation);
        assert!(err.to_string().contains("body 1"));
    }

    #[test]
    fn genie_recovers_exact_rotation_noiseless() {
        let scene = benchmark_scene();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_opp_genie(&scene.c1, &scene.c2, &blocks.d12).unwrap();
        let truth = rotation_from_euler(EulerAngles::from_degrees(10.0, 20.0, 45.0));
        let err = (est.q_hat.matrix() - truth.matrix()).norm();
        assert!(err <= 1e-9, "genie rotation error {err}");
    }

    #[test]
    fn genie_identity_pose() {
        let spec = ScenarioSpec {
            euler_deg: [0.0, 0.0, 0.0],
            ..ScenarioSpec::benchmark()
        };
        let scene = spec.build().unwrap();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_opp_genie(&scene.c1, &scene.c2, &blocks.d12).unwrap();
        let err = (est.q_hat.matrix() - Matrix3::identity()).norm();
        assert!(err <= 1e-9);
    }

    #[test]
    fn genie_stays_proper_under_noise() {
        let scene = benchmark_scene();
        let blocks = scene.edm_blocks();
        for seed in 0..100 {
            let noisy = perturb_distances(&blocks.d12, &NoiseModel { sigma: 0.1, seed });
            let est = estimate_rotation_opp_genie(&scene.c1, &scene.c2, &noisy.matrix).unwrap();
            let q = est.q_hat.matrix();
            assert!((q.transpose() * q - Matrix3::identity()).norm() <= 1e-9);
            assert!((q.determinant() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn naive_eig_identity_case() {
        // Axis-aligned body whose principal variances are already in
        // descending axis order.
        let pts = DMatrix::from_row_slice(
            3,
            6,
            &[
                3.0, -3.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 2.0, -2.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 1.0, -1.0,
            ],
        );
        let est = estimate_rotation_naive_eig(&pts).unwrap();
        let dist = est.min_distance_to(&Matrix3::identity());
        assert!(dist <= 1e-9, "identity not reached up to sign flips: {dist}");
    }

    #[test]
    fn naive_eig_spans_match_truth_axes() {
        // Benchmark target placed noiselessly: each returned column must be
        // one of the true rotated axes up to sign.
        let scene = benchmark_scene();
        let s2 = place_body(&scene.c2, &scene.pose);
        let est = estimate_rotation_naive_eig(&s2).unwrap();
        let q_true = scene.pose.rotation.matrix();
        let mut used = [false; 3];
        for i in 0..3 {
            let col = est.q_hat.matrix().column(i);
            let j = (0..3)
                .find(|&j| !used[j] && col.dot(&q_true.column(j)).abs() > 1.0 - 1e-9)
                .expect("every returned axis matches a true axis");
            used[j] = true;
        }
    }

    #[test]
    fn naive_eig_swaps_axes_for_near_spherical_bodies() {
        // Variances 2a^2 etc. chosen within ~1%: the descending eigenvalue
        // order disagrees with the body axis order, so the estimate lands far
        // from the truth while the extraction residual stays tiny.
        let a = 0.706f64;
        let b = 0.709f64;
        let c = 0.703f64;
        let body = DMatrix::from_row_slice(
            3,
            6,
            &[
                a, -a, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, b, -b, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, c, -c,
            ],
        );
        let q0 = rotation_from_euler(EulerAngles::from_degrees(30.0, 40.0, 50.0));
        let shape = ConformationMatrix::new(body).unwrap();
        let pose = Pose {
            rotation: q0,
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        let placed = place_body(&shape, &pose);
        let est = estimate_rotation_naive_eig(&placed).unwrap();
        let gram_scale = 2.0 * (a * a + b * b + c * c);
        assert!(est.objective_value.sqrt() <= 1e-9 * gram_scale);
        let dist = est.min_distance_to(q0.matrix());
        assert!(dist > 0.5, "expected a column swap, distance {dist}");
    }

    #[test]
    fn nearly_equal_eigenvalues_trigger_gap_warning() {
        // Two variances matching to within the degenerate-gap threshold.
        let eps = 1e-8;
        let body = DMatrix::from_row_slice(
            3,
            6,
            &[
                1.0, -1.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0 + eps, -1.0 - eps, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 0.5, -0.5,
            ],
        );
        let est = estimate_rotation_naive_eig(&body).unwrap();
        assert!(est.eigenvalue_gap_warning);
    }

    #[test]
    fn well_separated_eigenvalues_do_not_warn() {
        let spec = ScenarioSpec::benchmark();
        let scene = spec.build().unwrap();
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_egoistic(&scene.c1, &blocks.d12).unwrap();
        // Benchmark eigenvalues {20, 10, 1.4} are well separated.
        assert!(!est.eigenvalue_gap_warning);
    }

    #[test]
    fn synthesized_rotation_recovered_modulo_signs() {
        // Shape with descending axis variances and a generic rotation: the
        // ambiguity set must contain the exact truth.
        let body = DMatrix::from_row_slice(
            3,
            8,
            &[
                4.0, -4.0, 2.0, -2.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 2.5, -2.5, 0.0, 0.0, //
                0.5, 0.5, -0.5, -0.5, 0.0, 0.0, 1.5, -1.5,
            ],
        );
        let c2 = ConformationMatrix::new(body).unwrap();
        let c1 = benchmark_scene().c1;
        let q0 = rotation_from_euler(EulerAngles::from_degrees(-25.0, 35.0, 120.0));
        let pose = Pose {
            rotation: q0,
            translation: Vector3::new(5.0, 1.0, -2.0),
        };
        let scene = build_scene(c1, c2, pose);
        let blocks = scene.edm_blocks();
        let est = estimate_rotation_egoistic(&scene.c1, &blocks.d12).unwrap();
        let dist = est.min_distance_to(q0.matrix());
        assert!(dist <= 1e-6, "truth missing from ambiguity set: {dist}");
    }
}
