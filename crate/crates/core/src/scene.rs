//! Ground-truth two-body scenes: conformations, poses, placed sensor
//! positions, and exact distance matrices from which measurements are
//! synthesized.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{MatrixError, SceneError};
use crate::numkit::{self, EulerAngles, RotationMatrix};

/// A body shape: 3 x N landmark coordinates in the body-local frame, N >= 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformationMatrix(DMatrix<f64>);

impl ConformationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, MatrixError> {
        if m.nrows() != 3 || m.ncols() < 3 {
            return Err(MatrixError::BadConformation {
                rows: m.nrows(),
                cols: m.ncols(),
                min: 3,
            });
        }
        numkit::ensure_finite(&m)?;
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn landmark_count(&self) -> usize {
        self.0.ncols()
    }

    /// Mean landmark, i.e. the geometric center in the local frame.
    pub fn centroid(&self) -> Vector3<f64> {
        let m = self.0.column_sum() / self.0.ncols() as f64;
        Vector3::new(m[0], m[1], m[2])
    }

    /// Landmarks with the centroid subtracted from every column.
    pub fn centered(&self) -> DMatrix<f64> {
        numkit::center_columns(&self.0).0
    }
}

/// Rigid pose: rotation plus translation in meters.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// Applies `Q * C + t * 1^T` column-wise.
pub fn place_body(shape: &ConformationMatrix, pose: &Pose) -> DMatrix<f64> {
    let mut placed = numkit::rotate_columns(pose.rotation.matrix(), shape.matrix());
    for mut col in placed.column_iter_mut() {
        col += pose.translation;
    }
    placed
}

/// A fully placed two-body scene. Body 1 defines the reference frame, so its
/// placed positions equal its conformation exactly.
#[derive(Debug, Clone)]
pub struct Scene {
    pub c1: ConformationMatrix,
    pub c2: ConformationMatrix,
    pub pose: Pose,
    pub body1_positions: DMatrix<f64>,
    pub body2_positions: DMatrix<f64>,
}

/// Builds a scene with body 1 at the reference and body 2 placed by `pose`.
pub fn build_scene(c1: ConformationMatrix, c2: ConformationMatrix, pose: Pose) -> Scene {
    let body1_positions = c1.matrix().clone();
    let body2_positions = place_body(&c2, &pose);
    Scene {
        c1,
        c2,
        pose,
        body1_positions,
        body2_positions,
    }
}

/// Pairwise Euclidean distances between the columns of two 3-row point sets.
pub fn exact_edm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, SceneError> {
    if a.nrows() != 3 || b.nrows() != 3 {
        return Err(SceneError::RowCountMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(DMatrix::from_fn(a.ncols(), b.ncols(), |n, m| {
        let dx = a[(0, n)] - b[(0, m)];
        let dy = a[(1, n)] - b[(1, m)];
        let dz = a[(2, n)] - b[(2, m)];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }))
}

/// The three exact distance blocks of a scene (non-squared, meters).
#[derive(Debug, Clone)]
pub struct EdmBlocks {
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d12: DMatrix<f64>,
}

/// Squared column norms of both bodies' placed sensors.
#[derive(Debug, Clone)]
pub struct CrossGramDecomposition {
    pub psi1: DVector<f64>,
    pub psi2: DVector<f64>,
}

impl Scene {
    pub fn edm_blocks(&self) -> EdmBlocks {
        let d1 = exact_edm(&self.body1_positions, &self.body1_positions)
            .expect("scene positions are 3-row");
        let d2 = exact_edm(&self.body2_positions, &self.body2_positions)
            .expect("scene positions are 3-row");
        let d12 = exact_edm(&self.body1_positions, &self.body2_positions)
            .expect("scene positions are 3-row");
        EdmBlocks { d1, d2, d12 }
    }

    pub fn cross_gram(&self) -> CrossGramDecomposition {
        let sq_norms = |s: &DMatrix<f64>| {
            DVector::from_fn(s.ncols(), |j, _| s.column(j).norm_squared())
        };
        CrossGramDecomposition {
            psi1: sq_norms(&self.body1_positions),
            psi2: sq_norms(&self.body2_positions),
        }
    }
}

/// Frobenius norm of the defect in the squared cross-distance identity
/// `D12^(.2) = psi1 * 1^T + 1 * psi2^T - 2 * S1^T * S2`.
///
/// Zero (to rounding) on every exactly constructed scene.
pub fn cross_gram_identity_residual(scene: &Scene) -> f64 {
    let blocks = scene.edm_blocks();
    let gram = scene.cross_gram();
    let d12_sq = blocks.d12.map(|x| x * x);
    let n1 = scene.c1.landmark_count();
    let n2 = scene.c2.landmark_count();
    let cross = scene.body1_positions.transpose() * &scene.body2_positions;
    let model = DMatrix::from_fn(n1, n2, |n, m| gram.psi1[n] + gram.psi2[m] - 2.0 * cross[(n, m)]);
    (d12_sq - model).norm()
}

/// Scenario file schema: shapes as three coordinate rows each, pose as a
/// translation plus roll/pitch/yaw in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub c1: Vec<Vec<f64>>,
    pub c2: Vec<Vec<f64>>,
    pub translation: [f64; 3],
    pub euler_deg: [f64; 3],
}

const BENCH_C1: [[f64; 12]; 3] = [
    [
        -1.25, 1.25, -1.25, 1.25, -1.25, 1.25, -1.25, 1.25, -1.25, 1.25, -1.25, 1.25,
    ],
    [-4.0, -4.0, -4.0, -4.0, 0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0],
    [0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 4.0, 4.0, 4.0, 4.0, 0.5, 0.5],
];

const BENCH_C2: [[f64; 10]; 3] = [
    [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
    [2.0, 2.0, 1.0, 1.0, -1.0, -1.0, -2.0, -2.0, 0.0, 0.0],
    [1.0, 1.0, 1.5, 1.5, 1.5, 1.5, 1.0, 1.0, 0.5, 0.5],
];

impl ScenarioSpec {
    /// The default benchmark scenario: a 12-sensor observer, a 10-sensor
    /// target, translation `[7, 3, 0.5]` and rotation `(10, 20, 45)` degrees.
    pub fn benchmark() -> Self {
        Self {
            c1: BENCH_C1.iter().map(|r| r.to_vec()).collect(),
            c2: BENCH_C2.iter().map(|r| r.to_vec()).collect(),
            translation: [7.0, 3.0, 0.5],
            euler_deg: [10.0, 20.0, 45.0],
        }
    }

    fn rows_to_conformation(rows: &[Vec<f64>], field: &'static str) -> Result<ConformationMatrix, SceneError> {
        if rows.len() != 3 {
            return Err(SceneError::BadScenario {
                field,
                reason: format!("expected 3 coordinate rows, got {}", rows.len()),
            });
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SceneError::BadScenario {
                field,
                reason: "coordinate rows have unequal lengths".to_string(),
            });
        }
        let m = DMatrix::from_fn(3, n, |i, j| rows[i][j]);
        ConformationMatrix::new(m).map_err(|e| SceneError::BadScenario {
            field,
            reason: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<Scene, SceneError> {
        let c1 = Self::rows_to_conformation(&self.c1, "c1")?;
        let c2 = Self::rows_to_conformation(&self.c2, "c2")?;
        let angles = EulerAngles::from_degrees(self.euler_deg[0], self.euler_deg[1], self.euler_deg[2]);
        let pose = Pose {
            rotation: RotationMatrix::from_euler(angles),
            translation: Vector3::new(self.translation[0], self.translation[1], self.translation[2]),
        };
        Ok(build_scene(c1, c2, pose))
    }
}

/// The default scene used by the experiment harness.
pub fn benchmark_scene() -> Scene {
    ScenarioSpec::benchmark()
        .build()
        .expect("built-in scenario is valid")
}
