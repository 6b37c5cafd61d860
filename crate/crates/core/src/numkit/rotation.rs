//! Euler angles and proper rotation matrices.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::SO3_TOL;
use crate::error::MatrixError;

/// Intrinsic x-roll / y-pitch / z-yaw angles, radians, wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    /// Roll about the x axis.
    pub roll: f64,
    /// Pitch about the y axis.
    pub pitch: f64,
    /// Yaw about the z axis.
    pub yaw: f64,
}

fn wrap_angle(a: f64) -> f64 {
    // Wrap into (-pi, pi].
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            roll: wrap_angle(roll),
            pitch: wrap_angle(pitch),
            yaw: wrap_angle(yaw),
        }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }
}

/// A proper rotation: orthogonal with determinant +1, both within [`SO3_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthogonality and determinant before wrapping.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, MatrixError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !m.iter().all(|x| x.is_finite()) {
            return Err(MatrixError::NonFinite);
        }
        if ortho > SO3_TOL || (det - 1.0).abs() > SO3_TOL {
            return Err(MatrixError::DimensionMismatch {
                context: format!(
                    "not a proper rotation (orthogonality residual {ortho:.3e}, det {det:.12})"
                ),
            });
        }
        Ok(Self(m))
    }

    pub fn from_euler(angles: EulerAngles) -> Self {
        rotation_from_euler(angles)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// Builds the rotation `Q = Q_z(yaw) * Q_y(pitch) * Q_x(roll)`.
///
/// The factor order matters: yaw is the leftmost factor, so it is applied
/// last to a column vector.
pub fn rotation_from_euler(angles: EulerAngles) -> RotationMatrix {
    let (sa, ca) = angles.roll.sin_cos();
    let (sb, cb) = angles.pitch.sin_cos();
    let (sg, cg) = angles.yaw.sin_cos();
    let qz = Matrix3::new(cg, -sg, 0.0, sg, cg, 0.0, 0.0, 0.0, 1.0);
    let qy = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let qx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    RotationMatrix(qz * qy * qx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_angles_give_identity() {
        let q = rotation_from_euler(EulerAngles::new(0.0, 0.0, 0.0));
        assert_relative_eq!(*q.matrix(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn pure_yaw_quarter_turn() {
        let q = rotation_from_euler(EulerAngles::from_degrees(0.0, 0.0, 90.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*q.matrix(), expected, epsilon = 1e-12);
    }

    #[test]
    fn matches_closed_form_entries() {
        // Independent route: the expanded entries of the three-factor product.
        let ang = EulerAngles::from_degrees(10.0, 20.0, 45.0);
        let (sa, ca) = ang.roll.sin_cos();
        let (sb, cb) = ang.pitch.sin_cos();
        let (sg, cg) = ang.yaw.sin_cos();
        let expected = Matrix3::new(
            cb * cg,
            sa * sb * cg - ca * sg,
            ca * sb * cg + sa * sg,
            cb * sg,
            sa * sb * sg + ca * cg,
            ca * sb * sg - sa * cg,
            -sb,
            sa * cb,
            ca * cb,
        );
        let q = rotation_from_euler(ang);
        assert_relative_eq!(*q.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn benchmark_angles_match_recorded_fixture() {
        // Frozen from a dual-route oracle evaluation (factored product and
        // expanded entries agree to machine precision).
        let q = rotation_from_euler(EulerAngles::from_degrees(10.0, 20.0, 45.0));
        let expected = Matrix3::new(
            0.6644630243886748,
            -0.6543683380079066,
            0.36095840125009615,
            0.6644630243886747,
            0.7383601426321311,
            0.1153827933121504,
            -0.3420201433256687,
            0.16317591116653482,
            0.9254165783983234,
        );
        assert_relative_eq!(*q.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn always_proper_rotation() {
        for k in 0..50 {
            let a = (k as f64 * 0.7).sin() * 3.0;
            let b = (k as f64 * 1.3).cos() * 3.0;
            let c = (k as f64 * 2.1).sin() * 3.0;
            let q = rotation_from_euler(EulerAngles::new(a, b, c));
            let m = q.matrix();
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn angles_wrap_to_canonical_range() {
        let a = EulerAngles::new(4.0 * std::f64::consts::PI + 0.5, -7.0, 10.0);
        for v in [a.roll, a.pitch, a.yaw] {
            assert!(v > -std::f64::consts::PI && v <= std::f64::consts::PI);
        }
        assert_relative_eq!(a.roll, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let refl = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RotationMatrix::from_matrix(refl).is_err());
    }
}
