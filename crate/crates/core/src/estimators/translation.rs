//! Translation estimation: a damped least-squares refinement of the
//! double-centering consistency objective
//! `|| J (S(t)^T S(t) + 1/2 D^(.2)) J ||_F^2`, where `S(t)` stacks the
//! observer's conformation next to the centered target estimate shifted
//! by the candidate translation.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{MatrixError, PipelineError, SceneError, Stage, StageFailure};
use crate::measure::assemble_edm;
use crate::numkit::{center_columns, RotationMatrix, CONDITION_CAP};
use crate::scene::{exact_edm, ConformationMatrix};

/// Maximum damped least-squares iterations.
pub const MAX_ITERATIONS: usize = 200;
/// Gradient-norm convergence tolerance.
pub const GRADIENT_TOL: f64 = 1e-9;

/// Result of a translation solve.
#[derive(Debug, Clone)]
pub struct TranslationEstimate {
    pub t_hat: Vector3<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The stacked position model: observer block kept as-is, target block
/// centered and shifted by the candidate translation.
#[derive(Debug, Clone)]
pub struct AugmentedEstimate {
    pub observer_block: DMatrix<f64>,
    pub target_centered: DMatrix<f64>,
    pub translation: Vector3<f64>,
}

impl AugmentedEstimate {
    pub fn new(c1: &ConformationMatrix, s2_hat: &DMatrix<f64>, translation: Vector3<f64>) -> Self {
        Self {
            observer_block: c1.matrix().clone(),
            target_centered: center_columns(s2_hat).0,
            translation,
        }
    }

    /// The full `3 x (N1 + N2)` position matrix.
    pub fn positions(&self) -> DMatrix<f64> {
        let n1 = self.observer_block.ncols();
        let n2 = self.target_centered.ncols();
        let mut out = DMatrix::zeros(3, n1 + n2);
        out.columns_mut(0, n1).copy_from(&self.observer_block);
        for j in 0..n2 {
            for i in 0..3 {
                out[(i, n1 + j)] = self.target_centered[(i, j)] + self.translation[i];
            }
        }
        out
    }
}

/// `J X J` without scaling: subtract row and column means, add the grand mean.
fn center_both_sides(m: &DMatrix<f64>) -> DMatrix<f64> {
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
    DMatrix::from_fn(rows, cols, |i, j| m[(i, j)] - row_mean[i] - col_mean[j] + grand)
}

/// Shared machinery for the consistency objective.
pub(crate) struct TranslationProblem {
    /// `[observer | centered target]`, before the translation is added.
    base: DMatrix<f64>,
    n1: usize,
    /// `J (1/2 D^(.2)) J`, precomputed; the residual is affine in it.
    centered_half_dsq: DMatrix<f64>,
}

impl TranslationProblem {
    pub(crate) fn new(
        observer_block: &DMatrix<f64>,
        target_centered: &DMatrix<f64>,
        d_hat: &DMatrix<f64>,
    ) -> Result<Self, MatrixError> {
        if observer_block.nrows() != 3 || target_centered.nrows() != 3 {
            return Err(MatrixError::DimensionMismatch {
                context: "position blocks must have 3 rows".to_string(),
            });
        }
        let n = observer_block.ncols() + target_centered.ncols();
        if d_hat.shape() != (n, n) {
            return Err(MatrixError::DimensionMismatch {
                context: format!(
                    "distance matrix must be {n}x{n}, got {}x{}",
                    d_hat.nrows(),
                    d_hat.ncols()
                ),
            });
        }
        let mut base = DMatrix::zeros(3, n);
        base.columns_mut(0, observer_block.ncols())
            .copy_from(observer_block);
        base.columns_mut(observer_block.ncols(), target_centered.ncols())
            .copy_from(target_centered);
        let centered_half_dsq = center_both_sides(&d_hat.map(|x| 0.5 * x * x));
        Ok(Self {
            base,
            n1: observer_block.ncols(),
            centered_half_dsq,
        })
    }

    fn positions(&self, t: &Vector3<f64>) -> DMatrix<f64> {
        let mut s = self.base.clone();
        for j in self.n1..s.ncols() {
            for i in 0..3 {
                s[(i, j)] += t[i];
            }
        }
        s
    }

    pub(crate) fn residual(&self, t: &Vector3<f64>) -> DMatrix<f64> {
        let s = self.positions(t);
        let gram = s.transpose() * &s;
        center_both_sides(&gram) + &self.centered_half_dsq
    }

    /// Partial derivatives of the residual with respect to each translation
    /// component: `d(S^T S)_{ij}/dt_k = S[k,j]*[i in target] + S[k,i]*[j in target]`,
    /// centered on both sides.
    pub(crate) fn jacobian(&self, t: &Vector3<f64>) -> [DMatrix<f64>; 3] {
        let s = self.positions(t);
        let n = s.ncols();
        std::array::from_fn(|k| {
            let dm = DMatrix::from_fn(n, n, |i, j| {
                let mut v = 0.0;
                if i >= self.n1 {
                    v += s[(k, j)];
                }
                if j >= self.n1 {
                    v += s[(k, i)];
                }
                v
            });
            center_both_sides(&dm)
        })
    }

    pub(crate) fn objective(&self, t: &Vector3<f64>) -> f64 {
        self.residual(t).norm_squared()
    }
}

fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

struct SolveOutcome {
    t: Vector3<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg-Marquardt-style damped least squares on the vectorized residual.
fn minimize(problem: &TranslationProblem, t0: Vector3<f64>) -> SolveOutcome {
    let mut t = t0;
    let mut f = problem.objective(&t);
    let mut lambda: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let r = problem.residual(&t);
        let jac = problem.jacobian(&t);
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for a in 0..3 {
            jtr[a] = frobenius_dot(&jac[a], &r);
            for b in a..3 {
                let v = frobenius_dot(&jac[a], &jac[b]);
                jtj[(a, b)] = v;
                jtj[(b, a)] = v;
            }
        }
        let gradient_norm = 2.0 * jtr.norm();
        if gradient_norm <= GRADIENT_TOL {
            converged = true;
            break;
        }
        let diag_max = jtj.diagonal().max().max(1e-12);
        let mut lam = lambda.unwrap_or(1e-3 * diag_max);
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[(d, d)] += lam * jtj[(d, d)].max(1e-12);
            }
            if let Some(inv) = damped.try_inverse() {
                let step = -(inv * jtr);
                let t_new = t + step;
                let f_new = problem.objective(&t_new);
                if f_new < f {
                    t = t_new;
                    f = f_new;
                    lam = (lam / 3.0).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            lam *= 4.0;
            if lam > 1e16 {
                break;
            }
        }
        lambda = Some(lam);
        if !accepted {
            // Stalled: no descent direction at this damping range.
            break;
        }
    }
    if !converged {
        // One last gradient check: the loop may have exited on the iteration cap
        // right after reaching the basin floor.
        let r = problem.residual(&t);
        let jac = problem.jacobian(&t);
        let mut jtr = Vector3::<f64>::zeros();
        for a in 0..3 {
            jtr[a] = frobenius_dot(&jac[a], &r);
        }
        converged = 2.0 * jtr.norm() <= GRADIENT_TOL;
    }
    SolveOutcome {
        t,
        objective: f,
        iterations,
        converged,
    }
}

/// The consistency objective at a candidate translation.
pub fn translation_objective(
    t: &Vector3<f64>,
    c1: &ConformationMatrix,
    s2_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
) -> f64 {
    let problem = TranslationProblem::new(c1.matrix(), &center_columns(s2_hat).0, d_hat)
        .expect("caller provides dimensionally consistent inputs");
    problem.objective(t)
}

/// The residual matrix of the consistency objective (exposed for gradient
/// verification).
pub fn translation_residual(
    t: &Vector3<f64>,
    c1: &ConformationMatrix,
    s2_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
) -> DMatrix<f64> {
    let problem = TranslationProblem::new(c1.matrix(), &center_columns(s2_hat).0, d_hat)
        .expect("caller provides dimensionally consistent inputs");
    problem.residual(t)
}

/// Analytic Jacobian of the residual with respect to the three translation
/// components (exposed for gradient verification).
pub fn translation_jacobian(
    t: &Vector3<f64>,
    c1: &ConformationMatrix,
    s2_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
) -> [DMatrix<f64>; 3] {
    let problem = TranslationProblem::new(c1.matrix(), &center_columns(s2_hat).0, d_hat)
        .expect("caller provides dimensionally consistent inputs");
    problem.jacobian(t)
}

fn stage_err(stage: Stage, source: impl Into<StageFailure>) -> PipelineError {
    PipelineError::new(stage, source)
}

/// Refines the translation from the anchored target estimate, starting at
/// the direct centroid estimate (the column mean of the anchored positions).
pub fn estimate_translation(
    c1: &ConformationMatrix,
    s2_hat: &DMatrix<f64>,
    d_hat: &DMatrix<f64>,
) -> Result<TranslationEstimate, PipelineError> {
    if s2_hat.nrows() != 3 || s2_hat.ncols() == 0 {
        return Err(stage_err(
            Stage::Translation,
            MatrixError::DimensionMismatch {
                context: format!(
                    "anchored target positions must be 3xN, got {}x{}",
                    s2_hat.nrows(),
                    s2_hat.ncols()
                ),
            },
        ));
    }
    let (centered, mean) = center_columns(s2_hat);
    let problem = TranslationProblem::new(c1.matrix(), &centered, d_hat)
        .map_err(|e| stage_err(Stage::Translation, e))?;
    let t0 = Vector3::new(mean[0], mean[1], mean[2]);
    let out = minimize(&problem, t0);
    Ok(TranslationEstimate {
        t_hat: out.t,
        objective_value: out.objective,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Genie-aided translation: the target's shape and rotation are given, the
/// target block is fixed to `q * centered(C2) + t * 1^T`, and the distance
/// matrix is assembled with the target's exact intra-body block.
///
/// The solved parameter is the target's centroid position; since the genie
/// knows the target's conformation, the result is converted back to the pose
/// translation by subtracting `q * centroid(C2)`.
pub fn genie_aided_translation(
    c1: &ConformationMatrix,
    c2: &ConformationMatrix,
    q_external: &RotationMatrix,
    d1: &DMatrix<f64>,
    d12_noisy: &DMatrix<f64>,
) -> Result<TranslationEstimate, PipelineError> {
    let d2 = exact_edm(c2.matrix(), c2.matrix()).map_err(|e| {
        stage_err(
            Stage::Translation,
            MatrixError::DimensionMismatch {
                context: match e {
                    SceneError::RowCountMismatch { left, right } => {
                        format!("conformations must have 3 rows, got {left} and {right}")
                    }
                    other => other.to_string(),
                },
            },
        )
    })?;
    let d_hat = assemble_edm(d1, d12_noisy, &d2).map_err(|e| stage_err(Stage::Translation, e))?;
    let q = q_external.matrix();
    let target_centered = crate::numkit::rotate_columns(q, &c2.centered());

    // Linear initialization from the column means of the squared cross
    // distances: with a_m the known centered target landmark in the world
    // frame, 2 a_m . t = (u_m - mean u) - (|a_m|^2 - mean |a|^2) + 2 mean(S1) . a_m.
    let n1 = d12_noisy.nrows() as f64;
    let n2 = target_centered.ncols();
    let u = {
        let sq = d12_noisy.map(|x| x * x);
        let mut u = vec![0.0; n2];
        for (m, item) in u.iter_mut().enumerate() {
            *item = sq.column(m).sum() / n1;
        }
        u
    };
    let u_mean = u.iter().sum::<f64>() / n2 as f64;
    let s1_mean = {
        let m = c1.centroid();
        Vector3::new(m[0], m[1], m[2])
    };
    let norms: Vec<f64> = (0..n2)
        .map(|m| target_centered.column(m).norm_squared())
        .collect();
    let norm_mean = norms.iter().sum::<f64>() / n2 as f64;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for m in 0..n2 {
        let a = Vector3::new(
            target_centered[(0, m)],
            target_centered[(1, m)],
            target_centered[(2, m)],
        );
        let row = 2.0 * a;
        let b = (u[m] - u_mean) - (norms[m] - norm_mean) + 2.0 * s1_mean.dot(&a);
        ata += row * row.transpose();
        atb += row * b;
    }
    let init = ata.try_inverse().map(|inv| inv * atb).ok_or_else(|| {
        PipelineError::new(
            Stage::Translation,
            StageFailure::Conformation {
                body: 2,
                source: MatrixError::IllConditioned {
                    cond: f64::INFINITY,
                    cap: CONDITION_CAP,
                },
            },
        )
    })?;

    let problem = TranslationProblem::new(c1.matrix(), &target_centered, &d_hat)
        .map_err(|e| stage_err(Stage::Translation, e))?;
    let out = minimize(&problem, init);
    let correction = q * c2.centroid();
    Ok(TranslationEstimate {
        t_hat: out.t - correction,
        objective_value: out.objective,
        iterations: out.iterations,
        converged: out.converged,
    })
}
