//! Noisy range synthesis and completion of the unknown intra-body distance
//! block from the known block and the cross block.

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MeasureError;
use crate::numkit::{self, CONDITION_CAP};
use crate::scene::EdmBlocks;

/// Ranging noise: i.i.d. zero-mean Gaussian with standard deviation `sigma`,
/// drawn from a stream fully determined by `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

/// Seeded standard-normal stream using the Marsaglia polar method on top of
/// ChaCha8. Both pieces are fully specified, so the stream is reproducible
/// across platforms.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform draw in `[-1, 1)` from the top 53 bits of a `u64`.
    fn uniform_sym(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE * 2.0 - 1.0
    }

    /// Next standard-normal variate.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = self.uniform_sym();
            let v = self.uniform_sym();
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// A perturbed distance block plus the number of entries clamped at zero.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub matrix: DMatrix<f64>,
    pub clamp_count: usize,
}

/// Adds i.i.d. Gaussian error to every entry, in row-major order, clamping
/// negative results to zero. Identical `(sigma, seed)` gives a bitwise
/// identical result.
pub fn perturb_distances(d12: &DMatrix<f64>, noise: &NoiseModel) -> Perturbed {
    if noise.sigma == 0.0 {
        return Perturbed {
            matrix: d12.clone(),
            clamp_count: 0,
        };
    }
    let mut stream = GaussianStream::new(noise.seed);
    let mut out = d12.clone();
    let mut clamp_count = 0;
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            let noisy = out[(i, j)] + noise.sigma * stream.next_normal();
            if noisy < 0.0 {
                out[(i, j)] = 0.0;
                clamp_count += 1;
            } else {
                out[(i, j)] = noisy;
            }
        }
    }
    Perturbed {
        matrix: out,
        clamp_count,
    }
}

/// Closed-form mean and variance of the squared-distance error
/// `w = (d + v)^2 - d^2` with `v ~ N(0, sigma^2)`:
/// mean `sigma^2`, variance `4 d^2 sigma^2 + 2 sigma^4`.
pub fn omega_moments(d: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    (s2, 4.0 * d * d * s2 + 2.0 * s2 * s2)
}

/// A completed intra-body block plus the number of negative entries clamped.
#[derive(Debug, Clone)]
pub struct Completion {
    pub matrix: DMatrix<f64>,
    pub clamp_count: usize,
}

/// Completes the unknown intra-body distance block from the known block and
/// the cross block.
///
/// Takes and returns plain (non-squared) distance blocks. Internally the
/// completion runs on the squared blocks,
/// `G = D12^(.2)T * pinv(D1^(.2)) * D12^(.2)`, because squared distance
/// matrices carry the bounded-rank structure (<= 5 for 3-D scenes) that
/// makes this kind of block completion exact when the known body spans it;
/// the plain blocks are full rank and complete poorly. `G` is symmetrized,
/// hollowed, negative entries are clamped at zero and counted, and the
/// entrywise square root restores plain distances.
///
/// The known plain block must be invertible with condition number below the
/// cap; a singular observer geometry is rejected with a pointer toward
/// alternative completion methods.
pub fn nystrom_complete(
    d1: &DMatrix<f64>,
    d12: &DMatrix<f64>,
) -> Result<Completion, MeasureError> {
    if d1.nrows() != d1.ncols() {
        return Err(MeasureError::DimensionMismatch {
            context: format!("known block must be square, got {}x{}", d1.nrows(), d1.ncols()),
        });
    }
    if d12.nrows() != d1.nrows() {
        return Err(MeasureError::DimensionMismatch {
            context: format!(
                "cross block has {} rows but the known block is {}x{}",
                d12.nrows(),
                d1.nrows(),
                d1.ncols()
            ),
        });
    }
    let cond = numkit::condition_number(d1);
    if !cond.is_finite() || cond > CONDITION_CAP {
        return Err(MeasureError::IllConditionedBlock { cond });
    }
    let d1_sq = d1.map(|x| x * x);
    let pinv = symmetric_pseudo_inverse(&d1_sq);
    let d12_sq = d12.map(|x| x * x);
    let product = d12_sq.transpose() * pinv * &d12_sq;
    let sym = (&product + product.transpose()) * 0.5;
    let mut squared = numkit::hollow(&sym).expect("product is square");
    let mut clamp_count = 0;
    for x in squared.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
            clamp_count += 1;
        }
    }
    Ok(Completion {
        matrix: squared.map(f64::sqrt),
        clamp_count,
    })
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix through its
/// eigendecomposition; eigenvalues below `1e-10 * max|lambda|` are treated
/// as zero.
fn symmetric_pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = numkit::sym_eig(m).expect("square symmetric input");
    let scale = eig
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0_f64, f64::max);
    let cutoff = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let n = m.nrows();
    let mut inverted = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() > cutoff {
            inverted[(k, k)] = 1.0 / lambda;
        }
    }
    &eig.eigenvectors * inverted * eig.eigenvectors.transpose()
}

/// Assembles the full sample distance matrix from its three blocks.
pub fn assemble_edm(
    d1: &DMatrix<f64>,
    d12_noisy: &DMatrix<f64>,
    d2_hat: &DMatrix<f64>,
) -> Result<DMatrix<f64>, MeasureError> {
    let n1 = d1.nrows();
    let n2 = d2_hat.nrows();
    if d1.ncols() != n1 || d2_hat.ncols() != n2 {
        return Err(MeasureError::DimensionMismatch {
            context: "diagonal blocks must be square".to_string(),
        });
    }
    if d12_noisy.shape() != (n1, n2) {
        return Err(MeasureError::DimensionMismatch {
            context: format!(
                "cross block must be {}x{}, got {}x{}",
                n1,
                n2,
                d12_noisy.nrows(),
                d12_noisy.ncols()
            ),
        });
    }
    let n = n1 + n2;
    let mut out = DMatrix::zeros(n, n);
    // Diagonal blocks enter symmetrized and hollowed so the assembly is a
    // valid hollow symmetric matrix even for slightly inconsistent inputs.
    let d1s = (d1 + d1.transpose()) * 0.5;
    let d2s = (d2_hat + d2_hat.transpose()) * 0.5;
    for i in 0..n1 {
        for j in 0..n1 {
            out[(i, j)] = if i == j { 0.0 } else { d1s[(i, j)] };
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            out[(n1 + i, n1 + j)] = if i == j { 0.0 } else { d2s[(i, j)] };
        }
    }
    for i in 0..n1 {
        for j in 0..n2 {
            out[(i, n1 + j)] = d12_noisy[(i, j)];
            out[(n1 + j, i)] = d12_noisy[(i, j)];
        }
    }
    Ok(out)
}

/// Everything a single measurement pass produces: the exact known block, the
/// noisy cross block, the completed unknown block, and their assembly.
#[derive(Debug, Clone)]
pub struct MeasuredEdm {
    pub d1: DMatrix<f64>,
    pub d12_noisy: DMatrix<f64>,
    pub d2_hat: DMatrix<f64>,
    pub assembled: DMatrix<f64>,
    pub noise_clamps: usize,
    pub completion_clamps: usize,
}

impl MeasuredEdm {
    /// Synthesizes one trial's measurements from exact blocks: perturb the
    /// cross block, complete the unknown block, assemble.
    pub fn synthesize(blocks: &EdmBlocks, noise: &NoiseModel) -> Result<Self, MeasureError> {
        let perturbed = perturb_distances(&blocks.d12, noise);
        let completion = nystrom_complete(&blocks.d1, &perturbed.matrix)?;
        let assembled = assemble_edm(&blocks.d1, &perturbed.matrix, &completion.matrix)?;
        Ok(Self {
            d1: blocks.d1.clone(),
            d12_noisy: perturbed.matrix,
            d2_hat: completion.matrix,
            assembled,
            noise_clamps: perturbed.clamp_count,
            completion_clamps: completion.clamp_count,
        })
    }
}
