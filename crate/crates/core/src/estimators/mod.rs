//! The pose estimators: egoistic localization of an unknown body from cross
//! ranges alone, the genie-aided translation baseline, and the reference
//! eigenvector rotation extraction.

mod rotation;
mod translation;

pub use rotation::{
    estimate_rotation_egoistic, estimate_rotation_naive_eig, estimate_rotation_opp_genie,
    RotationEstimate, DEGENERATE_GAP,
};
pub use translation::{
    estimate_translation, genie_aided_translation, translation_jacobian, translation_objective,
    translation_residual, AugmentedEstimate, TranslationEstimate, GRADIENT_TOL, MAX_ITERATIONS,
};

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{PipelineError, Stage};
use crate::measure::{assemble_edm, nystrom_complete};
use crate::embed_align::{anchor_embedding, classical_mds};
use crate::scene::ConformationMatrix;

/// Counters and timings surfaced by a full egoistic pass.
#[derive(Debug, Clone, Default)]
pub struct LocalizeDiagnostics {
    pub completion_clamps: usize,
    pub mds_negative_discarded: usize,
    /// Wall-clock microseconds per stage, in execution order.
    pub stage_micros: Vec<(Stage, u128)>,
}

/// Everything a full egoistic pass produces.
#[derive(Debug, Clone)]
pub struct LocalizeOutput {
    pub translation: TranslationEstimate,
    pub rotation: RotationEstimate,
    /// Anchored target positions in the observer's frame.
    pub s2_hat: DMatrix<f64>,
    pub diagnostics: LocalizeDiagnostics,
}

/// Full egoistic localization: completion, embedding, anchoring, translation
/// refinement, plus the independent rotation estimate from the cross block.
///
/// `d1` is the observer's exact intra-body distance matrix (normally
/// `exact_edm(c1, c1)`) and `d12_noisy` the measured cross block. Stage
/// failures carry the failing stage's name.
pub fn egoistic_localize(
    c1: &ConformationMatrix,
    d1: &DMatrix<f64>,
    d12_noisy: &DMatrix<f64>,
) -> Result<LocalizeOutput, PipelineError> {
    let mut diagnostics = LocalizeDiagnostics::default();

    let started = Instant::now();
    let completion = nystrom_complete(d1, d12_noisy)
        .map_err(|e| PipelineError::new(Stage::Completion, e))?;
    let assembled = assemble_edm(d1, d12_noisy, &completion.matrix)
        .map_err(|e| PipelineError::new(Stage::Completion, e))?;
    diagnostics.completion_clamps = completion.clamp_count;
    diagnostics
        .stage_micros
        .push((Stage::Completion, started.elapsed().as_micros()));

    let started = Instant::now();
    let embedding =
        classical_mds(&assembled, 3).map_err(|e| PipelineError::new(Stage::Mds, e))?;
    diagnostics.mds_negative_discarded = embedding.negative_discarded;
    diagnostics
        .stage_micros
        .push((Stage::Mds, started.elapsed().as_micros()));

    let started = Instant::now();
    let s2_hat =
        anchor_embedding(&embedding, c1).map_err(|e| PipelineError::new(Stage::Anchoring, e))?;
    diagnostics
        .stage_micros
        .push((Stage::Anchoring, started.elapsed().as_micros()));

    let started = Instant::now();
    let translation = estimate_translation(c1, &s2_hat, &assembled)?;
    diagnostics
        .stage_micros
        .push((Stage::Translation, started.elapsed().as_micros()));

    let started = Instant::now();
    let rotation = estimate_rotation_egoistic(c1, d12_noisy)?;
    diagnostics
        .stage_micros
        .push((Stage::Rotation, started.elapsed().as_micros()));

    Ok(LocalizeOutput {
        translation,
        rotation,
        s2_hat,
        diagnostics,
    })
}
