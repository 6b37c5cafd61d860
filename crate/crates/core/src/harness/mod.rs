//! Seeded Monte-Carlo experiment runner and RMSE aggregation.

mod emit;

pub use emit::{emit_outputs, render_csv, render_svg, EmittedFiles};

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Stage};
use crate::estimators::{
    egoistic_localize, estimate_rotation_naive_eig, genie_aided_translation,
};
use crate::measure::perturb_distances;
use crate::measure::NoiseModel;
use crate::scene::{EdmBlocks, Scene, ScenarioSpec};

/// Which estimators a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Egoistic,
    GenieAided,
    NaiveEig,
}

impl EstimatorKind {
    /// Column key used in emitted CSV headers.
    pub fn column_key(self) -> &'static str {
        match self {
            EstimatorKind::Egoistic => "egoistic",
            EstimatorKind::GenieAided => "genie",
            EstimatorKind::NaiveEig => "naive_eig",
        }
    }

    /// Whether this estimator produces a translation estimate.
    pub fn estimates_translation(self) -> bool {
        !matches!(self, EstimatorKind::NaiveEig)
    }
}

fn default_sigma_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.5]
}

fn default_trials() -> usize {
    1000
}

fn default_master_seed() -> u64 {
    1729
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Egoistic, EstimatorKind::GenieAided]
}

/// A full experiment description. Every field has a default, so an empty
/// JSON object is a valid config; unknown keys are rejected by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ScenarioSpec::benchmark")]
    pub scenario: ScenarioSpec,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    /// Monte-Carlo realizations per grid point.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::benchmark(),
            sigma_grid: default_sigma_grid(),
            trials: default_trials(),
            master_seed: default_master_seed(),
            estimators: default_estimators(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::BadConfig(
                "trials must be at least 1".to_string(),
            ));
        }
        if self.sigma_grid.is_empty() {
            return Err(HarnessError::BadConfig(
                "sigma_grid must not be empty".to_string(),
            ));
        }
        if self.sigma_grid.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(HarnessError::BadConfig(
                "sigma_grid entries must be finite and nonnegative".to_string(),
            ));
        }
        if self.sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::BadConfig(
                "sigma_grid must be strictly ascending".to_string(),
            ));
        }
        Ok(())
    }

    /// Translation-producing estimators, config order preserved.
    pub fn translation_estimators(&self) -> Vec<EstimatorKind> {
        self.estimators
            .iter()
            .copied()
            .filter(|e| e.estimates_translation())
            .collect()
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: a SplitMix64 chain over (master seed, grid index, trial
/// index). Order independent, so trials can run concurrently and still
/// reproduce bit for bit.
pub fn trial_seed(master_seed: u64, sigma_index: usize, trial: usize) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ (sigma_index as u64).wrapping_add(1));
    splitmix64(b ^ (trial as u64).wrapping_add(1))
}

/// One Monte-Carlo realization's outputs.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub sigma: f64,
    pub sigma_index: usize,
    pub trial: usize,
    /// Per-estimator translation estimate or the failing stage's message.
    pub egoistic_translation: Option<Result<Vector3<f64>, String>>,
    pub genie_translation: Option<Result<Vector3<f64>, String>>,
    pub rotation_objective: Option<f64>,
    pub rotation_ambiguity: Option<usize>,
    pub rotation_gap_warning: bool,
    pub naive_rotation_objective: Option<f64>,
    pub translation_converged: Option<bool>,
    pub noise_clamps: usize,
    pub completion_clamps: usize,
    pub mds_negative_discarded: usize,
    pub stage_micros: Vec<(Stage, u128)>,
}

/// RMSE for one estimator at one grid point. `rmse` is `None` when every
/// trial failed.
#[derive(Debug, Clone)]
pub struct RmseEntry {
    pub estimator: EstimatorKind,
    pub rmse: Option<f64>,
    pub failures: usize,
}

/// Aggregated results for one grid point.
#[derive(Debug, Clone)]
pub struct RmseRow {
    pub sigma: f64,
    pub entries: Vec<RmseEntry>,
    pub n_trials: usize,
}

impl RmseRow {
    pub fn rmse_of(&self, estimator: EstimatorKind) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.estimator == estimator)
            .and_then(|e| e.rmse)
    }
}

/// Root mean squared Euclidean error of translation estimates.
pub fn rmse(estimates: &[Vector3<f64>], truth: &Vector3<f64>) -> Result<f64, HarnessError> {
    if estimates.is_empty() {
        return Err(HarnessError::EmptyEstimates);
    }
    let sum: f64 = estimates.iter().map(|e| (e - truth).norm_squared()).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

/// A prepared experiment: scene and exact distance blocks built once.
pub struct Experiment {
    pub scene: Scene,
    blocks: EdmBlocks,
    pub config: ExperimentConfig,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let scene = config.scenario.build()?;
        let blocks = scene.edm_blocks();
        Ok(Self {
            scene,
            blocks,
            config,
        })
    }

    /// Runs a single trial. Deterministic in (master seed, grid index,
    /// trial index); every requested estimator sees the same noisy cross
    /// block.
    pub fn run_trial(&self, sigma_index: usize, trial: usize) -> TrialResult {
        let sigma = self.config.sigma_grid[sigma_index];
        let noise = NoiseModel {
            sigma,
            seed: trial_seed(self.config.master_seed, sigma_index, trial),
        };
        let perturbed = perturb_distances(&self.blocks.d12, &noise);
        let wants = |kind| self.config.estimators.contains(&kind);

        let mut result = TrialResult {
            sigma,
            sigma_index,
            trial,
            egoistic_translation: None,
            genie_translation: None,
            rotation_objective: None,
            rotation_ambiguity: None,
            rotation_gap_warning: false,
            naive_rotation_objective: None,
            translation_converged: None,
            noise_clamps: perturbed.clamp_count,
            completion_clamps: 0,
            mds_negative_discarded: 0,
            stage_micros: Vec::new(),
        };

        let mut s2_hat = None;
        if wants(EstimatorKind::Egoistic) || wants(EstimatorKind::NaiveEig) {
            match egoistic_localize(&self.scene.c1, &self.blocks.d1, &perturbed.matrix) {
                Ok(out) => {
                    result.completion_clamps = out.diagnostics.completion_clamps;
                    result.mds_negative_discarded = out.diagnostics.mds_negative_discarded;
                    result.stage_micros = out.diagnostics.stage_micros.clone();
                    result.rotation_objective = Some(out.rotation.objective_value);
                    result.rotation_ambiguity = Some(out.rotation.ambiguity_set_size);
                    result.rotation_gap_warning = out.rotation.eigenvalue_gap_warning;
                    result.translation_converged = Some(out.translation.converged);
                    if wants(EstimatorKind::Egoistic) {
                        result.egoistic_translation = Some(Ok(out.translation.t_hat));
                    }
                    s2_hat = Some(out.s2_hat);
                }
                Err(e) => {
                    if wants(EstimatorKind::Egoistic) {
                        result.egoistic_translation = Some(Err(e.to_string()));
                    }
                }
            }
        }
        if wants(EstimatorKind::NaiveEig) {
            if let Some(s2) = &s2_hat {
                result.naive_rotation_objective = estimate_rotation_naive_eig(s2)
                    .ok()
                    .map(|est| est.objective_value);
            }
        }
        if wants(EstimatorKind::GenieAided) {
            let genie = genie_aided_translation(
                &self.scene.c1,
                &self.scene.c2,
                &self.scene.pose.rotation,
                &self.blocks.d1,
                &perturbed.matrix,
            );
            result.genie_translation = Some(match genie {
                Ok(est) => Ok(est.t_hat),
                Err(e) => Err(e.to_string()),
            });
        }
        result
    }

    /// Runs the whole grid, trials in parallel, aggregation in deterministic
    /// (grid index, trial index) order.
    pub fn run(&self) -> Vec<RmseRow> {
        let truth = self.scene.pose.translation;
        let translation_estimators = self.config.translation_estimators();
        (0..self.config.sigma_grid.len())
            .map(|sigma_index| {
                let trials: Vec<TrialResult> = (0..self.config.trials)
                    .into_par_iter()
                    .map(|k| self.run_trial(sigma_index, k))
                    .collect();
                let entries = translation_estimators
                    .iter()
                    .map(|&estimator| {
                        let mut successes = Vec::with_capacity(trials.len());
                        let mut failures = 0;
                        for t in &trials {
                            let slot = match estimator {
                                EstimatorKind::Egoistic => &t.egoistic_translation,
                                EstimatorKind::GenieAided => &t.genie_translation,
                                EstimatorKind::NaiveEig => &None,
                            };
                            match slot {
                                Some(Ok(v)) => successes.push(*v),
                                Some(Err(_)) => failures += 1,
                                None => {}
                            }
                        }
                        RmseEntry {
                            estimator,
                            rmse: rmse(&successes, &truth).ok(),
                            failures,
                        }
                    })
                    .collect();
                RmseRow {
                    sigma: self.config.sigma_grid[sigma_index],
                    entries,
                    n_trials: self.config.trials,
                }
            })
            .collect()
    }
}

/// Convenience wrapper: prepare and run in one call.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RmseRow>, HarnessError> {
    Ok(Experiment::prepare(config.clone())?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            sigma_grid: vec![0.0, 0.1],
            trials: 4,
            master_seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rmse_examples() {
        let truth = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(rmse(&[truth, truth], &truth).unwrap(), 0.0);
        let offset = truth + Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(rmse(&[offset], &truth).unwrap(), 1.0, epsilon = 1e-15);
        // Error norms 3 and 4 pool to sqrt(12.5).
        let e3 = truth + Vector3::new(3.0, 0.0, 0.0);
        let e4 = truth + Vector3::new(0.0, 4.0, 0.0);
        assert_relative_eq!(
            rmse(&[e3, e4], &truth).unwrap(),
            12.5f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(rmse(&[], &truth).is_err());
    }

    #[test]
    fn rmse_pools_across_disjoint_sets() {
        // Mean-of-squares associativity: pooling two disjoint trial sets
        // matches the RMSE of their concatenation.
        let truth = Vector3::zeros();
        let a: Vec<Vector3<f64>> = (0..5)
            .map(|i| Vector3::new(i as f64, 0.5 * i as f64, -(i as f64)))
            .collect();
        let b: Vec<Vector3<f64>> = (0..3)
            .map(|i| Vector3::new(-(i as f64), 2.0, i as f64 * 0.25))
            .collect();
        let mut all = a.clone();
        all.extend_from_slice(&b);
        let pooled = {
            let sa: f64 = a.iter().map(|v| v.norm_squared()).sum();
            let sb: f64 = b.iter().map(|v| v.norm_squared()).sum();
            ((sa + sb) / (a.len() + b.len()) as f64).sqrt()
        };
        assert_relative_eq!(rmse(&all, &truth).unwrap(), pooled, epsilon = 1e-12);
    }

    #[test]
    fn trial_seeds_differ_across_indices() {
        let s = trial_seed(1729, 0, 0);
        assert_ne!(s, trial_seed(1729, 0, 1));
        assert_ne!(s, trial_seed(1729, 1, 0));
        assert_ne!(s, trial_seed(1730, 0, 0));
        assert_eq!(s, trial_seed(1729, 0, 0));
    }

    #[test]
    fn trials_are_deterministic() {
        let exp = Experiment::prepare(tiny_config()).unwrap();
        let a = exp.run_trial(1, 2);
        let b = exp.run_trial(1, 2);
        assert_eq!(
            a.egoistic_translation.as_ref().unwrap().as_ref().unwrap(),
            b.egoistic_translation.as_ref().unwrap().as_ref().unwrap()
        );
        assert_eq!(
            a.genie_translation.as_ref().unwrap().as_ref().unwrap(),
            b.genie_translation.as_ref().unwrap().as_ref().unwrap()
        );
    }

    #[test]
    fn adjacent_trials_differ_under_noise() {
        let exp = Experiment::prepare(tiny_config()).unwrap();
        let a = exp.run_trial(1, 0);
        let b = exp.run_trial(1, 1);
        assert_ne!(
            a.egoistic_translation.as_ref().unwrap().as_ref().unwrap(),
            b.egoistic_translation.as_ref().unwrap().as_ref().unwrap()
        );
    }

    #[test]
    fn zero_sigma_trials_are_identical() {
        let exp = Experiment::prepare(tiny_config()).unwrap();
        let a = exp.run_trial(0, 0);
        let b = exp.run_trial(0, 3);
        assert_eq!(
            a.egoistic_translation.as_ref().unwrap().as_ref().unwrap(),
            b.egoistic_translation.as_ref().unwrap().as_ref().unwrap()
        );
    }

    #[test]
    fn run_produces_one_row_per_sigma() {
        let exp = Experiment::prepare(tiny_config()).unwrap();
        let rows = exp.run();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.n_trials, 4);
            assert_eq!(row.entries.len(), 2);
            for entry in &row.entries {
                assert!(entry.rmse.is_some());
                assert_eq!(entry.failures, 0);
            }
        }
    }

    #[test]
    fn single_noiseless_trial_rmse_equals_deterministic_error() {
        // K = 1 at sigma = 0: the aggregate equals the one trial's error,
        // and the one trial equals a direct pipeline call bit for bit.
        let config = ExperimentConfig {
            sigma_grid: vec![0.0],
            trials: 1,
            ..ExperimentConfig::default()
        };
        let exp = Experiment::prepare(config).unwrap();
        let rows = exp.run();
        let truth = exp.scene.pose.translation;
        let blocks = exp.scene.edm_blocks();
        let direct = crate::estimators::egoistic_localize(&exp.scene.c1, &blocks.d1, &blocks.d12)
            .unwrap()
            .translation
            .t_hat;
        let expected = (direct - truth).norm();
        assert_eq!(rows[0].rmse_of(EstimatorKind::Egoistic).unwrap(), expected);
        // The noiseless egoistic error is the centroid offset of the
        // benchmark target shape.
        assert!((expected - 1.1).abs() < 1e-9, "noiseless error {expected}");
    }

    #[test]
    fn naive_estimator_records_rotation_diagnostics_only() {
        let config = ExperimentConfig {
            sigma_grid: vec![0.1],
            trials: 2,
            estimators: vec![EstimatorKind::NaiveEig],
            ..ExperimentConfig::default()
        };
        let exp = Experiment::prepare(config.clone()).unwrap();
        let trial = exp.run_trial(0, 0);
        assert!(trial.naive_rotation_objective.is_some());
        assert!(trial.egoistic_translation.is_none());
        assert!(trial.genie_translation.is_none());
        // No translation estimators means no RMSE columns.
        assert!(config.translation_estimators().is_empty());
        let rows = exp.run();
        assert!(rows[0].entries.is_empty());
    }

    #[test]
    fn failed_trials_are_counted_and_flag_the_row() {
        // A coplanar observer defeats the rotation stage deterministically,
        // so every egoistic trial fails while the genie path still works.
        let mut scenario = crate::scene::ScenarioSpec::benchmark();
        scenario.c1[2] = vec![0.0; 12];
        let config = ExperimentConfig {
            scenario,
            sigma_grid: vec![0.1],
            trials: 3,
            ..ExperimentConfig::default()
        };
        let exp = Experiment::prepare(config).unwrap();
        let rows = exp.run();
        let ego = &rows[0].entries[0];
        assert_eq!(ego.estimator, EstimatorKind::Egoistic);
        assert_eq!(ego.failures, 3);
        assert!(ego.rmse.is_none());
        let genie = &rows[0].entries[1];
        assert_eq!(genie.failures, 0);
        assert!(genie.rmse.is_some());
    }

    #[test]
    fn config_defaults_from_empty_object() {
        let config = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(config.trials, 1000);
        assert_eq!(config.sigma_grid, vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.5]);
        assert_eq!(config.master_seed, 1729);
        assert_eq!(
            config.estimators,
            vec![EstimatorKind::Egoistic, EstimatorKind::GenieAided]
        );
    }

    #[test]
    fn config_rejects_unknown_keys_by_name() {
        let err = ExperimentConfig::from_json(r#"{"trialz": 10}"#).unwrap_err();
        assert!(err.to_string().contains("trialz"), "message: {err}");
    }

    #[test]
    fn config_rejects_unsorted_grid() {
        let err =
            ExperimentConfig::from_json(r#"{"sigma_grid": [0.2, 0.1]}"#).unwrap_err();
        assert!(err.to_string().contains("ascending"));
    }

    #[test]
    fn config_rejects_zero_trials() {
        let err = ExperimentConfig::from_json(r#"{"trials": 0}"#).unwrap_err();
        assert!(err.to_string().contains("trials"));
    }

    #[test]
    fn standard_error_shrinks_with_sqrt_of_trials() {
        // Batch means: with the trial count doubled, the estimated standard
        // error of the RMSE must shrink by about sqrt(2).
        let base = ExperimentConfig {
            sigma_grid: vec![0.2],
            trials: 240,
            master_seed: 99,
            estimators: vec![EstimatorKind::GenieAided],
            ..ExperimentConfig::default()
        };
        let batch_se = |trials: usize| {
            let config = ExperimentConfig {
                trials,
                ..base.clone()
            };
            let exp = Experiment::prepare(config).unwrap();
            let truth = exp.scene.pose.translation;
            let n_batches = 12;
            let per = trials / n_batches;
            let mut batch_rmse = Vec::new();
            for b in 0..n_batches {
                let estimates: Vec<Vector3<f64>> = (b * per..(b + 1) * per)
                    .map(|k| {
                        exp.run_trial(0, k)
                            .genie_translation
                            .unwrap()
                            .expect("genie trial")
                    })
                    .collect();
                batch_rmse.push(rmse(&estimates, &truth).unwrap());
            }
            let mean = batch_rmse.iter().sum::<f64>() / n_batches as f64;
            let var = batch_rmse
                .iter()
                .map(|r| (r - mean) * (r - mean))
                .sum::<f64>()
                / (n_batches as f64 - 1.0);
            (var / n_batches as f64).sqrt()
        };
        let se_1x = batch_se(240);
        let se_2x = batch_se(480);
        let ratio = se_2x / se_1x;
        assert!(
            ratio > 0.4 && ratio < 1.0,
            "expected roughly 1/sqrt(2) shrinkage, got ratio {ratio}"
        );
    }
}
