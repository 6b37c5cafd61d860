//! Anchorless rigid-body localization from cross-body range measurements.
//!
//! One body (the observer) knows its own sensor conformation and measures
//! noisy ranges to the sensors of a second, unknown body. This crate
//! estimates the second body's pose (translation and rotation) without
//! knowledge of its shape:
//!
//! 1. complete the unknown intra-body distance block from the known block
//!    and the cross block ([`measure::nystrom_complete`]),
//! 2. embed the assembled distance matrix with classical MDS
//!    ([`embed_align::classical_mds`]),
//! 3. re-anchor the embedding to the observer's frame with a Procrustes fit
//!    ([`embed_align::anchor_embedding`]),
//! 4. refine the translation against a double-centering consistency
//!    objective ([`estimators::estimate_translation`]), and
//! 5. recover the rotation from the cross block alone through a
//!    pseudo-inverse projection with an eigenvalue-permutation search
//!    ([`estimators::estimate_rotation_egoistic`]).
//!
//! A genie-aided baseline (true shape and rotation given) bounds achievable
//! accuracy, and [`harness`] runs seeded Monte-Carlo RMSE sweeps over the
//! ranging-error grid, emitting CSV tables and SVG charts.

pub mod embed_align;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod measure;
pub mod numkit;
pub mod scene;

pub use error::Error;
pub use estimators::{egoistic_localize, LocalizeOutput};
pub use harness::{run_experiment, ExperimentConfig};
pub use numkit::{EulerAngles, RotationMatrix};
pub use scene::{build_scene, ConformationMatrix, Pose, Scene, ScenarioSpec};
