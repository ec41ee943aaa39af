//! Total-variation restoration of images corrupted by multiplicative
//! Gamma (speckle) noise.
//!
//! The observation model is `y_i = x_i * n_i` with i.i.d. unit-mean Gamma
//! noise of shape `M` (the number of looks). Taking logarithms turns the
//! multiplicative model into an additive one; the restored image minimizes
//! the penalized minus log-likelihood
//!
//! ```text
//! M * sum_s (z_s + e^(g_s - z_s)) + lambda * TV(z),      z = log x
//! ```
//!
//! via a split Bregman / augmented Lagrangian outer loop whose two
//! subproblems are a decoupled per-pixel Newton solve ([`newton`]) and a
//! quadratic-data TV denoise by dual projection ([`tv`]).
//!
//! ```
//! use despeckle_core::{bench, image, noise, solver, synth};
//!
//! let x = synth::phantom(32, 32);
//! let model = noise::SpeckleModel::new(3.0).unwrap();
//! let speckle = model.sample_speckle(32, 32, 7);
//! let y = noise::apply_speckle(&x, &speckle).unwrap();
//!
//! let obs = noise::to_log(&y, noise::DEFAULT_CLAMP_FLOOR).unwrap();
//! let cfg = solver::SolverConfig::new(1.2);
//! let out = solver::restore(&obs, &model, &cfg).unwrap();
//!
//! let err = image::relative_error(&out.x_hat, &x).unwrap();
//! let noisy_err = image::relative_error(&y, &x).unwrap();
//! assert!(err < noisy_err);
//! ```

pub mod bench;
pub mod error;
pub mod image;
pub mod io;
pub mod newton;
pub mod noise;
mod par;
pub mod solver;
pub mod synth;
pub mod tv;

pub use error::{Error, Result};
pub use image::{DualField, ImageGrid};
pub use noise::{LogObservation, SpeckleModel};
pub use solver::{InitMode, RestoreResult, SolverConfig, TraceRow};
pub use tv::ChambolleConfig;
