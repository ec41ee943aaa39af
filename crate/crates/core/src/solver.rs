//! Outer split Bregman / augmented Lagrangian loop.
//!
//! The log-domain estimate solves
//!
//! ```text
//! min_z  M * sum_s (z_s + e^(g_s - z_s)) + lambda * TV(z)
//! ```
//!
//! by splitting `z` into a pair `(z, u)` constrained to agree and running
//! Bregman iterations on the penalized problem. One outer iteration is
//!
//! ```text
//! repeat t_m times:
//!     z <- argmin_z sum_s (z_s + e^(g_s - z_s)) + (tau / 2M) ||z - u - b||^2
//!     u <- argmin_u 1/2 ||u - z + b||^2 + (lambda / tau) TV(u)
//! b <- b - (z - u)
//! ```
//!
//! using Gauss-Seidel ordering: the z-update reads the previous `(u, b)`,
//! the u-update reads the fresh `z`, and the b-update reads both fresh
//! iterates. The loop stops when `||z_k - z_{k-1}||^2 / ||z_{k-1}||^2`
//! drops below `stop_tol`. The intensity estimate is `x = exp(z)`
//! componentwise.

use std::io::Write;

use crate::error::{Error, Result};
use crate::image::{DualField, ImageGrid};
use crate::newton;
use crate::noise::{self, LogObservation, SpeckleModel};
use crate::tv::{self, ChambolleConfig};

/// How the iterates are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// `z = u = g`, `b = 0` — start from the observed noisy image.
    #[default]
    Observation,
    /// `z = u = b = 0`.
    Zeros,
}

/// Parameters of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// TV regularization weight of the objective.
    pub lambda: f64,
    /// Splitting penalty weight. The fixed point does not depend on it;
    /// it only shapes the iteration path.
    pub tau: f64,
    /// Inner z/u alternations per outer iteration (`t_m`).
    pub inner_iters: usize,
    /// Newton steps per pixel in the data subproblem.
    pub newton_iters: usize,
    /// Inner TV denoiser settings.
    pub chambolle: ChambolleConfig,
    /// Relative-change stopping threshold on squared norms.
    pub stop_tol: f64,
    /// Outer iteration cap.
    pub max_outer: usize,
    pub init_mode: InitMode,
}

impl SolverConfig {
    /// Defaults for a given regularization weight, with `tau = 2 lambda`.
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            tau: 2.0 * lambda,
            inner_iters: 1,
            newton_iters: newton::DEFAULT_NEWTON_ITERS,
            chambolle: ChambolleConfig::default(),
            stop_tol: 1e-4,
            max_outer: 2000,
            init_mode: InitMode::Observation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("lambda", self.lambda),
            ("tau", self.tau),
            ("stop_tol", self.stop_tol),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "positive and finite",
                });
            }
        }
        for (name, value) in [
            ("inner_iters", self.inner_iters),
            ("newton_iters", self.newton_iters),
            ("max_outer", self.max_outer),
        ] {
            if value == 0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: 0.0,
                    constraint: "at least 1",
                });
            }
        }
        self.chambolle.validate()
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(1.0)
    }
}

/// Per-outer-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Outer iteration number, starting at 1.
    pub iter: usize,
    /// Penalized minus log-likelihood of the current `z`.
    pub objective: f64,
    /// Splitting constraint violation `||z - u||^2`.
    pub constraint_sq: f64,
    /// `||z_k - z_{k-1}||^2 / ||z_{k-1}||^2`.
    pub rel_change: f64,
}

/// Output of [`restore`].
#[derive(Debug, Clone)]
pub struct RestoreResult {
    /// Intensity estimate `exp(z)`, strictly positive.
    pub x_hat: ImageGrid,
    pub z_final: ImageGrid,
    pub u_final: ImageGrid,
    pub b_final: ImageGrid,
    /// Number of outer iterations executed; equals `trace.len()`.
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    /// Whether the relative-change criterion was met before `max_outer`.
    pub converged: bool,
}

/// Mutable iterate bundle, exposed so tooling can drive the loop one
/// outer iteration at a time.
#[derive(Debug, Clone)]
pub struct SolverState {
    z: ImageGrid,
    u: ImageGrid,
    b: ImageGrid,
    dual: Option<DualField>,
    z_prev: ImageGrid,
    iter: usize,
}

impl SolverState {
    pub fn new(obs: &LogObservation, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = obs.dims();
        let (z, u) = match cfg.init_mode {
            InitMode::Observation => (obs.grid().clone(), obs.grid().clone()),
            InitMode::Zeros => (ImageGrid::zeros(w, h), ImageGrid::zeros(w, h)),
        };
        Ok(SolverState {
            z_prev: z.clone(),
            z,
            u,
            b: ImageGrid::zeros(w, h),
            dual: None,
            iter: 0,
        })
    }

    pub fn z(&self) -> &ImageGrid {
        &self.z
    }

    pub fn u(&self) -> &ImageGrid {
        &self.u
    }

    pub fn b(&self) -> &ImageGrid {
        &self.b
    }

    /// Outer iterations completed so far.
    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Runs one outer iteration and reports its diagnostics.
    pub fn step(
        &mut self,
        obs: &LogObservation,
        model: &SpeckleModel,
        cfg: &SolverConfig,
    ) -> Result<TraceRow> {
        for _ in 0..cfg.inner_iters {
            self.z = newton::solve_field(
                obs.grid(),
                &self.u,
                &self.b,
                cfg.tau,
                model.looks(),
                cfg.newton_iters,
            )?;
            let v = self.z.zip_map(&self.b, |z, b| z - b)?;
            let (u, dual) = tv::denoise(&v, cfg.lambda / cfg.tau, &cfg.chambolle, self.dual.take())?;
            self.u = u;
            self.dual = Some(dual);
        }

        {
            let z = self.z.as_slice();
            let u = self.u.as_slice();
            let b = self.b.as_mut_slice();
            for i in 0..b.len() {
                b[i] -= z[i] - u[i];
            }
        }

        let objective = noise::objective(&self.z, obs, model, cfg.lambda).map_err(|e| match e {
            Error::DataTermOverflow { .. } => Error::DataTermOverflow {
                iteration: Some(self.iter + 1),
            },
            other => other,
        })?;
        let constraint_sq = self.z.sq_distance(&self.u);
        let change = self.z.sq_distance(&self.z_prev);
        let denom = self.z_prev.sq_l2_norm();
        let rel_change = if denom > 0.0 {
            change / denom
        } else if change > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };

        self.z_prev = self.z.clone();
        self.iter += 1;
        Ok(TraceRow {
            iter: self.iter,
            objective,
            constraint_sq,
            rel_change,
        })
    }
}

/// Runs the full outer loop.
pub fn restore(
    obs: &LogObservation,
    model: &SpeckleModel,
    cfg: &SolverConfig,
) -> Result<RestoreResult> {
    restore_with(obs, model, cfg, |_| {})
}

/// [`restore`] with a per-iteration observer (progress reporting).
pub fn restore_with(
    obs: &LogObservation,
    model: &SpeckleModel,
    cfg: &SolverConfig,
    mut on_iteration: impl FnMut(&TraceRow),
) -> Result<RestoreResult> {
    let mut state = SolverState::new(obs, cfg)?;
    let mut trace = Vec::new();
    let converged = loop {
        let row = state.step(obs, model, cfg)?;
        on_iteration(&row);
        trace.push(row);
        // When warm-started from the observation the first z-update solves
        // a subproblem whose target is the initialization itself, so z has
        // not moved yet; the relative-change test is meaningful from the
        // second outer iteration on.
        if state.iter >= 2 && row.rel_change < cfg.stop_tol {
            break true;
        }
        if state.iter >= cfg.max_outer {
            break false;
        }
    };
    let x_hat = state.z.map(f64::exp);
    Ok(RestoreResult {
        x_hat,
        z_final: state.z,
        u_final: state.u,
        b_final: state.b,
        iterations: state.iter,
        trace,
        converged,
    })
}

/// Writes the trace as CSV with header `iter,objective,constraint_sq,rel_change`.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], writer: &mut W) -> std::io::Result<()> {
    writeln!(writer, "iter,objective,constraint_sq,rel_change")?;
    for row in trace {
        writeln!(
            writer,
            "{},{},{},{}",
            row.iter, row.objective, row.constraint_sq, row.rel_change
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::to_log;

    fn phantom_obs(width: usize, height: usize) -> (ImageGrid, LogObservation) {
        let x = crate::synth::phantom(width, height);
        let obs = to_log(&x, 1e-12).unwrap();
        (x, obs)
    }

    #[test]
    fn negligible_regularization_returns_observation() {
        let (x, obs) = phantom_obs(16, 16);
        let model = SpeckleModel::new(3.0).unwrap();
        let cfg = SolverConfig::new(1e-8);
        let out = restore(&obs, &model, &cfg).unwrap();
        let err = crate::image::relative_error(&out.x_hat, &x).unwrap();
        assert!(err < 1e-3, "relative error {err}");
        assert!(out.converged);
    }

    #[test]
    fn constant_input_stays_constant() {
        let x = ImageGrid::filled(12, 9, 42.0);
        let obs = to_log(&x, 1e-12).unwrap();
        let model = SpeckleModel::new(5.0).unwrap();
        let cfg = SolverConfig::new(0.8);
        let out = restore(&obs, &model, &cfg).unwrap();
        let mean = out.x_hat.mean();
        for &v in out.x_hat.as_slice() {
            assert!((v - mean).abs() < 1e-6, "spread at {v} vs {mean}");
        }
    }

    #[test]
    fn restored_intensities_are_positive() {
        let (_, obs) = phantom_obs(10, 10);
        let model = SpeckleModel::new(2.0).unwrap();
        let mut cfg = SolverConfig::new(0.5);
        cfg.max_outer = 30;
        cfg.stop_tol = 1e-10;
        let out = restore(&obs, &model, &cfg).unwrap();
        assert!(out.x_hat.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn trace_length_equals_iterations() {
        let (_, obs) = phantom_obs(8, 8);
        let model = SpeckleModel::new(4.0).unwrap();
        let mut cfg = SolverConfig::new(0.6);
        cfg.max_outer = 17;
        cfg.stop_tol = 1e-14;
        let out = restore(&obs, &model, &cfg).unwrap();
        assert_eq!(out.iterations, 17);
        assert_eq!(out.trace.len(), 17);
        assert!(!out.converged);
        for (k, row) in out.trace.iter().enumerate() {
            assert_eq!(row.iter, k + 1);
            assert!(row.constraint_sq >= 0.0);
            assert!(row.rel_change >= 0.0);
        }
    }

    #[test]
    fn b_is_unchanged_when_z_equals_u() {
        // with a noiseless constant observation every iterate stays
        // constant and z == u, so the b-update subtracts zero
        let x = ImageGrid::filled(6, 6, 10.0);
        let obs = to_log(&x, 1e-12).unwrap();
        let model = SpeckleModel::new(3.0).unwrap();
        let cfg = SolverConfig::new(0.5);
        let mut state = SolverState::new(&obs, &cfg).unwrap();
        state.step(&obs, &model, &cfg).unwrap();
        assert!(state.b().as_slice().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn two_steps_equal_two_iteration_restore() {
        let (_, obs) = phantom_obs(9, 7);
        let model = SpeckleModel::new(6.0).unwrap();
        let mut cfg = SolverConfig::new(0.4);
        cfg.stop_tol = 1e-300; // never triggers
        cfg.max_outer = 2;

        let full = restore(&obs, &model, &cfg).unwrap();

        let mut state = SolverState::new(&obs, &cfg).unwrap();
        let r1 = state.step(&obs, &model, &cfg).unwrap();
        let r2 = state.step(&obs, &model, &cfg).unwrap();

        assert_eq!(full.trace, vec![r1, r2]);
        assert_eq!(full.z_final, *state.z());
        assert_eq!(full.u_final, *state.u());
        assert_eq!(full.b_final, *state.b());
    }

    #[test]
    fn first_step_z_matches_standalone_subproblem() {
        let (_, obs) = phantom_obs(4, 4);
        let model = SpeckleModel::new(3.0).unwrap();
        let cfg = SolverConfig::new(0.7);
        let mut state = SolverState::new(&obs, &cfg).unwrap();

        // line 3 with the initial (u, b) = (g, 0)
        let expected = newton::solve_field(
            obs.grid(),
            obs.grid(),
            &ImageGrid::zeros(4, 4),
            cfg.tau,
            model.looks(),
            cfg.newton_iters,
        )
        .unwrap();

        state.step(&obs, &model, &cfg).unwrap();
        // step also ran the u- and b-updates; z itself is untouched by them
        assert_eq!(*state.z(), expected);
    }

    #[test]
    fn zeros_init_is_supported() {
        let (_, obs) = phantom_obs(8, 8);
        let model = SpeckleModel::new(3.0).unwrap();
        let mut cfg = SolverConfig::new(0.5);
        cfg.init_mode = InitMode::Zeros;
        cfg.max_outer = 200;
        let out = restore(&obs, &model, &cfg).unwrap();
        assert!(out.converged);
        assert!(out.x_hat.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn objective_stabilizes_at_termination() {
        let (_, obs) = phantom_obs(16, 16);
        let model = SpeckleModel::new(3.0).unwrap();
        let cfg = SolverConfig::new(0.9);
        let out = restore(&obs, &model, &cfg).unwrap();
        assert!(out.converged);
        let last = out.trace[out.trace.len() - 1].objective;
        let prev = out.trace[out.trace.len() - 2].objective;
        assert!((last - prev).abs() / prev.abs() < 10.0 * cfg.stop_tol);
    }

    #[test]
    fn trace_csv_format() {
        let rows = vec![
            TraceRow {
                iter: 1,
                objective: 10.5,
                constraint_sq: 0.25,
                rel_change: 0.125,
            },
            TraceRow {
                iter: 2,
                objective: 9.0,
                constraint_sq: 0.0625,
                rel_change: 0.03125,
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,objective,constraint_sq,rel_change\n1,10.5,0.25,0.125\n2,9,0.0625,0.03125\n"
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (_, obs) = phantom_obs(4, 4);
        let model = SpeckleModel::new(3.0).unwrap();
        for bad in [
            SolverConfig {
                lambda: 0.0,
                ..SolverConfig::new(1.0)
            },
            SolverConfig {
                tau: -1.0,
                ..SolverConfig::new(1.0)
            },
            SolverConfig {
                stop_tol: 0.0,
                ..SolverConfig::new(1.0)
            },
            SolverConfig {
                inner_iters: 0,
                ..SolverConfig::new(1.0)
            },
        ] {
            assert!(restore(&obs, &model, &bad).is_err());
        }
    }
}
