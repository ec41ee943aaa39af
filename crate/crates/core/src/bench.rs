//! Experiment harness: oracle search over the regularization weight and
//! table-style benchmark reports.
//!
//! The sweep restores the same observation once per grid point and keeps
//! the weight with the lowest relative error against the known truth
//! (minimizing MSE and relative error pick the same point). Failures at
//! individual grid points are recorded, not fatal.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{relative_error, ImageGrid};
use crate::noise::{apply_speckle, to_log, SpeckleModel, DEFAULT_CLAMP_FLOOR};
use crate::solver::{restore, SolverConfig};

#[cfg(not(target_arch = "wasm32"))]
fn timer() -> Option<Instant> {
    Some(Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn timer() -> Option<Instant> {
    None
}

fn elapsed_seconds(start: &Option<Instant>) -> f64 {
    start.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0)
}

/// Grid of candidate regularization weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Candidate weights, ascending.
    pub lambdas: Vec<f64>,
    /// Run a golden-section refinement around the best grid point.
    pub refine: bool,
}

impl SweepSpec {
    /// Explicit candidate list.
    pub fn from_lambdas(mut lambdas: Vec<f64>, refine: bool) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !lambdas.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda grid",
                value: f64::NAN,
                constraint: "all positive and finite",
            });
        }
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(SweepSpec { lambdas, refine })
    }

    /// `count` log-spaced points on `[min, max]`.
    pub fn from_grid(min: f64, max: f64, count: usize, refine: bool) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
            return Err(Error::InvalidParameter {
                name: "lambda range",
                value: min,
                constraint: "0 < min <= max, both finite",
            });
        }
        let lambdas = if count == 1 {
            vec![min]
        } else {
            let log_min = min.ln();
            let step = (max.ln() - log_min) / (count - 1) as f64;
            (0..count)
                .map(|i| (log_min + step * i as f64).exp())
                .collect()
        };
        SweepSpec::from_lambdas(lambdas, refine)
    }

    /// Default grid: 15 log-spaced points spanning two decades centered
    /// on `1 / looks`.
    pub fn default_for_looks(looks: f64) -> Self {
        let center = 1.0 / looks.max(f64::MIN_POSITIVE);
        SweepSpec::from_grid(center / 10.0, center * 10.0, 15, false)
            .expect("static grid parameters are valid")
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Relative error of the restoration; `None` when the solve failed.
    pub err: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    /// Failure message when `err` is `None`.
    pub failure: Option<String>,
}

/// Outcome of [`lambda_sweep`].
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Best evaluated point (lowest relative error).
    pub best: SweepPoint,
    /// Every evaluated point, ascending by lambda (grid plus refinements).
    pub points: Vec<SweepPoint>,
}

/// Scales the config template to a candidate weight, preserving the
/// template's `tau / lambda` ratio so the penalty tracks the weight.
fn config_at(template: &SolverConfig, lambda: f64) -> SolverConfig {
    let ratio = template.tau / template.lambda;
    let mut cfg = template.clone();
    cfg.lambda = lambda;
    cfg.tau = lambda * ratio;
    cfg
}

fn evaluate_point(
    lambda: f64,
    x_true: &ImageGrid,
    obs: &crate::noise::LogObservation,
    model: &SpeckleModel,
    template: &SolverConfig,
) -> SweepPoint {
    let cfg = config_at(template, lambda);
    let start = timer();
    match restore(obs, model, &cfg) {
        Ok(result) => {
            let seconds = elapsed_seconds(&start);
            match relative_error(&result.x_hat, x_true) {
                Ok(err) => SweepPoint {
                    lambda,
                    err: Some(err),
                    iterations: result.iterations,
                    converged: result.converged,
                    seconds,
                    failure: None,
                },
                Err(e) => SweepPoint {
                    lambda,
                    err: None,
                    iterations: result.iterations,
                    converged: result.converged,
                    seconds,
                    failure: Some(e.to_string()),
                },
            }
        }
        Err(e) => SweepPoint {
            lambda,
            err: None,
            iterations: 0,
            converged: false,
            seconds: elapsed_seconds(&start),
            failure: Some(e.to_string()),
        },
    }
}

/// Restores `y` once per candidate weight and returns the weight with the
/// lowest relative error against `x_true`.
///
/// With `spec.refine` set, a short golden-section search on the log-weight
/// axis between the best point's grid neighbors adds a handful of extra
/// evaluations.
pub fn lambda_sweep(
    x_true: &ImageGrid,
    y: &ImageGrid,
    model: &SpeckleModel,
    template: &SolverConfig,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    if spec.lambdas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !x_true.same_dims(y) {
        return Err(Error::DimensionMismatch {
            expected_width: x_true.width(),
            expected_height: x_true.height(),
            found_width: y.width(),
            found_height: y.height(),
        });
    }
    template.validate()?;
    let obs = to_log(y, DEFAULT_CLAMP_FLOOR)?;

    let mut points: Vec<SweepPoint> = spec
        .lambdas
        .iter()
        .map(|&l| evaluate_point(l, x_true, &obs, model, template))
        .collect();

    let best_index = |pts: &[SweepPoint]| -> Option<usize> {
        pts.iter()
            .enumerate()
            .filter_map(|(i, p)| p.err.map(|e| (i, e)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, _)| i)
    };

    let Some(mut best) = best_index(&points) else {
        return Err(Error::SweepExhausted);
    };

    if spec.refine && points.len() > 1 {
        // bracket the best point by its neighbors (log axis); at a grid
        // edge, extend the bracket outward by one grid spacing
        let lam = |i: usize| points[i].lambda;
        let (mut lo, mut hi) = if best == 0 {
            let ratio = lam(1) / lam(0);
            (lam(0) / ratio, lam(1))
        } else if best == points.len() - 1 {
            let ratio = lam(best) / lam(best - 1);
            (lam(best - 1), lam(best) * ratio)
        } else {
            (lam(best - 1), lam(best + 1))
        };
        lo = lo.ln();
        hi = hi.ln();
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        for _ in 0..6 {
            let x1 = hi - (hi - lo) * INV_PHI;
            let x2 = lo + (hi - lo) * INV_PHI;
            let f = |log_lambda: f64, points: &mut Vec<SweepPoint>| -> f64 {
                let p = evaluate_point(log_lambda.exp(), x_true, &obs, model, template);
                let e = p.err.unwrap_or(f64::INFINITY);
                points.push(p);
                e
            };
            let e1 = f(x1, &mut points);
            let e2 = f(x2, &mut points);
            if e1 <= e2 {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        points.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
        best = best_index(&points).expect("at least the grid best exists");
    }

    Ok(SweepResult {
        best: points[best].clone(),
        points,
    })
}

/// Writes sweep points as CSV: `lambda,err,iters,converged,seconds`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], writer: &mut W) -> std::io::Result<()> {
    writeln!(writer, "lambda,err,iters,converged,seconds")?;
    for p in points {
        writeln!(
            writer,
            "{},{},{},{},{:.3}",
            p.lambda,
            p.err.unwrap_or(f64::NAN),
            p.iterations,
            p.converged,
            p.seconds
        )?;
    }
    Ok(())
}

/// A named ground-truth image for [`run_table`].
#[derive(Debug, Clone)]
pub struct TableImage {
    pub id: String,
    pub image: ImageGrid,
}

/// One line of the benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub looks: f64,
    pub lambda: f64,
    pub err: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub seed: u64,
}

/// Benchmark options beyond the lambda grid.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub sweep: SweepSpec,
    /// Base seed; row i uses `base_seed + i`.
    pub base_seed: u64,
    /// Report wall-clock seconds. Disable for byte-reproducible output.
    pub include_timing: bool,
}

/// Simulates speckle for every (image, looks) pair, sweeps the weight and
/// writes one CSV row per pair: `image,M,lambda,err,iters,seconds,seed`.
///
/// The header is always written, so an empty image list yields a
/// header-only report. A pair whose sweep fails entirely produces a row
/// with NaN metrics.
pub fn run_table<W: Write>(
    images: &[TableImage],
    looks_list: &[f64],
    template: &SolverConfig,
    spec: &TableSpec,
    writer: &mut W,
) -> Result<Vec<BenchRow>> {
    writeln!(writer, "image,M,lambda,err,iters,seconds,seed")?;
    let mut rows = Vec::new();
    let mut row_index: u64 = 0;
    for entry in images {
        for &looks in looks_list {
            let seed = spec.base_seed.wrapping_add(row_index);
            row_index += 1;
            let model = SpeckleModel::new(looks)?;
            let noise = model.sample_speckle(entry.image.width(), entry.image.height(), seed);
            let y = apply_speckle(&entry.image, &noise)?;
            let row = match lambda_sweep(&entry.image, &y, &model, template, &spec.sweep) {
                Ok(result) => BenchRow {
                    image: entry.id.clone(),
                    looks,
                    lambda: result.best.lambda,
                    err: result.best.err.unwrap_or(f64::NAN),
                    iterations: result.best.iterations,
                    seconds: if spec.include_timing {
                        result.best.seconds
                    } else {
                        0.0
                    },
                    seed,
                },
                Err(Error::SweepExhausted) => BenchRow {
                    image: entry.id.clone(),
                    looks,
                    lambda: f64::NAN,
                    err: f64::NAN,
                    iterations: 0,
                    seconds: 0.0,
                    seed,
                },
                Err(other) => return Err(other),
            };
            writeln!(
                writer,
                "{},{},{},{},{},{:.3},{}",
                row.image, row.looks, row.lambda, row.err, row.iterations, row.seconds, row.seed
            )?;
            rows.push(row);
        }
    }
    Ok(rows)
}
