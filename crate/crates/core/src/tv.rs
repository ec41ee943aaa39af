//! Discrete isotropic total variation and the quadratic-data TV denoiser.
//!
//! `denoise` approximately minimizes `1/2 ||u - v||^2 + weight * TV(u)` by
//! projection onto the dual ball: with `p` a unit-disk-constrained vector
//! field, the minimizer is `u = v - weight * div(p*)`, and `p*` is found by
//! the semi-implicit fixed-point sweep
//!
//! ```text
//! q   = grad(div(p) - v / weight)
//! p  <- (p + step * q) / (1 + step * |q|)
//! ```
//!
//! All sweeps are Jacobi-style (every pixel reads the previous iterate), so
//! the result does not depend on pixel evaluation order.

use crate::error::{Error, Result};
use crate::image::{divergence_into, ensure_same_dims, DualField, ImageGrid};
use crate::par::{for_each_row, for_each_row2};

/// Settings for the dual projection sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChambolleConfig {
    /// Dual ascent step; must lie in (0, 0.25] for stability.
    pub step: f64,
    /// Number of sweeps when `tol` is zero, upper bound otherwise.
    pub max_iters: usize,
    /// Relative dual-change stopping threshold; `0` runs exactly
    /// `max_iters` sweeps.
    pub tol: f64,
}

impl Default for ChambolleConfig {
    fn default() -> Self {
        // Ten sweeps with a near-maximal stable step; the solver outer loop
        // warm starts the dual, so few inner sweeps are needed.
        ChambolleConfig {
            step: 0.248,
            max_iters: 10,
            tol: 0.0,
        }
    }
}

impl ChambolleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= 0.25) {
            return Err(Error::InvalidParameter {
                name: "step",
                value: self.step,
                constraint: "in (0, 0.25]",
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
                constraint: "at least 1",
            });
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: self.tol,
                constraint: "nonnegative and finite",
            });
        }
        Ok(())
    }
}

/// Isotropic total variation `sum_s sqrt(dh_s^2 + dv_s^2)` with the forward
/// difference stencil of [`crate::image::forward_diff`].
pub fn tv(z: &ImageGrid) -> f64 {
    let (w, h) = z.dims();
    let src = z.as_slice();
    let mut acc = 0.0;
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let i = row + c;
            let dh = if c < w - 1 { src[i + 1] - src[i] } else { 0.0 };
            let dv = if r < h - 1 { src[i + w] - src[i] } else { 0.0 };
            acc += (dh * dh + dv * dv).sqrt();
        }
    }
    acc
}

/// TV denoising with a quadratic data term.
///
/// Returns the approximate minimizer of `1/2 ||u - v||^2 + weight * TV(u)`
/// together with the final dual field, which can be fed back as
/// `warm_start` on the next call. With `weight == 0` the input is returned
/// unchanged.
pub fn denoise(
    v: &ImageGrid,
    weight: f64,
    cfg: &ChambolleConfig,
    warm_start: Option<DualField>,
) -> Result<(ImageGrid, DualField)> {
    cfg.validate()?;
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "weight",
            value: weight,
            constraint: "nonnegative and finite",
        });
    }
    let (w, h) = v.dims();
    let mut p = match warm_start {
        Some(field) => {
            ensure_same_dims(v, field.horizontal())?;
            field
        }
        None => DualField::zeros(w, h),
    };
    if weight == 0.0 {
        return Ok((v.clone(), p));
    }

    let mut work = ImageGrid::zeros(w, h); // div(p), then div(p) - v/weight
    let mut qh = ImageGrid::zeros(w, h);
    let mut qv = ImageGrid::zeros(w, h);
    let step = cfg.step;
    let track_tol = cfg.tol > 0.0;

    for _ in 0..cfg.max_iters {
        let prev = if track_tol { Some(p.clone()) } else { None };

        divergence_into(&p, &mut work);
        {
            let vals = v.as_slice();
            for_each_row(work.as_mut_slice(), w, |r, row| {
                let base = r * w;
                for (c, px) in row.iter_mut().enumerate() {
                    *px -= vals[base + c] / weight;
                }
            });
        }

        // q = grad(work); forward differences, zero on the last column/row
        {
            let src = work.as_slice();
            for_each_row2(qh.as_mut_slice(), qv.as_mut_slice(), w, |r, hrow, vrow| {
                let base = r * w;
                for c in 0..w {
                    let i = base + c;
                    hrow[c] = if c < w - 1 { src[i + 1] - src[i] } else { 0.0 };
                    vrow[c] = if r < h - 1 { src[i + w] - src[i] } else { 0.0 };
                }
            });
        }

        // p <- (p + step q) / (1 + step |q|); keeps |p| <= 1 pointwise
        {
            let (ph, pv) = p.components_mut();
            let qh_s = qh.as_slice();
            let qv_s = qv.as_slice();
            for_each_row2(ph.as_mut_slice(), pv.as_mut_slice(), w, |r, hrow, vrow| {
                let base = r * w;
                for c in 0..w {
                    let i = base + c;
                    let norm = (qh_s[i] * qh_s[i] + qv_s[i] * qv_s[i]).sqrt();
                    let denom = 1.0 + step * norm;
                    hrow[c] = (hrow[c] + step * qh_s[i]) / denom;
                    vrow[c] = (vrow[c] + step * qv_s[i]) / denom;
                }
            });
        }

        if let Some(prev) = prev {
            let delta = p.horizontal().sq_distance(prev.horizontal())
                + p.vertical().sq_distance(prev.vertical());
            let denom = prev.sq_l2_norm();
            let rel = if denom > 0.0 {
                (delta / denom).sqrt()
            } else if delta > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if rel < cfg.tol {
                break;
            }
        }
    }

    divergence_into(&p, &mut work);
    let u = v.zip_map(&work, |vi, di| vi - weight * di)?;
    Ok((u, p))
}

impl DualField {
    pub(crate) fn components_mut(&mut self) -> (&mut ImageGrid, &mut ImageGrid) {
        (&mut self.h, &mut self.v)
    }
}
