//! Image container, discrete differential operators and basic metrics.
//!
//! Pixels are 64-bit reals stored row-major with origin at the top-left;
//! `(row, col)` indexing is used everywhere. The gradient uses forward
//! differences with a replicate (Neumann) boundary: the last column/row of
//! each difference field is zero. `divergence` is the exact negative adjoint
//! of `forward_diff`, which is what the dual projection solver in [`crate::tv`]
//! relies on.

use crate::error::{Error, Result};

/// Rectangular grid of `f64` pixel values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// All-zero image.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ImageGrid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Wraps a row-major pixel buffer. Fails if the length does not match
    /// `width * height` or any value is NaN/infinite.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                width,
                height,
                found: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "image pixel buffer",
            });
        }
        Ok(ImageGrid {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function of `(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        ImageGrid {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Elementwise map into a new image.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped images.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_same_dims(self, other)?;
        Ok(ImageGrid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn same_dims(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn sq_l2_norm(&self) -> f64 {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sq_l2_norm().sqrt()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Squared L2 distance to a same-shaped image.
    pub fn sq_distance(&self, other: &ImageGrid) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }
}

impl std::ops::Index<(usize, usize)> for ImageGrid {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[row * self.width + col]
    }
}

pub(crate) fn ensure_same_dims(a: &ImageGrid, b: &ImageGrid) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected_width: a.width,
            expected_height: a.height,
            found_width: b.width,
            found_height: b.height,
        })
    }
}

/// Pair of images holding the horizontal/vertical components of a discrete
/// vector field, e.g. the image gradient or the dual variable of the TV
/// denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    pub(crate) h: ImageGrid,
    pub(crate) v: ImageGrid,
}

impl DualField {
    pub fn zeros(width: usize, height: usize) -> Self {
        DualField {
            h: ImageGrid::zeros(width, height),
            v: ImageGrid::zeros(width, height),
        }
    }

    /// Pairs two same-shaped components.
    pub fn new(h: ImageGrid, v: ImageGrid) -> Result<Self> {
        ensure_same_dims(&h, &v)?;
        Ok(DualField { h, v })
    }

    pub fn horizontal(&self) -> &ImageGrid {
        &self.h
    }

    pub fn vertical(&self) -> &ImageGrid {
        &self.v
    }

    pub fn dims(&self) -> (usize, usize) {
        self.h.dims()
    }

    /// Largest pointwise Euclidean norm `sqrt(h^2 + v^2)` over the field.
    pub fn max_pointwise_norm(&self) -> f64 {
        self.h
            .as_slice()
            .iter()
            .zip(self.v.as_slice())
            .map(|(&a, &b)| a.hypot(b))
            .fold(0.0, f64::max)
    }

    /// `<self, other>` summed over both components.
    pub fn dot(&self, other: &DualField) -> f64 {
        self.h.dot(&other.h) + self.v.dot(&other.v)
    }

    pub fn sq_l2_norm(&self) -> f64 {
        self.h.sq_l2_norm() + self.v.sq_l2_norm()
    }
}

/// Forward differences `(dh z, dv z)` with zero at the last column/row.
///
/// `dh(r, c) = z(r, c+1) - z(r, c)` for `c < width-1`, else `0`, and
/// analogously for `dv` along rows.
pub fn forward_diff(z: &ImageGrid) -> DualField {
    let (w, h) = z.dims();
    let mut dh = ImageGrid::zeros(w, h);
    let mut dv = ImageGrid::zeros(w, h);
    let src = z.as_slice();
    for r in 0..h {
        let row = r * w;
        let dh_row = &mut dh.as_mut_slice()[row..row + w];
        for c in 0..w.saturating_sub(1) {
            dh_row[c] = src[row + c + 1] - src[row + c];
        }
    }
    for r in 0..h.saturating_sub(1) {
        let row = r * w;
        let dv_row = &mut dv.as_mut_slice()[row..row + w];
        for c in 0..w {
            dv_row[c] = src[row + w + c] - src[row + c];
        }
    }
    DualField { h: dh, v: dv }
}

/// Discrete divergence, the exact negative adjoint of [`forward_diff`]:
/// `<forward_diff(z), p> = -<z, divergence(p)>` for all matching shapes.
pub fn divergence(p: &DualField) -> ImageGrid {
    let (w, h) = p.dims();
    let mut out = ImageGrid::zeros(w, h);
    divergence_into(p, &mut out);
    out
}

/// In-place variant of [`divergence`] for solver inner loops.
pub(crate) fn divergence_into(p: &DualField, out: &mut ImageGrid) {
    let (w, h) = p.dims();
    debug_assert_eq!(out.dims(), (w, h));
    let ph = p.h.as_slice();
    let pv = p.v.as_slice();
    crate::par::for_each_row(out.as_mut_slice(), w, |r, row_out| {
        let row = r * w;
        for (c, out_px) in row_out.iter_mut().enumerate() {
            let mut d = 0.0;
            if c < w - 1 {
                d += ph[row + c];
            }
            if c > 0 {
                d -= ph[row + c - 1];
            }
            if r < h - 1 {
                d += pv[row + c];
            }
            if r > 0 {
                d -= pv[row - w + c];
            }
            *out_px = d;
        }
    });
}

/// Relative L2 error `||estimate - truth|| / ||truth||`.
///
/// Fails on shape mismatch or a zero-norm reference.
pub fn relative_error(estimate: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    ensure_same_dims(truth, estimate)?;
    let denom = truth.l2_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok(estimate.sq_distance(truth).sqrt() / denom)
}
