//! Multiplicative Gamma speckle: simulation, log-domain conversion and the
//! likelihood terms driving the restoration objective.
//!
//! The noise field N is i.i.d. Gamma with unit mean and variance `1/M`,
//! where `M` is the number of looks:
//!
//! ```text
//! p_N(n) = M^M / Gamma(M) * n^(M-1) * exp(-n M)
//! ```
//!
//! The observation is `y_i = x_i * n_i`; taking logarithms gives the
//! additive model `g = z + w` with `z = log x`, `w = log n`, and
//!
//! ```text
//! p_W(w) = M^M / Gamma(M) * exp(M w) * exp(-M e^w).
//! ```
//!
//! The minus log-likelihood of `z` given `g` is, per pixel and up to an
//! additive constant, `M * (z + e^(g - z))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, ImageGrid};
use crate::tv;

/// Default floor applied to intensities before taking logarithms. Zero
/// intensities cannot occur under the continuous model but do occur in
/// quantized data.
pub const DEFAULT_CLAMP_FLOOR: f64 = 1e-12;

/// Fully developed M-look speckle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeckleModel {
    looks: f64,
}

impl SpeckleModel {
    /// `looks` is the Gamma shape parameter M; must be positive and finite.
    pub fn new(looks: f64) -> Result<Self> {
        if !(looks.is_finite() && looks > 0.0) {
            return Err(Error::InvalidParameter {
                name: "looks",
                value: looks,
                constraint: "positive and finite",
            });
        }
        Ok(SpeckleModel { looks })
    }

    pub fn looks(&self) -> f64 {
        self.looks
    }

    /// Draws an i.i.d. unit-mean Gamma field, shape M and scale 1/M.
    ///
    /// Sampling uses the Marsaglia-Tsang rejection method (as implemented by
    /// `rand_distr::Gamma`, including the shape < 1 boost) on a dedicated
    /// ChaCha8 stream per pixel: stream index = row-major pixel index,
    /// keyed by `seed`. Each pixel therefore has its own counter-based
    /// substream and the field is reproducible bit-for-bit regardless of
    /// evaluation order.
    pub fn sample_speckle(&self, width: usize, height: usize, seed: u64) -> ImageGrid {
        let gamma = Gamma::new(self.looks, 1.0 / self.looks)
            .expect("shape and scale are validated positive");
        let mut out = ImageGrid::zeros(width, height);
        crate::par::for_each_row(out.as_mut_slice(), width, |r, row| {
            let base = (r * width) as u64;
            for (c, px) in row.iter_mut().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(base + c as u64);
                *px = gamma.sample(&mut rng);
            }
        });
        out
    }

    /// Gamma density `p_N(n)` of the intensity-domain noise.
    pub fn noise_density(&self, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        self.ln_noise_density(n).exp()
    }

    /// `ln p_N(n)`, evaluated in log space so large M does not overflow
    /// through Gamma(M).
    pub fn ln_noise_density(&self, n: f64) -> f64 {
        let m = self.looks;
        m * m.ln() - libm::lgamma(m) + (m - 1.0) * n.ln() - n * m
    }

    /// Density `p_W(w)` of the log-domain noise `W = log N`.
    pub fn log_noise_density(&self, w: f64) -> f64 {
        self.ln_log_noise_density(w).exp()
    }

    /// `ln p_W(w)`.
    pub fn ln_log_noise_density(&self, w: f64) -> f64 {
        let m = self.looks;
        m * m.ln() - libm::lgamma(m) + m * w - m * w.exp()
    }
}

/// Elementwise product `y_i = x_i * n_i` of a reflectivity image (expected
/// nonnegative) with a noise field.
pub fn apply_speckle(x: &ImageGrid, noise: &ImageGrid) -> Result<ImageGrid> {
    x.zip_map(noise, |a, b| a * b)
}

/// Log of an observed intensity image, `g_i = log(max(y_i, clamp_floor))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogObservation {
    g: ImageGrid,
    clamp_floor: f64,
}

impl LogObservation {
    /// Wraps an already-logged image. All entries must be finite.
    pub fn new(g: ImageGrid, clamp_floor: f64) -> Result<Self> {
        if !(clamp_floor.is_finite() && clamp_floor > 0.0) {
            return Err(Error::InvalidParameter {
                name: "clamp_floor",
                value: clamp_floor,
                constraint: "positive and finite",
            });
        }
        if !g.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "log observation",
            });
        }
        Ok(LogObservation { g, clamp_floor })
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.g
    }

    pub fn clamp_floor(&self) -> f64 {
        self.clamp_floor
    }

    pub fn dims(&self) -> (usize, usize) {
        self.g.dims()
    }
}

/// Takes logarithms of an intensity image, flooring at `clamp_floor` first.
pub fn to_log(y: &ImageGrid, clamp_floor: f64) -> Result<LogObservation> {
    if !(clamp_floor.is_finite() && clamp_floor > 0.0) {
        return Err(Error::InvalidParameter {
            name: "clamp_floor",
            value: clamp_floor,
            constraint: "positive and finite",
        });
    }
    let g = y.map(|v| v.max(clamp_floor).ln());
    LogObservation::new(g, clamp_floor)
}

/// Maximum exponent fed to `exp` in the data term; anything above signals a
/// z far below g and would overflow f64.
const MAX_EXP_ARG: f64 = 709.0;

/// Minus log-likelihood `M * sum_s (z_s + e^(g_s - z_s))`, the additive
/// constant dropped.
pub fn data_term(z: &ImageGrid, obs: &LogObservation, model: &SpeckleModel) -> Result<f64> {
    ensure_same_dims(obs.grid(), z)?;
    let mut acc = 0.0;
    for (&zs, &gs) in z.as_slice().iter().zip(obs.grid().as_slice()) {
        let e = gs - zs;
        if e > MAX_EXP_ARG {
            return Err(Error::DataTermOverflow { iteration: None });
        }
        acc += zs + e.exp();
    }
    let value = model.looks() * acc;
    if !value.is_finite() {
        return Err(Error::DataTermOverflow { iteration: None });
    }
    Ok(value)
}

/// Penalized objective `data_term(z) + lambda * TV(z)`.
pub fn objective(
    z: &ImageGrid,
    obs: &LogObservation,
    model: &SpeckleModel,
    lambda: f64,
) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            constraint: "nonnegative and finite",
        });
    }
    Ok(data_term(z, obs, model)? + lambda * tv::tv(z))
}
