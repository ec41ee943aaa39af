//! Independent reference solvers used to check the production algorithms.
//! Everything here is written from the problem statement alone and shares
//! no code with the implementation paths it verifies.

use despeckle_core::ImageGrid;

/// Root of `1 - e^(g - z) + a (z - c)` by plain bisection on the bracket
/// `[min(g, c), max(g, c) + 1/a]`, to absolute width `tol`.
pub fn bisect_pixel_oracle(g: f64, c: f64, a: f64, tol: f64) -> f64 {
    let f = |z: f64| 1.0 - (g - z).exp() + a * (z - c);
    let mut lo = g.min(c);
    let mut hi = g.max(c) + 1.0 / a;
    if f(lo) >= 0.0 {
        return lo;
    }
    if f(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..20_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn div_into(ph: &[f64], pv: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut d = 0.0;
            if c + 1 < w {
                d += ph[i];
            }
            if c > 0 {
                d -= ph[i - 1];
            }
            if r + 1 < h {
                d += pv[i];
            }
            if r > 0 {
                d -= pv[i - w];
            }
            out[i] = d;
        }
    }
}

/// Long-run projected gradient on the dual of
/// `min_u 1/2 ||u - v||^2 + weight TV(u)`:
/// minimize `1/2 || weight * div(p) - v ||^2` over the pointwise unit disk
/// with the explicit step `1 / (8 weight^2)` and disk projection. Returns
/// the primal `u = v - weight * div(p)`.
pub fn projected_gradient_denoise(v: &ImageGrid, weight: f64, max_iters: usize) -> ImageGrid {
    assert!(weight > 0.0);
    let (w, h) = v.dims();
    let n = w * h;
    let vals = v.as_slice();
    let mut ph = vec![0.0f64; n];
    let mut pv = vec![0.0f64; n];
    let mut r = vec![0.0f64; n];
    let mut u = vec![0.0f64; n];
    let mut u_prev = vec![f64::INFINITY; n];
    let step = 1.0 / (8.0 * weight * weight);
    let mut stable_iters = 0usize;

    for _ in 0..max_iters {
        div_into(&ph, &pv, w, h, &mut r);
        for i in 0..n {
            u[i] = vals[i] - weight * r[i];
            r[i] = weight * r[i] - vals[i];
        }

        // gradient step p += step * weight * grad(r), then project
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                let gh = if col + 1 < w { r[i + 1] - r[i] } else { 0.0 };
                let gv = if row + 1 < h { r[i + w] - r[i] } else { 0.0 };
                let nh = ph[i] + step * weight * gh;
                let nv = pv[i] + step * weight * gv;
                let norm = (nh * nh + nv * nv).sqrt();
                let scale = if norm > 1.0 { norm } else { 1.0 };
                ph[i] = nh / scale;
                pv[i] = nv / scale;
            }
        }

        let du = u
            .iter()
            .zip(&u_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if du < 1e-13 {
            stable_iters += 1;
            if stable_iters >= 10 {
                break;
            }
        } else {
            stable_iters = 0;
        }
        u_prev.copy_from_slice(&u);
    }

    div_into(&ph, &pv, w, h, &mut r);
    let out: Vec<f64> = (0..n).map(|i| vals[i] - weight * r[i]).collect();
    ImageGrid::from_vec(w, h, out).unwrap()
}
