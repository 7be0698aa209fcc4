//! Small numeric helpers shared across modules.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile function, polished with two Newton steps.
pub fn normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    if z.is_finite() {
        for _ in 0..2 {
            let dens = normal_pdf(z);
            if dens <= 0.0 {
                break;
            }
            z -= (normal_cdf(z) - p) / dens;
        }
    }
    z
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with divisor `n - ddof`.
pub fn std_dev(xs: &[f64], ddof: usize) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - ddof) as f64).sqrt()
}

/// Linearly interpolated quantile of an ascending slice (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Rule-of-thumb spread `min(SD, IQR/1.349)` with the unbiased SD.
pub fn robust_spread(xs: &[f64]) -> f64 {
    let sorted = sorted_copy(xs);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let sd = if xs.len() > 1 { std_dev(xs, 1) } else { 0.0 };
    let iqr_sigma = iqr / 1.349;
    // An IQR of zero with positive SD (many ties) falls back to SD.
    if iqr_sigma > 0.0 {
        sd.min(iqr_sigma)
    } else {
        sd
    }
}

/// Trapezoid rule on an arbitrary (sorted) grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

/// `n + 1` equally spaced nodes on `[a, b]`.
pub fn linspace(a: f64, b: f64, subdivisions: usize) -> Vec<f64> {
    let step = (b - a) / subdivisions as f64;
    (0..=subdivisions)
        .map(|i| if i == subdivisions { b } else { a + step * i as f64 })
        .collect()
}

pub fn gaussian_kernel(u: f64, h: f64) -> f64 {
    (-0.5 * (u / h).powi(2)).exp() / (h * (2.0 * PI).sqrt())
}
