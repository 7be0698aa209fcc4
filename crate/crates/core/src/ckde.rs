//! Conditional kernel density estimation.
//!
//! The estimate is the ratio of a product-Gaussian joint density over the
//! matching marginal:
//!
//! ```text
//! f(y | x) = sum_i w_i(x) prod_k K_{h_k}(y_k - Y_ik)
//! w_i(x)   = prod_j K_{h_j}(x_j - X_ij) / sum_l prod_j K_{h_j}(x_j - X_lj)
//! ```
//!
//! so for a scalar response the conditional law is a Gaussian mixture with
//! centres `Y_i`, common width `h_y` and weights `w_i(x)`. Bandwidths follow
//! the rule of thumb `h = 1.06 sigma n^(-1/(2K+J))` with `K = 2`,
//! `J = d + q` and `sigma = min(SD, IQR/1.349)`.
//!
//! Training rows are put in a canonical order at fit time, so every sum
//! runs in the same order whatever order the rows arrived in.

use std::cmp::Ordering;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataio::PairedDataset;
use crate::error::{Error, Result};
use crate::stats::{linspace, normal_cdf, robust_spread, sorted_copy, trapezoid, INV_SQRT_2PI};

/// Kernel order assumed by the bandwidth rule (Gaussian kernel).
pub const KERNEL_ORDER: usize = 2;

/// Quadrature subdivisions for moments and quantiles.
pub const SUBDIVISIONS: usize = 1000;

/// Tail mass outside the grid above which results are flagged.
pub const TAIL_WARNING: f64 = 0.01;

/// Marginal densities below this are treated as outside the support.
pub const MIN_MARGINAL: f64 = 1e-300;

/// `1.06 sigma n^(-1/(2K+J))`.
pub fn rule_of_thumb(sigma: f64, n: usize, kernel_order: usize, joint_dim: usize) -> f64 {
    // Dividing by the positive power rounds better than a negative exponent:
    // sigma = 1, n = 1024, K = 2, J = 1 gives exactly 0.265.
    1.06 * sigma / (n as f64).powf(1.0 / (2 * kernel_order + joint_dim) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkdeFit {
    x: Array2<f64>,
    y: Array2<f64>,
    /// Covariate bandwidths.
    pub hx: Vec<f64>,
    /// Response bandwidths.
    pub hy: Vec<f64>,
    pub kernel_order: usize,
    /// `J` in the bandwidth exponent.
    pub joint_dim: usize,
}

impl CkdeFit {
    /// Fits rule-of-thumb bandwidths. Every column is treated as continuous.
    pub fn fit(data: &PairedDataset) -> Result<Self> {
        let n = data.n();
        let joint_dim = data.d() + data.q();
        let mut h = Vec::with_capacity(joint_dim);
        for (column, col) in data.x.columns().into_iter().chain(data.y.columns()).enumerate() {
            // Sorting first keeps the spread independent of row order.
            let sigma = robust_spread(&sorted_copy(&col.to_vec()));
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::DegenerateBandwidth { column });
            }
            h.push(rule_of_thumb(sigma, n, KERNEL_ORDER, joint_dim));
        }
        let hy = h.split_off(data.d());
        Self::with_bandwidths(data, h, hy)
    }

    /// Uses the given bandwidths as they are.
    pub fn with_bandwidths(data: &PairedDataset, hx: Vec<f64>, hy: Vec<f64>) -> Result<Self> {
        if hx.len() != data.d() {
            return Err(Error::DimensionMismatch { context: "covariate bandwidths", expected: data.d(), actual: hx.len() });
        }
        if hy.len() != data.q() {
            return Err(Error::DimensionMismatch { context: "response bandwidths", expected: data.q(), actual: hy.len() });
        }
        if let Some(column) = hx.iter().chain(&hy).position(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::DegenerateBandwidth { column });
        }
        if data.n() == 0 {
            return Err(Error::Contract("CKDE needs at least one training row".into()));
        }
        let (x, y) = canonical_order(data);
        Ok(CkdeFit { x, y, hx, hy, kernel_order: KERNEL_ORDER, joint_dim: data.d() + data.q() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Normalized mixture weights `w_i(x)` in canonical row order.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch { context: "CKDE covariate", expected: self.d(), actual: x.len() });
        }
        let logw: Vec<f64> = self
            .x
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(x)
                    .zip(&self.hx)
                    .map(|((xi, x), h)| -0.5 * ((x - xi) / h).powi(2))
                    .sum::<f64>()
            })
            .collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm: f64 = self.hx.iter().map(|h| (h * INV_SQRT_2PI.recip()).ln()).sum();
        let mut w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let log_marginal = top + total.ln() - (self.n() as f64).ln() - log_norm;
        if !(log_marginal >= MIN_MARGINAL.ln()) {
            return Err(Error::Unsupported(format!(
                "marginal density at x is below {MIN_MARGINAL:e} (log {log_marginal:.1})"
            )));
        }
        for v in &mut w {
            *v /= total;
        }
        Ok(w)
    }

    /// `f(y | x)`.
    pub fn cond_density(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.q() {
            return Err(Error::DimensionMismatch { context: "CKDE response", expected: self.q(), actual: y.len() });
        }
        let w = self.weights(x)?;
        Ok(self.mixture_density(&w, y))
    }

    fn mixture_density(&self, w: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for (wi, row) in w.iter().zip(self.y.rows()) {
            if *wi == 0.0 {
                continue;
            }
            let mut k = *wi;
            for ((yi, y), h) in row.iter().zip(y).zip(&self.hy) {
                let u = (y - yi) / h;
                k *= (-0.5 * u * u).exp() * INV_SQRT_2PI / h;
            }
            total += k;
        }
        total
    }

    fn scalar_response(&self) -> Result<f64> {
        if self.q() != 1 {
            return Err(Error::Unsupported(format!("moments and quantiles need a scalar response, got q = {}", self.q())));
        }
        Ok(self.hy[0])
    }

    /// Mixture mass in `(-inf, t]`, exact.
    fn mixture_cdf(&self, w: &[f64], t: f64) -> f64 {
        let h = self.hy[0];
        w.iter().zip(self.y.column(0)).map(|(wi, yi)| wi * normal_cdf((t - yi) / h)).sum()
    }

    /// Conditional density on the grid plus the exact mass left of and
    /// right of it.
    pub fn density_on_grid(&self, x: &[f64], grid: &GridSpec) -> Result<GridDensity> {
        self.scalar_response()?;
        grid.validate()?;
        let w = self.weights(x)?;
        let nodes = grid.nodes();
        let values = nodes.iter().map(|y| self.mixture_density(&w, &[*y])).collect();
        let left = self.mixture_cdf(&w, grid.lo);
        let right = 1.0 - self.mixture_cdf(&w, grid.hi);
        Ok(GridDensity { nodes, values, left_tail: left, right_tail: right })
    }

    /// Conditional mean and SD by trapezoid quadrature.
    pub fn cond_moments(&self, x: &[f64], grid: &GridSpec) -> Result<CondMoments> {
        Ok(self.density_on_grid(x, grid)?.moments())
    }

    /// Solves `F(q | x) = tau` on the grid, interpolating linearly between
    /// nodes. The cumulative sum starts from the exact mass left of the grid.
    pub fn cond_quantile(&self, x: &[f64], tau: f64, grid: &GridSpec) -> Result<f64> {
        Ok(self.cond_quantiles(x, &[tau], grid)?[0])
    }

    pub fn cond_quantiles(&self, x: &[f64], taus: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
        self.density_on_grid(x, grid)?.quantiles(taus)
    }

    /// The default grid for this fit.
    pub fn default_grid(&self) -> Result<GridSpec> {
        let h = self.scalar_response()?;
        let col = self.y.column(0);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(GridSpec { lo: lo - 4.0 * h, hi: hi + 4.0 * h, subdivisions: SUBDIVISIONS })
    }
}

/// Sorts rows lexicographically by `[x, y]`.
fn canonical_order(data: &PairedDataset) -> (Array2<f64>, Array2<f64>) {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by(|&a, &b| {
        let ra = data.x.row(a).into_iter().chain(data.y.row(a));
        let rb = data.x.row(b).into_iter().chain(data.y.row(b));
        ra.zip(rb)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    (data.x.select(Axis(0), &idx), data.y.select(Axis(0), &idx))
}

fn invert_on_grid(nodes: &[f64], cdf: &[f64], tau: f64) -> Result<f64> {
    let (first, last) = (cdf[0], cdf[cdf.len() - 1]);
    if tau < first || tau > last {
        return Err(Error::GridCoverage(format!(
            "tau {tau} outside the CDF range [{first:.6}, {last:.6}] reached on [{}, {}]",
            nodes[0],
            nodes[nodes.len() - 1]
        )));
    }
    let k = cdf.partition_point(|c| *c < tau).max(1);
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    if c1 == c0 {
        return Ok(nodes[k - 1]);
    }
    Ok(nodes[k - 1] + (tau - c0) / (c1 - c0) * (nodes[k] - nodes[k - 1]))
}

/// Equally spaced integration grid for a scalar response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub subdivisions: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        GridSpec { lo, hi, subdivisions: SUBDIVISIONS }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() || self.subdivisions == 0 {
            return Err(Error::Domain(format!(
                "grid needs finite lo < hi and at least one subdivision, got [{}, {}] / {}",
                self.lo, self.hi, self.subdivisions
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.subdivisions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub left_tail: f64,
    pub right_tail: f64,
}

impl GridDensity {
    pub fn moments(&self) -> CondMoments {
        let (nodes, f) = (&self.nodes, &self.values);
        let mean = trapezoid(nodes, &nodes.iter().zip(f).map(|(y, f)| y * f).collect::<Vec<_>>());
        let var = trapezoid(nodes, &nodes.iter().zip(f).map(|(y, f)| (y - mean).powi(2) * f).collect::<Vec<_>>());
        let tail_mass = self.left_tail + self.right_tail;
        CondMoments { mean, sd: var.max(0.0).sqrt(), tail_mass, tail_warning: tail_mass > TAIL_WARNING }
    }

    pub fn quantiles(&self, taus: &[f64]) -> Result<Vec<f64>> {
        if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Domain(format!("tau must lie in (0, 1), got {t}")));
        }
        let cdf = self.cumulative();
        taus.iter().map(|&tau| invert_on_grid(&self.nodes, &cdf, tau)).collect()
    }

    /// CDF at each node.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = self.left_tail;
        let mut out = Vec::with_capacity(self.nodes.len());
        out.push(acc);
        for k in 1..self.nodes.len() {
            acc += 0.5 * (self.nodes[k] - self.nodes[k - 1]) * (self.values[k] + self.values[k - 1]);
            out.push(acc);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondMoments {
    pub mean: f64,
    pub sd: f64,
    /// Exact mixture mass outside the grid.
    pub tail_mass: f64,
    pub tail_warning: bool,
}
