//! Simulation models and their ground-truth conditional functionals.
//!
//! | model | d  | q | law of `Y` given `X = x` |
//! |-------|----|---|--------------------------|
//! | M1    | 5  | 1 | `x1^2 + exp(x2 + x3/3) + sin(x4 + x5) + N(0, 1)` |
//! | M2    | 5  | 1 | `x1^2 + exp(x2 + x3/3) + x4 - x5 + (0.5 + x2^2/2 + x5^2/2) N(0, 1)` |
//! | M3    | 30 | 1 | `s(x) exp(e/2)`, `s(x) = 5 + x1^2/3 + x2^2 + x3^2 + x4 + x5`, `e ~ 1/2 N(-2,1) + 1/2 N(2,1)` |
//! | M4    | 1  | 1 | `1/2 N(-x1, 0.25^2) + 1/2 N(x1, 0.25^2)` |
//! | Helix | 1  | 2 | `(2x + U sin 2U, 2x + U cos 2U) + N(0, sigma^2 I)`, `U ~ U[0, 2 pi]` |
//!
//! Covariates are standard normal in every model.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::PairedDataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};
use crate::stats::{normal_cdf, normal_quantile};

/// Component means of the M3 log-error mixture.
const M3_MIX_MEANS: [f64; 2] = [-2.0, 2.0];
/// M3 error enters as `exp(M3_EXPONENT * e)`.
const M3_EXPONENT: f64 = 0.5;
const M4_COMPONENT_SD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    Helix,
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelId::M1),
            "m2" => Ok(ModelId::M2),
            "m3" => Ok(ModelId::M3),
            "m4" => Ok(ModelId::M4),
            "helix" => Ok(ModelId::Helix),
            _ => Err(Error::Config(format!("unknown model id `{s}`"))),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::Helix => "Helix",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub id: ModelId,
    /// Noise level of the helix; ignored by the other models.
    pub noise_sigma: f64,
}

impl SimModel {
    pub const HELIX_SIGMAS: [f64; 3] = [0.4, 0.6, 0.8];

    pub fn new(id: ModelId) -> Self {
        SimModel {
            id,
            noise_sigma: Self::HELIX_SIGMAS[0],
        }
    }

    pub fn helix(sigma: f64) -> Self {
        SimModel {
            id: ModelId::Helix,
            noise_sigma: sigma,
        }
    }

    pub fn d(&self) -> usize {
        match self.id {
            ModelId::M1 | ModelId::M2 => 5,
            ModelId::M3 => 30,
            ModelId::M4 | ModelId::Helix => 1,
        }
    }

    pub fn q(&self) -> usize {
        match self.id {
            ModelId::Helix => 2,
            _ => 1,
        }
    }

    /// Draw covariates from the model's standard normal design.
    pub fn draw_covariates(&self, k: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((k, self.d()), || rng.sample(StandardNormal))
    }

    /// One response drawn from the conditional law at `x`.
    pub fn respond(&self, x: &[f64], rng: &mut Rng) -> Vec<f64> {
        let z = |rng: &mut Rng| -> f64 { rng.sample(StandardNormal) };
        match self.id {
            ModelId::M1 => vec![m1_mean(x) + z(rng)],
            ModelId::M2 => vec![m12_trend(x) + (x[3] - x[4]) + m2_sd(x) * z(rng)],
            ModelId::M3 => {
                let mu = if rng.random::<f64>() < 0.5 { M3_MIX_MEANS[0] } else { M3_MIX_MEANS[1] };
                vec![m3_scale(x) * (M3_EXPONENT * (mu + z(rng))).exp()]
            }
            ModelId::M4 => {
                let centre = if rng.random::<f64>() < 0.5 { -x[0] } else { x[0] };
                vec![centre + M4_COMPONENT_SD * z(rng)]
            }
            ModelId::Helix => {
                let u = rng.random::<f64>() * 2.0 * PI;
                let s = self.noise_sigma;
                vec![
                    2.0 * x[0] + u * (2.0 * u).sin() + s * z(rng),
                    2.0 * x[0] + u * (2.0 * u).cos() + s * z(rng),
                ]
            }
        }
    }

    /// Responses for each row of `x`.
    pub fn respond_rows(&self, x: &Array2<f64>, rng: &mut Rng) -> Array2<f64> {
        let mut y = Array2::zeros((x.nrows(), self.q()));
        for (i, row) in x.rows().into_iter().enumerate() {
            let r = self.respond(row.as_slice().expect("standard layout"), rng);
            for (j, v) in r.into_iter().enumerate() {
                y[[i, j]] = v;
            }
        }
        y
    }

    pub fn provenance(&self, n: usize, seed: u64) -> String {
        match self.id {
            ModelId::Helix => format!("sim:{}(sigma={}):n={n}:seed={seed}", self.id, self.noise_sigma),
            _ => format!("sim:{}:n={n}:seed={seed}", self.id),
        }
    }

    fn require_scalar(&self) -> Result<()> {
        if self.q() != 1 {
            return Err(Error::Unsupported(format!(
                "{} has a vector response; scalar truth functionals are undefined",
                self.id
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "covariate vector",
                expected: self.d(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// `n` i.i.d. rows from the model, deterministic in `seed`.
pub fn generate(model: &SimModel, n: usize, seed: u64) -> Result<PairedDataset> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let x = model.draw_covariates(n, &mut rng);
    let y = model.respond_rows(&x, &mut rng);
    PairedDataset::from_matrices(x, y, model.provenance(n, seed))
}

fn m12_trend(x: &[f64]) -> f64 {
    x[0] * x[0] + (x[1] + x[2] / 3.0).exp()
}

fn m1_mean(x: &[f64]) -> f64 {
    m12_trend(x) + (x[3] + x[4]).sin()
}

fn m2_sd(x: &[f64]) -> f64 {
    0.5 + x[1] * x[1] / 2.0 + x[4] * x[4] / 2.0
}

fn m3_scale(x: &[f64]) -> f64 {
    5.0 + x[0] * x[0] / 3.0 + x[1] * x[1] + x[2] * x[2] + x[3] + x[4]
}

/// `E exp(t e)` for the M3 log-error mixture, from the normal MGF.
fn m3_error_mgf(t: f64) -> f64 {
    let n = M3_MIX_MEANS.len() as f64;
    M3_MIX_MEANS.iter().map(|mu| (mu * t + t * t / 2.0).exp()).sum::<f64>() / n
}

/// CDF of the M3 log-error mixture.
fn m3_error_cdf(e: f64) -> f64 {
    let n = M3_MIX_MEANS.len() as f64;
    M3_MIX_MEANS.iter().map(|mu| normal_cdf(e - mu)).sum::<f64>() / n
}

/// `E[Y | X = x]`.
pub fn true_mean(model: &SimModel, x: &[f64]) -> Result<f64> {
    model.require_scalar()?;
    model.check_x(x)?;
    Ok(match model.id {
        ModelId::M1 => m1_mean(x),
        ModelId::M2 => m12_trend(x) + x[3] - x[4],
        ModelId::M3 => m3_scale(x) * m3_error_mgf(M3_EXPONENT),
        ModelId::M4 => 0.0,
        ModelId::Helix => unreachable!(),
    })
}

/// `SD(Y | X = x)`.
pub fn true_sd(model: &SimModel, x: &[f64]) -> Result<f64> {
    model.require_scalar()?;
    model.check_x(x)?;
    Ok(match model.id {
        ModelId::M1 => 1.0,
        ModelId::M2 => m2_sd(x),
        ModelId::M3 => {
            let m1 = m3_error_mgf(M3_EXPONENT);
            let m2 = m3_error_mgf(2.0 * M3_EXPONENT);
            m3_scale(x).abs() * (m2 - m1 * m1).sqrt()
        }
        ModelId::M4 => (x[0] * x[0] + M4_COMPONENT_SD * M4_COMPONENT_SD).sqrt(),
        ModelId::Helix => unreachable!(),
    })
}

/// Conditional CDF `P(Y <= y | X = x)`.
pub fn true_cdf(model: &SimModel, x: &[f64], y: f64) -> Result<f64> {
    model.require_scalar()?;
    model.check_x(x)?;
    Ok(match model.id {
        ModelId::M1 | ModelId::M2 => {
            let m = true_mean(model, x)?;
            let s = true_sd(model, x)?;
            normal_cdf((y - m) / s)
        }
        ModelId::M3 => {
            let s = m3_scale(x);
            if s > 0.0 {
                if y <= 0.0 {
                    0.0
                } else {
                    m3_error_cdf((y / s).ln() / M3_EXPONENT)
                }
            } else if s < 0.0 {
                if y >= 0.0 {
                    1.0
                } else {
                    1.0 - m3_error_cdf((y / s).ln() / M3_EXPONENT)
                }
            } else if y >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ModelId::M4 => {
            let s = M4_COMPONENT_SD;
            0.5 * normal_cdf((y + x[0]) / s) + 0.5 * normal_cdf((y - x[0]) / s)
        }
        ModelId::Helix => unreachable!(),
    })
}

/// Conditional `tau`-quantile: closed form for the Gaussian models,
/// bisection on the mixture CDF otherwise.
pub fn true_quantile(model: &SimModel, x: &[f64], tau: f64) -> Result<f64> {
    model.require_scalar()?;
    model.check_x(x)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    match model.id {
        ModelId::M1 | ModelId::M2 => Ok(true_mean(model, x)? + true_sd(model, x)? * normal_quantile(tau)),
        ModelId::M3 if m3_scale(x) == 0.0 => Ok(0.0),
        // The mixture is symmetric about 0 and its CDF is flat there when the
        // components separate, so solve on the lower half only.
        ModelId::M4 if tau == 0.5 => Ok(0.0),
        ModelId::M4 if tau > 0.5 => Ok(-true_quantile(model, x, 1.0 - tau)?),
        _ => {
            let m = true_mean(model, x)?;
            let s = true_sd(model, x)?;
            bisect_cdf(|y| true_cdf(model, x, y).expect("validated"), tau, m - 20.0 * s, m + 20.0 * s)
        }
    }
}

/// Smallest-bracket bisection for `cdf(y) = tau`.
pub(crate) fn bisect_cdf<F: Fn(f64) -> f64>(cdf: F, tau: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    if !(cdf(lo) <= tau && cdf(hi) >= tau) {
        return Err(Error::Numeric(format!("bisection bracket [{lo}, {hi}] does not contain tau={tau}")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-10 * (1.0 + mid.abs()) * 1e-3 {
            break;
        }
        if cdf(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
