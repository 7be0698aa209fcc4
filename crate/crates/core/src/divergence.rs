//! Variational f-divergence objectives.
//!
//! For a convex `f` with conjugate `f*`, any critic `D` gives the lower bound
//! `D_f(q || p) >= E_q[D] - E_p[f*(D)]`, tight at `D = f'(q/p)`. Here `q` is
//! the law of generated pairs and `p` the law of observed pairs.
//!
//! The KL objective is used in its shifted form
//! `E_q[D] - E_p[exp(D)]`, which equals `KL - 1` at the optimum
//! `D = log(q/p)`. The `+1` is dropped everywhere during training; use
//! [`DualObjectiveValue::divergence_estimate`] to add it back.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Critic values above this are clipped inside `exp` for the KL objective;
/// the clipped region contributes zero gradient.
pub const EXP_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    #[default]
    Kl,
    Js,
    ChiSquared,
}

impl std::str::FromStr for DivergenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(DivergenceKind::Kl),
            "js" => Ok(DivergenceKind::Js),
            "chi2" | "chi_squared" | "chisquared" => Ok(DivergenceKind::ChiSquared),
            other => Err(Error::Config(format!("unknown divergence `{other}`"))),
        }
    }
}

/// Fenchel conjugate `f*(t)`.
///
/// KL: `exp(t - 1)`; JS: `-log(2 - exp(t))` for `t < log 2`;
/// chi-squared: `t + t^2 / 4`.
pub fn conjugate(kind: DivergenceKind, t: f64) -> Result<f64> {
    match kind {
        DivergenceKind::Kl => Ok((t - 1.0).exp()),
        DivergenceKind::Js => {
            if t >= LN_2 {
                return Err(Error::Domain(format!("JS conjugate needs t < log 2, got {t}")));
            }
            // `0.0 -` rather than negation: f*(0) is +0, not -0.
            Ok(0.0 - (2.0 - t.exp()).ln())
        }
        DivergenceKind::ChiSquared => Ok(t + t * t / 4.0),
    }
}

/// The term applied to critic values on observed pairs, in the form the
/// objective is actually optimized (KL shifted, clamped).
fn real_transform(kind: DivergenceKind, d: f64) -> Result<f64> {
    match kind {
        DivergenceKind::Kl => Ok(d.min(EXP_CLAMP).exp()),
        DivergenceKind::Js | DivergenceKind::ChiSquared => conjugate(kind, d),
    }
}

fn real_transform_derivative(kind: DivergenceKind, d: f64) -> Result<f64> {
    match kind {
        DivergenceKind::Kl => Ok(if d > EXP_CLAMP { 0.0 } else { d.exp() }),
        DivergenceKind::Js => {
            if d >= LN_2 {
                return Err(Error::Domain(format!("JS conjugate needs t < log 2, got {d}")));
            }
            let e = d.exp();
            Ok(e / (2.0 - e))
        }
        DivergenceKind::ChiSquared => Ok(1.0 + d / 2.0),
    }
}

/// Empirical dual objective `fake_term - real_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualObjectiveValue {
    pub value: f64,
    /// Mean critic value on generated pairs.
    pub fake_term: f64,
    /// Mean transformed critic value on observed pairs.
    pub real_term: f64,
}

impl DualObjectiveValue {
    /// The lower-bound estimate of the divergence itself: adds back the
    /// constant dropped from the shifted KL objective.
    pub fn divergence_estimate(&self, kind: DivergenceKind) -> f64 {
        match kind {
            DivergenceKind::Kl => self.value + 1.0,
            _ => self.value,
        }
    }
}

fn non_empty(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        Err(Error::Contract(format!("{name} must be non-empty")))
    } else {
        Ok(())
    }
}

/// Sample-average dual objective from critic outputs on generated
/// (`d_fake`) and observed (`d_real`) pairs. The two lengths may differ.
pub fn empirical_dual(kind: DivergenceKind, d_fake: &[f64], d_real: &[f64]) -> Result<DualObjectiveValue> {
    non_empty("d_fake", d_fake)?;
    non_empty("d_real", d_real)?;
    let fake_term = d_fake.iter().sum::<f64>() / d_fake.len() as f64;
    let mut acc = 0.0;
    for &d in d_real {
        acc += real_transform(kind, d)?;
    }
    let real_term = acc / d_real.len() as f64;
    Ok(DualObjectiveValue {
        value: fake_term - real_term,
        fake_term,
        real_term,
    })
}

/// Partial derivatives of [`empirical_dual`] with respect to every critic
/// output, for feeding into the critic's backward pass.
pub fn discriminator_upstream(
    kind: DivergenceKind,
    d_fake: &[f64],
    d_real: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    non_empty("d_fake", d_fake)?;
    non_empty("d_real", d_real)?;
    let nf = d_fake.len() as f64;
    let nr = d_real.len() as f64;
    let fake = vec![1.0 / nf; d_fake.len()];
    let real = d_real
        .iter()
        .map(|&d| real_transform_derivative(kind, d).map(|g| -g / nr))
        .collect::<Result<Vec<_>>>()?;
    Ok((fake, real))
}

/// Derivative of the generator term `mean(d_fake)`: `1/B` per entry. The
/// trainer descends along it.
pub fn generator_upstream(_kind: DivergenceKind, d_fake: &[f64]) -> Result<Vec<f64>> {
    non_empty("d_fake", d_fake)?;
    Ok(vec![1.0 / d_fake.len() as f64; d_fake.len()])
}

/// The critic that attains the bound for density ratio `r = q/p`, in the
/// parametrization optimized here (shifted for KL).
pub fn optimal_critic(kind: DivergenceKind, ratio: f64) -> f64 {
    match kind {
        DivergenceKind::Kl => ratio.ln(),
        DivergenceKind::Js => (2.0 * ratio / (1.0 + ratio)).ln(),
        DivergenceKind::ChiSquared => 2.0 * (ratio - 1.0),
    }
}

/// Population dual objective `int q D - int p f*(D)` evaluated by the
/// trapezoid rule on `[lo, hi]`.
pub fn population_dual<Q, P, D>(
    kind: DivergenceKind,
    fake_density: Q,
    real_density: P,
    critic: D,
    lo: f64,
    hi: f64,
    subdivisions: usize,
) -> Result<f64>
where
    Q: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let grid = crate::stats::linspace(lo, hi, subdivisions);
    let mut vals = Vec::with_capacity(grid.len());
    for &z in &grid {
        let d = critic(z);
        let q = fake_density(z);
        let p = real_density(z);
        let real = if p == 0.0 { 0.0 } else { p * real_transform(kind, d)? };
        let fake = if q == 0.0 { 0.0 } else { q * d };
        vals.push(fake - real);
    }
    Ok(crate::stats::trapezoid(&grid, &vals))
}
