//! Monte Carlo functionals of a trained conditional generator.
//!
//! Everything here works from a [`ConditionalSampleSet`]: `J` draws
//! `G(eta_j, x)` at one fixed covariate `x`.

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::stats::{gaussian_kernel, robust_spread, sorted_copy};
use crate::trainer::TrainedGenerator;

/// Default Monte Carlo size.
pub const DEFAULT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSampleSet {
    pub x: Vec<f64>,
    /// `J x q`.
    pub draws: Array2<f64>,
    pub seed: u64,
}

impl ConditionalSampleSet {
    pub fn from_draws(x: Vec<f64>, draws: Array2<f64>, seed: u64) -> Result<Self> {
        if draws.nrows() == 0 {
            return Err(Error::Contract("a sample set needs at least one draw".into()));
        }
        Ok(ConditionalSampleSet { x, draws, seed })
    }

    /// Scalar draws.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let draws = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column");
        Self::from_draws(Vec::new(), draws, 0)
    }

    pub fn j(&self) -> usize {
        self.draws.nrows()
    }

    pub fn q(&self) -> usize {
        self.draws.ncols()
    }

    fn scalar_values(&self) -> Result<Vec<f64>> {
        if self.q() != 1 {
            return Err(Error::Unsupported(format!(
                "scalar functional requested on a {}-dimensional response",
                self.q()
            )));
        }
        Ok(self.draws.column(0).to_vec())
    }

    /// Draws as CSV with columns `y` (or `y1..yq`).
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let names: Vec<String> = if self.q() == 1 {
            vec!["y".into()]
        } else {
            (1..=self.q()).map(|k| format!("y{k}")).collect()
        };
        let header: Vec<&str> = names.iter().map(String::as_str).collect();
        crate::io::csv_bytes(
            &header,
            self.draws.rows().into_iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        )
    }
}

/// `J` draws `G(eta_j, x)` with `eta_j ~ N(0, I_m)`, seeded.
pub fn sample_conditional(gen: &TrainedGenerator, x: &[f64], j: usize, seed: u64) -> Result<ConditionalSampleSet> {
    if j == 0 {
        return Err(Error::Contract("J must be >= 1".into()));
    }
    if x.len() != gen.d() {
        return Err(Error::DimensionMismatch {
            context: "covariate vector",
            expected: gen.d(),
            actual: x.len(),
        });
    }
    let mut rng = rng_from(seed);
    let eta = Array2::from_shape_simple_fn((j, gen.noise_dim()), || rng.sample(StandardNormal));
    let xs = ndarray::ArrayView1::from(x).insert_axis(Axis(0));
    let xs = xs.broadcast((j, x.len())).expect("broadcast row");
    let draws = gen.generate(eta.view(), xs)?;
    ConditionalSampleSet::from_draws(x.to_vec(), draws, seed)
}

/// Per-coordinate Monte Carlo mean and SD, both with divisor `J`.
pub fn mc_mean_sd(s: &ConditionalSampleSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let j = s.j();
    if j < 2 {
        return Err(Error::Contract(format!("SD needs J >= 2, got {j}")));
    }
    let mut means = Vec::with_capacity(s.q());
    let mut sds = Vec::with_capacity(s.q());
    for col in s.draws.columns() {
        let m = col.sum() / j as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / j as f64;
        means.push(m);
        sds.push(var.sqrt());
    }
    Ok((means, sds))
}

/// Nearest rank `ceil(tau * J)`, clamped to `[1, J]`. Products that land
/// within rounding of an integer are taken as that integer.
fn nearest_rank(tau: f64, j: usize) -> usize {
    let r = tau * j as f64;
    let rank = if (r - r.round()).abs() < 1e-9 * j as f64 { r.round() } else { r.ceil() };
    (rank as usize).clamp(1, j)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")))
    }
}

fn quantile_of_sorted(sorted: &[f64], tau: f64) -> f64 {
    sorted[nearest_rank(tau, sorted.len()) - 1]
}

/// Nearest-rank `tau`-quantile of scalar draws.
pub fn mc_quantile(s: &ConditionalSampleSet, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let sorted = sorted_copy(&s.scalar_values()?);
    Ok(quantile_of_sorted(&sorted, tau))
}

/// Several quantiles from one sort.
pub fn mc_quantiles(s: &ConditionalSampleSet, taus: &[f64]) -> Result<Vec<f64>> {
    for &t in taus {
        check_tau(t)?;
    }
    let sorted = sorted_copy(&s.scalar_values()?);
    Ok(taus.iter().map(|&t| quantile_of_sorted(&sorted, t)).collect())
}

/// Central interval between the `(1 - level)/2` and `(1 + level)/2`
/// quantiles.
pub fn prediction_interval(s: &ConditionalSampleSet, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let q = mc_quantiles(s, &[(1.0 - level) / 2.0, (1.0 + level) / 2.0])?;
    Ok((q[0], q[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `1.06 * min(SD, IQR/1.349) * J^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

impl BandwidthRule {
    pub fn bandwidth(&self, values: &[f64]) -> Result<f64> {
        let h = match *self {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::Silverman => 1.06 * robust_spread(values) / (values.len() as f64).powf(0.2),
        };
        if h > 0.0 && h.is_finite() {
            Ok(h)
        } else {
            Err(Error::Domain(format!("bandwidth must be positive, got {h}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    pub fn integral(&self) -> f64 {
        crate::stats::trapezoid(&self.grid, &self.values)
    }

    /// Grid indices of strict interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        (1..self.values.len().saturating_sub(1))
            .filter(|&i| self.values[i] > self.values[i - 1] && self.values[i] >= self.values[i + 1])
            .collect()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        crate::io::csv_bytes(
            &["y", "density"],
            self.grid
                .iter()
                .zip(&self.values)
                .map(|(g, v)| [g.to_string(), v.to_string()]),
        )
    }
}

/// Gaussian-kernel density estimate of scalar draws on `grid`.
pub fn kde_curve(s: &ConditionalSampleSet, grid: &[f64], rule: BandwidthRule) -> Result<DensityCurve> {
    if grid.is_empty() {
        return Err(Error::Contract("density grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("density grid must be sorted".into()));
    }
    let values = s.scalar_values()?;
    let h = rule.bandwidth(&values)?;
    let inv_j = 1.0 / values.len() as f64;
    let dens = grid
        .iter()
        .map(|&g| values.iter().map(|&v| gaussian_kernel(g - v, h)).sum::<f64>() * inv_j)
        .collect();
    Ok(DensityCurve {
        grid: grid.to_vec(),
        values: dens,
        bandwidth: h,
    })
}

/// Grid spanning the draws `+-4` bandwidths.
pub fn default_grid(s: &ConditionalSampleSet, rule: BandwidthRule, points: usize) -> Result<Vec<f64>> {
    let values = s.scalar_values()?;
    let h = rule.bandwidth(&values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    Ok(crate::stats::linspace(lo, hi, points.max(2) - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Standardizer;
    use crate::nn::{DenseNet, NetworkSpec};
    use ndarray::array;
    use proptest::prelude::*;

    fn values(v: &[f64]) -> ConditionalSampleSet {
        ConditionalSampleSet::from_values(v).unwrap()
    }

    /// `G(eta, x) = eta_1` with m = q = 1, d = 1.
    fn identity_generator() -> TrainedGenerator {
        let net = DenseNet::from_layers(
            NetworkSpec::new(2, vec![], 1).unwrap(),
            vec![array![[1.0, 0.0]]],
            vec![array![0.0]],
        )
        .unwrap();
        TrainedGenerator::new(net, 1, Standardizer::identity(1), Standardizer::identity(1)).unwrap()
    }

    #[test]
    fn constant_generator_repeats_its_output() {
        let net = DenseNet::from_layers(
            NetworkSpec::new(3, vec![], 1).unwrap(),
            vec![array![[0.0, 0.0, 0.0]]],
            vec![array![2.5]],
        )
        .unwrap();
        let g = TrainedGenerator::new(net, 2, Standardizer::identity(1), Standardizer::identity(1)).unwrap();
        let s = sample_conditional(&g, &[0.3], 50, 1).unwrap();
        assert!(s.draws.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn identity_generator_is_standard_normal() {
        let j = 20_000;
        let s = sample_conditional(&identity_generator(), &[1.0], j, 42).unwrap();
        let (m, sd) = mc_mean_sd(&s).unwrap();
        let tol = 3.0 / (j as f64).sqrt();
        assert!(m[0].abs() < tol, "{}", m[0]);
        assert!((sd[0] - 1.0).abs() < tol, "{}", sd[0]);
        assert_eq!(s, sample_conditional(&identity_generator(), &[1.0], j, 42).unwrap());
    }

    #[test]
    fn sampling_rejects_bad_requests() {
        assert!(sample_conditional(&identity_generator(), &[1.0], 0, 1).is_err());
        assert!(sample_conditional(&identity_generator(), &[1.0, 2.0], 5, 1).is_err());
    }

    #[test]
    fn moments_use_divisor_j() {
        let (m, sd) = mc_mean_sd(&values(&[1.0, 3.0])).unwrap();
        assert_eq!((m[0], sd[0]), (2.0, 1.0));
        let (_, sd) = mc_mean_sd(&values(&[4.0; 6])).unwrap();
        assert_eq!(sd[0], 0.0);
        assert!(mc_mean_sd(&values(&[1.0])).is_err());
    }

    #[test]
    fn nearest_rank_quantiles() {
        assert_eq!(mc_quantile(&values(&[5.0, 1.0, 3.0, 2.0, 4.0]), 0.5).unwrap(), 3.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(mc_quantile(&values(&hundred), 0.95).unwrap(), 95.0);
        assert_eq!(mc_quantile(&values(&hundred), 0.07).unwrap(), 7.0);
        assert_eq!(mc_quantile(&values(&hundred), 1e-9).unwrap(), 1.0);
        assert_eq!(prediction_interval(&values(&hundred), 0.9).unwrap(), (5.0, 95.0));
        assert!(mc_quantile(&values(&hundred), 1.0).is_err());
    }

    #[test]
    fn quantile_needs_scalar_response() {
        let s = ConditionalSampleSet::from_draws(vec![0.0], Array2::zeros((4, 2)), 0).unwrap();
        assert!(matches!(mc_quantile(&s, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn symmetric_draws_give_symmetric_interval() {
        let s = sample_conditional(&identity_generator(), &[0.0], 10_000, 3).unwrap();
        let (lo, hi) = prediction_interval(&s, 0.9).unwrap();
        assert!((lo + hi).abs() < 0.1, "{lo} {hi}");
    }

    #[test]
    fn single_kernel_peak() {
        let c = kde_curve(&values(&[0.0]), &[0.0], BandwidthRule::Fixed(1.0)).unwrap();
        assert!((c.values[0] - 0.398_94).abs() < 1e-5);
    }

    #[test]
    fn kde_is_translation_equivariant() {
        let v = [0.1, -0.7, 2.0, 1.1];
        let grid = [-1.0, 0.0, 0.5, 3.0];
        let a = kde_curve(&values(&v), &grid, BandwidthRule::Silverman).unwrap();
        let shift = 0.25;
        let vs: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let gs: Vec<f64> = grid.iter().map(|x| x + shift).collect();
        let b = kde_curve(&values(&vs), &gs, BandwidthRule::Silverman).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kde_rejects_empty_or_unsorted_grid() {
        assert!(kde_curve(&values(&[0.0]), &[], BandwidthRule::Silverman).is_err());
        assert!(kde_curve(&values(&[0.0, 1.0]), &[1.0, 0.0], BandwidthRule::Silverman).is_err());
    }

    #[test]
    fn kde_of_normal_draws_tracks_normal_density() {
        let s = sample_conditional(&identity_generator(), &[0.0], 10_000, 8).unwrap();
        let grid = crate::stats::linspace(-2.0, 2.0, 80);
        let c = kde_curve(&s, &grid, BandwidthRule::Silverman).unwrap();
        let worst = grid
            .iter()
            .zip(&c.values)
            .map(|(&z, &v)| (v - crate::stats::normal_pdf(z)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
    }

    proptest! {
        #[test]
        fn duplication_leaves_moments_unchanged(v in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            let (m1, s1) = mc_mean_sd(&values(&v)).unwrap();
            let doubled: Vec<f64> = v.iter().chain(v.iter()).copied().collect();
            let (m2, s2) = mc_mean_sd(&values(&doubled)).unwrap();
            prop_assert!((m1[0] - m2[0]).abs() < 1e-9);
            prop_assert!((s1[0] - s2[0]).abs() < 1e-9);
        }

        #[test]
        fn quantile_monotone_in_tau(v in prop::collection::vec(-10.0f64..10.0, 1..60), a in 0.001f64..0.999, b in 0.001f64..0.999) {
            let s = values(&v);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(mc_quantile(&s, lo).unwrap() <= mc_quantile(&s, hi).unwrap());
        }

        #[test]
        fn intervals_nest(v in prop::collection::vec(-10.0f64..10.0, 1..60), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let s = values(&v);
            let (l1, l2) = if a <= b { (a, b) } else { (b, a) };
            let (lo1, hi1) = prediction_interval(&s, l1).unwrap();
            let (lo2, hi2) = prediction_interval(&s, l2).unwrap();
            prop_assert!(lo2 <= lo1 && hi1 <= hi2);
        }

        #[test]
        fn kde_integrates_to_one(v in prop::collection::vec(-5.0f64..5.0, 2..30)) {
            let s = values(&v);
            let rule = if crate::stats::robust_spread(&v) > 1e-3 { BandwidthRule::Silverman } else { BandwidthRule::Fixed(0.5) };
            let grid = default_grid(&s, rule, 2001).unwrap();
            let c = kde_curve(&s, &grid, rule).unwrap();
            prop_assert!((c.integral() - 1.0).abs() < 0.02, "{}", c.integral());
        }
    }
}
