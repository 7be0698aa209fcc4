//! Metrics and the replication harness.
//!
//! A replication draws a fresh training set and fresh test covariates from
//! a simulation model, fits every method, and scores its conditional mean,
//! SD and quantile estimates against the model's exact functionals. The
//! [`MetricTable`] then averages each metric over replications.
//!
//! Seeds: replication `r` runs from `child_seed(seed, REPLICATION_BASE + r)`
//! and every random input inside it is a further child of that seed, so a
//! replication's numbers do not depend on how many others ran before it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ckde::{CkdeFit, GridSpec, SUBDIVISIONS};
use crate::dataio::{split, PairedDataset};
use crate::error::{Error, Result};
use crate::rng::{child_seed, rng_from, stream};
use crate::sampler::{mc_mean_sd, mc_quantiles, sample_conditional, DEFAULT_DRAWS};
use crate::simdata::{generate, true_mean, true_quantile, true_sd, SimModel};
use crate::stats::{mean, std_dev};
use crate::trainer::{train, NetSpecs, TrainConfig, TrainedGenerator};

/// Quantile levels of the simulation tables.
pub const DEFAULT_TAUS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

const REPLICATION_BASE: u64 = 1_000;

/// `(1/k) sum (estimate_i - truth_i)^2`.
pub fn mse_functional(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch { context: "mse_functional", expected: truths.len(), actual: estimates.len() });
    }
    if estimates.is_empty() {
        return Err(Error::Contract("mse_functional needs at least one test point".into()));
    }
    Ok(estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / estimates.len() as f64)
}

/// Fraction of `actuals` inside their closed interval.
pub fn coverage(intervals: &[(f64, f64)], actuals: &[f64]) -> Result<f64> {
    if intervals.len() != actuals.len() {
        return Err(Error::DimensionMismatch { context: "coverage", expected: intervals.len(), actual: actuals.len() });
    }
    if intervals.is_empty() {
        return Err(Error::Contract("coverage needs at least one interval".into()));
    }
    let mut hits = 0usize;
    for (row, (&(lo, hi), y)) in intervals.iter().zip(actuals).enumerate() {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::MalformedInterval { row, lo, hi });
        }
        if lo <= *y && *y <= hi {
            hits += 1;
        }
    }
    Ok(hits as f64 / actuals.len() as f64)
}

/// Estimated functionals at one covariate value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub mean: f64,
    pub sd: f64,
    /// One entry per requested level, same order.
    pub quantiles: Vec<f64>,
}

/// A conditional-distribution estimator fitted to one training set.
pub trait FittedMethod {
    fn estimate(&self, x: &[f64], taus: &[f64], seed: u64) -> Result<PointEstimate>;
}

/// A conditional-distribution estimator that can be fitted.
pub trait ConditionalMethod {
    fn name(&self) -> &str;
    fn fit(&self, train: &PairedDataset, seed: u64) -> Result<Box<dyn FittedMethod>>;

    /// Rough operation count of fitting plus `k_test` estimates; compared
    /// against [`ExperimentSettings::work_budget`].
    fn work(&self, _n_train: usize, _d: usize, _k_test: usize) -> f64 {
        0.0
    }
}

/// The conditional generator trained on the dual KL objective.
#[derive(Debug, Clone)]
pub struct Gcds {
    pub config: TrainConfig,
    pub specs: NetSpecs,
    /// Monte Carlo draws per covariate value.
    pub draws: usize,
}

impl Gcds {
    pub fn new(config: TrainConfig, specs: NetSpecs) -> Self {
        Gcds { config, specs, draws: DEFAULT_DRAWS }
    }
}

impl ConditionalMethod for Gcds {
    fn name(&self) -> &str {
        "gcds"
    }

    fn fit(&self, train_set: &PairedDataset, seed: u64) -> Result<Box<dyn FittedMethod>> {
        let cfg = TrainConfig { seed, ..self.config.clone() };
        let (gen, _) = train(train_set, &self.specs.generator, &self.specs.discriminator, &cfg)?;
        Ok(Box::new(GcdsFit { gen, draws: self.draws }))
    }
}

pub struct GcdsFit {
    pub gen: TrainedGenerator,
    pub draws: usize,
}

impl FittedMethod for GcdsFit {
    fn estimate(&self, x: &[f64], taus: &[f64], seed: u64) -> Result<PointEstimate> {
        let s = sample_conditional(&self.gen, x, self.draws, seed)?;
        let (m, sd) = mc_mean_sd(&s)?;
        Ok(PointEstimate { mean: m[0], sd: sd[0], quantiles: mc_quantiles(&s, taus)? })
    }
}

/// Conditional kernel density estimation with rule-of-thumb bandwidths.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ckde;

impl ConditionalMethod for Ckde {
    fn name(&self) -> &str {
        "ckde"
    }

    fn fit(&self, train_set: &PairedDataset, _seed: u64) -> Result<Box<dyn FittedMethod>> {
        let fit = CkdeFit::fit(train_set)?;
        let grid = fit.default_grid()?;
        Ok(Box::new(CkdeEstimator { fit, grid }))
    }

    fn work(&self, n_train: usize, d: usize, k_test: usize) -> f64 {
        n_train as f64 * k_test as f64 * (d + SUBDIVISIONS + 1) as f64
    }
}

pub struct CkdeEstimator {
    pub fit: CkdeFit,
    pub grid: GridSpec,
}

impl FittedMethod for CkdeEstimator {
    fn estimate(&self, x: &[f64], taus: &[f64], _seed: u64) -> Result<PointEstimate> {
        let g = self.fit.density_on_grid(x, &self.grid)?;
        let m = g.moments();
        Ok(PointEstimate { mean: m.mean, sd: m.sd, quantiles: g.quantiles(taus)? })
    }
}

/// Reports the model's exact functionals; scores zero by construction.
#[derive(Debug, Clone)]
pub struct Oracle(pub SimModel);

impl ConditionalMethod for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn fit(&self, _train: &PairedDataset, _seed: u64) -> Result<Box<dyn FittedMethod>> {
        Ok(Box::new(self.clone()))
    }
}

impl FittedMethod for Oracle {
    fn estimate(&self, x: &[f64], taus: &[f64], _seed: u64) -> Result<PointEstimate> {
        Ok(PointEstimate {
            mean: true_mean(&self.0, x)?,
            sd: true_sd(&self.0, x)?,
            quantiles: taus.iter().map(|t| true_quantile(&self.0, x, *t)).collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    pub n_train: usize,
    pub k_test: usize,
    pub n_reps: usize,
    /// Quantile levels scored in addition to mean and SD; may be empty.
    pub taus: Vec<f64>,
    pub seed: u64,
    /// Methods whose [`ConditionalMethod::work`] exceeds this are skipped
    /// and listed in [`MetricTable::skipped`].
    pub work_budget: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings { n_train: 5000, k_test: 200, n_reps: 3, taus: Vec::new(), seed: 0, work_budget: 1e11 }
    }
}

impl ExperimentSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_train < 2 {
            v.push(format!("n_train must be >= 2, got {}", self.n_train));
        }
        if self.k_test == 0 {
            v.push("k_test must be >= 1".to_string());
        }
        if self.n_reps == 0 {
            v.push("n_reps must be >= 1".to_string());
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            v.push(format!("tau must lie in (0, 1), got {t}"));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub method: String,
    pub metric: String,
    pub tau: Option<f64>,
    pub mean: f64,
    pub se: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub method: String,
    pub replication: usize,
    pub error: String,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub method: String,
    pub work: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    /// Replications that errored; their metrics are left out of `rows`.
    pub failures: Vec<FailureRecord>,
    pub skipped: Vec<SkipRecord>,
    pub settings: ExperimentSettings,
}

impl MetricTable {
    pub const COLUMNS: [&'static str; 7] = ["model", "method", "metric", "tau", "mean", "se", "n_reps"];

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let rows = self.rows.iter().map(|r| {
            vec![
                r.model.clone(),
                r.method.clone(),
                r.metric.clone(),
                r.tau.map(|t| t.to_string()).unwrap_or_default(),
                r.mean.to_string(),
                r.se.to_string(),
                r.n_reps.to_string(),
            ]
        });
        crate::io::csv_bytes(&Self::COLUMNS, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn find(&self, method: &str, metric: &str, tau: Option<f64>) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric && r.tau == tau)
    }

    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty() || !self.skipped.is_empty()
    }
}

/// Across-replication mean and standard error `SD / sqrt(n)`; the error is
/// 0 for a single replication.
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let se = if n > 1 { std_dev(values, 1) / (n as f64).sqrt() } else { 0.0 };
    (mean(values), se)
}

/// One replication's test covariates, tagged with the seed they came from.
#[derive(Debug, Clone)]
pub struct TestCovariates {
    pub x: Array2<f64>,
    pub provenance: String,
}

/// Scores of one fitted method on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationScores {
    pub mse_mean: f64,
    pub mse_sd: f64,
    /// Aligned with the requested levels.
    pub mse_quantile: Vec<f64>,
}

/// Training set and test covariates of replication `rep`.
pub fn replication_data(model: &SimModel, settings: &ExperimentSettings, rep: usize) -> Result<(PairedDataset, TestCovariates)> {
    let rep_seed = child_seed(settings.seed, REPLICATION_BASE + rep as u64);
    let train_set = generate(model, settings.n_train, child_seed(rep_seed, stream::TRAIN_DATA))?;
    let test_seed = child_seed(rep_seed, stream::TEST_COVARIATES);
    let x = model.draw_covariates(settings.k_test, &mut rng_from(test_seed));
    Ok((train_set, TestCovariates { x, provenance: format!("{}:test:k={}:seed={test_seed}", model.id, settings.k_test) }))
}

/// Scores a fitted method against the model's exact functionals.
pub fn score(
    model: &SimModel,
    fitted: &dyn FittedMethod,
    test: &TestCovariates,
    taus: &[f64],
    sampling_seed: u64,
) -> Result<ReplicationScores> {
    if !test.provenance.starts_with(&format!("{}:test:", model.id)) {
        return Err(Error::Contract(format!(
            "test covariates `{}` were not drawn from model {}",
            test.provenance, model.id
        )));
    }
    let k = test.x.nrows();
    let (mut em, mut tm, mut es, mut ts) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
    let mut eq = vec![Vec::with_capacity(k); taus.len()];
    let mut tq = vec![Vec::with_capacity(k); taus.len()];
    for (i, row) in test.x.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let est = fitted.estimate(&x, taus, child_seed(sampling_seed, i as u64))?;
        em.push(est.mean);
        tm.push(true_mean(model, &x)?);
        es.push(est.sd);
        ts.push(true_sd(model, &x)?);
        for (t, tau) in taus.iter().enumerate() {
            eq[t].push(est.quantiles[t]);
            tq[t].push(true_quantile(model, &x, *tau)?);
        }
    }
    Ok(ReplicationScores {
        mse_mean: mse_functional(&em, &tm)?,
        mse_sd: mse_functional(&es, &ts)?,
        mse_quantile: eq.iter().zip(&tq).map(|(e, t)| mse_functional(e, t)).collect::<Result<_>>()?,
    })
}

/// Runs every method on `n_reps` replications and aggregates the metrics.
///
/// A failing replication is recorded in [`MetricTable::failures`] and the
/// remaining replications still contribute to the rows.
pub fn run_experiment(model: &SimModel, methods: &[&dyn ConditionalMethod], settings: &ExperimentSettings) -> Result<MetricTable> {
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    if model.q() != 1 {
        return Err(Error::Unsupported(format!("model {} has a vector response; the tables need q = 1", model.id)));
    }
    let v = settings.violations();
    if !v.is_empty() {
        return Err(Error::Config(v.join("; ")));
    }
    let mut skipped = Vec::new();
    let active: Vec<&dyn ConditionalMethod> = methods
        .iter()
        .copied()
        .filter(|m| {
            let work = m.work(settings.n_train, model.d(), settings.k_test);
            let over = work > settings.work_budget;
            if over {
                skipped.push(SkipRecord { method: m.name().to_string(), work, budget: settings.work_budget });
            }
            !over
        })
        .collect();
    let mut scores: Vec<Vec<ReplicationScores>> = vec![Vec::new(); active.len()];
    let mut failures = Vec::new();
    for rep in 0..settings.n_reps {
        let (train_set, test) = replication_data(model, settings, rep)?;
        let rep_seed = child_seed(settings.seed, REPLICATION_BASE + rep as u64);
        for (slot, method) in active.iter().enumerate() {
            let result = method
                .fit(&train_set, child_seed(rep_seed, stream::METHOD))
                .and_then(|fitted| score(model, fitted.as_ref(), &test, &settings.taus, child_seed(rep_seed, stream::SAMPLING)));
            match result {
                Ok(s) => scores[slot].push(s),
                Err(e) => {
                    let e = Error::Replication { replication: rep, source: Box::new(e) };
                    failures.push(FailureRecord {
                        method: method.name().to_string(),
                        replication: rep,
                        diverged: e.is_divergence(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (method, s) in active.iter().zip(&scores) {
        if s.is_empty() {
            continue;
        }
        let mut push = |metric: &str, tau: Option<f64>, values: Vec<f64>| {
            let (m, se) = aggregate(&values);
            rows.push(MetricRow {
                model: model.id.to_string(),
                method: method.name().to_string(),
                metric: metric.to_string(),
                tau,
                mean: m,
                se,
                n_reps: values.len(),
            });
        };
        push("mse_mean", None, s.iter().map(|r| r.mse_mean).collect());
        push("mse_sd", None, s.iter().map(|r| r.mse_sd).collect());
        for (t, tau) in settings.taus.iter().enumerate() {
            push("mse_quantile", Some(*tau), s.iter().map(|r| r.mse_quantile[t]).collect());
        }
    }
    Ok(MetricTable { rows, failures, skipped, settings: settings.clone() })
}

/// Prediction intervals on a test set and how many responses they contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub level: f64,
    pub coverage: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub intervals: Vec<(f64, f64)>,
    pub actuals: Vec<f64>,
}

impl CoverageReport {
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let rows = self
            .intervals
            .iter()
            .zip(&self.actuals)
            .map(|((lo, hi), y)| vec![lo.to_string(), hi.to_string(), y.to_string(), (lo <= y && y <= hi).to_string()]);
        crate::io::csv_bytes(&["lo", "hi", "y", "covered"], rows)
    }
}

/// Fits `method` on `train_set` and checks its central `level` intervals on
/// `test_set`, whose response must be scalar.
pub fn coverage_study(
    method: &dyn ConditionalMethod,
    train_set: &PairedDataset,
    test_set: &PairedDataset,
    level: f64,
    seed: u64,
) -> Result<CoverageReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("interval level must lie in (0, 1), got {level}")));
    }
    if test_set.q() != 1 {
        return Err(Error::Unsupported("coverage needs a scalar response".into()));
    }
    let fitted = method.fit(train_set, child_seed(seed, stream::METHOD))?;
    let taus = [(1.0 - level) / 2.0, (1.0 + level) / 2.0];
    let sampling = child_seed(seed, stream::SAMPLING);
    let intervals = test_set
        .x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let est = fitted.estimate(&row.to_vec(), &taus, child_seed(sampling, i as u64))?;
            Ok((est.quantiles[0], est.quantiles[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let actuals = test_set.y.column(0).to_vec();
    Ok(CoverageReport {
        level,
        coverage: coverage(&intervals, &actuals)?,
        n_train: train_set.n(),
        n_test: test_set.n(),
        intervals,
        actuals,
    })
}

/// Coverage on simulated data: fresh training and test pairs from `model`.
pub fn simulated_coverage(
    method: &dyn ConditionalMethod,
    model: &SimModel,
    n_train: usize,
    n_test: usize,
    level: f64,
    seed: u64,
) -> Result<CoverageReport> {
    let train_set = generate(model, n_train, child_seed(seed, stream::TRAIN_DATA))?;
    let test_set = generate(model, n_test, child_seed(seed, stream::TEST_RESPONSES))?;
    coverage_study(method, &train_set, &test_set, level, seed)
}

/// Coverage on a real dataset after a seeded train/test split.
pub fn split_coverage(
    method: &dyn ConditionalMethod,
    data: &PairedDataset,
    train_fraction: f64,
    level: f64,
    seed: u64,
) -> Result<CoverageReport> {
    let (train_set, test_set) = split(data, train_fraction, child_seed(seed, stream::TRAIN_DATA))?;
    coverage_study(method, &train_set, &test_set, level, seed)
}
