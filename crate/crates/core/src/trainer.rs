//! The alternating training loop.
//!
//! Each round:
//!
//! 1. draw `B/2` observed pairs `(X_i, Y_i)` and `B/2` generated pairs
//!    `(X_j, G(eta_j, X_j))` with fresh `eta_j ~ N(0, I_m)`;
//! 2. take one Adam *ascent* step of the critic on the empirical dual
//!    objective `mean D(fake) - mean f*(D(real))`;
//! 3. draw `B` fresh `(X, eta)` and take one Adam *descent* step of the
//!    generator on `mean D(X, G(eta, X))`, differentiating through the critic.
//!
//! Covariates and responses are standardized on the training data first;
//! the [`TrainedGenerator`] carries both maps so that sampling happens on
//! the original scale.

use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{PairedDataset, Standardizer};
use crate::divergence::{discriminator_upstream, empirical_dual, generator_upstream, DivergenceKind, DualObjectiveValue};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, DenseNet, NetworkCheckpoint, NetworkSpec};
use crate::rng::{child_seed, rng_from, stream, Rng};
use crate::simdata::ModelId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Dimension `m` of the reference noise.
    pub noise_dim: usize,
    /// Critic batch size `B`: `B/2` observed plus `B/2` generated pairs.
    /// The generator step also uses `B` rows.
    pub batch_size: usize,
    pub total_iterations: usize,
    pub d_steps_per_g_step: usize,
    pub gen_adam: AdamConfig,
    pub disc_adam: AdamConfig,
    pub seed: u64,
    pub divergence: DivergenceKind,
    /// Both learning rates decay linearly from their configured value to
    /// this fraction of it over `total_iterations`; 1 keeps them constant.
    pub final_lr_factor: f64,
    /// History is recorded every `log_every` rounds.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            noise_dim: 3,
            batch_size: 256,
            total_iterations: 20_000,
            d_steps_per_g_step: 1,
            gen_adam: AdamConfig::default(),
            disc_adam: AdamConfig::default(),
            seed: 0,
            divergence: DivergenceKind::Kl,
            final_lr_factor: 1.0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    /// All violations, empty when the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.noise_dim == 0 {
            v.push("noise_dim m must be >= 1".to_string());
        }
        if self.batch_size < 2 {
            v.push(format!(
                "batch_size B must be >= 2 so both half-batches are non-empty, got {}",
                self.batch_size
            ));
        }
        if !self.batch_size.is_multiple_of(2) {
            v.push(format!("batch_size B must be even (B even), got {}", self.batch_size));
        }
        if self.total_iterations == 0 {
            v.push("total_iterations must be >= 1".to_string());
        }
        if self.d_steps_per_g_step == 0 {
            v.push("d_steps_per_g_step must be >= 1".to_string());
        }
        if self.log_every == 0 {
            v.push("log_every must be >= 1".to_string());
        }
        if !(self.final_lr_factor >= 0.0 && self.final_lr_factor <= 1.0) {
            v.push(format!("final_lr_factor must lie in [0, 1], got {}", self.final_lr_factor));
        }
        for (name, a) in [("gen_adam", &self.gen_adam), ("disc_adam", &self.disc_adam)] {
            if a.validate().is_err() {
                v.push(format!("{name}: invalid Adam settings {a:?}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    /// Critic objective on the round's critic batch, before its update.
    pub d_objective: f64,
    /// Mean critic value on the round's generator batch.
    pub g_term: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        crate::io::csv_bytes(
            &["iteration", "d_objective", "g_term"],
            self.records
                .iter()
                .map(|r| [r.iteration.to_string(), r.d_objective.to_string(), r.g_term.to_string()]),
        )
    }
}

/// Generator network plus the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGenerator {
    net: DenseNet,
    noise_dim: usize,
    x_norm: Standardizer,
    y_norm: Standardizer,
}

impl TrainedGenerator {
    pub fn new(net: DenseNet, noise_dim: usize, x_norm: Standardizer, y_norm: Standardizer) -> Result<Self> {
        if net.spec().input_dim != noise_dim + x_norm.dim() {
            return Err(Error::DimensionMismatch {
                context: "generator input (m + d)",
                expected: noise_dim + x_norm.dim(),
                actual: net.spec().input_dim,
            });
        }
        if net.spec().output_dim != y_norm.dim() {
            return Err(Error::DimensionMismatch {
                context: "generator output (q)",
                expected: y_norm.dim(),
                actual: net.spec().output_dim,
            });
        }
        Ok(TrainedGenerator {
            net,
            noise_dim,
            x_norm,
            y_norm,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn d(&self) -> usize {
        self.x_norm.dim()
    }

    pub fn q(&self) -> usize {
        self.y_norm.dim()
    }

    pub fn x_norm(&self) -> &Standardizer {
        &self.x_norm
    }

    pub fn y_norm(&self) -> &Standardizer {
        &self.y_norm
    }

    /// Draws on the original response scale for noise rows `eta` paired with
    /// raw covariate rows `x`.
    pub fn generate(&self, eta: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if eta.ncols() != self.noise_dim || x.ncols() != self.d() || eta.nrows() != x.nrows() {
            return Err(Error::Contract(format!(
                "generator expects eta (n x {}) and x (n x {}), got {:?} and {:?}",
                self.noise_dim,
                self.d(),
                eta.dim(),
                x.dim()
            )));
        }
        let xs = self.x_norm.apply(x);
        let input = concatenate(Axis(1), &[eta, xs.view()]).expect("row counts match");
        let out = self.net.predict(input.view())?;
        Ok(self.y_norm.invert(out.view()))
    }

    pub fn checkpoint(&self, seed: u64, step: u64) -> GeneratorCheckpoint {
        GeneratorCheckpoint {
            network: NetworkCheckpoint::capture(&self.net, seed, step),
            noise_dim: self.noise_dim,
            x_norm: self.x_norm.clone(),
            y_norm: self.y_norm.clone(),
        }
    }
}

/// On-disk form of a [`TrainedGenerator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheckpoint {
    pub network: NetworkCheckpoint,
    pub noise_dim: usize,
    pub x_norm: Standardizer,
    pub y_norm: Standardizer,
}

impl GeneratorCheckpoint {
    pub fn restore(&self) -> Result<TrainedGenerator> {
        TrainedGenerator::new(
            self.network.restore()?,
            self.noise_dim,
            self.x_norm.clone(),
            self.y_norm.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Network layouts for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpecs {
    pub generator: NetworkSpec,
    pub discriminator: NetworkSpec,
    pub noise_dim: usize,
}

impl NetSpecs {
    pub fn from_widths(d: usize, q: usize, noise_dim: usize, gen_hidden: Vec<usize>, disc_hidden: Vec<usize>) -> Result<Self> {
        Ok(NetSpecs {
            generator: NetworkSpec::new(noise_dim + d, gen_hidden, q)?,
            discriminator: NetworkSpec::new(d + q, disc_hidden, 1)?,
            noise_dim,
        })
    }
}

/// Simulation network settings: one hidden layer of 50 for the generator on
/// M1-M3, `(40, 15)` on M4 and the helix; a `(50, 25)` critic throughout;
/// `m = 3` for M1-M3 and `m = 4` otherwise.
pub fn default_net_specs(model: ModelId) -> Result<NetSpecs> {
    let sim = crate::simdata::SimModel::new(model);
    let (d, q) = (sim.d(), sim.q());
    match model {
        ModelId::M1 | ModelId::M2 | ModelId::M3 => NetSpecs::from_widths(d, q, 3, vec![50], vec![50, 25]),
        ModelId::M4 | ModelId::Helix => NetSpecs::from_widths(d, q, 4, vec![40, 15], vec![50, 25]),
    }
}

/// Optimizer settings that train reliably at desk scale (n = 5000, 20k rounds).
///
/// Unimodal models take larger steps with two critic updates per generator
/// update. The bimodal models keep the slow default rate and a wider batch,
/// which holds the two modes closer to an even split.
pub fn desk_config(model: ModelId, seed: u64) -> TrainConfig {
    let noise_dim = match model {
        ModelId::M4 | ModelId::Helix => 4,
        _ => 3,
    };
    let mut cfg = TrainConfig { noise_dim, seed, ..TrainConfig::default() };
    match model {
        ModelId::M4 | ModelId::Helix => cfg.batch_size = 1024,
        _ => {
            cfg.gen_adam.lr = 1e-3;
            cfg.disc_adam.lr = 1e-3;
            cfg.d_steps_per_g_step = 2;
        }
    }
    cfg
}

/// [`desk_config`] for real data, following the unimodal settings.
pub fn tabular_config(seed: u64) -> TrainConfig {
    TrainConfig { noise_dim: 5, ..desk_config(ModelId::M1, seed) }
}

/// Real-data setting: generator `(50, 20)`, critic `(50, 25)`, `m = 5`.
pub fn tabular_net_specs(d: usize, q: usize) -> Result<NetSpecs> {
    NetSpecs::from_widths(d, q, 5, vec![50, 20], vec![50, 25])
}

/// Inputs of one critic update, on the standardized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorBatch {
    /// `[x, y]` rows from the data.
    pub real: Array2<f64>,
    /// `[x, G(eta, x)]` rows.
    pub fake: Array2<f64>,
}

/// Stepwise access to the training loop.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    x: Array2<f64>,
    y: Array2<f64>,
    x_norm: Standardizer,
    y_norm: Standardizer,
    gen: DenseNet,
    disc: DenseNet,
    gen_opt: AdamState,
    disc_opt: AdamState,
    rng: Rng,
    iteration: usize,
    history: TrainHistory,
}

impl Trainer {
    pub fn new(data: &PairedDataset, gen_spec: &NetworkSpec, disc_spec: &NetworkSpec, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, d, q, m) = (data.n(), data.d(), data.q(), cfg.noise_dim);
        let mismatch = |what: &str, expected: usize, actual: usize| {
            Err(Error::Config(format!("{what}: expected {expected}, got {actual}")))
        };
        if gen_spec.input_dim != m + d {
            return mismatch("generator input_dim (m + d)", m + d, gen_spec.input_dim);
        }
        if gen_spec.output_dim != q {
            return mismatch("generator output_dim (q)", q, gen_spec.output_dim);
        }
        if disc_spec.input_dim != d + q {
            return mismatch("discriminator input_dim (d + q)", d + q, disc_spec.input_dim);
        }
        if disc_spec.output_dim != 1 {
            return mismatch("discriminator output_dim", 1, disc_spec.output_dim);
        }
        if n < cfg.batch_size {
            return Err(Error::Config(format!(
                "batch_size B={} exceeds the {n} training rows",
                cfg.batch_size
            )));
        }
        let x_norm = Standardizer::fit(data.x.view());
        let y_norm = Standardizer::fit(data.y.view());
        let gen = DenseNet::init(gen_spec.clone(), child_seed(cfg.seed, stream::GEN_INIT))?;
        let disc = DenseNet::init(disc_spec.clone(), child_seed(cfg.seed, stream::DISC_INIT))?;
        Ok(Trainer {
            gen_opt: AdamState::new(cfg.gen_adam, &gen),
            disc_opt: AdamState::new(cfg.disc_adam, &disc),
            x: x_norm.apply(data.x.view()),
            y: y_norm.apply(data.y.view()),
            x_norm,
            y_norm,
            gen,
            disc,
            rng: rng_from(child_seed(cfg.seed, stream::TRAIN_LOOP)),
            iteration: 0,
            history: TrainHistory::default(),
            cfg: cfg.clone(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn generator(&self) -> &DenseNet {
        &self.gen
    }

    pub fn discriminator(&self) -> &DenseNet {
        &self.disc
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    fn noise(&mut self, rows: usize) -> Array2<f64> {
        let rng = &mut self.rng;
        Array2::from_shape_simple_fn((rows, self.cfg.noise_dim), || rng.sample(StandardNormal))
    }

    fn draw_indices(&mut self, amount: usize) -> Vec<usize> {
        index::sample(&mut self.rng, self.x.nrows(), amount).into_vec()
    }

    /// Generated responses (standardized scale) for standardized covariates.
    fn generate_std(&self, eta: &Array2<f64>, xs: &Array2<f64>) -> Result<Array2<f64>> {
        let input = concatenate(Axis(1), &[eta.view(), xs.view()]).expect("row counts match");
        self.gen.predict(input.view())
    }

    /// Draw the next critic batch from the training stream.
    pub fn draw_discriminator_batch(&mut self) -> Result<DiscriminatorBatch> {
        let half = self.cfg.batch_size / 2;
        let real_idx = self.draw_indices(half);
        let real = concatenate(
            Axis(1),
            &[self.x.select(Axis(0), &real_idx).view(), self.y.select(Axis(0), &real_idx).view()],
        )
        .expect("row counts match");
        let fake_idx = self.draw_indices(half);
        let xs = self.x.select(Axis(0), &fake_idx);
        let eta = self.noise(half);
        let y_fake = self.generate_std(&eta, &xs)?;
        let fake = concatenate(Axis(1), &[xs.view(), y_fake.view()]).expect("row counts match");
        Ok(DiscriminatorBatch { real, fake })
    }

    /// One critic ascent step; returns the objective before the update.
    pub fn discriminator_step(&mut self) -> Result<DualObjectiveValue> {
        let batch = self.draw_discriminator_batch()?;
        let kind = self.cfg.divergence;
        let (out_fake, cache_fake) = self.disc.forward(batch.fake.view())?;
        let (out_real, cache_real) = self.disc.forward(batch.real.view())?;
        let d_fake = out_fake.column(0).to_vec();
        let d_real = out_real.column(0).to_vec();
        let diverged = |reason: String| Error::Diverged {
            iteration: self.iteration + 1,
            reason,
        };
        let objective = empirical_dual(kind, &d_fake, &d_real).map_err(|e| diverged(e.to_string()))?;
        if !objective.value.is_finite() {
            return Err(diverged(format!("critic objective {}", objective.value)));
        }
        let (g_fake, g_real) = discriminator_upstream(kind, &d_fake, &d_real).map_err(|e| diverged(e.to_string()))?;
        let up_fake = Array2::from_shape_vec((g_fake.len(), 1), g_fake).expect("column");
        let up_real = Array2::from_shape_vec((g_real.len(), 1), g_real).expect("column");
        let mut grads = self.disc.backward(&cache_fake, up_fake.view())?;
        grads.add_params(&self.disc.backward(&cache_real, up_real.view())?);
        // ascent
        grads.scale_params(-1.0);
        self.disc_opt
            .step(&mut self.disc, &grads)
            .map_err(|e| diverged(e.to_string()))?;
        Ok(objective)
    }

    /// One generator descent step; returns the mean critic value on the
    /// generator batch before the update.
    pub fn generator_step(&mut self) -> Result<f64> {
        let b = self.cfg.batch_size;
        let idx = self.draw_indices(b);
        let xs = self.x.select(Axis(0), &idx);
        let eta = self.noise(b);
        let g_in = concatenate(Axis(1), &[eta.view(), xs.view()]).expect("row counts match");
        let (y_fake, g_cache) = self.gen.forward(g_in.view())?;
        let d_in = concatenate(Axis(1), &[xs.view(), y_fake.view()]).expect("row counts match");
        let (d_out, d_cache) = self.disc.forward(d_in.view())?;
        let d_vals = d_out.column(0).to_vec();
        let g_term = d_vals.iter().sum::<f64>() / b as f64;
        let diverged = |reason: String| Error::Diverged {
            iteration: self.iteration + 1,
            reason,
        };
        if !g_term.is_finite() {
            return Err(diverged(format!("generator term {g_term}")));
        }
        let up = generator_upstream(self.cfg.divergence, &d_vals)?;
        let up = Array2::from_shape_vec((b, 1), up).expect("column");
        let d_grads = self.disc.backward(&d_cache, up.view())?;
        let d = self.x.ncols();
        let g_up = d_grads.d_input.slice(s![.., d..]);
        let g_grads = self.gen.backward(&g_cache, g_up)?;
        self.gen_opt
            .step(&mut self.gen, &g_grads)
            .map_err(|e| diverged(e.to_string()))?;
        Ok(g_term)
    }

    /// One full round: `d_steps_per_g_step` critic steps, then one
    /// generator step.
    pub fn round(&mut self) -> Result<HistoryRecord> {
        let progress = (self.iteration as f64 / self.cfg.total_iterations as f64).min(1.0);
        let factor = 1.0 - (1.0 - self.cfg.final_lr_factor) * progress;
        self.gen_opt.config.lr = self.cfg.gen_adam.lr * factor;
        self.disc_opt.config.lr = self.cfg.disc_adam.lr * factor;
        let mut objective = None;
        for _ in 0..self.cfg.d_steps_per_g_step {
            objective = Some(self.discriminator_step()?);
        }
        let g_term = self.generator_step()?;
        self.iteration += 1;
        let rec = HistoryRecord {
            iteration: self.iteration,
            d_objective: objective.expect("at least one critic step").value,
            g_term,
        };
        if self.iteration.is_multiple_of(self.cfg.log_every) {
            self.history.records.push(rec);
        }
        Ok(rec)
    }

    pub fn run(mut self) -> Result<(TrainedGenerator, TrainHistory)> {
        while self.iteration < self.cfg.total_iterations {
            self.round()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<(TrainedGenerator, TrainHistory)> {
        let gen = TrainedGenerator::new(self.gen, self.cfg.noise_dim, self.x_norm, self.y_norm)?;
        Ok((gen, self.history))
    }
}

/// Train a conditional generator on `data`.
pub fn train(
    data: &PairedDataset,
    gen_spec: &NetworkSpec,
    disc_spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(TrainedGenerator, TrainHistory)> {
    Trainer::new(data, gen_spec, disc_spec, cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simdata::{generate, SimModel};

    fn small_setup() -> (PairedDataset, NetSpecs, TrainConfig) {
        let data = generate(&SimModel::new(ModelId::M4), 200, 5).unwrap();
        let specs = NetSpecs::from_widths(1, 1, 2, vec![8], vec![8, 4]).unwrap();
        let cfg = TrainConfig {
            noise_dim: 2,
            batch_size: 32,
            total_iterations: 30,
            log_every: 10,
            seed: 11,
            ..TrainConfig::default()
        };
        (data, specs, cfg)
    }

    #[test]
    fn default_specs_follow_simulation_settings() {
        let m1 = default_net_specs(ModelId::M1).unwrap();
        assert_eq!(m1.generator.hidden_widths, vec![50]);
        assert_eq!(m1.discriminator.hidden_widths, vec![50, 25]);
        assert_eq!(m1.noise_dim, 3);
        assert_eq!(m1.generator.input_dim, 8);
        let m4 = default_net_specs(ModelId::M4).unwrap();
        assert_eq!(m4.generator.hidden_widths, vec![40, 15]);
        assert_eq!(m4.noise_dim, 4);
        let m3 = default_net_specs(ModelId::M3).unwrap();
        assert_eq!(m3.generator.input_dim, 33);
        assert_eq!(m3.discriminator.input_dim, 31);
        let helix = default_net_specs(ModelId::Helix).unwrap();
        assert_eq!(helix.generator.output_dim, 2);
    }

    #[test]
    fn config_violations() {
        let cfg = TrainConfig {
            batch_size: 7,
            ..TrainConfig::default()
        };
        assert!(cfg.violations().iter().any(|v| v.contains("B even")));
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(!cfg.violations().is_empty());
        assert!(TrainConfig::default().violations().is_empty());
    }

    #[test]
    fn rejects_mismatched_specs() {
        let (data, specs, cfg) = small_setup();
        let bad = NetworkSpec::new(5, vec![4], 1).unwrap();
        assert!(matches!(Trainer::new(&data, &bad, &specs.discriminator, &cfg), Err(Error::Config(_))));
        assert!(matches!(Trainer::new(&data, &specs.generator, &bad, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_batch_larger_than_data() {
        let (data, specs, mut cfg) = small_setup();
        cfg.batch_size = 400;
        assert!(Trainer::new(&data, &specs.generator, &specs.discriminator, &cfg).is_err());
    }

    #[test]
    fn training_is_deterministic_and_shape_preserving() {
        let (data, specs, cfg) = small_setup();
        let (g1, h1) = train(&data, &specs.generator, &specs.discriminator, &cfg).unwrap();
        let (g2, h2) = train(&data, &specs.generator, &specs.discriminator, &cfg).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(h1, h2);
        assert_eq!(g1.net().spec(), &specs.generator);
        assert_eq!(g1.net().parameter_count(), specs.generator.parameter_count());
        let its: Vec<usize> = h1.records.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![10, 20, 30]);
    }

    #[test]
    fn critic_updates_before_generator_within_a_round() {
        let (data, specs, cfg) = small_setup();
        let mut t = Trainer::new(&data, &specs.generator, &specs.discriminator, &cfg).unwrap();
        let (g0, d0) = (t.generator().clone(), t.discriminator().clone());
        t.discriminator_step().unwrap();
        assert_ne!(t.discriminator(), &d0);
        assert_eq!(t.generator(), &g0);
        t.generator_step().unwrap();
        assert_ne!(t.generator(), &g0);
    }

    #[test]
    fn recorded_objective_replays_offline() {
        let (data, specs, cfg) = small_setup();
        let mut t = Trainer::new(&data, &specs.generator, &specs.discriminator, &cfg).unwrap();
        for _ in 0..5 {
            let mut replay = t.clone();
            let batch = replay.draw_discriminator_batch().unwrap();
            let d_fake = t.discriminator().predict(batch.fake.view()).unwrap().column(0).to_vec();
            let d_real = t.discriminator().predict(batch.real.view()).unwrap().column(0).to_vec();
            let offline = empirical_dual(cfg.divergence, &d_fake, &d_real).unwrap();
            let rec = t.round().unwrap();
            assert_eq!(rec.d_objective, offline.value);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let (data, specs, cfg) = small_setup();
        let (g, _) = train(&data, &specs.generator, &specs.discriminator, &cfg).unwrap();
        let ck = g.checkpoint(cfg.seed, cfg.total_iterations as u64);
        let back: GeneratorCheckpoint = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back.restore().unwrap(), g);
    }

    #[test]
    fn history_csv_header() {
        let h = TrainHistory {
            records: vec![HistoryRecord {
                iteration: 100,
                d_objective: -1.0,
                g_term: 0.5,
            }],
        };
        let s = String::from_utf8(h.to_csv_bytes().unwrap()).unwrap();
        assert_eq!(s, "iteration,d_objective,g_term\n100,-1,0.5\n");
    }
}
