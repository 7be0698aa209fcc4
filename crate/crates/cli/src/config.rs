//! Experiment configuration.
//!
//! Resolution order: built-in defaults, then the JSON file given with
//! `--config`, then command-line flags. Every flag has a config key of the
//! same name (dashes become underscores).

use std::path::{Path, PathBuf};

use clap::Args;
use gcds::simdata::{ModelId, SimModel};
use gcds::trainer::{desk_config, tabular_config, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const METHODS: [&str; 2] = ["gcds", "ckde"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Train,
    Evaluate,
    Table,
    Density,
    Coverage,
    Validate,
}

impl CommandKind {
    fn default_model(self) -> &'static str {
        match self {
            CommandKind::Coverage => "M2",
            _ => "M1",
        }
    }

    /// Commands that need a scalar response.
    fn scalar_only(self) -> bool {
        !matches!(self, CommandKind::Simulate | CommandKind::Train | CommandKind::Validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    /// `M1`..`M4` or `helix`; ignored when `data` is set.
    pub model: Option<String>,
    /// Noise SD of the helix model.
    pub helix_sigma: Option<f64>,
    pub methods: Vec<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub n_train: usize,
    pub k_test: usize,
    pub reps: usize,
    pub iters: Option<usize>,
    pub batch: Option<usize>,
    pub j_draws: usize,
    pub tau: Vec<f64>,
    /// Covariate rows, flattened; length must be a multiple of `d`.
    pub x: Vec<f64>,
    /// CSV dataset with a JSON schema sidecar; replaces simulated data.
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Generator checkpoint to reuse instead of training.
    pub checkpoint: Option<PathBuf>,
    pub level: f64,
    pub train_fraction: f64,
    pub n_test: usize,
    pub work_budget: f64,
    pub density_points: usize,
    pub train: Option<TrainConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: None,
            model: None,
            helix_sigma: None,
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            seed: 1,
            out: PathBuf::from("out"),
            n_train: 5000,
            k_test: 200,
            reps: 3,
            iters: None,
            batch: None,
            j_draws: 10_000,
            tau: Vec::new(),
            x: Vec::new(),
            data: None,
            schema: None,
            checkpoint: None,
            level: 0.9,
            train_fraction: 0.9,
            n_test: 500,
            work_budget: 1e11,
            density_points: 512,
            train: None,
        }
    }
}

/// Command-line overrides; each maps to the config key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub helix_sigma: Option<f64>,
    /// Comma-separated: gcds, ckde.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub k_test: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub j_draws: Option<usize>,
    /// Comma-separated quantile levels.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau: Option<Vec<f64>>,
    /// Comma-separated covariate values, row after row.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub work_budget: Option<f64>,
    #[arg(long)]
    pub density_points: Option<usize>,
}

macro_rules! override_with {
    ($cfg:ident, $flags:ident, $($field:ident),*) => {
        $(if let Some(v) = $flags.$field.clone() { $cfg.$field = v; })*
    };
}

macro_rules! override_some {
    ($cfg:ident, $flags:ident, $($field:ident),*) => {
        $(if $flags.$field.is_some() { $cfg.$field = $flags.$field.clone(); })*
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Defaults, file, flags; then fills in the model and training settings.
    pub fn resolve(command: CommandKind, flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        override_with!(cfg, flags, methods, seed, out, n_train, k_test, reps, j_draws, tau, x, level, train_fraction, n_test, work_budget, density_points);
        override_some!(cfg, flags, model, helix_sigma, data, schema, checkpoint, iters, batch);
        cfg.command = Some(command);
        if cfg.model.is_none() {
            cfg.model = Some(command.default_model().to_string());
        }
        let mut train = match (cfg.train.take(), cfg.model_id(), cfg.data.is_some()) {
            (Some(t), _, _) => t,
            (None, _, true) => tabular_config(cfg.seed),
            (None, Ok(id), false) => desk_config(id, cfg.seed),
            (None, Err(_), false) => TrainConfig::default(),
        };
        train.seed = cfg.seed;
        if let Some(i) = cfg.iters {
            train.total_iterations = i;
        }
        if let Some(b) = cfg.batch {
            train.batch_size = b;
        }
        cfg.iters = Some(train.total_iterations);
        cfg.batch = Some(train.batch_size);
        cfg.train = Some(train);
        Ok(cfg)
    }

    pub fn command(&self) -> CommandKind {
        self.command.unwrap_or(CommandKind::Validate)
    }

    pub fn model_id(&self) -> Result<ModelId, String> {
        let name = self.model.as_deref().unwrap_or("M1");
        name.parse::<ModelId>().map_err(|_| format!("unknown model id `{name}` (expected M1, M2, M3, M4 or helix)"))
    }

    pub fn sim_model(&self) -> Result<SimModel, CliError> {
        let id = self.model_id().map_err(CliError::config)?;
        Ok(match (id, self.helix_sigma) {
            (ModelId::Helix, Some(s)) => SimModel::helix(s),
            _ => SimModel::new(id),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_default()
    }

    pub fn has_method(&self, name: &str) -> bool {
        self.methods.iter().any(|m| m == name)
    }

    /// Every problem that would stop a run, as readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let command = self.command();
        let model = self.model_id();
        if self.data.is_none() {
            if let Err(e) = &model {
                v.push(e.clone());
            }
        }
        if self.data.is_some() != self.schema.is_some() {
            v.push("data and schema must be given together".to_string());
        }
        if self.methods.is_empty() {
            v.push("methods must name at least one of gcds, ckde".to_string());
        }
        for m in &self.methods {
            if !METHODS.contains(&m.as_str()) {
                v.push(format!("unknown method `{m}` (expected gcds or ckde)"));
            }
        }
        if self.n_train < 2 {
            v.push(format!("n_train must be >= 2, got {}", self.n_train));
        }
        if self.k_test == 0 {
            v.push("k_test must be >= 1".to_string());
        }
        if self.reps == 0 {
            v.push("reps must be >= 1".to_string());
        }
        if self.j_draws < 2 {
            v.push(format!("j_draws must be >= 2, got {}", self.j_draws));
        }
        if self.n_test == 0 {
            v.push("n_test must be >= 1".to_string());
        }
        if self.density_points < 2 {
            v.push("density_points must be >= 2".to_string());
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            v.push(format!("tau must lie in (0, 1), got {t}"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            v.push(format!("level must lie in (0, 1), got {}", self.level));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            v.push(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.work_budget > 0.0) {
            v.push(format!("work_budget must be positive, got {}", self.work_budget));
        }
        if let Some(s) = self.helix_sigma {
            if !(s > 0.0 && s.is_finite()) {
                v.push(format!("helix_sigma must be positive, got {s}"));
            }
        }
        let train = self.train_config();
        v.extend(train.violations());
        let trains_on_sim = self.data.is_none() && self.has_method("gcds") && self.checkpoint.is_none();
        if trains_on_sim && command != CommandKind::Simulate && self.n_train < train.batch_size {
            v.push(format!("n_train ({}) must be >= batch ({}) to train the generator", self.n_train, train.batch_size));
        }
        if let (Ok(id), None) = (&model, &self.data) {
            let sim = SimModel::new(*id);
            if command.scalar_only() && sim.q() != 1 {
                v.push(format!("{command:?} needs a scalar response; model {id} has q = {}", sim.q()).to_lowercase());
            }
            if !self.x.is_empty() && !self.x.len().is_multiple_of(sim.d()) {
                v.push(format!("x has {} values, not a multiple of d = {} for model {id}", self.x.len(), sim.d()));
            }
        }
        if command == CommandKind::Density && self.x.is_empty() {
            v.push("density needs at least one covariate row in x".to_string());
        }
        if command == CommandKind::Table && self.data.is_some() {
            v.push("table compares against simulation truths; it cannot use data".to_string());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolved(command: CommandKind, flags: Flags) -> ExperimentConfig {
        ExperimentConfig::resolve(command, &flags).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        assert!(resolved(CommandKind::Table, Flags::default()).violations().is_empty());
    }

    #[test]
    fn odd_batch_cites_b_even() {
        let cfg = resolved(CommandKind::Train, Flags { batch: Some(255), ..Default::default() });
        assert!(cfg.violations().iter().any(|v| v.contains("B even")));
    }

    #[test]
    fn unknown_model_is_a_violation() {
        let cfg = resolved(CommandKind::Table, Flags { model: Some("M9".into()), ..Default::default() });
        assert!(cfg.violations().iter().any(|v| v.contains("unknown model")));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 9, "k_test": 7, "iters": 50}"#).unwrap();
        let cfg = resolved(CommandKind::Table, Flags { config: Some(path), seed: Some(3), ..Default::default() });
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.k_test, 7);
        assert_eq!(cfg.train_config().total_iterations, 50);
        assert_eq!(cfg.train_config().seed, 3);
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"sed": 9}"#).unwrap();
        let err = ExperimentConfig::resolve(CommandKind::Table, &Flags { config: Some(path), ..Default::default() }).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = resolved(CommandKind::Density, Flags { model: Some("M4".into()), x: Some(vec![2.0]), ..Default::default() });
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.train_config().batch_size, 1024);
    }

    #[test]
    fn coverage_defaults_to_m2() {
        assert_eq!(resolved(CommandKind::Coverage, Flags::default()).model.as_deref(), Some("M2"));
    }
}
