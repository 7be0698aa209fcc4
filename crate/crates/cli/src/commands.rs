//! One function per subcommand.

use gcds::ckde::CkdeFit;
use gcds::dataio::{load_csv, one_hot, to_csv_bytes, DatasetSchema, PairedDataset};
use gcds::eval::{
    run_experiment, simulated_coverage, split_coverage, Ckde, ConditionalMethod, ExperimentSettings, Gcds,
    DEFAULT_TAUS,
};
use gcds::rng::{child_seed, rng_from};
use gcds::sampler::{default_grid, kde_curve, mc_mean_sd, mc_quantiles, sample_conditional, BandwidthRule, DensityCurve};
use gcds::simdata::{generate, true_mean, true_quantile, true_sd, SimModel};
use gcds::trainer::{default_net_specs, tabular_net_specs, GeneratorCheckpoint, NetSpecs, TrainedGenerator, Trainer};
use ndarray::Array2;
use serde::Serialize;

use crate::config::{CommandKind, ExperimentConfig};
use crate::{CliError, OutDir};

/// Seed streams of the runner; disjoint from the library's own streams.
mod stream {
    pub const DATA: u64 = 100;
    pub const TEST_COVARIATES: u64 = 101;
    pub const SAMPLING: u64 = 102;
}

pub fn dispatch(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    match cfg.command() {
        CommandKind::Simulate => simulate(cfg, out),
        CommandKind::Train => train(cfg, out).map(|_| ()),
        CommandKind::Evaluate => evaluate(cfg, out),
        CommandKind::Table => table(cfg, out),
        CommandKind::Density => density(cfg, out),
        CommandKind::Coverage => coverage(cfg, out),
        CommandKind::Validate => Ok(()),
    }
}

/// Training data: the CSV in `data` (categoricals one-hot encoded) or a
/// fresh simulated sample.
fn training_data(cfg: &ExperimentConfig) -> Result<(PairedDataset, Option<SimModel>), CliError> {
    match (&cfg.data, &cfg.schema) {
        (Some(data), Some(schema)) => {
            let schema = DatasetSchema::load(schema)?;
            let ds = load_csv(data, &schema)?;
            let ds = if ds.has_categorical() { one_hot(&ds)? } else { ds };
            Ok((ds, None))
        }
        _ => {
            let sim = cfg.sim_model()?;
            let ds = generate(&sim, cfg.n_train, child_seed(cfg.seed, stream::DATA))?;
            Ok((ds, Some(sim)))
        }
    }
}

/// Reference widths for simulated models, tabular widths otherwise; the noise
/// dimension always comes from the training config.
fn net_specs(cfg: &ExperimentConfig, d: usize, q: usize, sim: Option<&SimModel>) -> Result<NetSpecs, CliError> {
    let base = match sim {
        Some(s) => default_net_specs(s.id)?,
        None => tabular_net_specs(d, q)?,
    };
    Ok(NetSpecs::from_widths(
        d,
        q,
        cfg.train_config().noise_dim,
        base.generator.hidden_widths,
        base.discriminator.hidden_widths,
    )?)
}

fn method(cfg: &ExperimentConfig, name: &str, d: usize, q: usize, sim: Option<&SimModel>) -> Result<Box<dyn ConditionalMethod>, CliError> {
    match name {
        "gcds" => Ok(Box::new(Gcds { config: cfg.train_config(), specs: net_specs(cfg, d, q, sim)?, draws: cfg.j_draws })),
        "ckde" => Ok(Box::new(Ckde)),
        other => Err(CliError::config(format!("unknown method `{other}`"))),
    }
}

fn simulate(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    let (ds, _) = training_data(cfg)?;
    out.write("data.csv", &to_csv_bytes(&ds)?)?;
    let mut schema = ds.schema().to_json()?;
    schema.push('\n');
    out.write("schema.json", schema.as_bytes())
}

/// Trains on the configured data and writes `checkpoint.json` and
/// `history.csv`.
fn train(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(TrainedGenerator, PairedDataset, Option<SimModel>), CliError> {
    let (ds, sim) = training_data(cfg)?;
    let specs = net_specs(cfg, ds.d(), ds.q(), sim.as_ref())?;
    let tc = cfg.train_config();
    let (gen, history) = Trainer::new(&ds, &specs.generator, &specs.discriminator, &tc)?.run()?;
    let mut ckpt = gen.checkpoint(tc.seed, tc.total_iterations as u64).to_json()?;
    ckpt.push('\n');
    out.write("checkpoint.json", ckpt.as_bytes())?;
    out.write("history.csv", &history.to_csv_bytes()?)?;
    Ok((gen, ds, sim))
}

/// A generator from `checkpoint`, or a freshly trained one.
fn generator(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(TrainedGenerator, PairedDataset, Option<SimModel>), CliError> {
    match &cfg.checkpoint {
        Some(path) => {
            let gen = GeneratorCheckpoint::load(path)?.restore()?;
            let (ds, sim) = training_data(cfg)?;
            Ok((gen, ds, sim))
        }
        None => train(cfg, out),
    }
}

/// Rows of `x`, or `k_test` draws from the model when `x` is empty.
fn covariate_rows(cfg: &ExperimentConfig, d: usize, sim: Option<&SimModel>) -> Result<Array2<f64>, CliError> {
    if !cfg.x.is_empty() {
        if !cfg.x.len().is_multiple_of(d) {
            return Err(CliError::config(format!("x has {} values, not a multiple of d = {d}", cfg.x.len())));
        }
        return Ok(Array2::from_shape_vec((cfg.x.len() / d, d), cfg.x.clone()).expect("length checked"));
    }
    match sim {
        Some(s) => Ok(s.draw_covariates(cfg.k_test, &mut rng_from(child_seed(cfg.seed, stream::TEST_COVARIATES)))),
        None => Err(CliError::config("x is required when training on a dataset")),
    }
}

fn evaluate(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    let taus = if cfg.tau.is_empty() { DEFAULT_TAUS.to_vec() } else { cfg.tau.clone() };
    let needs_gen = cfg.has_method("gcds");
    let (gen, ds, sim) = if needs_gen {
        let (g, ds, sim) = generator(cfg, out)?;
        (Some(g), ds, sim)
    } else {
        let (ds, sim) = training_data(cfg)?;
        (None, ds, sim)
    };
    let xs = covariate_rows(cfg, ds.d(), sim.as_ref())?;
    let ckde = if cfg.has_method("ckde") { Some(CkdeFit::fit(&ds)?) } else { None };
    let mut header: Vec<String> = vec!["method".into()];
    header.extend((1..=ds.d()).map(|j| format!("x{j}")));
    header.extend(["mean".into(), "sd".into()]);
    header.extend(taus.iter().map(|t| format!("q{t}")));
    if sim.is_some() {
        header.extend(["true_mean".into(), "true_sd".into()]);
        header.extend(taus.iter().map(|t| format!("true_q{t}")));
    }
    let mut rows = Vec::new();
    let sampling = child_seed(cfg.seed, stream::SAMPLING);
    for (i, row) in xs.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let truth = match &sim {
            Some(s) => {
                let mut t = vec![true_mean(s, &x)?, true_sd(s, &x)?];
                for tau in &taus {
                    t.push(true_quantile(s, &x, *tau)?);
                }
                t
            }
            None => Vec::new(),
        };
        let mut push = |method: &str, est: Vec<f64>| {
            let mut r = vec![method.to_string()];
            r.extend(x.iter().chain(&est).chain(&truth).map(|v| v.to_string()));
            rows.push(r);
        };
        if let Some(g) = &gen {
            let s = sample_conditional(g, &x, cfg.j_draws, child_seed(sampling, i as u64))?;
            let (m, sd) = mc_mean_sd(&s)?;
            let mut est = vec![m[0], sd[0]];
            est.extend(mc_quantiles(&s, &taus)?);
            push("gcds", est);
        }
        if let Some(fit) = &ckde {
            let g = fit.density_on_grid(&x, &fit.default_grid()?)?;
            let m = g.moments();
            let mut est = vec![m.mean, m.sd];
            est.extend(g.quantiles(&taus)?);
            push("ckde", est);
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write("estimates.csv", &gcds::io::csv_bytes(&header_refs, rows)?)
}

fn table(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    let sim = cfg.sim_model()?;
    let boxed = cfg
        .methods
        .iter()
        .map(|m| method(cfg, m, sim.d(), sim.q(), Some(&sim)))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn ConditionalMethod> = boxed.iter().map(|m| m.as_ref()).collect();
    let settings = ExperimentSettings {
        n_train: cfg.n_train,
        k_test: cfg.k_test,
        n_reps: cfg.reps,
        taus: cfg.tau.clone(),
        seed: cfg.seed,
        work_budget: cfg.work_budget,
    };
    let table = run_experiment(&sim, &refs, &settings)?;
    out.write("metrics.csv", &table.to_csv_bytes()?)?;
    out.write_json("metrics.json", &table)?;
    if let Some(f) = table.failures.iter().find(|f| f.diverged) {
        return Err(CliError { kind: crate::ErrorKind::Diverged, message: format!("partial table written; {}", f.error) });
    }
    if let Some(f) = table.failures.first() {
        return Err(CliError { kind: crate::ErrorKind::Runtime, message: format!("partial table written; {}", f.error) });
    }
    Ok(())
}

fn density(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    let (gen, ds, sim) = if cfg.has_method("gcds") {
        let (g, ds, sim) = generator(cfg, out)?;
        (Some(g), ds, sim)
    } else {
        let (ds, sim) = training_data(cfg)?;
        (None, ds, sim)
    };
    if ds.q() != 1 {
        return Err(CliError::config("density curves need a scalar response"));
    }
    let xs = covariate_rows(cfg, ds.d(), sim.as_ref())?;
    let ckde = if cfg.has_method("ckde") { Some(CkdeFit::fit(&ds)?) } else { None };
    let sampling = child_seed(cfg.seed, stream::SAMPLING);
    for (i, row) in xs.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let mut grid = None;
        if let Some(g) = &gen {
            let s = sample_conditional(g, &x, cfg.j_draws, child_seed(sampling, i as u64))?;
            let nodes = default_grid(&s, BandwidthRule::Silverman, cfg.density_points)?;
            let curve = kde_curve(&s, &nodes, BandwidthRule::Silverman)?;
            out.write(&format!("density_gcds_{i}.csv"), &curve.to_csv_bytes()?)?;
            grid = Some(nodes);
        }
        if let Some(fit) = &ckde {
            let nodes = match grid {
                Some(n) => n,
                None => fit.default_grid()?.nodes(),
            };
            let values = nodes.iter().map(|y| fit.cond_density(&x, &[*y])).collect::<Result<Vec<_>, _>>()?;
            let curve = DensityCurve { grid: nodes, values, bandwidth: fit.hy[0] };
            out.write(&format!("density_ckde_{i}.csv"), &curve.to_csv_bytes()?)?;
        }
    }
    let header: Vec<String> = std::iter::once("index".to_string()).chain((1..=ds.d()).map(|j| format!("x{j}"))).collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = xs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| std::iter::once(i.to_string()).chain(r.iter().map(|v| v.to_string())).collect::<Vec<_>>());
    out.write("density_points.csv", &gcds::io::csv_bytes(&header_refs, rows)?)
}

#[derive(Serialize)]
struct CoverageSummary {
    method: String,
    level: f64,
    coverage: f64,
    n_train: usize,
    n_test: usize,
    source: String,
}

fn coverage(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<(), CliError> {
    let mut summary = Vec::new();
    let (data, sim) = match (&cfg.data, &cfg.schema) {
        (Some(_), Some(_)) => (Some(training_data(cfg)?.0), None),
        _ => (None, Some(cfg.sim_model()?)),
    };
    for name in &cfg.methods {
        let (report, source) = match (&data, &sim) {
            (Some(ds), _) => {
                let m = method(cfg, name, ds.d(), ds.q(), None)?;
                (split_coverage(m.as_ref(), ds, cfg.train_fraction, cfg.level, cfg.seed)?, ds.provenance.clone())
            }
            (None, Some(s)) => {
                let m = method(cfg, name, s.d(), s.q(), Some(s))?;
                (simulated_coverage(m.as_ref(), s, cfg.n_train, cfg.n_test, cfg.level, cfg.seed)?, format!("simulated {}", s.id))
            }
            (None, None) => unreachable!("one source is always set"),
        };
        out.write(&format!("coverage_{name}.csv"), &report.to_csv_bytes()?)?;
        summary.push(CoverageSummary {
            method: name.clone(),
            level: report.level,
            coverage: report.coverage,
            n_train: report.n_train,
            n_test: report.n_test,
            source,
        });
    }
    out.write_json("coverage.json", &summary)
}
