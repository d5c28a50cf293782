//! Command-line interface.
//!
//! Every subcommand reads an experiment config, applies flag overrides,
//! and writes the resolved config next to its outputs. The master `--seed`
//! feeds each named random stream through `splitmix64(seed ^ fnv1a64(name))`
//! (streams `init`, `shuffle`, `mask`, `data`). Synthetic data has its own
//! seed under `data.seed`, so runs with different master seeds see the same
//! dataset.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cl4cvr_core::experiment::{evaluate, fixture_batch, gradcheck, gradcheck_params, Method, RunConfig, TrainOutcome};

use crate::config::{load_dataset, parse_override, DataSource, ExperimentConfig};
use crate::output::{self, load_checkpoint, persist_run, run_dir_name, CONFIG_FILE};
use crate::runner::{run_ablation, run_all, sweep, SweepParam};
use crate::schema::{save_csv, DatasetSchema};

/// Largest per-group relative error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "cl4cvr", version, about = "Contrastive-learning CVR prediction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV files plus a schema.
    Generate(Common),
    /// Train one model.
    Train(Common),
    /// Evaluate a checkpoint on the configured data.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split to score: train, val or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Train the ablation rows on every configured seed.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sweep tau or alpha over a grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid; defaults to the config's grid for `param`.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Finite-difference check of the training loss on a small fixture batch.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 30)]
        probes: usize,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Comma-separated master seeds for ablate and sweep.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Any config key, e.g. `run.hyper.batch_size=128`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(m) = self.method {
            out.push(("run.method".into(), format!("\"{m}\"")));
        }
        if let Some(s) = self.seed {
            out.push(("run.seed".into(), s.to_string()));
        }
        if let Some(a) = self.alpha {
            out.push(("run.hyper.alpha".into(), format!("{a:?}")));
        }
        if let Some(t) = self.tau {
            out.push(("run.hyper.tau".into(), format!("{t:?}")));
        }
        if let Some(seeds) = &self.seeds {
            let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
            out.push(("experiment.seeds".into(), format!("[{}]", list.join(", "))));
        }
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }

    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides()?)
    }

    /// Creates the output directory and records the resolved config.
    fn prepare_out(&self, cfg: &ExperimentConfig) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(CONFIG_FILE);
        std::fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Parses `args` and runs the subcommand. Usage errors exit with clap's
/// status; failures print one line to stderr and exit 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Generate(common) => generate(&common),
        Command::Train(common) => train_one(&common),
        Command::Eval { common, checkpoint, split } => eval(&common, &checkpoint, &split),
        Command::Ablate { common, jobs } => ablate(&common, jobs),
        Command::Sweep { common, param, grid, jobs } => run_sweep(&common, param, grid, jobs),
        Command::Gradcheck { common, batch, probes, step } => run_gradcheck(&common, batch, probes, step),
    }
}

fn generate(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = common.load()?;
    let DataSource::Synthetic(syn) = &cfg.data else {
        bail!("generate needs data.source = \"synthetic\"");
    };
    common.prepare_out(&cfg)?;
    let data = cl4cvr_core::data::generate_synthetic(syn)?.dataset;
    let schema = DatasetSchema::identity(&data.vocab_sizes);
    schema.save(&common.out.join("schema.toml"))?;
    for (name, split) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
        save_csv(&common.out.join(format!("{name}.csv")), &schema, split)?;
    }
    println!(
        "wrote {} train, {} val, {} test samples to {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        common.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn train_one(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = common.load()?;
    common.prepare_out(&cfg)?;
    let data = load_dataset(&cfg.data)?;
    let out = common.out.clone();
    let results = run_all(std::slice::from_ref(&cfg.run), &data, 1, |rc: &RunConfig, o: &TrainOutcome| {
        persist_run(&out, rc, o)
    })?;
    let s = results.into_iter().next().expect("one run").map_err(anyhow::Error::msg)?;
    println!(
        "{} seed {}: best epoch {} of {}, val CVR AUC {:.6}, test CVR AUC {:.6}, test CTCVR AUC {:.6}",
        cfg.run.method, cfg.run.seed, s.best_epoch, s.epochs_run, s.val.cvr_auc, s.test.cvr_auc, s.test.ctcvr_auc
    );
    Ok(ExitCode::SUCCESS)
}

fn eval(common: &Common, checkpoint: &Path, split: &str) -> anyhow::Result<ExitCode> {
    let cfg = common.load()?;
    let data = load_dataset(&cfg.data)?;
    let ck = load_checkpoint(checkpoint)?;
    let vocab = &ck.params.config().embedding.vocab_sizes;
    anyhow::ensure!(
        *vocab == data.vocab_sizes,
        "checkpoint vocabularies {vocab:?} do not match the data's {:?}",
        data.vocab_sizes
    );
    let samples = match split {
        "train" => &data.train,
        "val" => &data.val,
        "test" => &data.test,
        other => bail!("unknown split {other:?} (expected train, val or test)"),
    };
    let m = evaluate(&ck.params, samples)?;
    println!("split,cvr_auc,ctcvr_auc");
    println!("{split},{},{}", m.cvr_auc, m.ctcvr_auc);
    Ok(ExitCode::SUCCESS)
}

fn persist_into(root: &Path) -> impl Fn(&RunConfig, &TrainOutcome) -> anyhow::Result<()> + Sync + '_ {
    move |rc, o| persist_run(&root.join("runs").join(run_dir_name(rc)), rc, o)
}

fn ablate(common: &Common, jobs: usize) -> anyhow::Result<ExitCode> {
    let cfg = common.load()?;
    common.prepare_out(&cfg)?;
    let data = load_dataset(&cfg.data)?;
    let table = run_ablation(&cfg.run, &cfg.experiment.seeds, &data, jobs, persist_into(&common.out))?;
    let path = common.out.join("ablation.csv");
    output::write_ablation(std::fs::File::create(&path)?, &table)?;
    for row in &table.rows {
        let fmt = |v: Option<f64>| v.map_or("failed".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:<12} mean test CVR AUC {}  gain {}",
            row.label,
            fmt(row.runs.mean_test_cvr_auc()),
            fmt(table.gain_vs_base(row.method))
        );
    }
    println!("wrote {}", path.display());
    Ok(if table.rows.iter().all(|r| r.runs.errors().is_empty()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run_sweep(common: &Common, param: SweepParam, grid: Option<Vec<f64>>, jobs: usize) -> anyhow::Result<ExitCode> {
    let mut cfg = common.load()?;
    if let Some(g) = grid {
        match param {
            SweepParam::Tau => cfg.experiment.tau_grid = g,
            SweepParam::Alpha => cfg.experiment.alpha_grid = g,
        }
    }
    common.prepare_out(&cfg)?;
    let grid = match param {
        SweepParam::Tau => &cfg.experiment.tau_grid,
        SweepParam::Alpha => &cfg.experiment.alpha_grid,
    };
    let data = load_dataset(&cfg.data)?;
    let curve = sweep(param, grid, &cfg.run, &cfg.experiment.seeds, &data, jobs, persist_into(&common.out))?;
    let path = common.out.join(format!("sweep_{param}.csv"));
    output::write_sweep(std::fs::File::create(&path)?, &curve)?;
    for p in &curve.points {
        let mean = p.runs.mean_test_cvr_auc().map_or("failed".to_string(), |v| format!("{v:.6}"));
        println!("{param}={:<8} mean test CVR AUC {mean}", p.value);
    }
    println!("wrote {}", path.display());
    Ok(if curve.points.iter().all(|p| p.runs.errors().is_empty()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run_gradcheck(common: &Common, batch: usize, probes: usize, step: f64) -> anyhow::Result<ExitCode> {
    let cfg = common.load()?;
    let vocab = cfg.vocab_sizes()?;
    let seed = cfg.run.seed;
    let samples = fixture_batch(&vocab, batch, seed)?;
    let params = gradcheck_params(&cfg.run, &vocab, seed)?;
    let report = gradcheck(&params, &samples, &cfg.run, probes, step, seed)?;
    println!(
        "method {} alpha {}: L_pred {:.6}, L_cl {:.6}, L {:.6}",
        cfg.run.method, cfg.run.hyper.alpha, report.losses.pred, report.losses.cl, report.losses.total
    );
    let mut ok = true;
    for (group, r) in &report.groups {
        let err = r.max_relative_error();
        let pass = err < GRADCHECK_TOLERANCE;
        ok &= pass;
        println!(
            "{:<10} probes {:>3}  max relative error {err:.3e}  {}",
            group.name(),
            r.probes.len(),
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
