//! Files written under an output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cl4cvr_core::experiment::{EpochMetrics, RunConfig, TrainOutcome};
use cl4cvr_core::model::{Checkpoint, CheckpointSeeds};

use crate::runner::{AblationTable, RunSummary, SeedResults, SweepCurve};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn checkpoint_of(cfg: &RunConfig, outcome: &TrainOutcome) -> Checkpoint {
    let s = cfg.seeds();
    Checkpoint {
        params: outcome.params.clone(),
        accumulators: outcome.accumulators.clone(),
        seeds: CheckpointSeeds {
            master: s.master,
            init: s.init,
            shuffle: s.shuffle,
            mask: s.mask,
            data: s.data,
        },
        learning_rate: cfg.hyper.learning_rate,
        epsilon: cfg.hyper.epsilon,
    }
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> anyhow::Result<()> {
    std::fs::write(path, ck.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Checkpoint::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn write_metrics(w: impl Write, seed: u64, history: &[EpochMetrics]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "epoch",
        "seed",
        "train_pred_loss",
        "train_cl_loss",
        "train_loss",
        "val_cvr_auc",
        "val_ctcvr_auc",
        "test_cvr_auc",
        "test_ctcvr_auc",
        "wall_clock_secs",
    ])?;
    for m in history {
        w.write_record([
            m.epoch.to_string(),
            seed.to_string(),
            m.train_pred_loss.to_string(),
            m.train_cl_loss.to_string(),
            m.train_loss.to_string(),
            m.val.cvr_auc.to_string(),
            m.val.ctcvr_auc.to_string(),
            m.test.cvr_auc.to_string(),
            m.test.ctcvr_auc.to_string(),
            m.wall_clock_secs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run_summary(w: impl Write, cfg: &RunConfig, s: &RunSummary) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "method",
        "seed",
        "best_epoch",
        "epochs_run",
        "val_cvr_auc",
        "val_ctcvr_auc",
        "test_cvr_auc",
        "test_ctcvr_auc",
    ])?;
    w.write_record([
        cfg.method.to_string(),
        cfg.seed.to_string(),
        s.best_epoch.to_string(),
        s.epochs_run.to_string(),
        s.val.cvr_auc.to_string(),
        s.val.ctcvr_auc.to_string(),
        s.test.cvr_auc.to_string(),
        s.test.ctcvr_auc.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Directory name of one run inside a multi-run output directory.
pub fn run_dir_name(cfg: &RunConfig) -> String {
    format!("{}_tau{}_alpha{}_seed{}", cfg.method, cfg.hyper.tau, cfg.hyper.alpha, cfg.seed)
}

/// Writes metrics, checkpoint and summary of one run into `dir`.
pub fn persist_run(dir: &Path, cfg: &RunConfig, outcome: &TrainOutcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let file = |name: &str| -> anyhow::Result<std::fs::File> {
        let p: PathBuf = dir.join(name);
        std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
    };
    write_metrics(file(METRICS_FILE)?, cfg.seed, &outcome.history)?;
    write_run_summary(file(SUMMARY_FILE)?, cfg, &RunSummary::of(outcome))?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &checkpoint_of(cfg, outcome))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn seed_cells(runs: &SeedResults) -> impl Iterator<Item = String> + '_ {
    runs.results.iter().map(|r| r.as_ref().map_or_else(|_| String::new(), |s| s.test.cvr_auc.to_string()))
}

pub fn write_ablation(w: impl Write, table: &AblationTable) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let seeds = table.rows.first().map(|r| r.runs.seeds.clone()).unwrap_or_default();
    let mut header = vec![
        "method".to_string(),
        "label".into(),
        "mean_test_cvr_auc".into(),
        "gain_vs_base".into(),
        "mean_test_ctcvr_auc".into(),
    ];
    header.extend(seeds.iter().map(|s| format!("test_cvr_auc_seed{s}")));
    header.push("errors".into());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![
            row.method.to_string(),
            row.label.to_string(),
            fmt_opt(row.runs.mean_test_cvr_auc()),
            fmt_opt(table.gain_vs_base(row.method)),
            fmt_opt(row.runs.mean_test_ctcvr_auc()),
        ];
        rec.extend(seed_cells(&row.runs));
        rec.push(row.runs.errors().join("; "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(w: impl Write, curve: &SweepCurve) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let seeds = curve.points.first().map(|p| p.runs.seeds.clone()).unwrap_or_default();
    let mut header = vec![
        "param".to_string(),
        "value".into(),
        "mean_test_cvr_auc".into(),
        "mean_test_ctcvr_auc".into(),
    ];
    header.extend(seeds.iter().map(|s| format!("test_cvr_auc_seed{s}")));
    header.push("errors".into());
    w.write_record(&header)?;
    for p in &curve.points {
        let mut rec = vec![
            curve.param.to_string(),
            p.value.to_string(),
            fmt_opt(p.runs.mean_test_cvr_auc()),
            fmt_opt(p.runs.mean_test_ctcvr_auc()),
        ];
        rec.extend(seed_cells(&p.runs));
        rec.push(p.runs.errors().join("; "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
