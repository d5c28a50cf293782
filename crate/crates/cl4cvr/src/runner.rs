//! Multi-run experiments: ablation tables and one-parameter sweeps.
//!
//! Runs share only the immutable dataset, so they execute on a bounded
//! thread pool. Each run owns its RNG streams, which makes the results
//! independent of the job count and of completion order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, ensure};
use cl4cvr_core::data::Dataset;
use cl4cvr_core::experiment::{train, Clock, EvalMetrics, Method, RunConfig, TrainOutcome};
use rayon::prelude::*;

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Best-validation metrics of one finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val: EvalMetrics,
    pub test: EvalMetrics,
}

impl RunSummary {
    pub fn of(outcome: &TrainOutcome) -> Self {
        let best = outcome.best();
        RunSummary {
            best_epoch: best.epoch,
            epochs_run: outcome.history.len(),
            val: best.val,
            test: best.test,
        }
    }
}

pub type RunResult = Result<RunSummary, String>;

/// Trains every config on at most `jobs` threads. `on_done` sees each
/// finished run before its parameters are dropped; its error fails that run
/// only. Results come back in input order.
pub fn run_all<F>(configs: &[RunConfig], data: &Dataset, jobs: usize, on_done: F) -> anyhow::Result<Vec<RunResult>>
where
    F: Fn(&RunConfig, &TrainOutcome) -> anyhow::Result<()> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let outcome = train(cfg, data, &WallClock::start()).map_err(|e| e.to_string())?;
                on_done(cfg, &outcome).map_err(|e| format!("{e:#}"))?;
                Ok(RunSummary::of(&outcome))
            })
            .collect()
    }))
}

fn mean_of(results: &[RunResult], pick: impl Fn(&RunSummary) -> f64) -> Option<f64> {
    let vals: Option<Vec<f64>> = results.iter().map(|r| r.as_ref().ok().map(&pick)).collect();
    vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-seed results of one configuration. Means are defined only when
/// every seed succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResults {
    pub seeds: Vec<u64>,
    pub results: Vec<RunResult>,
}

impl SeedResults {
    pub fn mean_test_cvr_auc(&self) -> Option<f64> {
        mean_of(&self.results, |s| s.test.cvr_auc)
    }

    pub fn mean_test_ctcvr_auc(&self) -> Option<f64> {
        mean_of(&self.results, |s| s.test.ctcvr_auc)
    }

    pub fn errors(&self) -> Vec<String> {
        self.seeds
            .iter()
            .zip(&self.results)
            .filter_map(|(s, r)| r.as_ref().err().map(|e| format!("seed {s}: {e}")))
            .collect()
    }
}

/// Rows of the ablation table, Base first.
pub const ABLATION_ROWS: [(Method, &str); 5] = [
    (Method::Base, "Base"),
    (Method::EmOnly, "EM"),
    (Method::EmFne, "EM+FNE"),
    (Method::EmSpi, "EM+SPI"),
    (Method::Cl4cvr, "EM+FNE+SPI"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: Method,
    pub label: &'static str,
    pub runs: SeedResults,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, method: Method) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Mean test CVR AUC of `method` minus that of Base.
    pub fn gain_vs_base(&self, method: Method) -> Option<f64> {
        let base = self.row(Method::Base)?.runs.mean_test_cvr_auc()?;
        Some(self.row(method)?.runs.mean_test_cvr_auc()? - base)
    }
}

fn seeded(base: &RunConfig, seeds: &[u64], edit: impl Fn(&mut RunConfig)) -> Vec<RunConfig> {
    seeds
        .iter()
        .map(|&seed| {
            let mut c = base.clone();
            c.seed = seed;
            edit(&mut c);
            c
        })
        .collect()
}

/// Trains every ablation row on every seed with `base`'s hyperparameters.
/// A failing run is reported in its row and does not stop the others.
pub fn run_ablation<F>(base: &RunConfig, seeds: &[u64], data: &Dataset, jobs: usize, on_done: F) -> anyhow::Result<AblationTable>
where
    F: Fn(&RunConfig, &TrainOutcome) -> anyhow::Result<()> + Sync,
{
    ensure!(seeds.len() >= 2, "an ablation needs at least two seeds, got {}", seeds.len());
    let configs: Vec<RunConfig> = ABLATION_ROWS
        .iter()
        .flat_map(|&(m, _)| seeded(base, seeds, |c| c.method = m))
        .collect();
    let mut results = run_all(&configs, data, jobs, on_done)?.into_iter();
    let rows = ABLATION_ROWS
        .iter()
        .map(|&(method, label)| AblationRow {
            method,
            label,
            runs: SeedResults {
                seeds: seeds.to_vec(),
                results: results.by_ref().take(seeds.len()).collect(),
            },
        })
        .collect();
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Alpha,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Alpha => "alpha",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            SweepParam::Tau => cfg.hyper.tau = value,
            SweepParam::Alpha => cfg.hyper.alpha = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "tau" => Ok(SweepParam::Tau),
            "alpha" => Ok(SweepParam::Alpha),
            _ => bail!("unknown sweep parameter {s:?} (expected tau or alpha)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub runs: SeedResults,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

/// Trains `base` once per grid value and seed. The alpha grid must contain
/// zero so the curve carries its own supervised-only reference point.
pub fn sweep<F>(
    param: SweepParam,
    grid: &[f64],
    base: &RunConfig,
    seeds: &[u64],
    data: &Dataset,
    jobs: usize,
    on_done: F,
) -> anyhow::Result<SweepCurve>
where
    F: Fn(&RunConfig, &TrainOutcome) -> anyhow::Result<()> + Sync,
{
    ensure!(!grid.is_empty(), "sweep grid is empty");
    ensure!(!seeds.is_empty(), "sweep needs at least one seed");
    if param == SweepParam::Alpha {
        ensure!(grid.contains(&0.0), "alpha grid must include 0");
    }
    let configs: Vec<RunConfig> = grid
        .iter()
        .flat_map(|&v| seeded(base, seeds, |c| param.apply(c, v)))
        .collect();
    let mut results = run_all(&configs, data, jobs, on_done)?.into_iter();
    let points = grid
        .iter()
        .map(|&value| SweepPoint {
            value,
            runs: SeedResults {
                seeds: seeds.to_vec(),
                results: results.by_ref().take(seeds.len()).collect(),
            },
        })
        .collect();
    Ok(SweepCurve { param, points })
}
