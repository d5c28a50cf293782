use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{cvr_auc, ctcvr_auc, evaluate_step, plan_step, LossReport, RunConfig};
use crate::data::{batch_iter, Dataset, Sample};
use crate::model::{embed, predict_embedded, ModelParams, Predictions};
use crate::rng::StreamRng;
use crate::{Error, Result};

use rand::SeedableRng;

/// Rows per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 4096;

/// Wall-clock source; the core crate has none of its own.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// Reports zero elapsed time.
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// CVR AUC over clicked samples.
    pub cvr_auc: f64,
    /// pCTCVR AUC over all impressions.
    pub ctcvr_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-step losses over the epoch.
    pub train_pred_loss: f64,
    pub train_cl_loss: f64,
    pub train_loss: f64,
    pub val: EvalMetrics,
    pub test: EvalMetrics,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub accumulators: ModelParams,
    pub history: Vec<EpochMetrics>,
    /// Index into `history` of the returned checkpoint.
    pub best_epoch: usize,
    pub steps: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochMetrics {
        &self.history[self.best_epoch]
    }
}

pub fn predict(params: &ModelParams, samples: &[Sample]) -> Result<Predictions> {
    let mut out = Predictions {
        y_hat: Vec::with_capacity(samples.len()),
        z_hat: Vec::with_capacity(samples.len()),
    };
    for chunk in samples.chunks(EVAL_CHUNK) {
        let e = embed(chunk, params)?;
        let p = predict_embedded(&e, params)?;
        out.y_hat.extend(p.y_hat);
        out.z_hat.extend(p.z_hat);
    }
    Ok(out)
}

pub fn evaluate(params: &ModelParams, samples: &[Sample]) -> Result<EvalMetrics> {
    let pred = predict(params, samples)?;
    Ok(EvalMetrics {
        cvr_auc: cvr_auc(&pred, samples)?,
        ctcvr_auc: ctcvr_auc(&pred, samples)?,
    })
}

fn check_finite(step: usize, losses: &LossReport) -> Result<()> {
    for (term, v) in [("L_pred", losses.pred), ("L_cl", losses.cl), ("L", losses.total)] {
        if !v.is_finite() {
            return Err(Error::Divergence { step, term });
        }
    }
    Ok(())
}

/// Trains with Adagrad, evaluating after every epoch and stopping once the
/// validation CVR AUC has not improved for `patience` epochs. Returns the
/// parameters of the best validation epoch.
pub fn train(config: &RunConfig, data: &Dataset, clock: &dyn Clock) -> Result<TrainOutcome> {
    config.validate()?;
    data.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let seeds = config.seeds();
    let h = &config.hyper;
    let model_cfg = config.model_config(&data.vocab_sizes)?;
    let mut params = ModelParams::init(model_cfg, &mut StreamRng::seed_from_u64(seeds.init))?;
    let mut accumulators = params.zeros_like();
    let mut mask_rng = StreamRng::seed_from_u64(seeds.mask);

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ModelParams, ModelParams)> = None;
    let mut step = 0;
    let mut batch = Vec::with_capacity(h.batch_size);
    for epoch in 0..h.epochs {
        let batches = batch_iter(data.train.len(), h.batch_size, seeds.shuffle, epoch as u64)?;
        let mut sums = LossReport::default();
        let mut count = 0usize;
        for idx in batches.iter() {
            batch.clear();
            batch.extend(idx.iter().map(|&i| data.train[i].clone()));
            let plan = plan_step(&batch, config, &params, &mut mask_rng)?;
            let out = evaluate_step(&params, &batch, &plan, config)?;
            check_finite(step, &out.losses)?;
            if !out.grads.is_finite() {
                return Err(Error::Divergence { step, term: "gradient" });
            }
            params.apply_adagrad(&out.grads, &mut accumulators, h.learning_rate, h.epsilon)?;
            sums.pred += out.losses.pred;
            sums.cl += out.losses.cl;
            sums.total += out.losses.total;
            count += 1;
            step += 1;
        }
        let val = evaluate(&params, &data.val)?;
        let test = evaluate(&params, &data.test)?;
        let n = count.max(1) as f64;
        history.push(EpochMetrics {
            epoch,
            train_pred_loss: sums.pred / n,
            train_cl_loss: sums.cl / n,
            train_loss: sums.total / n,
            val,
            test,
            wall_clock_secs: clock.elapsed_secs(),
        });
        let improved = best.as_ref().map_or(true, |b| val.cvr_auc > b.1);
        if improved {
            best = Some((epoch, val.cvr_auc, params.clone(), accumulators.clone()));
        } else if epoch - best.as_ref().map_or(0, |b| b.0) >= h.patience {
            break;
        }
    }
    let (best_epoch, _, params, accumulators) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        accumulators,
        history,
        best_epoch,
        steps: step,
    })
}
