//! Training loop, evaluation and gradient checking.

mod auc;
mod config;
mod gradcheck;
mod step;
mod train;

pub use auc::{auc, cvr_auc, ctcvr_auc, pairwise_auc};
pub use config::{Hyperparams, Method, RunConfig, RunSeeds, ViewKind};
pub use gradcheck::{fixture_batch, gradcheck, gradcheck_params, GradcheckReport, GRADCHECK_MAX_BATCH, GRADCHECK_MAX_WIDTH};
pub use step::{evaluate_step, plan_step, LossReport, StepOutput, StepPlan, ViewPlan};
pub use train::{
    evaluate, predict, train, Clock, EpochMetrics, EvalMetrics, NoClock, TrainOutcome, EVAL_CHUNK,
};
