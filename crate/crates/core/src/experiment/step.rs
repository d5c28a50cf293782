//! One training step split in two: [`plan_step`] draws every random choice
//! (feature dropout, masks, feature splits) up front, and
//! [`evaluate_step`] is a pure function of parameters, batch and plan. The
//! split lets gradient checks replay a step with identical randomness.

use alloc::vec::Vec;

use rand::Rng;

use super::{Method, RunConfig, ViewKind};
use crate::contrastive::{
    augment_rfm, contrastive_loss_grad, detect_duplicates, feature_dropout, make_embedding_masks,
    AugmentedBatch, DuplicationGroups, MaskPair, PairSets,
};
use crate::data::Sample;
use crate::model::{embed_ids, supervised_loss_grad, Gradients, ModelParams, Predictions};
use crate::numkernel::{sigmoid_scalar, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ViewPlan {
    /// No contrastive branch this step.
    None,
    /// One mask pair per original sample.
    Embedding(Vec<MaskPair>),
    /// Flat `2N × F` ids; rows `2m`, `2m+1` are the two views of sample `m`.
    Features(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    /// Flat `N × F` ids fed to the towers (feature dropout already applied).
    pub supervised_ids: Vec<u32>,
    pub views: ViewPlan,
}

/// Losses of one step: `total = pred + α·cl`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub pred: f64,
    pub cl: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub losses: LossReport,
    pub grads: Gradients,
}

/// Draws the step's randomness from `mask_rng`. The stream is only touched
/// by methods that need it, and never when `α = 0` or the batch holds a
/// single sample.
pub fn plan_step<R: Rng + ?Sized>(
    batch: &[Sample],
    config: &RunConfig,
    params: &ModelParams,
    mask_rng: &mut R,
) -> Result<StepPlan> {
    let emb = &params.config().embedding;
    let supervised_ids = if config.method == Method::Fd {
        feature_dropout(batch, emb, config.hyper.feature_drop_prob, mask_rng)?
    } else {
        batch.iter().flat_map(|s| s.features().iter().copied()).collect()
    };
    let views = if config.contrastive_active() && batch.len() >= 2 {
        match config.method.views() {
            Some(ViewKind::EmbeddingMask) => ViewPlan::Embedding(
                (0..batch.len())
                    .map(|_| {
                        make_embedding_masks(
                            emb.field_count(),
                            emb.dim_per_field,
                            config.hyper.keep_ratio,
                            config.hyper.mask_mode,
                            mask_rng,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
            Some(ViewKind::FeatureMask) => {
                let mut ids = Vec::with_capacity(2 * batch.len() * emb.field_count());
                for s in batch {
                    let (a, b) = augment_rfm(s.features(), emb, mask_rng)?;
                    ids.extend(a);
                    ids.extend(b);
                }
                ViewPlan::Features(ids)
            }
            None => ViewPlan::None,
        }
    } else {
        ViewPlan::None
    };
    Ok(StepPlan { supervised_ids, views })
}

fn scatter_rows(grads: &mut Gradients, ids: &[u32], grad_rows: &Matrix, field_count: usize, k: usize, scale: f64) {
    for r in 0..grad_rows.rows() {
        let row = grad_rows.row(r);
        for field in 0..field_count {
            let id = ids[r * field_count + field];
            grads.add_embedding_row(field, id, &row[field * k..(field + 1) * k], scale);
        }
    }
}

/// Losses and gradients of `L = L_pred + α·L_cl` for one planned step.
pub fn evaluate_step(params: &ModelParams, batch: &[Sample], plan: &StepPlan, config: &RunConfig) -> Result<StepOutput> {
    let emb = &params.config().embedding;
    let (f, k) = (emb.field_count(), emb.dim_per_field);
    let alpha = config.hyper.alpha;
    let y: Vec<u8> = batch.iter().map(Sample::click).collect();
    let z: Vec<u8> = batch.iter().map(Sample::conversion).collect();

    let e = embed_ids(&plan.supervised_ids, params)?;
    if e.rows() != batch.len() {
        return Err(Error::dim("evaluate_step", e.shape(), (batch.len(), f * k)));
    }
    let (ctr_logits, ctr_trace) = params.ctr_tower.forward_traced(&e)?;
    let (cvr_logits, cvr_trace) = params.cvr_tower.forward_traced(&e)?;
    let pred = Predictions {
        y_hat: ctr_logits.as_slice().iter().map(|&a| sigmoid_scalar(a)).collect(),
        z_hat: cvr_logits.as_slice().iter().map(|&c| sigmoid_scalar(c)).collect(),
    };
    let sup = supervised_loss_grad(&pred, &y, &z)?;

    let mut grads = Gradients::zeros(params);
    let (ctr_grads, mut grad_e) = params
        .ctr_tower
        .backward(&ctr_trace, &Matrix::from_vec(batch.len(), 1, sup.ctr_logit)?)?;
    let (cvr_grads, grad_e_cvr) = params
        .cvr_tower
        .backward(&cvr_trace, &Matrix::from_vec(batch.len(), 1, sup.cvr_logit)?)?;
    grad_e.add_scaled(&grad_e_cvr, 1.0)?;
    grads.ctr_tower = ctr_grads;
    grads.cvr_tower = cvr_grads;

    let mut cl = 0.0;
    if !matches!(plan.views, ViewPlan::None) {
        let (views, view_ids) = match &plan.views {
            ViewPlan::Embedding(masks) => (AugmentedBatch::embedding_masked(&e, masks, &z)?, None),
            ViewPlan::Features(ids) => (AugmentedBatch::from_views(embed_ids(ids, params)?, &z)?, Some(ids)),
            ViewPlan::None => unreachable!(),
        };
        let sets = match config.method.set_rules() {
            Some(rules) => {
                let groups = if rules.fne {
                    detect_duplicates(batch)
                } else {
                    DuplicationGroups::singletons(batch.len())
                };
                PairSets::build(rules, &groups, &views.origin, &views.labels_z)?
            }
            None => PairSets::traditional(views.len()),
        };
        let (h, enc_trace) = params.encoder.forward_traced(&views.views)?;
        let cg = contrastive_loss_grad(&h, &sets, config.hyper.tau)?;
        cl = cg.loss;
        let (mut enc_grads, grad_views) = params.encoder.backward(&enc_trace, &cg.representations)?;
        for l in &mut enc_grads.layers {
            l.weight.scale(alpha);
            l.bias.iter_mut().for_each(|b| *b *= alpha);
        }
        grads.encoder = enc_grads;
        match (&plan.views, view_ids) {
            (ViewPlan::Embedding(masks), _) => {
                for (m, pair) in masks.iter().enumerate() {
                    let ga = grad_views.row(2 * m);
                    let gb = grad_views.row(2 * m + 1);
                    let out = grad_e.row_mut(m);
                    for d in 0..out.len() {
                        if pair.mask_a[d] {
                            out[d] += alpha * ga[d];
                        }
                        if pair.mask_b[d] {
                            out[d] += alpha * gb[d];
                        }
                    }
                }
            }
            (ViewPlan::Features(_), Some(ids)) => scatter_rows(&mut grads, ids, &grad_views, f, k, alpha),
            _ => unreachable!(),
        }
    }
    scatter_rows(&mut grads, &plan.supervised_ids, &grad_e, f, k, 1.0);

    Ok(StepOutput {
        losses: LossReport {
            pred: sup.loss,
            cl,
            total: sup.loss + alpha * cl,
        },
        grads,
    })
}
