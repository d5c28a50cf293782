use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;

use super::{evaluate_step, plan_step, LossReport, RunConfig, StepPlan, ViewPlan};
use crate::data::Sample;
use crate::model::{ModelParams, ParamGroup};
use crate::numkernel::{finite_difference_check, FdReport};
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

pub const GRADCHECK_MAX_WIDTH: usize = 16;
pub const GRADCHECK_MAX_BATCH: usize = 8;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub losses: LossReport,
    pub groups: Vec<(ParamGroup, FdReport)>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|(_, r)| r.max_relative_error())
            .fold(0.0, f64::max)
    }

    pub fn group(&self, group: ParamGroup) -> Option<&FdReport> {
        self.groups.iter().find(|(g, _)| *g == group).map(|(_, r)| r)
    }
}

/// A small batch that exercises every set rule: samples 0 and 1 share
/// features (with different conversion labels), and samples 0 and 2 both
/// converted.
pub fn fixture_batch(vocab_sizes: &[u32], n: usize, seed: u64) -> Result<Vec<Sample>> {
    if !(4..=GRADCHECK_MAX_BATCH).contains(&n) {
        return Err(Error::Config(alloc::format!(
            "fixture batch size must lie in 4..={GRADCHECK_MAX_BATCH}"
        )));
    }
    let mut r = rng::stream(seed, "gradcheck-fixture");
    let draw = |r: &mut StreamRng| -> Vec<u32> { vocab_sizes.iter().map(|&v| r.gen_range(0..v)).collect() };
    let first = draw(&mut r);
    let mut out = Vec::with_capacity(n);
    out.push(Sample::new(first.clone(), 1, 1)?);
    out.push(Sample::new(first, 1, 0)?);
    out.push(Sample::new(draw(&mut r), 1, 1)?);
    out.push(Sample::new(draw(&mut r), 0, 0)?);
    while out.len() < n {
        let y = u8::from(r.gen_bool(0.5));
        let z = y & u8::from(r.gen_bool(0.5));
        out.push(Sample::new(draw(&mut r), y, z)?);
    }
    Ok(out)
}

/// Parameters for gradient checking: the usual initialization, with
/// embeddings widened to ±0.5 and biases drawn from ±0.1. Zero biases put
/// pre-activations of dead units exactly on the ReLU kink, where a central
/// difference is meaningless.
pub fn gradcheck_params(config: &RunConfig, vocab_sizes: &[u32], seed: u64) -> Result<ModelParams> {
    let mut r = rng::stream(seed, rng::INIT_STREAM);
    let mut params = ModelParams::init(config.model_config(vocab_sizes)?, &mut r)?;
    for m in &mut params.embeddings {
        for v in m.as_mut_slice() {
            *v = r.gen_range(-0.5..0.5);
        }
    }
    for mlp in [&mut params.ctr_tower, &mut params.cvr_tower, &mut params.encoder] {
        for l in &mut mlp.layers {
            l.bias.iter_mut().for_each(|b| *b = r.gen_range(-0.1..0.1));
        }
    }
    Ok(params)
}

fn touched_embedding_entries(params: &ModelParams, plan: &StepPlan) -> Vec<usize> {
    let emb = &params.config().embedding;
    let (f, k) = (emb.field_count(), emb.dim_per_field);
    let mut rows = BTreeSet::new();
    let mut add = |ids: &[u32]| {
        for (i, &id) in ids.iter().enumerate() {
            rows.insert((i % f, id));
        }
    };
    add(&plan.supervised_ids);
    if let ViewPlan::Features(ids) = &plan.views {
        add(ids);
    }
    rows.into_iter()
        .flat_map(|(field, id)| (0..k).map(move |d| (field, id, d)))
        .map(|(field, id, d)| params.embedding_offset(field, id, d))
        .collect()
}

/// Central-difference check of the full training loss against the
/// hand-written backward pass, per parameter group. Randomness is drawn once
/// and replayed for every evaluation.
pub fn gradcheck(
    params: &ModelParams,
    batch: &[Sample],
    config: &RunConfig,
    probe_count: usize,
    h: f64,
    seed: u64,
) -> Result<GradcheckReport> {
    config.validate()?;
    let mc = params.config();
    if batch.len() > GRADCHECK_MAX_BATCH
        || mc.tower_widths.iter().chain(&mc.encoder_widths).any(|&w| w > GRADCHECK_MAX_WIDTH)
    {
        return Err(Error::Config(alloc::format!(
            "gradcheck needs widths ≤ {GRADCHECK_MAX_WIDTH} and at most {GRADCHECK_MAX_BATCH} samples"
        )));
    }
    let mut mask_rng = StreamRng::seed_from_u64(rng::stream_seed(seed, rng::MASK_STREAM));
    let plan = plan_step(batch, config, params, &mut mask_rng)?;
    let out = evaluate_step(params, batch, &plan, config)?;
    let mut probe_rng = rng::stream(seed, "gradcheck-probes");

    let mut groups = Vec::with_capacity(ParamGroup::ALL.len());
    for group in ParamGroup::ALL {
        let theta = params.flat_group(group);
        let analytic = out.grads.flat_group(group, params);
        let candidates: Vec<usize> = match group {
            ParamGroup::Embedding => touched_embedding_entries(params, &plan),
            _ => (0..theta.len()).collect(),
        };
        let mut scratch = params.clone();
        let loss_fn = |t: &[f64]| -> f64 {
            scratch.set_flat_group(group, t).expect("same length");
            evaluate_step(&scratch, batch, &plan, config).map_or(f64::NAN, |o| o.losses.total)
        };
        let report = finite_difference_check(loss_fn, &theta, &analytic, &candidates, probe_count, h, &mut probe_rng)?;
        groups.push((group, report));
    }
    Ok(GradcheckReport {
        losses: out.losses,
        groups,
    })
}
