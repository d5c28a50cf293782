//! Planted logistic conversion logs.
//!
//! Each field id carries two hidden weights, one for clicks and one for
//! conversions. For a feature tuple `x`
//!
//! ```text
//! p(y=1 | x)      = σ(logit(base_ctr) + click_signal · Σ_f wc[f][x_f] / √F)
//! p(z=1 | y=1, x) = σ(logit(base_cvr) + conversion_signal · Σ_f wv[f][x_f] / √F)
//! ```
//!
//! with standard-normal weights. Optionally the ids of every field are
//! partitioned into latent segments: a sample picks a segment and draws each
//! field from that segment with probability `segment_affinity`, and a share
//! of each weight's variance comes from its segment's mean. Fields are then
//! correlated and ids of one segment behave alike, as users and items of one
//! audience do in real logs.
//!
//! A fraction of distinct tuples is emitted
//! several times (a duplicate group); every copy redraws its labels, so a
//! group can mix converted and unconverted impressions of identical
//! features.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::numkernel::sigmoid_scalar;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

const MAX_DRAW_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// One entry per field.
    pub vocab_sizes: Vec<u32>,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub base_ctr: f64,
    /// Conversion rate given click when the conversion signal is zero.
    pub base_cvr: f64,
    /// Fraction of distinct feature tuples emitted as a duplicate group.
    pub duplicate_fraction: f64,
    /// Relative weights of duplicate-group sizes 2, 3, 4, ...
    pub duplicate_size_weights: Vec<f64>,
    pub click_signal: f64,
    pub conversion_signal: f64,
    /// Zipf exponent of id popularity within a field; 0 means uniform.
    pub popularity_exponent: f64,
    /// Number of latent segments; 0 draws fields independently.
    pub segments: u32,
    /// Probability that a field is drawn from the sample's segment.
    pub segment_affinity: f64,
    /// Fraction of weight variance shared by the ids of one segment.
    pub segment_weight_share: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_sizes: vec![200, 200, 100, 50, 20, 10],
            train_size: 100_000,
            val_size: 20_000,
            test_size: 100_000,
            base_ctr: 0.3,
            base_cvr: 0.03,
            duplicate_fraction: 0.1,
            duplicate_size_weights: vec![0.5, 0.3, 0.2],
            click_signal: 1.0,
            conversion_signal: 1.5,
            popularity_exponent: 1.0,
            segments: 0,
            segment_affinity: 0.0,
            segment_weight_share: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.into()));
        if self.vocab_sizes.is_empty() || self.vocab_sizes.contains(&0) {
            return cfg("synthetic data needs at least one field and non-empty vocabularies");
        }
        for (name, p) in [("base_ctr", self.base_ctr), ("base_cvr", self.base_cvr)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(alloc::format!("{name}={p} must lie in (0, 1)")));
            }
        }
        if !(0.0..1.0).contains(&self.duplicate_fraction) {
            return cfg("duplicate_fraction must lie in [0, 1)");
        }
        if self.duplicate_fraction > 0.0
            && (self.duplicate_size_weights.is_empty()
                || self.duplicate_size_weights.iter().any(|w| !(*w >= 0.0))
                || self.duplicate_size_weights.iter().sum::<f64>() <= 0.0)
        {
            return cfg("duplicate_size_weights must be non-negative with a positive sum");
        }
        if !(self.popularity_exponent >= 0.0) {
            return cfg("popularity_exponent must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.segment_affinity) || !(0.0..=1.0).contains(&self.segment_weight_share) {
            return cfg("segment_affinity and segment_weight_share must lie in [0, 1]");
        }
        if !self.click_signal.is_finite() || !self.conversion_signal.is_finite() {
            return cfg("signal strengths must be finite");
        }
        Ok(())
    }
}

/// The hidden model that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub click_bias: f64,
    pub conversion_bias: f64,
    pub click_signal: f64,
    pub conversion_signal: f64,
    pub click_weights: Vec<Vec<f64>>,
    pub conversion_weights: Vec<Vec<f64>>,
}

impl PlantedModel {
    fn score(weights: &[Vec<f64>], features: &[u32]) -> f64 {
        let sum: f64 = weights.iter().zip(features).map(|(w, &id)| w[id as usize]).sum();
        sum / libm::sqrt(weights.len() as f64)
    }

    pub fn click_prob(&self, features: &[u32]) -> f64 {
        sigmoid_scalar(self.click_bias + self.click_signal * Self::score(&self.click_weights, features))
    }

    /// `p(z=1 | y=1, x)`.
    pub fn conversion_prob(&self, features: &[u32]) -> f64 {
        sigmoid_scalar(self.conversion_bias + self.conversion_signal * Self::score(&self.conversion_weights, features))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub planted: PlantedModel,
    /// Duplicate-group size of every emitted group (1 for singletons), in
    /// generation order across all splits.
    pub group_sizes: Vec<usize>,
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

struct Generator<'a> {
    config: &'a SyntheticConfig,
    planted: PlantedModel,
    popularity: Vec<Option<Zipf<f64>>>,
    /// Per segment, per field: the segment's ids and a popularity-weighted
    /// sampler over them. `None` when the field has no id in the segment.
    segment_ids: SegmentSamplers,
    sizes: Option<WeightedIndex<f64>>,
    seen: BTreeSet<Vec<u32>>,
    group_sizes: Vec<usize>,
}

impl Generator<'_> {
    fn draw_tuple(&mut self, rng: &mut StreamRng) -> Result<Vec<u32>> {
        for _ in 0..MAX_DRAW_ATTEMPTS {
            let segment = (!self.segment_ids.is_empty()).then(|| rng.gen_range(0..self.segment_ids.len()));
            let affinity = self.config.segment_affinity;
            let mut tuple = Vec::with_capacity(self.config.vocab_sizes.len());
            for (f, (&v, zipf)) in self.config.vocab_sizes.iter().zip(&self.popularity).enumerate() {
                let from_segment = segment
                    .and_then(|s| self.segment_ids[s][f].as_ref())
                    .filter(|_| rng.gen_bool(affinity));
                tuple.push(match (from_segment, zipf) {
                    (Some((ids, w)), _) => ids[w.sample(rng)],
                    (None, Some(z)) => (z.sample(rng) as u32 - 1).min(v - 1),
                    (None, None) => rng.gen_range(0..v),
                });
            }
            if self.seen.insert(tuple.clone()) {
                return Ok(tuple);
            }
        }
        Err(Error::Config(
            "feature space too small for the requested number of distinct tuples".into(),
        ))
    }

    fn split(&mut self, size: usize, rng: &mut StreamRng) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            let tuple = self.draw_tuple(rng)?;
            let mut copies = 1;
            if self.config.duplicate_fraction > 0.0 && rng.gen_bool(self.config.duplicate_fraction) {
                let sizes = self.sizes.as_ref().expect("validated");
                copies = 2 + sizes.sample(rng);
            }
            let copies = copies.min(size - out.len());
            self.group_sizes.push(copies);
            let p_click = self.planted.click_prob(&tuple);
            let p_conv = self.planted.conversion_prob(&tuple);
            for _ in 0..copies {
                let y = rng.gen_bool(p_click);
                let z = y && rng.gen_bool(p_conv);
                out.push(Sample::new(tuple.clone(), u8::from(y), u8::from(z))?);
            }
        }
        out.shuffle(rng);
        Ok(out)
    }
}

type SegmentSamplers = Vec<Vec<Option<(Vec<u32>, WeightedIndex<f64>)>>>;

/// Assigns ids to segments and mixes segment means into the weights.
fn plant_segments(
    config: &SyntheticConfig,
    rng: &mut StreamRng,
    click_weights: &mut [Vec<f64>],
    conversion_weights: &mut [Vec<f64>],
) -> Result<SegmentSamplers> {
    let s = config.segments as usize;
    if s == 0 {
        return Ok(Vec::new());
    }
    let assignment: Vec<Vec<usize>> = config
        .vocab_sizes
        .iter()
        .map(|&v| (0..v).map(|_| rng.gen_range(0..s)).collect())
        .collect();
    let shared = libm::sqrt(config.segment_weight_share);
    let own = libm::sqrt(1.0 - config.segment_weight_share);
    for weights in [click_weights, conversion_weights] {
        let means: Vec<f64> = (0..s).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for (w, a) in weights.iter_mut().zip(&assignment) {
            for (x, &seg) in w.iter_mut().zip(a) {
                *x = shared * means[seg] + own * *x;
            }
        }
    }
    let mut samplers = Vec::with_capacity(s);
    for seg in 0..s {
        let per_field = assignment
            .iter()
            .map(|a| {
                let ids: Vec<u32> = (0..a.len() as u32).filter(|&id| a[id as usize] == seg).collect();
                if ids.is_empty() {
                    return Ok(None);
                }
                let pmf = ids.iter().map(|&id| libm::pow(f64::from(id) + 1.0, -config.popularity_exponent));
                let w = WeightedIndex::new(pmf).map_err(|e| Error::Config(alloc::format!("segment sampler: {e}")))?;
                Ok(Some((ids, w)))
            })
            .collect::<Result<Vec<_>>>()?;
        samplers.push(per_field);
    }
    Ok(samplers)
}

/// Generates train/validation/test splits; output depends only on `config`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, rng::DATA_STREAM);
    let weights = |rng: &mut StreamRng| -> Vec<Vec<f64>> {
        config
            .vocab_sizes
            .iter()
            .map(|&v| (0..v).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    };
    let mut click_weights = weights(&mut rng);
    let mut conversion_weights = weights(&mut rng);
    let segment_ids = plant_segments(config, &mut rng, &mut click_weights, &mut conversion_weights)?;
    let planted = PlantedModel {
        click_bias: logit(config.base_ctr),
        conversion_bias: logit(config.base_cvr),
        click_signal: config.click_signal,
        conversion_signal: config.conversion_signal,
        click_weights,
        conversion_weights,
    };
    let popularity = config
        .vocab_sizes
        .iter()
        .map(|&v| {
            if config.popularity_exponent > 0.0 {
                Zipf::new(u64::from(v), config.popularity_exponent)
                    .map(Some)
                    .map_err(|e| Error::Config(alloc::format!("popularity distribution: {e}")))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes = if config.duplicate_fraction > 0.0 {
        Some(
            WeightedIndex::new(&config.duplicate_size_weights)
                .map_err(|e| Error::Config(alloc::format!("duplicate_size_weights: {e}")))?,
        )
    } else {
        None
    };
    let mut gen = Generator {
        config,
        planted,
        popularity,
        segment_ids,
        sizes,
        seen: BTreeSet::new(),
        group_sizes: Vec::new(),
    };
    let train = gen.split(config.train_size, &mut rng)?;
    let val = gen.split(config.val_size, &mut rng)?;
    let test = gen.split(config.test_size, &mut rng)?;
    Ok(SyntheticDataset {
        dataset: Dataset {
            vocab_sizes: config.vocab_sizes.clone(),
            train,
            val,
            test,
        },
        planted: gen.planted,
        group_sizes: gen.group_sizes,
    })
}
