use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::model::EmbeddingConfig;
use crate::numkernel::Matrix;
use crate::{Error, Result};

/// How the two embedding masks of a pair relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// `mask_a` keeps exactly `round(ρ·F·K)` dimensions, `mask_b = 1 - mask_a`.
    #[default]
    Complementary,
    /// Each mask keeps every dimension independently with probability `ρ`.
    Bernoulli,
}

/// Element-wise keep masks over the `F·K` concatenated embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    pub mask_a: Vec<bool>,
    pub mask_b: Vec<bool>,
}

pub fn make_embedding_masks<R: Rng + ?Sized>(
    field_count: usize,
    dim_per_field: usize,
    keep_ratio: f64,
    mode: MaskMode,
    rng: &mut R,
) -> Result<MaskPair> {
    let len = field_count * dim_per_field;
    if !(keep_ratio > 0.0 && keep_ratio < 1.0) {
        return Err(Error::Config(alloc::format!("keep ratio {keep_ratio} must lie in (0, 1)")));
    }
    if len < 2 {
        return Err(Error::Config("embedding masking needs F·K ≥ 2".into()));
    }
    match mode {
        MaskMode::Complementary => {
            let keep = libm::round(keep_ratio * len as f64) as usize;
            if keep == 0 || keep == len {
                return Err(Error::Config(alloc::format!(
                    "keep ratio {keep_ratio} leaves one view of {len} dimensions empty"
                )));
            }
            let mut mask_a = vec![false; len];
            for d in sample(rng, len, keep) {
                mask_a[d] = true;
            }
            let mask_b = mask_a.iter().map(|&m| !m).collect();
            Ok(MaskPair { mask_a, mask_b })
        }
        MaskMode::Bernoulli => {
            let mask_a = (0..len).map(|_| rng.gen_bool(keep_ratio)).collect();
            let mask_b = (0..len).map(|_| rng.gen_bool(keep_ratio)).collect();
            Ok(MaskPair { mask_a, mask_b })
        }
    }
}

/// The two masked views `e ⊙ mask_a` and `e ⊙ mask_b`.
pub fn augment_em(e: &[f64], masks: &MaskPair) -> Result<(Vec<f64>, Vec<f64>)> {
    if e.len() != masks.mask_a.len() || e.len() != masks.mask_b.len() {
        return Err(Error::dim("augment_em", (1, e.len()), (1, masks.mask_a.len())));
    }
    let apply = |m: &[bool]| e.iter().zip(m).map(|(&v, &k)| if k { v } else { 0.0 }).collect();
    Ok((apply(&masks.mask_a), apply(&masks.mask_b)))
}

/// Random feature masking: splits the fields into two disjoint halves and
/// returns one id vector per view, with the hidden fields replaced by their
/// mask token.
pub fn augment_rfm<R: Rng + ?Sized>(
    features: &[u32],
    config: &EmbeddingConfig,
    rng: &mut R,
) -> Result<(Vec<u32>, Vec<u32>)> {
    let f = config.field_count();
    if f < 2 {
        return Err(Error::Config("random feature masking needs at least two fields".into()));
    }
    if features.len() != f {
        return Err(Error::dim("augment_rfm", (1, features.len()), (1, f)));
    }
    let mut in_a = vec![false; f];
    for field in sample(rng, f, f / 2) {
        in_a[field] = true;
    }
    let view = |keep_when: bool| {
        (0..f)
            .map(|field| {
                if in_a[field] == keep_when {
                    features[field]
                } else {
                    config.mask_token(field)
                }
            })
            .collect()
    };
    Ok((view(true), view(false)))
}

/// Feature dropout for the supervised input: each field of each sample is
/// independently replaced by its mask token with probability `drop_prob`.
/// Returns the flat `N × F` id buffer.
pub fn feature_dropout<R: Rng + ?Sized>(
    samples: &[Sample],
    config: &EmbeddingConfig,
    drop_prob: f64,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if !(0.0..1.0).contains(&drop_prob) {
        return Err(Error::Config(alloc::format!("drop probability {drop_prob} must lie in [0, 1)")));
    }
    let f = config.field_count();
    let mut ids = Vec::with_capacity(samples.len() * f);
    for s in samples {
        if s.features().len() != f {
            return Err(Error::dim("feature_dropout", (1, s.features().len()), (1, f)));
        }
        for (field, &id) in s.features().iter().enumerate() {
            let dropped = drop_prob > 0.0 && rng.gen_bool(drop_prob);
            ids.push(if dropped { config.mask_token(field) } else { id });
        }
    }
    Ok(ids)
}

/// `2N` views with provenance: view `v` comes from original `origin[v]` and
/// carries that original's conversion label.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    pub views: Matrix,
    pub origin: Vec<usize>,
    pub labels_z: Vec<u8>,
}

impl AugmentedBatch {
    /// Wraps already-built views (pairs adjacent) with provenance derived
    /// from the pair layout.
    pub fn from_views(views: Matrix, original_labels_z: &[u8]) -> Result<Self> {
        if views.rows() != 2 * original_labels_z.len() {
            return Err(Error::dim("AugmentedBatch", views.shape(), (2 * original_labels_z.len(), views.cols())));
        }
        let origin: Vec<usize> = (0..views.rows()).map(|v| v / 2).collect();
        let labels_z = origin.iter().map(|&m| original_labels_z[m]).collect();
        Ok(AugmentedBatch {
            views,
            origin,
            labels_z,
        })
    }

    /// Embedding-masked views of each row of `e`, one mask pair per row.
    pub fn embedding_masked(e: &Matrix, masks: &[MaskPair], original_labels_z: &[u8]) -> Result<Self> {
        if masks.len() != e.rows() {
            return Err(Error::dim("embedding_masked", e.shape(), (masks.len(), e.cols())));
        }
        let mut views = Matrix::zeros(2 * e.rows(), e.cols());
        for (m, pair) in masks.iter().enumerate() {
            let (a, b) = augment_em(e.row(m), pair)?;
            views.row_mut(2 * m).copy_from_slice(&a);
            views.row_mut(2 * m + 1).copy_from_slice(&b);
        }
        AugmentedBatch::from_views(views, original_labels_z)
    }

    pub fn len(&self) -> usize {
        self.views.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.views.rows() == 0
    }
}
