use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mlp, ModelConfig};
use crate::numkernel::{adagrad_update, Matrix};
use crate::{Error, Result};

/// Half-width of the uniform embedding initializer.
pub const EMBEDDING_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamGroup {
    Embedding,
    CtrTower,
    CvrTower,
    Encoder,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [
        ParamGroup::Embedding,
        ParamGroup::CtrTower,
        ParamGroup::CvrTower,
        ParamGroup::Encoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Embedding => "embedding",
            ParamGroup::CtrTower => "ctr_tower",
            ParamGroup::CvrTower => "cvr_tower",
            ParamGroup::Encoder => "encoder",
        }
    }
}

/// All trainable weights. The same shape doubles as the Adagrad accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    config: ModelConfig,
    /// One `(vocab + 1) × K` table per field; the last row is the mask token.
    pub embeddings: Vec<Matrix>,
    pub ctr_tower: Mlp,
    pub cvr_tower: Mlp,
    pub encoder: Mlp,
}

/// Sparse embedding gradient keyed by `(field, row)`.
pub type EmbeddingGrads = BTreeMap<(usize, u32), Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: EmbeddingGrads,
    pub ctr_tower: Mlp,
    pub cvr_tower: Mlp,
    pub encoder: Mlp,
}

impl ModelParams {
    /// Draws every parameter group from `rng` in a fixed order (embedding,
    /// CTR tower, CVR tower, encoder), whatever the training method.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let k = config.embedding.dim_per_field;
        let embeddings = config
            .embedding
            .vocab_sizes
            .iter()
            .map(|&v| {
                let mut m = Matrix::zeros(v as usize + 1, k);
                for x in m.as_mut_slice() {
                    *x = rng.gen_range(-EMBEDDING_INIT_SCALE..=EMBEDDING_INIT_SCALE);
                }
                m
            })
            .collect();
        let ctr_tower = Mlp::glorot(&config.tower_dims(), rng);
        let cvr_tower = Mlp::glorot(&config.tower_dims(), rng);
        let encoder = Mlp::glorot(&config.encoder_dims(), rng);
        Ok(ModelParams {
            config,
            embeddings,
            ctr_tower,
            cvr_tower,
            encoder,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let k = config.embedding.dim_per_field;
        let embeddings = config
            .embedding
            .vocab_sizes
            .iter()
            .map(|&v| Matrix::zeros(v as usize + 1, k))
            .collect();
        Ok(ModelParams {
            ctr_tower: Mlp::zeros(&config.tower_dims()),
            cvr_tower: Mlp::zeros(&config.tower_dims()),
            encoder: Mlp::zeros(&config.encoder_dims()),
            embeddings,
            config,
        })
    }

    /// Assembles parameters from parts, checking every shape against `config`.
    pub fn from_parts(
        config: ModelConfig,
        embeddings: Vec<Matrix>,
        ctr_tower: Mlp,
        cvr_tower: Mlp,
        encoder: Mlp,
    ) -> Result<Self> {
        let params = ModelParams {
            config,
            embeddings,
            ctr_tower,
            cvr_tower,
            encoder,
        };
        let expected = ModelParams::zeros(params.config.clone())?;
        let shapes_match = params.embeddings.len() == expected.embeddings.len()
            && params
                .embeddings
                .iter()
                .zip(&expected.embeddings)
                .all(|(a, b)| a.shape() == b.shape())
            && same_shape(&params.ctr_tower, &expected.ctr_tower)
            && same_shape(&params.cvr_tower, &expected.cvr_tower)
            && same_shape(&params.encoder, &expected.encoder);
        if !shapes_match {
            return Err(Error::Config("parameter shapes do not match the model configuration".into()));
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.config.clone()).expect("config already validated")
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn mlp(&self, group: ParamGroup) -> &Mlp {
        match group {
            ParamGroup::CtrTower => &self.ctr_tower,
            ParamGroup::CvrTower => &self.cvr_tower,
            ParamGroup::Encoder => &self.encoder,
            ParamGroup::Embedding => unreachable!("embedding is not an MLP"),
        }
    }

    fn mlp_mut(&mut self, group: ParamGroup) -> &mut Mlp {
        match group {
            ParamGroup::CtrTower => &mut self.ctr_tower,
            ParamGroup::CvrTower => &mut self.cvr_tower,
            ParamGroup::Encoder => &mut self.encoder,
            ParamGroup::Embedding => unreachable!("embedding is not an MLP"),
        }
    }

    /// Flat offset of embedding entry `(field, row, k)` inside
    /// `flat_group(ParamGroup::Embedding)`.
    pub fn embedding_offset(&self, field: usize, row: u32, k: usize) -> usize {
        let dim = self.config.embedding.dim_per_field;
        let before: usize = self.embeddings[..field].iter().map(|m| m.as_slice().len()).sum();
        before + row as usize * dim + k
    }

    pub fn flat_group(&self, group: ParamGroup) -> Vec<f64> {
        match group {
            ParamGroup::Embedding => self
                .embeddings
                .iter()
                .flat_map(|m| m.as_slice().iter().copied())
                .collect(),
            g => self.mlp(g).flatten(),
        }
    }

    pub fn set_flat_group(&mut self, group: ParamGroup, flat: &[f64]) -> Result<()> {
        match group {
            ParamGroup::Embedding => {
                let total: usize = self.embeddings.iter().map(|m| m.as_slice().len()).sum();
                if total != flat.len() {
                    return Err(Error::dim("set_flat_group", (total, 1), (flat.len(), 1)));
                }
                let mut at = 0;
                for m in &mut self.embeddings {
                    let s = m.as_mut_slice();
                    s.copy_from_slice(&flat[at..at + s.len()]);
                    at += s.len();
                }
                Ok(())
            }
            g => self.mlp_mut(g).unflatten_from(flat),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.iter().all(Matrix::is_finite)
            && self.ctr_tower.is_finite()
            && self.cvr_tower.is_finite()
            && self.encoder.is_finite()
    }

    /// One Adagrad step over every parameter with a gradient. `accumulators`
    /// has the same shape as `self`. Embedding rows absent from the sparse
    /// gradient are untouched, which is exactly what a dense zero gradient
    /// would do.
    pub fn apply_adagrad(
        &mut self,
        grads: &Gradients,
        accumulators: &mut ModelParams,
        learning_rate: f64,
        epsilon: f64,
    ) -> Result<()> {
        for (&(field, row), g) in &grads.embeddings {
            let p = self.embeddings[field].row_mut(row as usize);
            let a = accumulators.embeddings[field].row_mut(row as usize);
            adagrad_update(p, g, a, learning_rate, epsilon);
        }
        for (p, (g, a)) in [
            (&mut self.ctr_tower, (&grads.ctr_tower, &mut accumulators.ctr_tower)),
            (&mut self.cvr_tower, (&grads.cvr_tower, &mut accumulators.cvr_tower)),
            (&mut self.encoder, (&grads.encoder, &mut accumulators.encoder)),
        ] {
            if !same_shape(p, g) || !same_shape(p, a) {
                return Err(Error::Config("gradient shape does not match parameters".into()));
            }
            for ((pl, gl), al) in p.layers.iter_mut().zip(&g.layers).zip(a.layers.iter_mut()) {
                adagrad_update(
                    pl.weight.as_mut_slice(),
                    gl.weight.as_slice(),
                    al.weight.as_mut_slice(),
                    learning_rate,
                    epsilon,
                );
                adagrad_update(&mut pl.bias, &gl.bias, &mut al.bias, learning_rate, epsilon);
            }
        }
        Ok(())
    }
}

fn same_shape(a: &Mlp, b: &Mlp) -> bool {
    a.layers.len() == b.layers.len()
        && a
            .layers
            .iter()
            .zip(&b.layers)
            .all(|(x, y)| x.weight.shape() == y.weight.shape() && x.bias.len() == y.bias.len())
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        Gradients {
            embeddings: BTreeMap::new(),
            ctr_tower: params.ctr_tower.zeros_like(),
            cvr_tower: params.cvr_tower.zeros_like(),
            encoder: params.encoder.zeros_like(),
        }
    }

    /// Accumulates `s * grad` into the row `(field, row)`.
    pub fn add_embedding_row(&mut self, field: usize, row: u32, grad: &[f64], s: f64) {
        let entry = self
            .embeddings
            .entry((field, row))
            .or_insert_with(|| alloc::vec![0.0; grad.len()]);
        for (e, g) in entry.iter_mut().zip(grad) {
            *e += s * g;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Gradients, s: f64) -> Result<()> {
        for (&(f, r), g) in &other.embeddings {
            self.add_embedding_row(f, r, g, s);
        }
        self.ctr_tower.add_scaled(&other.ctr_tower, s)?;
        self.cvr_tower.add_scaled(&other.cvr_tower, s)?;
        self.encoder.add_scaled(&other.encoder, s)
    }

    /// Dense gradient for `group`, laid out like [`ModelParams::flat_group`].
    pub fn flat_group(&self, group: ParamGroup, params: &ModelParams) -> Vec<f64> {
        match group {
            ParamGroup::Embedding => {
                let mut out = alloc::vec![0.0; params.flat_group(ParamGroup::Embedding).len()];
                for (&(f, r), g) in &self.embeddings {
                    let at = params.embedding_offset(f, r, 0);
                    out[at..at + g.len()].copy_from_slice(g);
                }
                out
            }
            ParamGroup::CtrTower => self.ctr_tower.flatten(),
            ParamGroup::CvrTower => self.cvr_tower.flatten(),
            ParamGroup::Encoder => self.encoder.flatten(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.values().flatten().all(|v| v.is_finite())
            && self.ctr_tower.is_finite()
            && self.cvr_tower.is_finite()
            && self.encoder.is_finite()
    }
}
