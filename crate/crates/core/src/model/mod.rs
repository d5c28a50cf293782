//! ESMM prediction model and the contrastive encoder.
//!
//! A shared per-field embedding table feeds three MLPs: the CTR tower and
//! the CVR tower (each ending in a single logit) and the encoder that maps
//! masked views to representations for the contrastive task.

mod checkpoint;
mod config;
mod esmm;
mod mlp;
mod params;

pub use checkpoint::{Checkpoint, CheckpointSeeds, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{EmbeddingConfig, ModelConfig};
pub use esmm::{
    embed, embed_ids, encode, esmm_forward, predict_embedded, supervised_loss, supervised_loss_grad, Predictions,
    SupervisedGrad, PROB_CLAMP,
};
pub use mlp::{Dense, Mlp, MlpTrace};
pub use params::{EmbeddingGrads, Gradients, ModelParams, ParamGroup};
