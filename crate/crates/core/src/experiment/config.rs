use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contrastive::{MaskMode, SetRules};
use crate::model::{EmbeddingConfig, ModelConfig};
use crate::rng::{stream_seed, DATA_STREAM, INIT_STREAM, MASK_STREAM, SHUFFLE_STREAM};
use crate::{Error, Result};

/// Training method. `Cl4cvr` is embedding masking with both false negative
/// elimination and supervised positive inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Base,
    Fd,
    Rfm,
    Cl4cvr,
    EmOnly,
    EmFne,
    EmSpi,
}

/// How the two contrastive views are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    EmbeddingMask,
    FeatureMask,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Base,
        Method::Fd,
        Method::Rfm,
        Method::Cl4cvr,
        Method::EmOnly,
        Method::EmFne,
        Method::EmSpi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Fd => "fd",
            Method::Rfm => "rfm",
            Method::Cl4cvr => "cl4cvr",
            Method::EmOnly => "em_only",
            Method::EmFne => "em_fne",
            Method::EmSpi => "em_spi",
        }
    }

    pub fn views(self) -> Option<ViewKind> {
        match self {
            Method::Base | Method::Fd => None,
            Method::Rfm => Some(ViewKind::FeatureMask),
            Method::Cl4cvr | Method::EmOnly | Method::EmFne | Method::EmSpi => Some(ViewKind::EmbeddingMask),
        }
    }

    pub fn has_contrastive_task(self) -> bool {
        self.views().is_some()
    }

    /// `None` selects the plain two-view loss.
    pub fn set_rules(self) -> Option<SetRules> {
        match self {
            Method::Cl4cvr => Some(SetRules { fne: true, spi: true }),
            Method::EmFne => Some(SetRules { fne: true, spi: false }),
            Method::EmSpi => Some(SetRules { fne: false, spi: true }),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Temperature of the contrastive softmax.
    pub tau: f64,
    /// Weight of the contrastive loss.
    pub alpha: f64,
    /// Fraction of embedding dimensions kept by the first mask.
    pub keep_ratio: f64,
    pub mask_mode: MaskMode,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub embedding_dim: usize,
    pub tower_widths: Vec<usize>,
    pub encoder_widths: Vec<usize>,
    /// Per-field drop probability for the feature-dropout baseline.
    pub feature_drop_prob: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            tau: 0.5,
            alpha: 0.1,
            keep_ratio: 0.5,
            mask_mode: MaskMode::Complementary,
            learning_rate: 0.05,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 10,
            patience: 3,
            embedding_dim: 8,
            tower_widths: vec![512, 256, 128],
            encoder_widths: vec![512, 256, 128],
            feature_drop_prob: 0.1,
        }
    }
}

/// Seeds of the independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master: u64,
    pub init: u64,
    pub shuffle: u64,
    pub mask: u64,
    pub data: u64,
}

impl RunSeeds {
    pub fn derive(master: u64) -> Self {
        RunSeeds {
            master,
            init: stream_seed(master, INIT_STREAM),
            shuffle: stream_seed(master, SHUFFLE_STREAM),
            mask: stream_seed(master, MASK_STREAM),
            data: stream_seed(master, DATA_STREAM),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    #[serde(default)]
    pub hyper: Hyperparams,
}

impl RunConfig {
    pub fn new(method: Method, seed: u64, hyper: Hyperparams) -> Self {
        RunConfig { method, seed, hyper }
    }

    pub fn seeds(&self) -> RunSeeds {
        RunSeeds::derive(self.seed)
    }

    /// Whether a step runs the contrastive branch at all. With `α = 0` the
    /// branch is skipped entirely, so the mask stream is never drawn from.
    pub fn contrastive_active(&self) -> bool {
        self.method.has_contrastive_task() && self.hyper.alpha > 0.0
    }

    pub fn model_config(&self, vocab_sizes: &[u32]) -> Result<ModelConfig> {
        ModelConfig::new(
            EmbeddingConfig::new(vocab_sizes.to_vec(), self.hyper.embedding_dim)?,
            self.hyper.tower_widths.clone(),
            self.hyper.encoder_widths.clone(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        let err = |m: String| Err(Error::Config(m));
        if !(h.alpha >= 0.0) || !h.alpha.is_finite() {
            return err(alloc::format!("alpha={} must be non-negative", h.alpha));
        }
        if self.method.has_contrastive_task() && !(h.tau > 0.0 && h.tau.is_finite()) {
            return err(alloc::format!("tau={} must be positive", h.tau));
        }
        if self.method.views() == Some(ViewKind::EmbeddingMask) && !(h.keep_ratio > 0.0 && h.keep_ratio < 1.0) {
            return err(alloc::format!("keep_ratio={} must lie in (0, 1)", h.keep_ratio));
        }
        if !(h.learning_rate > 0.0) || !(h.epsilon > 0.0) {
            return err("learning_rate and epsilon must be positive".into());
        }
        if h.batch_size < 2 {
            return err(alloc::format!("batch_size={} must be at least 2", h.batch_size));
        }
        if h.epochs == 0 {
            return err("epochs must be at least 1".into());
        }
        if h.embedding_dim == 0 {
            return err("embedding_dim must be at least 1".into());
        }
        if h.encoder_widths.is_empty() || h.tower_widths.iter().chain(&h.encoder_widths).any(|&w| w == 0) {
            return err("layer widths must be positive and the encoder needs a layer".into());
        }
        if self.method == Method::Fd && !(0.0..1.0).contains(&h.feature_drop_prob) {
            return err(alloc::format!("feature_drop_prob={} must lie in [0, 1)", h.feature_drop_prob));
        }
        Ok(())
    }
}
