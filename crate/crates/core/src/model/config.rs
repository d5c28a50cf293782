use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of the shared embedding table.
///
/// Each field owns `vocab_sizes[f] + 1` rows: ids `0..vocab_sizes[f]` plus one
/// learned mask token at id `vocab_sizes[f]`, used by feature-level masking
/// (feature dropout and random feature masking).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub vocab_sizes: Vec<u32>,
    pub dim_per_field: usize,
}

impl EmbeddingConfig {
    pub fn new(vocab_sizes: Vec<u32>, dim_per_field: usize) -> Result<Self> {
        let cfg = EmbeddingConfig {
            vocab_sizes,
            dim_per_field,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_sizes.is_empty() {
            return Err(Error::Config("at least one feature field is required".into()));
        }
        if self.dim_per_field == 0 {
            return Err(Error::Config("embedding dimension per field must be at least 1".into()));
        }
        if let Some(f) = self.vocab_sizes.iter().position(|&v| v == 0) {
            return Err(Error::Config(alloc::format!("field {f} has an empty vocabulary")));
        }
        Ok(())
    }

    #[inline]
    pub fn field_count(&self) -> usize {
        self.vocab_sizes.len()
    }

    /// Length `F·K` of the concatenated embedding.
    #[inline]
    pub fn total_dim(&self) -> usize {
        self.field_count() * self.dim_per_field
    }

    #[inline]
    pub fn mask_token(&self, field: usize) -> u32 {
        self.vocab_sizes[field]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding: EmbeddingConfig,
    /// Hidden widths of each prediction tower; a 1-logit layer follows.
    pub tower_widths: Vec<usize>,
    /// Encoder widths; the last entry is the representation size.
    pub encoder_widths: Vec<usize>,
}

impl ModelConfig {
    pub fn new(embedding: EmbeddingConfig, tower_widths: Vec<usize>, encoder_widths: Vec<usize>) -> Result<Self> {
        let cfg = ModelConfig {
            embedding,
            tower_widths,
            encoder_widths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        if self.encoder_widths.is_empty() {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.tower_widths.iter().chain(&self.encoder_widths).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn tower_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.embedding.total_dim()];
        dims.extend_from_slice(&self.tower_widths);
        dims.push(1);
        dims
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.embedding.total_dim()];
        dims.extend_from_slice(&self.encoder_widths);
        dims
    }

    pub fn representation_dim(&self) -> usize {
        *self.encoder_widths.last().expect("validated")
    }
}
