use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One impression: a categorical id per field, the click label `y` and the
/// conversion label `z` (`z ≤ y`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    features: Vec<u32>,
    click: u8,
    conversion: u8,
}

impl Sample {
    pub fn new(features: Vec<u32>, click: u8, conversion: u8) -> Result<Self> {
        if click > 1 || conversion > 1 {
            return Err(Error::Label(alloc::format!(
                "labels must be 0 or 1 (y={click}, z={conversion})"
            )));
        }
        if conversion > click {
            return Err(Error::Label("conversion without click (y=0, z=1)".into()));
        }
        Ok(Sample {
            features,
            click,
            conversion,
        })
    }

    #[inline]
    pub fn features(&self) -> &[u32] {
        &self.features
    }

    #[inline]
    pub fn click(&self) -> u8 {
        self.click
    }

    #[inline]
    pub fn conversion(&self) -> u8 {
        self.conversion
    }

    #[inline]
    pub fn clicked(&self) -> bool {
        self.click == 1
    }

    #[inline]
    pub fn converted(&self) -> bool {
        self.conversion == 1
    }
}

/// Train/validation/test splits over a shared id space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    /// Ids of field `f` lie in `0..vocab_sizes[f]`.
    pub vocab_sizes: Vec<u32>,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn field_count(&self) -> usize {
        self.vocab_sizes.len()
    }

    /// Checks every sample against the field count and vocabularies.
    pub fn validate(&self) -> Result<()> {
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            if s.features().len() != self.field_count() {
                return Err(Error::dim("Dataset", (1, s.features().len()), (1, self.field_count())));
            }
            for (field, (&id, &vocab)) in s.features().iter().zip(&self.vocab_sizes).enumerate() {
                if id >= vocab {
                    return Err(Error::OutOfVocabulary { field, value: id, vocab });
                }
            }
        }
        Ok(())
    }
}
