//! Samples, the planted synthetic conversion-log generator, and batching.

mod batch;
mod sample;
mod synthetic;

pub use batch::{batch_iter, Batches};
pub use sample::{Dataset, Sample};
pub use synthetic::{generate_synthetic, PlantedModel, SyntheticConfig, SyntheticDataset};
