//! Conversion-rate prediction with an auxiliary contrastive task.
//!
//! The crate is `no_std` (with `alloc`) and framework-free: every layer has a
//! hand-written backward pass, so the whole model can be trained and
//! gradient-checked on a laptop. IO, file formats and the command line live
//! in the companion `cl4cvr` crate.
//!
//! Layout, bottom-up:
//!
//! - [`numkernel`]: dense matrices, activations, Adagrad, finite differences.
//! - [`model`]: shared embedding table, CTR/CVR towers, contrastive encoder.
//! - [`contrastive`]: view augmentation, duplicate groups, positive/negative
//!   index sets and the two contrastive losses.
//! - [`data`]: samples, the planted synthetic log generator, batching.
//! - [`experiment`]: training loop, AUC, gradient checking.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod contrastive;
pub mod data;
mod error;
pub mod experiment;
pub mod model;
pub mod numkernel;
pub mod rng;

pub use error::{Error, Result};
