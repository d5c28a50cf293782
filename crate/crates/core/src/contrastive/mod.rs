//! The contrastive task: two-view augmentation, duplicate detection, the
//! per-anchor index sets that decide positives and denominators, and the
//! contrastive losses.
//!
//! Views are laid out in pairs: views `2m` and `2m + 1` both come from
//! original sample `m`, so the positive partner of view `i` is `i ^ 1`.

mod augment;
mod duplicates;
mod loss;
mod sets;

pub use augment::{
    augment_em, augment_rfm, feature_dropout, make_embedding_masks, AugmentedBatch, MaskMode, MaskPair,
};
pub use duplicates::{detect_duplicates, DuplicationGroups};
pub use loss::{
    contrastive_loss_cl4cvr, contrastive_loss_grad, contrastive_loss_traditional, cosine_similarities,
    total_loss, ContrastiveGrad,
};
pub use sets::{build_fne_set, build_spi_set, partner, PairSets, SetRules};
