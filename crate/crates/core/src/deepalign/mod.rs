//! Aligned autoencoders over meta proximity rows.
//!
//! Each network has one encoder per meta path. The per-path codes are summed
//! through a fusion layer into a shared embedding, which a mirrored decoder
//! expands back into one reconstruction per path. Two networks are tied by
//! a projection that maps emerging-network embeddings of anchored users
//! onto their mature-network embeddings.

pub mod checkpoint;
mod forward;
mod grad;
mod loss;
mod model;
mod train;

pub use forward::{decode, encode, DecodeTrace, EncodeTrace};
pub use grad::{gather_inputs, gradients, total_loss, Batch, JointData};
pub use loss::{fusion_loss, recon_loss, reg_loss, FusionRows};
pub use model::{
    init_params, sigmoid, weight_sq_norm, ArchitectureSpec, Dense, DimeParams, NetworkParams, PathBranch, Side,
};
pub use train::{embed_all, embed_single, embed_single_as, train, train_with, EmbeddingMatrix, TrainConfig, TrainOutput};
