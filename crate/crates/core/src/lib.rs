//! Embedding users of an emerging heterogeneous social network by training
//! aligned autoencoders jointly with a mature partner network.
//!
//! The crate is organised bottom-up:
//!
//! * [`netcore`]: networks, anchor links, file formats and sparsity sampling
//! * [`metaprox`]: meta-path instance counting and meta proximity matrices
//! * [`deepalign`]: the per-path autoencoders, fusion layer, joint loss and
//!   SGD trainer
//! * [`evalkit`]: link prediction and community detection protocols
//! * [`synthgen`]: planted-community aligned network pairs for experiments

pub mod deepalign;
pub mod error;
pub mod evalkit;
pub mod metaprox;
pub mod netcore;
pub mod seed;
pub mod synthgen;

pub use deepalign::{ArchitectureSpec, DimeParams, EmbeddingMatrix, TrainConfig};
pub use error::{Error, Result};
pub use metaprox::{MetaPath, ProximityBundle, ProximityMatrix};
pub use netcore::{AlignedPair, HeterogeneousNetwork, TransitionMatrix};
