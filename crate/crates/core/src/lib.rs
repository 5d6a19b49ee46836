//! Dense and sparsity-constrained ELSA embeddings for implicit-feedback recommendation.
//!
//! The crate is organised bottom-up:
//!
//! - [`interactions`]: ingest interaction logs, binarize them, and build
//!   strong-generalization splits with fold-in inputs.
//! - [`linalg`]: dense/CSR/CSC storage, SpMV kernels, row normalization, Adam,
//!   and the `SPEM` sparse matrix file format.
//! - [`elsa`]: the dense linear autoencoder, its loss, analytic gradient and
//!   mini-batch trainer.
//! - [`sparsifier`]: row-wise absolute top-k masks, pruning schedules, restart
//!   policies and the compressed trainer.
//! - [`infer`]: dual-layout sparse inference, top-N retrieval and embedding
//!   size accounting.
//! - [`baselines`]: EASE, row-pruned EASE and popularity.
//! - [`segments`]: item segments derived from dominant signed latent factors.
//! - [`evalkit`]: ranking metrics, the evaluation protocol, a synthetic
//!   block-model fixture and the experiment runner.

pub mod baselines;
pub mod elsa;
pub mod error;
pub mod evalkit;
pub mod infer;
pub mod interactions;
pub mod linalg;
pub mod segments;
pub mod sparsifier;

pub use error::{Error, Result};
