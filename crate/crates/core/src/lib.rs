//! Unsupervised latent representations of intracardiac electrograms.
//!
//! This crate implements the full pipeline: a minimal dense-tensor engine with
//! hand-written gradients ([`nn`]), a synthetic electrogram corpus with driver
//! annotations and the preprocessing chain ([`data`]), a convolutional
//! autoencoder trained to compress 1-second multi-channel windows into
//! 16-dimensional embeddings ([`cae`]), downstream one-vs-rest driver
//! classifiers ([`classify`]), and t-SNE / SVG visualization ([`viz`]).

pub mod cae;
pub mod classify;
pub mod data;
pub mod error;
pub mod nn;
pub mod tensor;
pub mod viz;

pub use error::{Error, Result};
pub use tensor::{Parameter, Tensor};

use std::sync::atomic::{AtomicUsize, Ordering};

static MAX_THREADS: AtomicUsize = AtomicUsize::new(0);

/// Cap the number of worker threads used for intra-batch parallelism.
///
/// Zero (the default) means "use the available hardware parallelism". Results
/// are bit-identical for any thread count: work is partitioned into fixed
/// chunks and reduced in chunk order.
pub fn set_max_threads(n: usize) {
    MAX_THREADS.store(n, Ordering::Relaxed);
}

pub(crate) fn worker_threads() -> usize {
    let cap = MAX_THREADS.load(Ordering::Relaxed);
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    if cap == 0 {
        hw
    } else {
        cap.min(hw).max(1)
    }
}
