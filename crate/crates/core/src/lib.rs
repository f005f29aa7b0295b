//! Satellite patch classification pipeline.
//!
//! The crate covers the full path from 28×28 four-band (R, G, B, NIR) image
//! patches to land-cover predictions:
//!
//! * [`patchio`] loads, generates, shuffles and splits labeled patch datasets
//!   (SATBIN binary container and CSV).
//! * [`features`] converts patches to HSI + NIR planes and computes 22 texture,
//!   channel and vegetation-index features.
//! * [`normalize`] applies per-feature min-max scaling.
//! * [`dbn`] trains restricted Boltzmann machines with contrastive divergence,
//!   stacks them greedily and fine-tunes the stack as a classifier.
//! * [`sdae`] is the stacked denoising autoencoder baseline.
//! * [`analysis`] holds the diagnostics: distribution separability, feature
//!   ranking, layer separability and intrinsic dimension.
//! * [`cli`] is the command-line front end used by the `satpipe` binary.

pub mod analysis;
pub mod cli;
pub mod dbn;
mod error;
pub mod features;
pub mod network;
pub mod normalize;
pub mod patchio;
pub mod pipeline;
pub mod sdae;

pub use error::{Error, Result};

/// Name of the pseudo-random generator used for every seeded operation.
pub const RNG_ALGORITHM: &str = "ChaCha8";

pub(crate) fn rng_from_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
