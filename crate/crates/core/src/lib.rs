//! Latent reward-guided search over a desk-scale diffusion testbed.
//!
//! The library is organised around a small deterministic pipeline:
//!
//! - [`schedule`] / [`mixture`] / [`diffusion`]: a variance-preserving
//!   diffusion process over (frames x dims) latents whose score function is
//!   known in closed form, so samplers can be checked against exact math.
//! - [`oracle`]: a ground-truth video-level judge producing (VQ, MQ, TA)
//!   scores in [0, 1] for decoded toy videos.
//! - [`credit`] / [`dataset`]: similarity-grounded credit assignment that
//!   turns video-level rewards into latent-level training targets.
//! - [`reward`]: a compact latent reward model with hand-derived gradients,
//!   trained with regression + pairwise preference losses.
//! - [`search`]: reward-guided resampling and pruning plus best-of-N and
//!   beam-search baselines, with exact evaluation accounting.
//!
//! Everything is a pure function of its inputs plus explicitly passed RNG
//! streams; reruns with the same seeds are bit-identical within one build.

pub mod credit;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod mixture;
pub mod oracle;
pub mod reward;
pub mod rng;
pub mod schedule;
pub mod search;
#[cfg(feature = "stats")]
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use mixture::{Condition, MixtureTarget};
pub use oracle::RewardVector;
pub use schedule::NoiseSchedule;
pub use tensor::{Latent, Video};
