//! Similarity-grounded credit assignment: convert video-level rewards into
//! latent-level training targets, with the ablation strategies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::RewardVector;
use crate::tensor::Latent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CreditStrategy {
    Cosine,
    Uniform,
    Exponential { decay: f64 },
    L2,
}

impl CreditStrategy {
    pub fn validate(&self) -> Result<()> {
        if let CreditStrategy::Exponential { decay } = self {
            if !decay.is_finite() || *decay <= 0.0 {
                return Err(Error::invalid("exponential decay must be positive"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            CreditStrategy::Cosine => "cosine",
            CreditStrategy::Uniform => "uniform",
            CreditStrategy::Exponential { .. } => "exponential",
            CreditStrategy::L2 => "l2",
        }
    }
}

/// Cosine similarity of the flattened latents, rescaled to [0, 1]:
/// s = (1 + <z_t, z_0> / (|z_t| |z_0|)) / 2.
pub fn cosine_credit(z_t: &Latent, z_0: &Latent) -> Result<f64> {
    if !z_t.same_shape(z_0) {
        return Err(Error::invalid("latent shapes differ"));
    }
    let nt = z_t.norm();
    let n0 = z_0.norm();
    if nt == 0.0 || n0 == 0.0 {
        return Err(Error::DegenerateInput(
            "cosine credit of a zero-norm latent is undefined".into(),
        ));
    }
    let cos = (z_t.dot(z_0) / (nt * n0)).clamp(-1.0, 1.0);
    Ok(0.5 * (1.0 + cos))
}

/// Credit s_t for one intermediate latent under the chosen strategy.
pub fn credit(
    strategy: CreditStrategy,
    z_t: &Latent,
    z_0: &Latent,
    t: usize,
    total_steps: usize,
) -> Result<f64> {
    strategy.validate()?;
    match strategy {
        CreditStrategy::Uniform => Ok(1.0),
        CreditStrategy::Exponential { decay } => {
            Ok((-decay * t as f64 / total_steps as f64).exp())
        }
        CreditStrategy::L2 => {
            if !z_t.same_shape(z_0) {
                return Err(Error::invalid("latent shapes differ"));
            }
            let n = (z_t.frames() * z_t.dim()) as f64;
            let mse = z_t
                .as_slice()
                .iter()
                .zip(z_0.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n;
            Ok(1.0 / (1.0 + mse))
        }
        CreditStrategy::Cosine => cosine_credit(z_t, z_0),
    }
}

/// Latent-level target: each reward dimension scaled by the credit.
pub fn assign_target(r_video: &RewardVector, s: f64) -> Result<RewardVector> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("credit {s} outside [0, 1]")));
    }
    Ok(r_video.scale(s))
}
