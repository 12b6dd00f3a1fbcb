//! Gaussian-mixture data distribution with per-frame drift velocities.
//!
//! Component k occupies a "track": the mean of frame f is `mu_k + f * v_k`,
//! so clean samples carry genuine frame-to-frame motion. The diffused
//! marginal at any timestep is again a Gaussian mixture, which makes the
//! score function exact and cheap.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::Latent;

/// Minimum pairwise per-frame mode separation, in units of component_std.
const MIN_SEPARATION_SIGMAS: f64 = 4.0;

/// A "prompt": selects one mixture component, or Null for unconditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Null,
    Prompt(usize),
}

impl Condition {
    pub fn index(&self) -> Option<usize> {
        match self {
            Condition::Null => None,
            Condition::Prompt(k) => Some(*k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    /// Base mean of frame 0, length D.
    pub mu: Vec<f64>,
    /// Per-frame drift added cumulatively: frame f has mean mu + f * velocity.
    pub velocity: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureTarget {
    frames: usize,
    dim: usize,
    components: Vec<MixtureComponent>,
    component_std: f64,
    /// Precomputed (F, D) track means, one per component.
    means: Vec<Latent>,
}

impl MixtureTarget {
    pub fn new(
        frames: usize,
        dim: usize,
        components: Vec<MixtureComponent>,
        component_std: f64,
    ) -> Result<Self> {
        if frames == 0 || dim == 0 || components.is_empty() {
            return Err(Error::invalid("mixture needs frames, dims and components"));
        }
        if !component_std.is_finite() || component_std <= 0.0 {
            return Err(Error::invalid("component_std must be positive"));
        }
        let weight_sum: f64 = components.iter().map(|c| c.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "component weights sum to {weight_sum}, expected 1"
            )));
        }
        for (k, c) in components.iter().enumerate() {
            if c.mu.len() != dim || c.velocity.len() != dim {
                return Err(Error::invalid(format!(
                    "component {k} has mu/velocity of wrong dimension"
                )));
            }
            if c.weight < 0.0 {
                return Err(Error::invalid("component weights must be non-negative"));
            }
        }
        let means: Vec<Latent> = components
            .iter()
            .map(|c| {
                let mut data = Vec::with_capacity(frames * dim);
                for f in 0..frames {
                    for d in 0..dim {
                        data.push(c.mu[d] + f as f64 * c.velocity[d]);
                    }
                }
                Latent::from_vec(frames, dim, data)
            })
            .collect::<Result<_>>()?;
        // Modes must stay distinguishable at every frame, otherwise the
        // text-alignment oracle cannot tell tracks apart.
        for j in 0..means.len() {
            for k in (j + 1)..means.len() {
                for f in 0..frames {
                    let dist: f64 = means[j]
                        .frame(f)
                        .iter()
                        .zip(means[k].frame(f))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if dist < MIN_SEPARATION_SIGMAS * component_std {
                        return Err(Error::invalid(format!(
                            "components {j} and {k} are separated by {dist:.4} at frame {f}, \
                             need at least {}",
                            MIN_SEPARATION_SIGMAS * component_std
                        )));
                    }
                }
            }
        }
        Ok(MixtureTarget {
            frames,
            dim,
            components,
            component_std,
            means,
        })
    }

    /// K well-separated components on the coordinate axes with small
    /// rotating drift velocities. Requires K <= D.
    pub fn axes_preset(
        k: usize,
        frames: usize,
        dim: usize,
        spread: f64,
        vel: f64,
        component_std: f64,
    ) -> Result<Self> {
        if k > dim {
            return Err(Error::invalid("axes preset needs K <= D"));
        }
        let components = (0..k)
            .map(|i| {
                let mut mu = vec![0.0; dim];
                mu[i] = spread;
                let mut velocity = vec![0.0; dim];
                velocity[(i + 1) % dim] = vel;
                MixtureComponent {
                    mu,
                    velocity,
                    weight: 1.0 / k as f64,
                }
            })
            .collect();
        MixtureTarget::new(frames, dim, components, component_std)
    }

    /// K components on a circle in the first two dims, tangential drift.
    pub fn ring_preset(
        k: usize,
        frames: usize,
        dim: usize,
        radius: f64,
        vel: f64,
        component_std: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("ring preset needs D >= 2"));
        }
        let components = (0..k)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                let mut mu = vec![0.0; dim];
                mu[0] = radius * angle.cos();
                mu[1] = radius * angle.sin();
                let mut velocity = vec![0.0; dim];
                velocity[0] = -vel * angle.sin();
                velocity[1] = vel * angle.cos();
                MixtureComponent {
                    mu,
                    velocity,
                    weight: 1.0 / k as f64,
                }
            })
            .collect();
        MixtureTarget::new(frames, dim, components, component_std)
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component_std(&self) -> f64 {
        self.component_std
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.components[k].weight
    }

    /// Full (F, D) track mean of component k.
    pub fn mean(&self, k: usize) -> &Latent {
        &self.means[k]
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.components[k].velocity
    }

    pub fn check_condition(&self, cond: Condition) -> Result<()> {
        if let Condition::Prompt(k) = cond {
            if k >= self.components.len() {
                return Err(Error::invalid(format!(
                    "condition index {k} out of range for K={}",
                    self.components.len()
                )));
            }
        }
        Ok(())
    }

    /// Draw a clean sample: pick a component by weight, then mean + std * eps.
    pub fn sample_clean<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Latent) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (k, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chosen = k;
                break;
            }
        }
        let mut z = self.means[chosen].clone();
        for v in z.as_mut_slice() {
            let eps: f64 = rng.sample(StandardNormal);
            *v += self.component_std * eps;
        }
        (chosen, z)
    }

    /// Log-density of a single frame under the clean per-frame mixture.
    pub fn clean_frame_log_density(&self, frame_index: usize, frame: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                c.weight.ln()
                    + log_gaussian(frame, self.means[k].frame(frame_index), self.component_std)
            })
            .collect();
        log_sum_exp(&logs)
    }

    /// Posterior responsibilities of each component for one frame.
    pub fn clean_frame_responsibilities(&self, frame_index: usize, frame: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                c.weight.ln()
                    + log_gaussian(frame, self.means[k].frame(frame_index), self.component_std)
            })
            .collect();
        let total = log_sum_exp(&logs);
        logs.iter().map(|l| (l - total).exp()).collect()
    }

    /// Per-coordinate variance of the diffused marginal at timestep t.
    pub fn diffused_variance(&self, t: usize, sched: &NoiseSchedule) -> f64 {
        let ab = sched.alpha_bar(t);
        self.diffused_variance_at(ab)
    }

    /// Same, parameterised by the signal level directly.
    pub fn diffused_variance_at(&self, alpha_bar: f64) -> f64 {
        (1.0 - alpha_bar) + alpha_bar * self.component_std * self.component_std
    }

    /// Log-density of the full latent under the diffused mixture at t.
    pub fn diffused_log_density(
        &self,
        z: &Latent,
        t: usize,
        cond: Condition,
        sched: &NoiseSchedule,
    ) -> Result<f64> {
        sched.check_timestep(t)?;
        self.check_condition(cond)?;
        self.check_shape(z)?;
        let sqrt_ab = sched.alpha_bar(t).sqrt();
        let std = self.diffused_variance(t, sched).sqrt();
        match cond {
            Condition::Prompt(k) => Ok(log_gaussian_scaled_mean(
                z.as_slice(),
                self.means[k].as_slice(),
                sqrt_ab,
                std,
            )),
            Condition::Null => {
                let logs: Vec<f64> = self
                    .components
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        c.weight.ln()
                            + log_gaussian_scaled_mean(
                                z.as_slice(),
                                self.means[k].as_slice(),
                                sqrt_ab,
                                std,
                            )
                    })
                    .collect();
                Ok(log_sum_exp(&logs))
            }
        }
    }

    /// Exact score of the diffused mixture: grad_z log p_t(z | cond).
    ///
    /// The diffused marginal of component k is Gaussian with mean
    /// sqrt(alpha_bar) * mean_k and per-coordinate variance
    /// (1 - alpha_bar) + alpha_bar * component_std^2; the score is the
    /// responsibility-weighted sum of the per-component Gaussian scores.
    pub fn score(
        &self,
        z: &Latent,
        t: usize,
        cond: Condition,
        sched: &NoiseSchedule,
    ) -> Result<Latent> {
        if t < 1 {
            return Err(Error::invalid("score is defined for t >= 1"));
        }
        sched.check_timestep(t)?;
        self.score_at_alpha_bar(z, sched.alpha_bar(t), cond)
    }

    /// Score at an arbitrary (continuous) signal level; used by the
    /// probability-flow drift between schedule nodes.
    pub fn score_at_alpha_bar(
        &self,
        z: &Latent,
        alpha_bar: f64,
        cond: Condition,
    ) -> Result<Latent> {
        self.check_condition(cond)?;
        self.check_shape(z)?;
        let sqrt_ab = alpha_bar.sqrt();
        let var = self.diffused_variance_at(alpha_bar);
        let active: Vec<usize> = match cond {
            Condition::Prompt(k) => vec![k],
            Condition::Null => (0..self.components.len()).collect(),
        };
        let resp = if active.len() == 1 {
            vec![1.0]
        } else {
            let logs: Vec<f64> = active
                .iter()
                .map(|&k| {
                    self.components[k].weight.ln()
                        + log_gaussian_scaled_mean(
                            z.as_slice(),
                            self.means[k].as_slice(),
                            sqrt_ab,
                            var.sqrt(),
                        )
                })
                .collect();
            let total = log_sum_exp(&logs);
            logs.iter().map(|l| (l - total).exp()).collect()
        };
        let mut out = vec![0.0; z.as_slice().len()];
        for (r, &k) in resp.iter().zip(&active) {
            let mean = self.means[k].as_slice();
            for (i, o) in out.iter_mut().enumerate() {
                *o += r * (sqrt_ab * mean[i] - z.as_slice()[i]) / var;
            }
        }
        Latent::from_vec(z.frames(), z.dim(), out)
    }

    fn check_shape(&self, z: &Latent) -> Result<()> {
        if z.frames() != self.frames || z.dim() != self.dim {
            return Err(Error::invalid(format!(
                "latent shape ({}, {}) does not match mixture shape ({}, {})",
                z.frames(),
                z.dim(),
                self.frames,
                self.dim
            )));
        }
        Ok(())
    }
}

fn log_gaussian(x: &[f64], mean: &[f64], std: f64) -> f64 {
    log_gaussian_scaled_mean(x, mean, 1.0, std)
}

/// log N(x; mean_scale * mean, std^2 I).
fn log_gaussian_scaled_mean(x: &[f64], mean: &[f64], mean_scale: f64, std: f64) -> f64 {
    let n = x.len() as f64;
    let var = std * std;
    let sq: f64 = x
        .iter()
        .zip(mean)
        .map(|(a, m)| {
            let d = a - mean_scale * m;
            d * d
        })
        .sum();
    -0.5 * n * (2.0 * std::f64::consts::PI * var).ln() - sq / (2.0 * var)
}

pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{make_schedule, ScheduleKind};

    fn target() -> MixtureTarget {
        MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 0.25).unwrap()
    }

    #[test]
    fn rejects_overlapping_components() {
        let components = vec![
            MixtureComponent {
                mu: vec![0.0, 0.0],
                velocity: vec![0.0, 0.0],
                weight: 0.5,
            },
            MixtureComponent {
                mu: vec![0.5, 0.0],
                velocity: vec![0.0, 0.0],
                weight: 0.5,
            },
        ];
        assert!(MixtureTarget::new(2, 2, components, 0.25).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        let components = vec![MixtureComponent {
            mu: vec![0.0, 0.0],
            velocity: vec![0.0, 0.0],
            weight: 0.9,
        }];
        assert!(MixtureTarget::new(2, 2, components, 0.25).is_err());
    }

    #[test]
    fn score_zero_at_diffused_mode_single_component() {
        let t = MixtureTarget::axes_preset(1, 4, 4, 2.0, 0.15, 0.25).unwrap();
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let step = 10;
        let z = t.mean(0).scale(sched.alpha_bar(step).sqrt());
        let s = t
            .score(&z, step, Condition::Prompt(0), &sched)
            .unwrap();
        assert!(s.norm() < 1e-12);
    }

    #[test]
    fn score_single_gaussian_closed_form() {
        let t = MixtureTarget::axes_preset(1, 4, 4, 2.0, 0.15, 0.25).unwrap();
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let step = 7;
        let mut rng = crate::rng::stream(3, "probe", &[]);
        let z = Latent::standard_normal(4, 4, &mut rng);
        let s = t.score(&z, step, Condition::Prompt(0), &sched).unwrap();
        let ab = sched.alpha_bar(step);
        let var = (1.0 - ab) + ab * 0.25 * 0.25;
        for (i, v) in s.as_slice().iter().enumerate() {
            let expected = (ab.sqrt() * t.mean(0).as_slice()[i] - z.as_slice()[i]) / var;
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn score_zero_at_symmetric_midpoint() {
        // Two components mirrored through the origin with opposite drifts:
        // the diffused density is symmetric, so the score vanishes at 0.
        let components = vec![
            MixtureComponent {
                mu: vec![2.0, 0.0],
                velocity: vec![0.1, 0.0],
                weight: 0.5,
            },
            MixtureComponent {
                mu: vec![-2.0, 0.0],
                velocity: vec![-0.1, 0.0],
                weight: 0.5,
            },
        ];
        let t = MixtureTarget::new(3, 2, components, 0.25).unwrap();
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let z = Latent::zeros(3, 2);
        let s = t.score(&z, 12, Condition::Null, &sched).unwrap();
        assert!(s.norm() < 1e-12);
    }

    // Oracle: central finite differences of an independently coded log p_t.
    #[test]
    fn score_matches_finite_differences() {
        let target = target();
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        // Test-local log-density: scalar loops, no shared code path with
        // MixtureTarget::score beyond the stored means.
        let log_pt = |z: &Latent, t: usize, cond: Condition| -> f64 {
            let ab = sched.alpha_bar(t);
            let var = (1.0 - ab) + ab * target.component_std().powi(2);
            let comps: Vec<usize> = match cond {
                Condition::Prompt(k) => vec![k],
                Condition::Null => (0..target.num_components()).collect(),
            };
            let mut terms = Vec::new();
            for &k in &comps {
                let prior = if comps.len() == 1 {
                    0.0
                } else {
                    target.weight(k).ln()
                };
                let mut sq = 0.0;
                for (i, zi) in z.as_slice().iter().enumerate() {
                    let m = ab.sqrt() * target.mean(k).as_slice()[i];
                    sq += (zi - m) * (zi - m);
                }
                let n = z.as_slice().len() as f64;
                terms.push(prior - 0.5 * n * (2.0 * std::f64::consts::PI * var).ln() - sq / (2.0 * var));
            }
            log_sum_exp(&terms)
        };

        let mut rng = crate::rng::stream(11, "fd-probe", &[]);
        for probe in 0..100 {
            let t = 1 + probe % 32;
            let cond = match probe % 3 {
                0 => Condition::Null,
                1 => Condition::Prompt(probe % 4),
                _ => Condition::Prompt((probe + 2) % 4),
            };
            let z = Latent::standard_normal(4, 4, &mut rng).scale(1.5);
            let analytic = target.score(&z, t, cond, &sched).unwrap();
            let h = 1e-5;
            let mut err_sq = 0.0;
            for i in 0..z.as_slice().len() {
                let mut zp = z.clone();
                zp.as_mut_slice()[i] += h;
                let mut zm = z.clone();
                zm.as_mut_slice()[i] -= h;
                let fd = (log_pt(&zp, t, cond) - log_pt(&zm, t, cond)) / (2.0 * h);
                err_sq += (fd - analytic.as_slice()[i]).powi(2);
            }
            let rel = err_sq.sqrt() / analytic.norm();
            assert!(rel < 1e-6, "probe {probe}: relative error {rel}");
        }
    }
}
