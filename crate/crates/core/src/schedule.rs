//! Discrete noise schedules: cumulative signal coefficients `alpha_bar[t]`
//! for t in 0..=T, with `alpha_bar[0] = 1` (clean) down to near zero at T.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference step count the beta range [1e-4, 2e-2] was designed for; the
/// per-step betas are rescaled by `REF_STEPS / T` so the terminal signal
/// level stays (approximately) T-independent.
const REF_STEPS: f64 = 1000.0;
const BETA_MIN: f64 = 1e-4;
const BETA_MAX: f64 = 2e-2;
const BETA_CLAMP_LO: f64 = 1e-12;
const BETA_CLAMP_HI: f64 = 0.999;
const TERMINAL_ALPHA_BAR: f64 = 1e-4;
const COSINE_OFFSET: f64 = 0.008;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

/// Discrete timesteps with cumulative signal coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    steps: usize,
    alpha_bar: Vec<f64>,
}

/// Unclamped squared-cosine signal profile at progress `u = t/T`.
pub fn cosine_alpha_bar(u: f64) -> f64 {
    let f = |x: f64| {
        let arg = (x + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2;
        arg.cos().powi(2)
    };
    f(u) / f(0.0)
}

pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::invalid("schedule needs at least 2 steps"));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::Linear => {
            let scale = REF_STEPS / steps as f64;
            (0..steps)
                .map(|i| {
                    let frac = i as f64 / (steps - 1) as f64;
                    let beta = (BETA_MIN + frac * (BETA_MAX - BETA_MIN)) * scale;
                    beta.clamp(BETA_CLAMP_LO, BETA_CLAMP_HI)
                })
                .collect()
        }
        ScheduleKind::Cosine => (1..=steps)
            .map(|t| {
                let cur = cosine_alpha_bar(t as f64 / steps as f64);
                let prev = cosine_alpha_bar((t - 1) as f64 / steps as f64);
                (1.0 - cur / prev).clamp(BETA_CLAMP_LO, BETA_CLAMP_HI)
            })
            .collect(),
    };
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    for (i, beta) in betas.iter().enumerate() {
        let prev = *alpha_bar.last().unwrap();
        // The beta clamp keeps per-step signal ratios sane; if that leaves
        // too much signal at the end (tiny step counts), widen the final
        // step just enough to meet the terminal bound.
        let beta = if i == steps - 1 && prev * (1.0 - beta) > TERMINAL_ALPHA_BAR {
            // Aim slightly inside the bound so rounding cannot poke above it.
            1.0 - 0.5 * TERMINAL_ALPHA_BAR / prev
        } else {
            *beta
        };
        alpha_bar.push(prev * (1.0 - beta));
    }
    let schedule = NoiseSchedule { steps, alpha_bar };
    schedule.validate()?;
    Ok(schedule)
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Cumulative signal coefficient at timestep t (0 <= t <= T).
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Noise-to-signal ratio sqrt((1 - alpha_bar) / alpha_bar), the natural
    /// integration variable for the probability-flow ODE.
    pub fn sigma_tilde(&self, t: usize) -> f64 {
        let ab = self.alpha_bar[t];
        ((1.0 - ab) / ab).sqrt()
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t > self.steps {
            return Err(Error::invalid(format!(
                "timestep {t} out of range 0..={}",
                self.steps
            )));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.alpha_bar[0] != 1.0 {
            return Err(Error::Internal("alpha_bar[0] must be 1".into()));
        }
        if self.alpha_bar[self.steps] > TERMINAL_ALPHA_BAR {
            return Err(Error::Internal(format!(
                "alpha_bar[T] = {} exceeds terminal bound {TERMINAL_ALPHA_BAR}",
                self.alpha_bar[self.steps]
            )));
        }
        for t in 1..=self.steps {
            let (prev, cur) = (self.alpha_bar[t - 1], self.alpha_bar[t]);
            if !(cur > 0.0 && cur <= 1.0 && cur < prev) {
                return Err(Error::Internal(format!(
                    "alpha_bar not strictly decreasing in (0,1] at t={t}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_step_count() {
        assert!(matches!(
            make_schedule(1, ScheduleKind::Linear),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn linear_t2_monotone() {
        let s = make_schedule(2, ScheduleKind::Linear).unwrap();
        assert_eq!(s.alpha_bar(0), 1.0);
        assert!(s.alpha_bar(1) < s.alpha_bar(0));
        assert!(s.alpha_bar(2) < s.alpha_bar(1));
    }

    // Oracle: accumulate the clamped betas with an independent loop and
    // check the terminal bound directly.
    #[test]
    fn linear_t32_terminal_bound() {
        let s = make_schedule(32, ScheduleKind::Linear).unwrap();
        let mut prod = 1.0;
        for i in 0..32 {
            let beta =
                ((1e-4 + i as f64 / 31.0 * (2e-2 - 1e-4)) * (1000.0 / 32.0)).clamp(1e-12, 0.999);
            prod *= 1.0 - beta;
        }
        assert!((s.alpha_bar(32) - prod).abs() < 1e-15);
        assert!(s.alpha_bar(32) <= 1e-4);
    }

    // Oracle: closed-form squared-cosine profile evaluated independently.
    #[test]
    fn cosine_t32_midpoint_matches_closed_form() {
        let s = make_schedule(32, ScheduleKind::Cosine).unwrap();
        let f = |x: f64| ((x + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2).cos().powi(2);
        let expected = f(0.5) / f(0.0);
        assert!((s.alpha_bar(16) - expected).abs() < 1e-12);
    }

    #[test]
    fn invariants_hold_across_sizes_and_kinds() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
            for steps in [2, 3, 5, 8, 16, 32, 64, 200] {
                let s = make_schedule(steps, kind).unwrap();
                assert_eq!(s.alpha_bar(0), 1.0);
                assert!(s.alpha_bar(steps) <= 1e-4, "{kind:?} T={steps}");
                for t in 1..=steps {
                    assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
                    assert!(s.alpha_bar(t) > 0.0);
                }
            }
        }
    }
}
