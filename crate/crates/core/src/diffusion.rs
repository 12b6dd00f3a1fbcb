//! Forward diffusion, classifier-free guidance, probability-flow samplers
//! and the toy linear decoder.
//!
//! The variance-preserving convention is used throughout:
//! `z_t = sqrt(alpha_bar_t) * z_0 + sqrt(1 - alpha_bar_t) * eps`.
//!
//! Sampling integrates the probability-flow ODE in rescaled coordinates
//! `x = z / sqrt(alpha_bar)` against the noise-to-signal level
//! `sigma = sqrt((1 - alpha_bar) / alpha_bar)`, where the drift is exactly
//! the guided noise prediction: `dx/dsigma = eps_hat(x * sqrt(alpha_bar), sigma)`.
//! Euler on this ODE is the classic deterministic sampler; the second-order
//! method applies a Heun predictor-corrector on the same drift.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{Condition, MixtureComponent, MixtureTarget};
use crate::schedule::NoiseSchedule;
use crate::tensor::{Latent, Video};

/// Forward diffusion: deterministic given (z0, t, eps).
pub fn forward_diffuse(
    z0: &Latent,
    t: usize,
    eps: &Latent,
    sched: &NoiseSchedule,
) -> Result<Latent> {
    sched.check_timestep(t)?;
    if !z0.same_shape(eps) {
        return Err(Error::invalid("z0 and eps shapes differ"));
    }
    let ab = sched.alpha_bar(t);
    Ok(z0.scale(ab.sqrt()).axpy((1.0 - ab).sqrt(), eps))
}

/// Convert a score into the noise-prediction parameterisation:
/// eps_hat = -sqrt(1 - alpha_bar_t) * score.
pub fn score_to_eps(score: &Latent, t: usize, sched: &NoiseSchedule) -> Result<Latent> {
    if t < 1 {
        return Err(Error::invalid("score_to_eps is defined for t >= 1"));
    }
    sched.check_timestep(t)?;
    Ok(score.scale(-(1.0 - sched.alpha_bar(t)).sqrt()))
}

/// Classifier-free guidance: eps_uncond + w * (eps_cond - eps_uncond).
pub fn cfg_combine(eps_uncond: &Latent, eps_cond: &Latent, w: f64) -> Result<Latent> {
    if w < 0.0 {
        return Err(Error::invalid("guidance scale must be non-negative"));
    }
    if !eps_uncond.same_shape(eps_cond) {
        return Err(Error::invalid("guidance inputs have different shapes"));
    }
    let mut out = eps_uncond.clone();
    for (o, (u, c)) in out
        .as_mut_slice()
        .iter_mut()
        .zip(eps_uncond.as_slice().iter().zip(eps_cond.as_slice()))
    {
        *o = u + w * (c - u);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Euler,
    Heun2,
}

/// One explicit Euler step of du/ds = f(u, s) from node s to s + h.
pub fn euler_step<F>(u: &Latent, s: f64, h: f64, mut f: F) -> Latent
where
    F: FnMut(&Latent, f64) -> Latent,
{
    let k1 = f(u, s);
    u.axpy(h, &k1)
}

/// One Heun (second-order predictor-corrector) step of du/ds = f(u, s).
pub fn heun_step<F>(u: &Latent, s: f64, h: f64, mut f: F) -> Latent
where
    F: FnMut(&Latent, f64) -> Latent,
{
    let k1 = f(u, s);
    let predictor = u.axpy(h, &k1);
    let k2 = f(&predictor, s + h);
    u.axpy(h / 2.0, &k1).axpy(h / 2.0, &k2)
}

/// Thread-safe counters for denoiser work; the primary efficiency signal.
#[derive(Debug, Default)]
pub struct EvalCounter {
    eps_evals: AtomicU64,
    sampler_steps: AtomicU64,
    decodes: AtomicU64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_eps(&self, n: u64) {
        self.eps_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_step(&self) {
        self.sampler_steps.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_decode(&self) {
        self.decodes.fetch_add(1, Ordering::Relaxed);
    }

    pub fn eps_evals(&self) -> u64 {
        self.eps_evals.load(Ordering::Relaxed)
    }

    pub fn sampler_steps(&self) -> u64 {
        self.sampler_steps.load(Ordering::Relaxed)
    }

    pub fn decodes(&self) -> u64 {
        self.decodes.load(Ordering::Relaxed)
    }
}

/// The denoising model: analytic mixture score consumed through the
/// noise-prediction interface, plus the samplers built on top of it.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub schedule: NoiseSchedule,
    pub target: MixtureTarget,
}

impl DiffusionModel {
    pub fn new(schedule: NoiseSchedule, target: MixtureTarget) -> Self {
        DiffusionModel { schedule, target }
    }

    /// Guided noise prediction at noise-to-signal level `sigma`.
    ///
    /// Counts 2 eps evaluations when guidance needs both the conditional
    /// and unconditional branches (cond present and w != 0), else 1.
    pub fn eps_hat_at(
        &self,
        z: &Latent,
        sigma: f64,
        cond: Condition,
        w: f64,
        counter: &EvalCounter,
    ) -> Result<Latent> {
        let alpha_bar = 1.0 / (1.0 + sigma * sigma);
        let noise_scale = (1.0 - alpha_bar).sqrt();
        let eps_of = |c: Condition| -> Result<Latent> {
            let score = self.target.score_at_alpha_bar(z, alpha_bar, c)?;
            Ok(score.scale(-noise_scale))
        };
        match cond {
            Condition::Null => {
                counter.add_eps(1);
                eps_of(Condition::Null)
            }
            Condition::Prompt(_) if w == 0.0 => {
                counter.add_eps(1);
                eps_of(Condition::Null)
            }
            Condition::Prompt(_) => {
                counter.add_eps(2);
                let eps_u = eps_of(Condition::Null)?;
                let eps_c = eps_of(cond)?;
                cfg_combine(&eps_u, &eps_c, w)
            }
        }
    }

    /// Probability-flow drift in rescaled coordinates:
    /// dx/dsigma = eps_hat(sqrt(alpha_bar) * x, sigma).
    pub fn drift(
        &self,
        x: &Latent,
        sigma: f64,
        cond: Condition,
        w: f64,
        counter: &EvalCounter,
    ) -> Result<Latent> {
        let alpha_bar = 1.0 / (1.0 + sigma * sigma);
        let z = x.scale(alpha_bar.sqrt());
        self.eps_hat_at(&z, sigma, cond, w, counter)
    }

    /// Posterior-mean estimate of the clean latent given z_t (Tweedie):
    /// E[z_0 | z_t] = (z_t + (1 - alpha_bar) * score(z_t)) / sqrt(alpha_bar).
    pub fn posterior_mean_z0(
        &self,
        z: &Latent,
        t: usize,
        cond: Condition,
    ) -> Result<Latent> {
        if t < 1 {
            return Err(Error::invalid("posterior mean is defined for t >= 1"));
        }
        self.schedule.check_timestep(t)?;
        let ab = self.schedule.alpha_bar(t);
        let score = self.target.score_at_alpha_bar(z, ab, cond)?;
        Ok(z.axpy(1.0 - ab, &score).scale(1.0 / ab.sqrt()))
    }

    /// One sampler step from timestep s down to s - 1.
    pub fn sampler_step(
        &self,
        z: &Latent,
        s: usize,
        method: SamplerMethod,
        cond: Condition,
        w: f64,
        counter: &EvalCounter,
    ) -> Result<Latent> {
        if s < 1 || s > self.schedule.steps() {
            return Err(Error::invalid(format!(
                "sampler step index {s} out of range 1..={}",
                self.schedule.steps()
            )));
        }
        let sigma_cur = self.schedule.sigma_tilde(s);
        let sigma_next = self.schedule.sigma_tilde(s - 1);
        let h = sigma_next - sigma_cur;
        let x = z.scale(1.0 / self.schedule.alpha_bar(s).sqrt());
        let mut failure = None;
        let mut drift = |u: &Latent, node: f64| -> Latent {
            match self.drift(u, node, cond, w, counter) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e);
                    Latent::zeros(u.frames(), u.dim())
                }
            }
        };
        let x_next = match method {
            SamplerMethod::Euler => euler_step(&x, sigma_cur, h, &mut drift),
            SamplerMethod::Heun2 => heun_step(&x, sigma_cur, h, &mut drift),
        };
        if let Some(e) = failure {
            return Err(e);
        }
        counter.add_step();
        Ok(x_next.scale(self.schedule.alpha_bar(s - 1).sqrt()))
    }

    /// Run a full trajectory from z_T down to z_0, recording the latent at
    /// every requested timestep. Returns the terminal latent, the recorded
    /// trace and the number of eps evaluations spent.
    pub fn sample_trajectory(
        &self,
        z_terminal: &Latent,
        cond: Condition,
        w: f64,
        method: SamplerMethod,
        record: &[usize],
    ) -> Result<(Latent, BTreeMap<usize, Latent>, u64)> {
        if !z_terminal.is_finite() {
            return Err(Error::invalid("initial noise must be finite"));
        }
        let counter = EvalCounter::new();
        let steps = self.schedule.steps();
        let mut trace = BTreeMap::new();
        let mut z = z_terminal.clone();
        if record.contains(&steps) {
            trace.insert(steps, z.clone());
        }
        for s in (1..=steps).rev() {
            z = self.sampler_step(&z, s, method, cond, w, &counter)?;
            if record.contains(&(s - 1)) {
                trace.insert(s - 1, z.clone());
            }
        }
        Ok((z, trace, counter.eps_evals()))
    }
}

/// Fixed linear map from latent space to "video" space, applied per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoder {
    dim: usize,
    /// Row-major D x D matrix.
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl Decoder {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for d in 0..dim {
            matrix[d * dim + d] = 1.0;
        }
        Decoder {
            dim,
            matrix,
            offset: vec![0.0; dim],
        }
    }

    pub fn scaled(dim: usize, scale: f64, offset: Vec<f64>) -> Result<Self> {
        let mut dec = Decoder::identity(dim);
        for v in &mut dec.matrix {
            *v *= scale;
        }
        if offset.len() != dim {
            return Err(Error::invalid("decoder offset has wrong dimension"));
        }
        dec.offset = offset;
        Ok(dec)
    }

    pub fn new(dim: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim || offset.len() != dim {
            return Err(Error::invalid("decoder matrix/offset has wrong shape"));
        }
        if !matrix.iter().chain(offset.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("decoder entries must be finite"));
        }
        Ok(Decoder {
            dim,
            matrix,
            offset,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decode(&self, z0: &Latent, counter: &EvalCounter) -> Result<Video> {
        if z0.dim() != self.dim {
            return Err(Error::invalid("latent dim does not match decoder"));
        }
        if !z0.is_finite() {
            return Err(Error::invalid("latent must be finite"));
        }
        let mut data = Vec::with_capacity(z0.frames() * self.dim);
        for f in 0..z0.frames() {
            let frame = z0.frame(f);
            for row in 0..self.dim {
                let mut acc = self.offset[row];
                for (col, v) in frame.iter().enumerate() {
                    acc += self.matrix[row * self.dim + col] * v;
                }
                data.push(acc);
            }
        }
        counter.add_decode();
        Video::from_vec(z0.frames(), self.dim, data)
    }

    /// If A^T A = c^2 I, the conformal scale c; else None.
    pub fn conformal_scale(&self) -> Option<f64> {
        let d = self.dim;
        let mut c2 = 0.0;
        for row in 0..d {
            c2 += self.matrix[row * d] * self.matrix[row * d];
        }
        for i in 0..d {
            for j in i..d {
                let dot: f64 = (0..d)
                    .map(|row| self.matrix[row * d + i] * self.matrix[row * d + j])
                    .sum();
                let expected = if i == j { c2 } else { 0.0 };
                if (dot - expected).abs() > 1e-9 * c2.max(1.0) {
                    return None;
                }
            }
        }
        if c2 > 0.0 {
            Some(c2.sqrt())
        } else {
            None
        }
    }

    /// Push the latent-space mixture through the decoder. Conformal maps
    /// keep the per-component covariance isotropic, so the result is again
    /// a valid mixture target; anything else is rejected.
    pub fn push_mixture(&self, target: &MixtureTarget) -> Result<MixtureTarget> {
        if target.dim() != self.dim {
            return Err(Error::invalid("mixture dim does not match decoder"));
        }
        let scale = self.conformal_scale().ok_or_else(|| {
            Error::invalid("decoder must be a scaled orthogonal map to transport the mixture")
        })?;
        let apply = |v: &[f64], add_offset: bool| -> Vec<f64> {
            (0..self.dim)
                .map(|row| {
                    let mut acc = if add_offset { self.offset[row] } else { 0.0 };
                    for (col, x) in v.iter().enumerate() {
                        acc += self.matrix[row * self.dim + col] * x;
                    }
                    acc
                })
                .collect()
        };
        let components = target
            .components()
            .iter()
            .map(|c| MixtureComponent {
                mu: apply(&c.mu, true),
                velocity: apply(&c.velocity, false),
                weight: c.weight,
            })
            .collect();
        MixtureTarget::new(
            target.frames(),
            target.dim(),
            components,
            scale * target.component_std(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::schedule::{make_schedule, ScheduleKind};
    use rand::Rng;

    fn setup() -> (DiffusionModel, EvalCounter) {
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let target = MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 0.25).unwrap();
        (DiffusionModel::new(sched, target), EvalCounter::new())
    }

    #[test]
    fn forward_diffuse_boundary_and_zero_signal() {
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let mut rng = stream(1, "fd", &[]);
        let z0 = Latent::standard_normal(4, 4, &mut rng);
        let eps = Latent::standard_normal(4, 4, &mut rng);
        let at0 = forward_diffuse(&z0, 0, &eps, &sched).unwrap();
        assert_eq!(at0, z0);

        let zero = Latent::zeros(4, 4);
        let t = 16;
        let zt = forward_diffuse(&zero, t, &eps, &sched).unwrap();
        let expected = eps.scale((1.0 - sched.alpha_bar(t)).sqrt());
        assert!(zt.max_abs_diff(&expected) < 1e-15);

        assert!(forward_diffuse(&z0, 33, &eps, &sched).is_err());
    }

    // Oracle: independent scalar evaluation of the closed form.
    #[test]
    fn forward_diffuse_midpoint_entries() {
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let mut rng = stream(2, "fd", &[]);
        let z0 = Latent::standard_normal(4, 4, &mut rng);
        let eps = Latent::standard_normal(4, 4, &mut rng);
        let t = 16;
        let zt = forward_diffuse(&z0, t, &eps, &sched).unwrap();
        let ab = sched.alpha_bar(t);
        for i in 0..16 {
            let expected = ab.sqrt() * z0.as_slice()[i] + (1.0 - ab).sqrt() * eps.as_slice()[i];
            assert!((zt.as_slice()[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn score_eps_round_trip() {
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let mut rng = stream(3, "roundtrip", &[]);
        let score = Latent::standard_normal(4, 4, &mut rng);
        let t = 9;
        let eps = score_to_eps(&score, t, &sched).unwrap();
        // eps = -sqrt(1-ab) * score is linear and exactly invertible.
        let back = eps.scale(-1.0 / (1.0 - sched.alpha_bar(t)).sqrt());
        assert!(back.max_abs_diff(&score) < 1e-15);
        assert_eq!(score_to_eps(&score.scale(2.0), t, &sched).unwrap(),
                   eps.scale(2.0));
        assert!(score_to_eps(&Latent::zeros(4, 4), t, &sched).unwrap().norm() == 0.0);
    }

    #[test]
    fn cfg_endpoints_and_affinity() {
        let mut rng = stream(4, "cfg", &[]);
        let a = Latent::standard_normal(4, 4, &mut rng);
        let b = Latent::standard_normal(4, 4, &mut rng);
        assert_eq!(cfg_combine(&a, &b, 0.0).unwrap(), a);
        assert!(cfg_combine(&a, &b, 1.0).unwrap().max_abs_diff(&b) < 1e-15);
        assert!(cfg_combine(&a, &b, -0.1).is_err());
        // cfg(a,b,w1) + cfg(a,b,w2) - a == cfg(a,b,w1+w2) exactly.
        let lhs = cfg_combine(&a, &b, 1.5)
            .unwrap()
            .axpy(1.0, &cfg_combine(&a, &b, 2.25).unwrap())
            .axpy(-1.0, &a);
        let rhs = cfg_combine(&a, &b, 3.75).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn synthetic_drift_step_factors() {
        let z = Latent::from_vec(1, 2, vec![1.0, -2.0]).unwrap();
        let decay = |u: &Latent, _s: f64| u.scale(-1.0);
        let h = 0.125;
        let euler = euler_step(&z, 0.0, h, decay);
        let heun = heun_step(&z, 0.0, h, decay);
        let euler_factor = 1.0 - h;
        let heun_factor = 1.0 - h + h * h / 2.0;
        assert!(euler.max_abs_diff(&z.scale(euler_factor)) < 1e-15);
        assert!(heun.max_abs_diff(&z.scale(heun_factor)) < 1e-15);
    }

    #[test]
    fn eval_counts_per_step() {
        let (model, counter) = setup();
        let mut rng = stream(5, "count", &[]);
        let z = Latent::standard_normal(4, 4, &mut rng);
        model
            .sampler_step(&z, 16, SamplerMethod::Heun2, Condition::Prompt(0), 5.0, &counter)
            .unwrap();
        assert_eq!(counter.eps_evals(), 4); // 2 drift evals x 2 branches
        assert_eq!(counter.sampler_steps(), 1);

        let counter = EvalCounter::new();
        model
            .sampler_step(&z, 16, SamplerMethod::Euler, Condition::Prompt(0), 0.0, &counter)
            .unwrap();
        assert_eq!(counter.eps_evals(), 1);

        let counter = EvalCounter::new();
        model
            .sampler_step(&z, 16, SamplerMethod::Heun2, Condition::Null, 5.0, &counter)
            .unwrap();
        assert_eq!(counter.eps_evals(), 2);
    }

    #[test]
    fn trajectory_eval_count_and_trace() {
        let (model, _) = setup();
        let mut rng = stream(6, "traj", &[]);
        let z_t = Latent::standard_normal(4, 4, &mut rng);
        let (_z0, trace, evals) = model
            .sample_trajectory(&z_t, Condition::Prompt(1), 5.0, SamplerMethod::Heun2, &[])
            .unwrap();
        assert!(trace.is_empty());
        assert_eq!(evals, 32 * 2 * 2);

        let (_z0, trace, _) = model
            .sample_trajectory(
                &z_t,
                Condition::Prompt(1),
                5.0,
                SamplerMethod::Heun2,
                &[0, 10, 20, 32],
            )
            .unwrap();
        assert_eq!(trace.len(), 4);
        assert_eq!(trace[&32], z_t);
    }

    // Heun local error is O(h^3): halving the step divides the one-step
    // error against a fine reference by roughly 8.
    #[test]
    fn heun_local_error_order() {
        let (model, counter) = setup();
        let cond = Condition::Prompt(0);
        let w = 5.0;
        let sigma0 = 2.0;
        let mut rng = stream(7, "local", &[]);
        let x0 = Latent::standard_normal(4, 4, &mut rng).scale(2.0);
        let drift =
            |u: &Latent, s: f64| model.drift(u, s, cond, w, &counter).expect("drift");
        let reference = |h: f64| {
            let fine = 64;
            let mut u = x0.clone();
            let mut s = sigma0;
            for _ in 0..fine {
                u = heun_step(&u, s, h / fine as f64, drift);
                s += h / fine as f64;
            }
            u
        };
        let h = -0.125;
        let err_h = heun_step(&x0, sigma0, h, drift).max_abs_diff(&reference(h));
        let mut u_half = heun_step(&x0, sigma0, h / 2.0, drift);
        u_half = heun_step(&u_half, sigma0 + h / 2.0, h / 2.0, drift);
        let err_half = u_half.max_abs_diff(&reference(h));
        let ratio = err_h / err_half;
        // O(h^3) one-step error composed over two half-steps: ~4x.
        assert!((2.5..=7.0).contains(&ratio), "ratio {ratio}");
    }

    // Marginal variance preservation: unit-variance z0 plus standard normal
    // eps keeps Var(z_t entries) at 1 for every t.
    #[test]
    fn forward_diffuse_preserves_variance_at_every_t() {
        let sched = make_schedule(32, ScheduleKind::Linear).unwrap();
        let draws = 10_000;
        for t in 1..=32 {
            let mut rng = stream(20, "vp", &[t as u64]);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut n = 0.0;
            for _ in 0..draws {
                let z0 = Latent::standard_normal(2, 2, &mut rng);
                let eps = Latent::standard_normal(2, 2, &mut rng);
                let zt = forward_diffuse(&z0, t, &eps, &sched).unwrap();
                for v in zt.as_slice() {
                    sum += v;
                    sum_sq += v * v;
                    n += 1.0;
                }
            }
            let var = sum_sq / n - (sum / n).powi(2);
            assert!((0.97..=1.03).contains(&var), "t={t}: var {var}");
        }
    }

    // Terminal samples of the probability-flow sampler approximate the data
    // mixture: per-component occupancy within 3 sigma of the prior weights.
    #[test]
    fn terminal_occupancy_matches_prior_weights() {
        let (model, counter) = setup();
        let trajectories = 5000;
        let k = model.target.num_components();
        let mut counts = vec![0usize; k];
        for i in 0..trajectories {
            let mut rng = stream(21, "occupancy", &[i as u64]);
            let mut z = Latent::standard_normal(4, 4, &mut rng);
            for s in (1..=32).rev() {
                z = model
                    .sampler_step(&z, s, SamplerMethod::Heun2, Condition::Null, 0.0, &counter)
                    .unwrap();
            }
            // Assign to the component with the highest whole-latent density.
            let best = (0..k)
                .max_by(|&a, &b| {
                    let da = model.target.mean(a).axpy(-1.0, &z).norm();
                    let db = model.target.mean(b).axpy(-1.0, &z).norm();
                    db.total_cmp(&da)
                })
                .unwrap();
            counts[best] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let w = model.target.weight(i);
            let sigma = (w * (1.0 - w) / trajectories as f64).sqrt();
            let occ = c as f64 / trajectories as f64;
            assert!(
                (occ - w).abs() <= 3.0 * sigma,
                "component {i}: occupancy {occ:.4} vs weight {w:.4} (3 sigma = {:.4})",
                3.0 * sigma
            );
        }
    }

    // Regression: the cosine schedule's terminal noise level must stay
    // mild enough that few-step trajectories land near the data manifold
    // instead of blowing up (its last beta is clamped for exactly this).
    #[test]
    fn cosine_schedule_trajectories_stay_sane() {
        let sched = make_schedule(32, ScheduleKind::Cosine).unwrap();
        let target = MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 0.25).unwrap();
        let model = DiffusionModel::new(sched, target);
        let mut worst: f64 = 0.0;
        for i in 0..50u64 {
            let mut rng = stream(22, "cosine-sane", &[i]);
            let z_t = Latent::standard_normal(4, 4, &mut rng);
            let (z0, _, _) = model
                .sample_trajectory(&z_t, Condition::Prompt((i % 4) as usize), 5.0,
                                   SamplerMethod::Heun2, &[])
                .unwrap();
            assert!(z0.is_finite());
            worst = worst.max(z0.norm());
        }
        // Clean samples have norm ~ |mean| + noise ~ 3; allow slack.
        assert!(worst < 12.0, "terminal norm {worst}");
    }

    // Global second-order convergence: halving the step size reduces the
    // terminal error against a 64x-finer reference by a factor near 4.
    #[test]
    fn heun_global_convergence_order() {
        let (model, counter) = setup();
        let cond = Condition::Prompt(2);
        let w = 5.0;
        let drift =
            |u: &Latent, s: f64| model.drift(u, s, cond, w, &counter).expect("drift");
        let mut rng = stream(9, "global", &[]);
        let x0 = Latent::standard_normal(4, 4, &mut rng).scale(3.0);
        let sigma_hi = 4.0;
        let integrate = |n: usize| {
            let h = -sigma_hi / n as f64;
            let mut u = x0.clone();
            for i in 0..n {
                u = heun_step(&u, sigma_hi + i as f64 * h, h, drift);
            }
            u
        };
        let reference = integrate(96 * 64);
        let err_coarse = integrate(48).max_abs_diff(&reference);
        let err_fine = integrate(96).max_abs_diff(&reference);
        let factor = err_coarse / err_fine;
        assert!(
            (3.5..=4.5).contains(&factor),
            "convergence factor {factor} outside [3.5, 4.5]"
        );
    }

    #[test]
    fn decoder_identity_scale_and_random_matrix() {
        let counter = EvalCounter::new();
        let mut rng = stream(8, "decode", &[]);
        let z0 = Latent::standard_normal(4, 4, &mut rng);
        let id = Decoder::identity(4);
        let video = id.decode(&z0, &counter).unwrap();
        assert_eq!(video.as_slice(), z0.as_slice());

        let doubled = Decoder::scaled(4, 2.0, vec![0.0; 4]).unwrap();
        let video2 = doubled.decode(&z0, &counter).unwrap();
        for (a, b) in video2.as_slice().iter().zip(z0.as_slice()) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }

        // Oracle: independent matrix-vector product.
        let matrix: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
        let offset: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let dec = Decoder::new(4, matrix.clone(), offset.clone()).unwrap();
        let video3 = dec.decode(&z0, &counter).unwrap();
        for f in 0..4 {
            for row in 0..4 {
                let mut expected = offset[row];
                for col in 0..4 {
                    expected += matrix[row * 4 + col] * z0.frame(f)[col];
                }
                assert!((video3.frame(f)[row] - expected).abs() < 1e-14);
            }
        }
        assert_eq!(counter.decodes(), 3);
    }

    #[test]
    fn conformal_detection() {
        let id = Decoder::identity(3);
        assert!((id.conformal_scale().unwrap() - 1.0).abs() < 1e-12);
        let sc = Decoder::scaled(3, 1.25, vec![0.1, 0.2, 0.3]).unwrap();
        assert!((sc.conformal_scale().unwrap() - 1.25).abs() < 1e-12);
        let mut skew = Decoder::identity(2);
        skew.matrix[1] = 0.5;
        assert!(skew.conformal_scale().is_none());
    }
}
