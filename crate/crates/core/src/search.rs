//! Inference-time search: reward-guided resampling and pruning over
//! candidate denoising trajectories, plus best-of-N and beam baselines.
//!
//! The engine keeps N candidate trajectories. At each scheduled scoring
//! step the candidates are scored by the latent reward model, the scores
//! are softmax-normalised into weights, a multinomial draw with uniqueness
//! decides who survives, and weights accumulate as evidence. At the last
//! scheduled step the candidate with the highest cumulative weight is kept
//! and denoised to the end. Evaluation accounting is exact and recorded in
//! the trace.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{Decoder, DiffusionModel, EvalCounter, SamplerMethod};
use crate::error::{Error, Result};
use crate::mixture::{Condition, MixtureTarget};
use crate::oracle::{oracle_reward, OracleCalibration, RewardVector};
use crate::reward::LatentScorer;
use crate::rng::stream;
use crate::tensor::{Latent, Video};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Candidate count N.
    pub num_candidates: usize,
    /// Noise-mixing coefficient eta in [0, 1].
    pub noise_mixing: f64,
    /// Softmax temperature tau > 0.
    pub temperature: f64,
    /// Scoring steps (completed sampler steps), sorted ascending in 1..T-1.
    pub schedule: Vec<usize>,
    /// Composite-reward weights over (VQ, MQ, TA), summing to 1.
    pub reward_weights: [f64; 3],
    /// Beam width for the beam baseline.
    pub beam_width: usize,
    pub master_seed: u64,
}

impl SearchConfig {
    pub fn validate(&self, total_steps: usize) -> Result<()> {
        if self.num_candidates < 1 {
            return Err(Error::invalid("need at least one candidate"));
        }
        if !(0.0..=1.0).contains(&self.noise_mixing) {
            return Err(Error::invalid("noise mixing must be in [0, 1]"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::invalid("temperature must be positive"));
        }
        if self.schedule.is_empty() {
            return Err(Error::invalid(
                "scoring schedule is empty; pruning would never fire",
            ));
        }
        for w in self.schedule.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("schedule must be strictly ascending"));
            }
        }
        let last = *self.schedule.last().unwrap();
        let first = *self.schedule.first().unwrap();
        if first < 1 || last >= total_steps {
            return Err(Error::invalid(format!(
                "schedule must lie in 1..{total_steps}"
            )));
        }
        let sum: f64 = self.reward_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("reward weights must sum to 1"));
        }
        if self.beam_width < 1 || self.beam_width > self.num_candidates {
            return Err(Error::invalid("beam width must be in 1..=N"));
        }
        Ok(())
    }

    /// Rescale a reference schedule (steps out of `from_steps`) onto a run
    /// with `to_steps` sampler steps, dropping duplicates.
    pub fn rescale_schedule(reference: &[usize], from_steps: usize, to_steps: usize) -> Vec<usize> {
        let mut out: Vec<usize> = reference
            .iter()
            .map(|&s| {
                let scaled = (s as f64 * to_steps as f64 / from_steps as f64).round() as usize;
                scaled.clamp(1, to_steps.saturating_sub(1))
            })
            .collect();
        out.dedup();
        out
    }
}

/// One candidate trajectory.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub latent: Latent,
    pub seed_id: usize,
    pub cumulative_weight: f64,
    /// Private stream for any per-candidate randomness.
    pub rng: ChaCha8Rng,
}

/// Perturb a base Gaussian noise into N candidates:
/// z^(i) = sqrt(1 - eta^2) * base + eta * eps_i, with candidate 0 keeping
/// the base itself so N = 1 degenerates to vanilla sampling.
pub fn init_candidates(
    base: &Latent,
    n: usize,
    eta: f64,
    master_seed: u64,
) -> Result<Vec<Candidate>> {
    if n < 1 {
        return Err(Error::invalid("need at least one candidate"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("noise mixing must be in [0, 1]"));
    }
    if !base.is_finite() {
        return Err(Error::invalid("base noise must be finite"));
    }
    let keep = (1.0 - eta * eta).sqrt();
    (0..n)
        .map(|i| {
            let mut rng = stream(master_seed, "candidate", &[i as u64]);
            let latent = if i == 0 {
                base.clone()
            } else {
                let eps = Latent::standard_normal(base.frames(), base.dim(), &mut rng);
                base.scale(keep).axpy(eta, &eps)
            };
            Ok(Candidate {
                latent,
                seed_id: i,
                cumulative_weight: 0.0,
                rng,
            })
        })
        .collect()
}

/// Scalar reward for the softmax: weighted sum of the three dimensions.
pub fn composite_reward(r: &RewardVector, weights: &[f64; 3]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("reward weights must sum to 1"));
    }
    Ok(weights[0] * r.vq + weights[1] * r.mq + weights[2] * r.ta)
}

/// Temperature softmax with max-subtraction; weights sum to 1.
pub fn softmax_weights(rewards: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::invalid("temperature must be positive"));
    }
    if rewards.is_empty() {
        return Err(Error::invalid("no rewards to normalise"));
    }
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = rewards.iter().map(|r| (tau * (r - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Multinomial(N; weights) with replacement, keeping unique indices only.
/// Returns the draw multiplicities and the surviving index set (ascending).
pub fn resample_unique<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut multiplicities = vec![0usize; weights.len()];
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let ix = cdf.partition_point(|&c| c < u).min(weights.len() - 1);
        multiplicities[ix] += 1;
    }
    let survivors = multiplicities
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(i, _)| i)
        .collect();
    (multiplicities, survivors)
}

/// Chance that a candidate with weight pi appears at least once in N draws.
pub fn survival_probability(pi: f64, n: usize) -> f64 {
    1.0 - (1.0 - pi).powi(n as i32)
}

/// Additive evidence accumulation across scoring steps.
pub fn accumulate(c_prev: f64, pi: f64) -> f64 {
    c_prev + pi
}

/// Index (within `candidates`) of the highest cumulative weight; exact ties
/// go to the lowest seed_id.
pub fn final_prune(candidates: &[Candidate]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Internal("no candidates left to prune".into()));
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let cur = &candidates[best];
        if c.cumulative_weight > cur.cumulative_weight
            || (c.cumulative_weight == cur.cumulative_weight && c.seed_id < cur.seed_id)
        {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoringEvent {
    /// Completed sampler steps when scoring fired.
    pub step: usize,
    /// Timestep of the latents being scored (T - step).
    pub t_scored: usize,
    /// Timestep passed to the reward model (the pre-step timestep).
    pub t_passed: usize,
    pub seed_ids: Vec<usize>,
    pub rewards: Vec<[f64; 3]>,
    pub composite: Vec<f64>,
    /// Softmax weights (empty for methods that do not resample).
    pub weights: Vec<f64>,
    /// Multinomial multiplicities (empty for methods that do not resample).
    pub multiplicities: Vec<usize>,
    /// Seed ids surviving this event.
    pub survivors: Vec<usize>,
    /// Cumulative scores of the survivors, aligned with `survivors`.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    /// Sampler step-units: one candidate advanced by one step.
    pub step_units: u64,
    /// Denoiser evaluations in eps units.
    pub eps_evals: u64,
    /// Latent reward model invocations.
    pub reward_evals: u64,
    pub decode_count: u64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub denoiser_s: f64,
    pub reward_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchTrace {
    pub schema_version: u32,
    pub method: String,
    pub cond: Condition,
    pub base_noise: Latent,
    pub config: SearchConfig,
    pub events: Vec<ScoringEvent>,
    pub winner_seed_id: usize,
    pub counts: EvalCounts,
    pub timings: PhaseTimings,
}

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub struct Stopwatch(std::time::Instant);
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(std::time::Instant::now())
        }
        pub fn seconds(&self) -> f64 {
            self.0.elapsed().as_secs_f64()
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Stopwatch;
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }
        pub fn seconds(&self) -> f64 {
            0.0
        }
    }
}

use clock::Stopwatch;

/// Epsilon evaluations per sampler step-unit for the given configuration.
pub fn eps_per_step_unit(method: SamplerMethod, cond: Condition, w: f64) -> u64 {
    let drift_evals = match method {
        SamplerMethod::Euler => 1,
        SamplerMethod::Heun2 => 2,
    };
    let branches = match cond {
        Condition::Prompt(_) if w != 0.0 => 2,
        _ => 1,
    };
    drift_evals * branches
}

pub struct SearchContext<'a> {
    pub model: &'a DiffusionModel,
    pub decoder: &'a Decoder,
    pub cfg_w: f64,
    pub method: SamplerMethod,
    pub counter: &'a EvalCounter,
}

/// Plain single-trajectory sampling, traced with zero reward evaluations.
pub fn run_vanilla(
    base_noise: &Latent,
    cond: Condition,
    config: &SearchConfig,
    ctx: &SearchContext,
) -> Result<(Video, SearchTrace)> {
    let total = Stopwatch::start();
    let steps = ctx.model.schedule.steps();
    let denoiser = Stopwatch::start();
    let mut z = base_noise.clone();
    for s in (1..=steps).rev() {
        z = ctx
            .model
            .sampler_step(&z, s, ctx.method, cond, ctx.cfg_w, ctx.counter)?;
    }
    let denoiser_s = denoiser.seconds();
    let decode = Stopwatch::start();
    let video = ctx.decoder.decode(&z, ctx.counter)?;
    let decode_s = decode.seconds();
    let trace = SearchTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        method: "vanilla".into(),
        cond,
        base_noise: base_noise.clone(),
        config: config.clone(),
        events: Vec::new(),
        winner_seed_id: 0,
        counts: EvalCounts {
            step_units: steps as u64,
            eps_evals: steps as u64 * eps_per_step_unit(ctx.method, cond, ctx.cfg_w),
            reward_evals: 0,
            decode_count: 1,
        },
        timings: PhaseTimings {
            denoiser_s,
            reward_s: 0.0,
            decode_s,
            total_s: total.seconds(),
        },
    };
    Ok((video, trace))
}

fn clamped_scores(
    scorer: &dyn LatentScorer,
    cands: &[Candidate],
    cond: Condition,
    t_passed: usize,
    weights: &[f64; 3],
    label: &str,
    events: &[ScoringEvent],
) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let mut rewards = Vec::with_capacity(cands.len());
    let mut composite = Vec::with_capacity(cands.len());
    for c in cands {
        let raw = scorer.predict(&c.latent, cond, t_passed)?;
        if !raw.iter().all(|v| v.is_finite()) {
            let partial = serde_json::to_string(events).unwrap_or_default();
            return Err(Error::SearchAborted(format!(
                "{label}: non-finite reward {raw:?} for seed {}; \
                 events so far: {partial}",
                c.seed_id
            )));
        }
        let clamped = [
            raw[0].clamp(0.0, 1.0),
            raw[1].clamp(0.0, 1.0),
            raw[2].clamp(0.0, 1.0),
        ];
        rewards.push(clamped);
        composite.push(composite_reward(
            &RewardVector::from_array(clamped),
            weights,
        )?);
    }
    Ok((rewards, composite))
}

/// Reward-guided resampling and pruning over the full denoising run.
pub fn latsearch(
    base_noise: &Latent,
    cond: Condition,
    config: &SearchConfig,
    ctx: &SearchContext,
    scorer: &dyn LatentScorer,
) -> Result<(Video, SearchTrace)> {
    let total = Stopwatch::start();
    let steps = ctx.model.schedule.steps();
    config.validate(steps)?;
    let final_step = *config.schedule.last().unwrap();

    let sw = Stopwatch::start();
    let mut cands = init_candidates(
        base_noise,
        config.num_candidates,
        config.noise_mixing,
        config.master_seed,
    )?;
    let mut denoiser_s = sw.seconds();
    let mut events: Vec<ScoringEvent> = Vec::new();
    let mut step_units: u64 = 0;
    let mut reward_evals: u64 = 0;
    let mut reward_s = 0.0;

    for j in 1..=steps {
        let t_in = steps - j + 1;
        let sw = Stopwatch::start();
        for c in cands.iter_mut() {
            c.latent = ctx
                .model
                .sampler_step(&c.latent, t_in, ctx.method, cond, ctx.cfg_w, ctx.counter)?;
        }
        denoiser_s += sw.seconds();
        step_units += cands.len() as u64;

        if config.schedule.contains(&j) {
            let t_scored = steps - j;
            // The reward phase covers scoring plus the resampling and
            // bookkeeping it drives.
            let sw = Stopwatch::start();
            let (rewards, composite) = clamped_scores(
                scorer,
                &cands,
                cond,
                t_in,
                &config.reward_weights,
                &format!("latsearch step {j}"),
                &events,
            )?;
            reward_evals += cands.len() as u64;

            let weights = softmax_weights(&composite, config.temperature)?;
            for (c, &pi) in cands.iter_mut().zip(&weights) {
                c.cumulative_weight = accumulate(c.cumulative_weight, pi);
            }
            let mut resample_rng = stream(config.master_seed, "resample", &[j as u64]);
            let (multiplicities, survivor_positions) =
                resample_unique(&weights, cands.len(), &mut resample_rng);

            let seed_ids: Vec<usize> = cands.iter().map(|c| c.seed_id).collect();
            let mut keep = vec![false; cands.len()];
            for &pos in &survivor_positions {
                keep[pos] = true;
            }
            let mut survivors: Vec<Candidate> = cands
                .into_iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(c, _)| c)
                .collect();

            if j == final_step && survivors.len() > 1 {
                let winner = final_prune(&survivors)?;
                survivors = vec![survivors.swap_remove(winner)];
            }

            events.push(ScoringEvent {
                step: j,
                t_scored,
                t_passed: t_in,
                seed_ids,
                rewards,
                composite,
                weights,
                multiplicities,
                survivors: survivors.iter().map(|c| c.seed_id).collect(),
                cumulative: survivors.iter().map(|c| c.cumulative_weight).collect(),
            });
            cands = survivors;
            reward_s += sw.seconds();
        }
    }

    if cands.len() != 1 {
        return Err(Error::Internal(format!(
            "{} candidates alive after the final scheduled step",
            cands.len()
        )));
    }
    let winner = cands.pop().ok_or_else(|| Error::Internal("no winner".into()))?;
    let sw = Stopwatch::start();
    let video = ctx.decoder.decode(&winner.latent, ctx.counter)?;
    let decode_s = sw.seconds();

    let trace = SearchTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        method: "latsearch".into(),
        cond,
        base_noise: base_noise.clone(),
        config: config.clone(),
        events,
        winner_seed_id: winner.seed_id,
        counts: EvalCounts {
            step_units,
            eps_evals: step_units * eps_per_step_unit(ctx.method, cond, ctx.cfg_w),
            reward_evals,
            decode_count: 1,
        },
        timings: PhaseTimings {
            denoiser_s,
            reward_s,
            decode_s,
            total_s: total.seconds(),
        },
    };
    Ok((video, trace))
}

/// Judge used by the best-of-N baseline.
pub enum BestOfNJudge<'a> {
    /// Ground-truth oracle on the decoded video (an upper bound).
    Oracle {
        target: &'a MixtureTarget,
        calibration: &'a OracleCalibration,
    },
    /// The trained reward model applied to the terminal latent at t = 0.
    Model(&'a dyn LatentScorer),
}

/// Run N full trajectories, decode and judge all, return the argmax.
pub fn best_of_n(
    base_noises: &[Latent],
    cond: Condition,
    config: &SearchConfig,
    ctx: &SearchContext,
    judge: &BestOfNJudge,
) -> Result<(Video, SearchTrace)> {
    if base_noises.is_empty() {
        return Err(Error::invalid("best-of-N needs at least one base noise"));
    }
    let total = Stopwatch::start();
    let steps = ctx.model.schedule.steps();
    let mut denoiser_s = 0.0;
    let mut decode_s = 0.0;
    let mut reward_s = 0.0;
    let mut reward_evals = 0u64;
    let mut videos = Vec::with_capacity(base_noises.len());
    let mut rewards = Vec::with_capacity(base_noises.len());
    let mut composite = Vec::with_capacity(base_noises.len());
    for base in base_noises {
        let sw = Stopwatch::start();
        let mut z = base.clone();
        for s in (1..=steps).rev() {
            z = ctx
                .model
                .sampler_step(&z, s, ctx.method, cond, ctx.cfg_w, ctx.counter)?;
        }
        denoiser_s += sw.seconds();
        let sw = Stopwatch::start();
        let video = ctx.decoder.decode(&z, ctx.counter)?;
        decode_s += sw.seconds();
        let sw = Stopwatch::start();
        let r = match judge {
            BestOfNJudge::Oracle {
                target,
                calibration,
            } => oracle_reward(&video, cond, target, calibration)?.as_array(),
            BestOfNJudge::Model(scorer) => {
                reward_evals += 1;
                let raw = scorer.predict(&z, cond, 0)?;
                [
                    raw[0].clamp(0.0, 1.0),
                    raw[1].clamp(0.0, 1.0),
                    raw[2].clamp(0.0, 1.0),
                ]
            }
        };
        reward_s += sw.seconds();
        composite.push(composite_reward(
            &RewardVector::from_array(r),
            &config.reward_weights,
        )?);
        rewards.push(r);
        videos.push(video);
    }
    let mut winner = 0;
    for i in 1..composite.len() {
        if composite[i] > composite[winner] {
            winner = i;
        }
    }
    let n = base_noises.len();
    let event = ScoringEvent {
        step: steps,
        t_scored: 0,
        t_passed: 0,
        seed_ids: (0..n).collect(),
        rewards,
        composite,
        weights: Vec::new(),
        multiplicities: Vec::new(),
        survivors: vec![winner],
        cumulative: Vec::new(),
    };
    let trace = SearchTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        method: "best_of_n".into(),
        cond,
        base_noise: base_noises[0].clone(),
        config: config.clone(),
        events: vec![event],
        winner_seed_id: winner,
        counts: EvalCounts {
            step_units: (n * steps) as u64,
            eps_evals: (n * steps) as u64 * eps_per_step_unit(ctx.method, cond, ctx.cfg_w),
            reward_evals,
            decode_count: n as u64,
        },
        timings: PhaseTimings {
            denoiser_s,
            reward_s,
            decode_s,
            total_s: total.seconds(),
        },
    };
    Ok((videos.swap_remove(winner), trace))
}

/// Deterministic top-k retention by cumulative reward at each scoring step;
/// top-1 at the last one.
pub fn beam_search(
    base_noise: &Latent,
    cond: Condition,
    config: &SearchConfig,
    ctx: &SearchContext,
    scorer: &dyn LatentScorer,
) -> Result<(Video, SearchTrace)> {
    let total = Stopwatch::start();
    let steps = ctx.model.schedule.steps();
    config.validate(steps)?;
    let final_step = *config.schedule.last().unwrap();

    let sw = Stopwatch::start();
    let mut cands = init_candidates(
        base_noise,
        config.num_candidates,
        config.noise_mixing,
        config.master_seed,
    )?;
    let mut denoiser_s = sw.seconds();
    let mut events: Vec<ScoringEvent> = Vec::new();
    let mut step_units = 0u64;
    let mut reward_evals = 0u64;
    let mut reward_s = 0.0;

    for j in 1..=steps {
        let t_in = steps - j + 1;
        let sw = Stopwatch::start();
        for c in cands.iter_mut() {
            c.latent = ctx
                .model
                .sampler_step(&c.latent, t_in, ctx.method, cond, ctx.cfg_w, ctx.counter)?;
        }
        denoiser_s += sw.seconds();
        step_units += cands.len() as u64;

        if config.schedule.contains(&j) {
            let t_scored = steps - j;
            let sw = Stopwatch::start();
            let (rewards, composite) = clamped_scores(
                scorer,
                &cands,
                cond,
                t_in,
                &config.reward_weights,
                &format!("beam step {j}"),
                &events,
            )?;
            reward_evals += cands.len() as u64;

            for (c, &r) in cands.iter_mut().zip(&composite) {
                c.cumulative_weight = accumulate(c.cumulative_weight, r);
            }
            let retain = if j == final_step { 1 } else { config.beam_width };
            let mut order: Vec<usize> = (0..cands.len()).collect();
            order.sort_by(|&a, &b| {
                cands[b]
                    .cumulative_weight
                    .total_cmp(&cands[a].cumulative_weight)
                    .then(cands[a].seed_id.cmp(&cands[b].seed_id))
            });
            order.truncate(retain.min(cands.len()));
            order.sort_unstable();
            let seed_ids: Vec<usize> = cands.iter().map(|c| c.seed_id).collect();
            let mut keep = vec![false; cands.len()];
            for &pos in &order {
                keep[pos] = true;
            }
            let survivors: Vec<Candidate> = cands
                .into_iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(c, _)| c)
                .collect();
            events.push(ScoringEvent {
                step: j,
                t_scored,
                t_passed: t_in,
                seed_ids,
                rewards,
                composite,
                weights: Vec::new(),
                multiplicities: Vec::new(),
                survivors: survivors.iter().map(|c| c.seed_id).collect(),
                cumulative: survivors.iter().map(|c| c.cumulative_weight).collect(),
            });
            cands = survivors;
            reward_s += sw.seconds();
        }
    }

    if cands.len() != 1 {
        return Err(Error::Internal(format!(
            "{} candidates alive after the final scheduled step",
            cands.len()
        )));
    }
    let winner = cands.pop().ok_or_else(|| Error::Internal("no winner".into()))?;
    let sw = Stopwatch::start();
    let video = ctx.decoder.decode(&winner.latent, ctx.counter)?;
    let decode_s = sw.seconds();
    let trace = SearchTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        method: "beam".into(),
        cond,
        base_noise: base_noise.clone(),
        config: config.clone(),
        events,
        winner_seed_id: winner.seed_id,
        counts: EvalCounts {
            step_units,
            eps_evals: step_units * eps_per_step_unit(ctx.method, cond, ctx.cfg_w),
            reward_evals,
            decode_count: 1,
        },
        timings: PhaseTimings {
            denoiser_s,
            reward_s,
            decode_s,
            total_s: total.seconds(),
        },
    };
    Ok((video, trace))
}

/// Re-execute a traced run from its recorded seeds and assert that every
/// decision (survivor sets, multiplicities, winner) is identical.
pub fn replay_trace(
    trace: &SearchTrace,
    ctx: &SearchContext,
    scorer: &dyn LatentScorer,
) -> Result<()> {
    let (_, fresh) = match trace.method.as_str() {
        "latsearch" => latsearch(&trace.base_noise, trace.cond, &trace.config, ctx, scorer)?,
        "beam" => beam_search(&trace.base_noise, trace.cond, &trace.config, ctx, scorer)?,
        "vanilla" => run_vanilla(&trace.base_noise, trace.cond, &trace.config, ctx)?,
        other => {
            return Err(Error::invalid(format!(
                "cannot replay method '{other}'"
            )))
        }
    };
    if fresh.winner_seed_id != trace.winner_seed_id {
        return Err(Error::Internal(format!(
            "replay winner {} differs from recorded {}",
            fresh.winner_seed_id, trace.winner_seed_id
        )));
    }
    if fresh.events.len() != trace.events.len() {
        return Err(Error::Internal("replay event count differs".into()));
    }
    for (a, b) in fresh.events.iter().zip(&trace.events) {
        if a.survivors != b.survivors
            || a.multiplicities != b.multiplicities
            || a.step != b.step
        {
            return Err(Error::Internal(format!(
                "replay diverged at step {}",
                b.step
            )));
        }
    }
    Ok(())
}
