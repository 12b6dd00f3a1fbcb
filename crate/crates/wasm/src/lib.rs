//! Browser demo: a 2-D ring mixture where candidate trajectories, scoring
//! events and the final pruning decision can be watched step by step.
//!
//! Three operations are exposed to the page:
//! - [`Demo::density_grid`]: the clean mixture density as a heatmap,
//! - [`Demo::train_reward_model`]: build a small dataset and fit the latent
//!   reward model in the browser,
//! - [`Demo::run_search`]: run vanilla / latsearch / beam from a seed and
//!   return every candidate's path plus the scoring events.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use latsearch_core::credit::CreditStrategy;
use latsearch_core::dataset::{build_dataset, BuildParams};
use latsearch_core::diffusion::{Decoder, DiffusionModel, EvalCounter, SamplerMethod};
use latsearch_core::mixture::{Condition, MixtureTarget};
use latsearch_core::oracle::{calibrate, oracle_reward, OracleCalibration};
use latsearch_core::reward::{train, PrefLabelSource, RewardNet, TrainConfig, TrainSample};
use latsearch_core::rng::stream;
use latsearch_core::search::{
    beam_search, latsearch, run_vanilla, SearchConfig, SearchContext, SearchTrace,
};
use latsearch_core::tensor::Latent;

const FRAMES: usize = 6;
const DIM: usize = 2;
const COMPONENTS: usize = 4;
const STEPS: usize = 32;
const CFG_SCALE: f64 = 5.0;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    model: DiffusionModel,
    decoder: Decoder,
    decoded_target: MixtureTarget,
    calibration: OracleCalibration,
    net: Option<RewardNet>,
    master_seed: u64,
}

#[derive(Serialize)]
struct CandidatePath {
    seed_id: usize,
    /// Frame coordinates per recorded sampler step: [step][frame][xy].
    path: Vec<Vec<[f64; 2]>>,
    /// Step after which the candidate was dropped (None: reached the end).
    died_after_step: Option<usize>,
}

#[derive(Serialize)]
struct SearchView {
    method: String,
    steps: usize,
    schedule: Vec<usize>,
    winner_seed_id: usize,
    candidates: Vec<CandidatePath>,
    events: Vec<EventView>,
    final_video: Vec<[f64; 2]>,
    oracle: [f64; 3],
    composite: f64,
    step_units: u64,
    vanilla_step_units: u64,
    tracks: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct EventView {
    step: usize,
    seed_ids: Vec<usize>,
    composite: Vec<f64>,
    weights: Vec<f64>,
    survivors: Vec<usize>,
    cumulative: Vec<f64>,
}

#[derive(Serialize)]
struct TrainView {
    samples: usize,
    epochs: usize,
    first_loss: f64,
    final_loss: f64,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(master_seed: u64) -> Result<Demo, JsValue> {
        let target = MixtureTarget::ring_preset(COMPONENTS, FRAMES, DIM, 2.2, 0.22, 0.28)
            .map_err(js_err)?;
        let schedule = latsearch_core::schedule::make_schedule(
            STEPS,
            latsearch_core::schedule::ScheduleKind::Linear,
        )
        .map_err(js_err)?;
        let decoder = Decoder::identity(DIM);
        let decoded_target = decoder.push_mixture(&target).map_err(js_err)?;
        let calibration = calibrate(
            &decoded_target,
            2000,
            &mut stream(master_seed, "oracle-calibration", &[]),
        )
        .map_err(js_err)?;
        Ok(Demo {
            model: DiffusionModel::new(schedule, target),
            decoder,
            decoded_target,
            calibration,
            net: None,
            master_seed,
        })
    }

    pub fn num_components(&self) -> usize {
        COMPONENTS
    }

    pub fn is_trained(&self) -> bool {
        self.net.is_some()
    }

    /// Clean per-frame mixture density on a res x res grid over
    /// [-extent, extent]^2, row-major, normalised to [0, 1].
    pub fn density_grid(&self, frame: usize, res: usize, extent: f64) -> Result<Vec<f64>, JsValue> {
        if frame >= FRAMES || res == 0 {
            return Err(js_err("frame or resolution out of range"));
        }
        let mut out = Vec::with_capacity(res * res);
        let mut max = f64::NEG_INFINITY;
        for iy in 0..res {
            for ix in 0..res {
                let x = -extent + 2.0 * extent * ix as f64 / (res - 1).max(1) as f64;
                let y = extent - 2.0 * extent * iy as f64 / (res - 1).max(1) as f64;
                let d = self
                    .decoded_target
                    .clean_frame_log_density(frame, &[x, y]);
                max = max.max(d);
                out.push(d);
            }
        }
        for v in &mut out {
            *v = (*v - max).exp();
        }
        Ok(out)
    }

    /// Build a small dataset and train the latent reward model in-browser.
    pub fn train_reward_model(
        &mut self,
        prompts: usize,
        seeds_per_prompt: usize,
        epochs: usize,
    ) -> Result<String, JsValue> {
        let prompt_list: Vec<Condition> = (0..prompts.max(COMPONENTS))
            .map(|p| Condition::Prompt(p % COMPONENTS))
            .collect();
        let timesteps: Vec<usize> =
            SearchConfig::rescale_schedule(&[10, 15, 20, 25, 30], 50, STEPS)
                .into_iter()
                .map(|j| (STEPS - j + 1).clamp(1, STEPS - 1))
                .collect();
        let dataset = build_dataset(&BuildParams {
            model: &self.model,
            decoder: &self.decoder,
            decoded_target: &self.decoded_target,
            calibration: &self.calibration,
            prompts: &prompt_list,
            seeds_per_prompt: seeds_per_prompt.max(1),
            timesteps: &timesteps,
            strategy: CreditStrategy::Cosine,
            cfg_w: CFG_SCALE,
            method: SamplerMethod::Heun2,
            master_seed: self.master_seed,
            config_hash: "wasm-demo".into(),
        })
        .map_err(js_err)?;
        let samples: Vec<TrainSample> = dataset
            .samples
            .iter()
            .map(|s| TrainSample::from_dataset(s, PrefLabelSource::LatentTarget))
            .collect();
        let mut net = RewardNet::random(
            self.master_seed,
            FRAMES,
            DIM,
            COMPONENTS,
            STEPS,
            8,
            64,
        )
        .map_err(js_err)?;
        let cfg = TrainConfig {
            epochs: epochs.clamp(1, 60),
            batch_size: 32,
            lr0: 0.03,
            lr_drop_epoch: (2 * epochs.clamp(1, 60)) / 3,
            seed: self.master_seed,
            ..TrainConfig::default()
        };
        let log = train(&mut net, &samples, &cfg).map_err(js_err)?;
        let view = TrainView {
            samples: samples.len(),
            epochs: log.len(),
            first_loss: log.first().map(|e| e.total).unwrap_or(0.0),
            final_loss: log.last().map(|e| e.total).unwrap_or(0.0),
        };
        self.net = Some(net);
        serde_json::to_string(&view).map_err(js_err)
    }

    /// Run one search and return everything the page needs to animate it.
    pub fn run_search(
        &self,
        noise_seed: u64,
        prompt: usize,
        method: &str,
        num_candidates: usize,
        noise_mixing: f64,
        temperature: f64,
    ) -> Result<String, JsValue> {
        if prompt >= COMPONENTS {
            return Err(js_err("prompt out of range"));
        }
        let cond = Condition::Prompt(prompt);
        let mut base_rng = stream(noise_seed, "demo-base", &[]);
        let base = Latent::standard_normal(FRAMES, DIM, &mut base_rng);
        let config = SearchConfig {
            num_candidates: num_candidates.clamp(1, 16),
            noise_mixing: noise_mixing.clamp(0.0, 1.0),
            temperature: temperature.max(0.05),
            schedule: SearchConfig::rescale_schedule(&[10, 15, 20], 50, STEPS),
            reward_weights: [1.0 / 3.0; 3],
            beam_width: (num_candidates / 2).max(1),
            master_seed: noise_seed,
        };
        let counter = EvalCounter::new();
        let ctx = SearchContext {
            model: &self.model,
            decoder: &self.decoder,
            cfg_w: CFG_SCALE,
            method: SamplerMethod::Heun2,
            counter: &counter,
        };
        let trace = match method {
            "vanilla" => run_vanilla(&base, cond, &config, &ctx).map_err(js_err)?.1,
            "latsearch" => {
                let net = self.net.as_ref().ok_or_else(|| js_err("train the reward model first"))?;
                latsearch(&base, cond, &config, &ctx, net).map_err(js_err)?.1
            }
            "beam" => {
                let net = self.net.as_ref().ok_or_else(|| js_err("train the reward model first"))?;
                beam_search(&base, cond, &config, &ctx, net).map_err(js_err)?.1
            }
            other => return Err(js_err(format!("unknown method '{other}'"))),
        };
        let view = self.build_view(&base, cond, &config, &trace).map_err(js_err)?;
        serde_json::to_string(&view).map_err(js_err)
    }

    /// Reconstruct every candidate's deterministic path from the trace.
    fn build_view(
        &self,
        base: &Latent,
        cond: Condition,
        config: &SearchConfig,
        trace: &SearchTrace,
    ) -> latsearch_core::error::Result<SearchView> {
        let n = if trace.method == "vanilla" {
            1
        } else {
            config.num_candidates
        };
        // Death step per seed: the first scoring event it does not survive.
        let mut died_after = vec![None; n];
        for event in &trace.events {
            for &seed in &event.seed_ids {
                if !event.survivors.contains(&seed) && died_after[seed].is_none() {
                    died_after[seed] = Some(event.step);
                }
            }
        }
        let candidates_init = latsearch_core::search::init_candidates(
            base,
            n,
            config.noise_mixing,
            config.master_seed,
        )?;
        let counter = EvalCounter::new();
        let mut candidates = Vec::with_capacity(n);
        for c in candidates_init {
            let last_step = died_after[c.seed_id].unwrap_or(STEPS);
            let mut z = c.latent.clone();
            let mut path = Vec::with_capacity(last_step + 1);
            path.push(latent_frames(&z));
            for j in 1..=last_step {
                let t_in = STEPS - j + 1;
                z = self.model.sampler_step(
                    &z,
                    t_in,
                    SamplerMethod::Heun2,
                    cond,
                    CFG_SCALE,
                    &counter,
                )?;
                path.push(latent_frames(&z));
            }
            candidates.push(CandidatePath {
                seed_id: c.seed_id,
                path,
                died_after_step: died_after[c.seed_id],
            });
        }
        // Final video and oracle score of the winner.
        let winner = &candidates[trace.winner_seed_id.min(candidates.len() - 1)];
        let final_frames = winner.path.last().cloned().unwrap_or_default();
        let z0 = Latent::from_vec(
            FRAMES,
            DIM,
            final_frames.iter().flatten().copied().collect(),
        )?;
        let video = self.decoder.decode(&z0, &counter)?;
        let oracle = oracle_reward(&video, cond, &self.decoded_target, &self.calibration)?;
        let composite =
            latsearch_core::search::composite_reward(&oracle, &config.reward_weights)?;
        let events = trace
            .events
            .iter()
            .map(|e| EventView {
                step: e.step,
                seed_ids: e.seed_ids.clone(),
                composite: e.composite.clone(),
                weights: e.weights.clone(),
                survivors: e.survivors.clone(),
                cumulative: e.cumulative.clone(),
            })
            .collect();
        let tracks = (0..COMPONENTS)
            .map(|k| {
                (0..FRAMES)
                    .map(|f| {
                        let m = self.decoded_target.mean(k).frame(f);
                        [m[0], m[1]]
                    })
                    .collect()
            })
            .collect();
        Ok(SearchView {
            method: trace.method.clone(),
            steps: STEPS,
            schedule: config.schedule.clone(),
            winner_seed_id: trace.winner_seed_id,
            candidates,
            events,
            final_video: video
                .as_slice()
                .chunks(2)
                .map(|c| [c[0], c[1]])
                .collect(),
            oracle: oracle.as_array(),
            composite,
            step_units: trace.counts.step_units,
            vanilla_step_units: STEPS as u64,
            tracks,
        })
    }
}

fn latent_frames(z: &Latent) -> Vec<[f64; 2]> {
    (0..z.frames())
        .map(|f| {
            let fr = z.frame(f);
            [fr[0], fr[1]]
        })
        .collect()
}

#[cfg(all(test, not(target_arch = "wasm32")))]
mod tests {
    use super::*;

    #[test]
    fn demo_happy_path_runs_on_host() {
        let mut demo = Demo::new(7).expect("demo builds");
        let grid = demo.density_grid(0, 32, 4.5).expect("grid");
        assert_eq!(grid.len(), 32 * 32);
        assert!(grid.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(grid.iter().any(|v| *v > 0.9));

        let info = demo.train_reward_model(8, 3, 6).expect("training");
        assert!(info.contains("final_loss"));
        assert!(demo.is_trained());

        for method in ["vanilla", "latsearch", "beam"] {
            let json = demo
                .run_search(3, 1, method, 5, 0.8, 1.0)
                .expect("search runs");
            let view: serde_json::Value = serde_json::from_str(&json).unwrap();
            assert_eq!(view["method"], method);
            let cands = view["candidates"].as_array().unwrap();
            assert_eq!(cands.len(), if method == "vanilla" { 1 } else { 5 });
            // Every candidate path starts at step 0 with F frames.
            assert_eq!(cands[0]["path"][0].as_array().unwrap().len(), 6);
            assert!(view["composite"].as_f64().unwrap().is_finite());
        }
    }
}
