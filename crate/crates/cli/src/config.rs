//! Run configuration: a single TOML file with nested sections. Unknown keys
//! are hard errors so sweep typos cannot pass silently. Every output embeds
//! the hash of the fully resolved configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use latsearch_core::credit::CreditStrategy;
use latsearch_core::diffusion::SamplerMethod;
use latsearch_core::io::sha256_hex;
use latsearch_core::reward::PrefLabelSource;
use latsearch_core::schedule::ScheduleKind;
use latsearch_core::search::SearchConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scoring/probing schedules are quoted in a reference 50-step frame and
/// rescaled onto the configured step count.
pub const REFERENCE_STEPS: usize = 50;
pub const REFERENCE_SEARCH_SCHEDULE: [usize; 3] = [10, 15, 20];
pub const REFERENCE_PROBE_TIMESTEPS: [usize; 5] = [10, 15, 20, 25, 30];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub frames: usize,
    pub dim: usize,
    pub components: usize,
    /// Mixture geometry preset: "axes" (K <= D) or "ring" (D >= 2).
    pub preset: String,
    pub spread: f64,
    pub velocity: f64,
    pub component_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            frames: 4,
            dim: 4,
            components: 4,
            preset: "axes".into(),
            spread: 2.0,
            velocity: 0.15,
            component_std: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub kind: ScheduleKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: 32,
            kind: ScheduleKind::Linear,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub cfg_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: SamplerMethod::Heun2,
            cfg_scale: 5.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    /// Conformal scale of the linear map.
    pub scale: f64,
    /// Constant offset added to every frame coordinate.
    pub offset: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        // Non-trivial by default so decode work is visible in timings.
        DecoderConfig {
            scale: 1.25,
            offset: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub prompts: usize,
    pub seeds_per_prompt: usize,
    /// Empty means: rescale the reference probe timesteps onto T.
    pub timesteps: Vec<usize>,
    pub strategy: String,
    pub exponential_decay: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            prompts: 64,
            seeds_per_prompt: 8,
            timesteps: Vec::new(),
            strategy: "cosine".into(),
            exponential_decay: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub lambda_reg: [f64; 3],
    pub lambda_pref: [f64; 3],
    pub tie_eps: f64,
    pub pref_labels: PrefLabelSource,
    pub embed_width: usize,
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 15,
            batch_size: 32,
            lr0: 0.03,
            lr_drop_epoch: 10,
            lr_drop_factor: 0.1,
            momentum: 0.9,
            lambda_reg: [1.0; 3],
            lambda_pref: [1.0; 3],
            tie_eps: 1e-6,
            pref_labels: PrefLabelSource::LatentTarget,
            embed_width: 8,
            hidden: 128,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub num_candidates: usize,
    pub noise_mixing: f64,
    pub temperature: f64,
    /// Empty means: rescale the reference search schedule onto T.
    pub schedule: Vec<usize>,
    pub reward_weights: [f64; 3],
    pub beam_width: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            num_candidates: 6,
            noise_mixing: 0.8,
            temperature: 1.0,
            schedule: Vec::new(),
            reward_weights: [1.0 / 3.0; 3],
            beam_width: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Latsearch,
    BestOfN,
    Beam,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Latsearch => "latsearch",
            Method::BestOfN => "best_of_n",
            Method::Beam => "beam",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "vanilla" => Some(Method::Vanilla),
            "latsearch" => Some(Method::Latsearch),
            "best_of_n" => Some(Method::BestOfN),
            "beam" => Some(Method::Beam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub method: Method,
    pub repetitions: usize,
    pub master_seed: u64,
    pub calibration_samples: usize,
    /// Judge for the best-of-N baseline: "model" or "oracle".
    pub bon_judge: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            method: Method::Latsearch,
            repetitions: 16,
            master_seed: 42,
            calibration_samples: 4000,
            bon_judge: "model".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub sampler: SamplerConfig,
    pub decoder: DecoderConfig,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub search: SearchSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)?;
        Ok(cfg)
    }

    /// Hash of the fully resolved configuration (after CLI overrides).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&canonical)
    }

    pub fn credit_strategy(&self) -> anyhow::Result<CreditStrategy> {
        let s = match self.dataset.strategy.as_str() {
            "cosine" => CreditStrategy::Cosine,
            "uniform" => CreditStrategy::Uniform,
            "exponential" => CreditStrategy::Exponential {
                decay: self.dataset.exponential_decay,
            },
            "l2" => CreditStrategy::L2,
            other => anyhow::bail!("unknown credit strategy '{other}'"),
        };
        s.validate()?;
        Ok(s)
    }

    /// Dataset timesteps when unset: the schedule timesteps the reward
    /// model is queried with when scoring fires after j denoising steps
    /// (the model receives the pre-step timestep T - j + 1), for the
    /// reference probe steps rescaled onto T.
    pub fn dataset_timesteps(&self) -> Vec<usize> {
        if self.dataset.timesteps.is_empty() {
            let steps = self.schedule.steps;
            let mut t: Vec<usize> = SearchConfig::rescale_schedule(
                &REFERENCE_PROBE_TIMESTEPS,
                REFERENCE_STEPS,
                steps,
            )
            .into_iter()
            .map(|j| (steps - j + 1).clamp(1, steps - 1))
            .collect();
            t.sort_unstable();
            t.dedup();
            t
        } else {
            self.dataset.timesteps.clone()
        }
    }

    pub fn search_schedule(&self) -> Vec<usize> {
        if self.search.schedule.is_empty() {
            SearchConfig::rescale_schedule(
                &REFERENCE_SEARCH_SCHEDULE,
                REFERENCE_STEPS,
                self.schedule.steps,
            )
        } else {
            self.search.schedule.clone()
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            num_candidates: self.search.num_candidates,
            noise_mixing: self.search.noise_mixing,
            temperature: self.search.temperature,
            schedule: self.search_schedule(),
            reward_weights: self.search.reward_weights,
            beam_width: self.search.beam_width,
            master_seed: self.run.master_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_rescale_reference_schedules() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.search_schedule(), vec![6, 10, 13]);
        // Timesteps the reward model sees when scoring fires after the
        // rescaled probe steps {6, 10, 13, 16, 19}: t = T - j + 1.
        assert_eq!(cfg.dataset_timesteps(), vec![14, 17, 20, 23, 27]);
        // Search queries are covered by the training timesteps.
        for j in cfg.search_schedule() {
            assert!(cfg.dataset_timesteps().contains(&(32 - j + 1)));
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("[search]\nnum_candidates = 4\ntypo_key = 1\n");
        assert!(err.is_err());
        let msg = format!("{}", err.unwrap_err());
        assert!(msg.contains("typo_key"), "{msg}");
    }

    #[test]
    fn shipped_config_matches_builtin_defaults() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs/default.toml");
        let shipped = RunConfig::from_path(&path).unwrap();
        assert_eq!(shipped.hash(), RunConfig::default().hash());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.run.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
    }
}
