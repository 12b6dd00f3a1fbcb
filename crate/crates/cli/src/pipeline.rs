//! Assembly of core objects from a run configuration, plus the per-rep
//! deterministic streams shared by all commands.

use anyhow::Context;
use rand::Rng;

use latsearch_core::diffusion::{Decoder, DiffusionModel};
use latsearch_core::mixture::{Condition, MixtureTarget};
use latsearch_core::oracle::{calibrate, OracleCalibration};
use latsearch_core::rng::stream;
use latsearch_core::schedule::make_schedule;
use latsearch_core::search::SearchConfig;
use latsearch_core::tensor::Latent;

use crate::config::RunConfig;

pub struct Pipeline {
    pub config: RunConfig,
    pub config_hash: String,
    pub model: DiffusionModel,
    pub decoder: Decoder,
    /// Mixture pushed into decoded space; the oracle's frame of reference.
    pub decoded_target: MixtureTarget,
    pub calibration: OracleCalibration,
    pub search_config: SearchConfig,
}

impl Pipeline {
    pub fn assemble(config: RunConfig) -> anyhow::Result<Pipeline> {
        let config_hash = config.hash();
        let m = &config.model;
        let target = match m.preset.as_str() {
            "axes" => MixtureTarget::axes_preset(
                m.components,
                m.frames,
                m.dim,
                m.spread,
                m.velocity,
                m.component_std,
            ),
            "ring" => MixtureTarget::ring_preset(
                m.components,
                m.frames,
                m.dim,
                m.spread,
                m.velocity,
                m.component_std,
            ),
            other => anyhow::bail!("unknown mixture preset '{other}'"),
        }
        .context("mixture construction")?;
        let schedule = make_schedule(config.schedule.steps, config.schedule.kind)
            .context("schedule construction")?;
        let decoder = Decoder::scaled(
            m.dim,
            config.decoder.scale,
            vec![config.decoder.offset; m.dim],
        )
        .context("decoder construction")?;
        let decoded_target = decoder
            .push_mixture(&target)
            .context("decoder must stay compatible with the oracle")?;
        let calibration = calibrate(
            &decoded_target,
            config.run.calibration_samples,
            &mut stream(config.run.master_seed, "oracle-calibration", &[]),
        )
        .context("oracle calibration")?;
        let search_config = config.search_config();
        search_config
            .validate(config.schedule.steps)
            .context("search configuration")?;
        config.credit_strategy()?;
        let model = DiffusionModel::new(schedule, target);
        Ok(Pipeline {
            config,
            config_hash,
            model,
            decoder,
            decoded_target,
            calibration,
            search_config,
        })
    }

    /// Prompt for repetition `rep`: uniform over components.
    pub fn rep_prompt(&self, rep: u64) -> Condition {
        let k = self.model.target.num_components();
        let ix = stream(self.config.run.master_seed, "rep-prompt", &[rep])
            .random_range(0..k);
        Condition::Prompt(ix)
    }

    /// Base noise shared across methods for repetition `rep`; `index` picks
    /// additional independent noises (best-of-N uses index 1..N-1).
    pub fn rep_base_noise(&self, rep: u64, index: u64) -> Latent {
        let mut rng = stream(
            self.config.run.master_seed,
            "rep-base",
            &[rep, index],
        );
        Latent::standard_normal(
            self.model.target.frames(),
            self.model.target.dim(),
            &mut rng,
        )
    }

    pub fn prompt_list(&self) -> Vec<Condition> {
        let k = self.model.target.num_components();
        (0..self.config.dataset.prompts)
            .map(|p| Condition::Prompt(p % k))
            .collect()
    }
}
