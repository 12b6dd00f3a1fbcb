//! Latent reward dataset construction and on-disk format.
//!
//! One trajectory per (prompt, seed) pair; latents recorded at the sampled
//! timesteps become training samples whose targets are the video-level
//! oracle rewards scaled by the credit s_t. Records go to a JSON-lines
//! file; latent payloads live in a sidecar tensor container referenced by
//! block name. The train/test split is by (prompt, seed) pair so no
//! trajectory straddles the split.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::credit::{assign_target, credit, CreditStrategy};
use crate::diffusion::{Decoder, DiffusionModel, EvalCounter, SamplerMethod};
use crate::error::{Error, Result};
use crate::io::{write_atomic, TensorStore};
use crate::mixture::{Condition, MixtureTarget};
use crate::oracle::{oracle_reward, OracleCalibration, RewardVector};
use crate::rng::stream;
use crate::tensor::Latent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One training sample: an intermediate latent with its credited target.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRewardSample {
    pub z_t: Latent,
    pub cond: Condition,
    pub t: usize,
    pub r_video: RewardVector,
    pub s_t: f64,
    pub r_tilde: RewardVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub prompt_index: usize,
    pub seed_index: usize,
    pub split: Split,
    pub sample: LatentRewardSample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub strategy: CreditStrategy,
    pub frames: usize,
    pub dim: usize,
    pub num_components: usize,
    pub schedule_steps: usize,
    pub prompts: usize,
    pub seeds_per_prompt: usize,
    pub timesteps: Vec<usize>,
    pub total_samples: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub calibration: OracleCalibration,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<DatasetSample>,
}

/// Serialized record; the latent payload is a reference into the sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Record {
    prompt: usize,
    seed: usize,
    cond: usize,
    t: usize,
    split: Split,
    s_t: f64,
    r_video: [f64; 3],
    r_tilde: [f64; 3],
    latent_ref: String,
}

pub struct BuildParams<'a> {
    pub model: &'a DiffusionModel,
    pub decoder: &'a Decoder,
    /// Mixture in decoded space (the oracle's frame of reference).
    pub decoded_target: &'a MixtureTarget,
    pub calibration: &'a OracleCalibration,
    pub prompts: &'a [Condition],
    pub seeds_per_prompt: usize,
    pub timesteps: &'a [usize],
    pub strategy: CreditStrategy,
    pub cfg_w: f64,
    pub method: SamplerMethod,
    pub master_seed: u64,
    pub config_hash: String,
}

const TRAIN_FRACTION: f64 = 0.8;

/// Run the trajectories and assemble the dataset in memory.
pub fn build_dataset(params: &BuildParams) -> Result<Dataset> {
    let steps = params.model.schedule.steps();
    if params.prompts.is_empty() {
        return Err(Error::invalid("prompt list is empty"));
    }
    if params.timesteps.is_empty() {
        return Err(Error::invalid("timestep set is empty"));
    }
    for &t in params.timesteps {
        if t < 1 || t >= steps {
            return Err(Error::invalid(format!(
                "dataset timestep {t} outside 1..{steps}"
            )));
        }
    }
    for cond in params.prompts {
        if cond.index().is_none() {
            return Err(Error::invalid("dataset prompts must be non-null"));
        }
    }
    params.strategy.validate()?;
    if params.seeds_per_prompt == 0 {
        return Err(Error::invalid("seeds_per_prompt must be positive"));
    }

    let mut pairs = Vec::new();
    for (p, cond) in params.prompts.iter().enumerate() {
        for s in 0..params.seeds_per_prompt {
            pairs.push((p, s, *cond));
        }
    }

    // Split by (prompt, seed) pair, deterministically from the master seed.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut stream(params.master_seed, "dataset-split", &[]));
    let train_count = ((pairs.len() as f64) * TRAIN_FRACTION).round() as usize;
    let mut split = vec![Split::Test; pairs.len()];
    for &ix in order.iter().take(train_count) {
        split[ix] = Split::Train;
    }

    let per_pair = |(&(p, s, cond), &split): (&(usize, usize, Condition), &Split)| -> Result<Vec<DatasetSample>> {
        let mut noise_rng = stream(params.master_seed, "dataset-noise", &[p as u64, s as u64]);
        let z_terminal = Latent::standard_normal(
            params.model.target.frames(),
            params.model.target.dim(),
            &mut noise_rng,
        );
        let (z0, trace, _evals) = params.model.sample_trajectory(
            &z_terminal,
            cond,
            params.cfg_w,
            params.method,
            params.timesteps,
        )?;
        let counter = EvalCounter::new();
        let video = params.decoder.decode(&z0, &counter)?;
        let r_video = oracle_reward(&video, cond, params.decoded_target, params.calibration)?;
        params
            .timesteps
            .iter()
            .map(|&t| {
                let z_t = trace
                    .get(&t)
                    .ok_or_else(|| Error::Internal(format!("trajectory missing t={t}")))?
                    .clone();
                let s_t = credit(params.strategy, &z_t, &z0, t, steps)?;
                let r_tilde = assign_target(&r_video, s_t)?;
                Ok(DatasetSample {
                    prompt_index: p,
                    seed_index: s,
                    split,
                    sample: LatentRewardSample {
                        z_t,
                        cond,
                        t,
                        r_video,
                        s_t,
                        r_tilde,
                    },
                })
            })
            .collect()
    };

    let nested = run_pairs(&pairs, &split, per_pair)?;
    let samples: Vec<DatasetSample> = nested.into_iter().flatten().collect();

    let train_samples = samples.iter().filter(|s| s.split == Split::Train).count();
    let manifest = DatasetManifest {
        schema_version: 1,
        config_hash: params.config_hash.clone(),
        master_seed: params.master_seed,
        strategy: params.strategy,
        frames: params.model.target.frames(),
        dim: params.model.target.dim(),
        num_components: params.model.target.num_components(),
        schedule_steps: steps,
        prompts: params.prompts.len(),
        seeds_per_prompt: params.seeds_per_prompt,
        timesteps: params.timesteps.to_vec(),
        total_samples: samples.len(),
        train_samples,
        test_samples: samples.len() - train_samples,
        calibration: *params.calibration,
    };
    Ok(Dataset { manifest, samples })
}

#[cfg(feature = "parallel")]
fn run_pairs<F>(
    pairs: &[(usize, usize, Condition)],
    split: &[Split],
    per_pair: F,
) -> Result<Vec<Vec<DatasetSample>>>
where
    F: Fn((&(usize, usize, Condition), &Split)) -> Result<Vec<DatasetSample>> + Sync + Send,
{
    use rayon::prelude::*;
    pairs
        .par_iter()
        .zip(split.par_iter())
        .map(per_pair)
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_pairs<F>(
    pairs: &[(usize, usize, Condition)],
    split: &[Split],
    per_pair: F,
) -> Result<Vec<Vec<DatasetSample>>>
where
    F: Fn((&(usize, usize, Condition), &Split)) -> Result<Vec<DatasetSample>> + Sync,
{
    pairs.iter().zip(split.iter()).map(per_pair).collect()
}

fn latent_ref(p: usize, s: usize, t: usize) -> String {
    format!("p{p:04}_s{s:04}_t{t:03}")
}

impl Dataset {
    pub fn train(&self) -> impl Iterator<Item = &DatasetSample> {
        self.samples.iter().filter(|s| s.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &DatasetSample> {
        self.samples.iter().filter(|s| s.split == Split::Test)
    }

    /// Write records, latent sidecar and manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut store = TensorStore::new();
        let mut lines = String::new();
        for s in &self.samples {
            let reference = latent_ref(s.prompt_index, s.seed_index, s.sample.t);
            store.insert_f64(
                &reference,
                vec![s.sample.z_t.frames() as u64, s.sample.z_t.dim() as u64],
                s.sample.z_t.as_slice().to_vec(),
            )?;
            let record = Record {
                prompt: s.prompt_index,
                seed: s.seed_index,
                cond: s.sample.cond.index().expect("dataset prompts are non-null"),
                t: s.sample.t,
                split: s.split,
                s_t: s.sample.s_t,
                r_video: s.sample.r_video.as_array(),
                r_tilde: s.sample.r_tilde.as_array(),
                latent_ref: reference,
            };
            lines.push_str(
                &serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?,
            );
            lines.push('\n');
        }
        write_atomic(&dir.join("dataset.jsonl"), lines.as_bytes())?;
        store.write_to(&dir.join("latents.ltsr"))?;
        let manifest = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&dir.join("manifest.json"), &manifest)?;
        Ok(())
    }

    /// Load a saved dataset, re-verifying that every stored target equals
    /// credit times video reward bit-for-bit.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest: DatasetManifest =
            serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)
                .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        let store = TensorStore::read_from(&dir.join("latents.ltsr"))?;
        let text = std::fs::read_to_string(dir.join("dataset.jsonl"))?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("record {lineno}: {e}")))?;
            let (dims, data) = store.get_f64(&record.latent_ref)?;
            if dims.len() != 2 {
                return Err(Error::Format(format!(
                    "latent block '{}' has rank {}",
                    record.latent_ref,
                    dims.len()
                )));
            }
            let z_t = Latent::from_vec(dims[0] as usize, dims[1] as usize, data.to_vec())?;
            let r_video = RewardVector::from_array(record.r_video);
            let r_tilde = RewardVector::from_array(record.r_tilde);
            let expected = r_video.scale(record.s_t);
            if expected != r_tilde {
                return Err(Error::Format(format!(
                    "record {lineno}: stored target differs from s_t * r_video"
                )));
            }
            samples.push(DatasetSample {
                prompt_index: record.prompt,
                seed_index: record.seed,
                split: record.split,
                sample: LatentRewardSample {
                    z_t,
                    cond: Condition::Prompt(record.cond),
                    t: record.t,
                    r_video,
                    s_t: record.s_t,
                    r_tilde,
                },
            });
        }
        if samples.len() != manifest.total_samples {
            return Err(Error::Format(format!(
                "manifest promises {} samples, file has {}",
                manifest.total_samples,
                samples.len()
            )));
        }
        Ok(Dataset { manifest, samples })
    }
}
