//! Command implementations behind the CLI subcommands.

pub mod ablate;
pub mod plot;
pub mod search;

use std::path::{Path, PathBuf};

use anyhow::Context;

use latsearch_core::dataset::{build_dataset, BuildParams, Dataset};
use latsearch_core::io::write_atomic;
use latsearch_core::reward::{
    eval_preference_accuracy, train, AccuracyCell, PrefLabelSource, RewardNet, TrainConfig,
    TrainSample, DIM_NAMES,
};
use latsearch_core::rng::stream;

use crate::config::TOOL_VERSION;
use crate::pipeline::Pipeline;

pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}

pub fn checkpoint_path(out: &Path) -> PathBuf {
    out.join("reward.ltsr")
}

/// Build the latent reward dataset and write it under `out/dataset`.
pub fn cmd_build_dataset(pipeline: &Pipeline, out: &Path) -> anyhow::Result<Dataset> {
    let prompts = pipeline.prompt_list();
    let timesteps = pipeline.config.dataset_timesteps();
    let strategy = pipeline.config.credit_strategy()?;
    eprintln!(
        "building dataset: {} prompts x {} seeds x {} timesteps ({})",
        prompts.len(),
        pipeline.config.dataset.seeds_per_prompt,
        timesteps.len(),
        strategy.name()
    );
    let dataset = build_dataset(&BuildParams {
        model: &pipeline.model,
        decoder: &pipeline.decoder,
        decoded_target: &pipeline.decoded_target,
        calibration: &pipeline.calibration,
        prompts: &prompts,
        seeds_per_prompt: pipeline.config.dataset.seeds_per_prompt,
        timesteps: &timesteps,
        strategy,
        cfg_w: pipeline.config.sampler.cfg_scale,
        method: pipeline.config.sampler.method,
        master_seed: pipeline.config.run.master_seed,
        config_hash: pipeline.config_hash.clone(),
    })?;
    let dir = dataset_dir(out);
    dataset.save(&dir)?;
    eprintln!(
        "dataset written to {}: {} samples ({} train / {} test)",
        dir.display(),
        dataset.manifest.total_samples,
        dataset.manifest.train_samples,
        dataset.manifest.test_samples
    );
    Ok(dataset)
}

fn train_config(pipeline: &Pipeline) -> TrainConfig {
    let t = &pipeline.config.train;
    TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        lr0: t.lr0,
        lr_drop_epoch: t.lr_drop_epoch,
        lr_drop_factor: t.lr_drop_factor,
        momentum: t.momentum,
        lambda_reg: t.lambda_reg,
        lambda_pref: t.lambda_pref,
        tie_eps: t.tie_eps,
        pref_labels: t.pref_labels,
        seed: pipeline.config.run.master_seed,
    }
}

fn check_dataset_compat(pipeline: &Pipeline, dataset: &Dataset) -> anyhow::Result<()> {
    let m = &dataset.manifest;
    let want = (
        pipeline.model.target.frames(),
        pipeline.model.target.dim(),
        pipeline.model.target.num_components(),
        pipeline.model.schedule.steps(),
    );
    let got = (m.frames, m.dim, m.num_components, m.schedule_steps);
    anyhow::ensure!(
        want == got,
        "dataset manifest shape {got:?} does not match config (F, D, K, T) = {want:?}"
    );
    Ok(())
}

/// Train the latent reward model on the dataset's train split; write the
/// checkpoint and per-epoch loss curves.
pub fn cmd_train_reward(
    pipeline: &Pipeline,
    dataset_path: &Path,
    out: &Path,
) -> anyhow::Result<PathBuf> {
    let dataset = Dataset::load(dataset_path)
        .with_context(|| format!("loading dataset from {}", dataset_path.display()))?;
    check_dataset_compat(pipeline, &dataset)?;
    let cfg = train_config(pipeline);
    let samples: Vec<TrainSample> = dataset
        .train()
        .map(|s| TrainSample::from_dataset(s, cfg.pref_labels))
        .collect();
    anyhow::ensure!(!samples.is_empty(), "dataset has no training samples");
    let mut net = RewardNet::random(
        pipeline.config.run.master_seed,
        pipeline.model.target.frames(),
        pipeline.model.target.dim(),
        pipeline.model.target.num_components(),
        pipeline.model.schedule.steps(),
        pipeline.config.train.embed_width,
        pipeline.config.train.hidden,
    )?;
    eprintln!(
        "training reward model: {} samples, {} epochs, {} parameters",
        samples.len(),
        cfg.epochs,
        net.param_count()
    );
    let log = train(&mut net, &samples, &cfg)?;
    let ckpt = checkpoint_path(out);
    net.save(&ckpt, &pipeline.config_hash, TOOL_VERSION)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "epoch", "lr", "reg_vq", "reg_mq", "reg_ta", "pref_vq", "pref_mq", "pref_ta", "total",
        "config_hash", "tool_version",
    ])?;
    for e in &log {
        wtr.write_record([
            e.epoch.to_string(),
            format!("{:e}", e.lr),
            e.reg[0].to_string(),
            e.reg[1].to_string(),
            e.reg[2].to_string(),
            e.pref[0].to_string(),
            e.pref[1].to_string(),
            e.pref[2].to_string(),
            e.total.to_string(),
            pipeline.config_hash.clone(),
            TOOL_VERSION.to_string(),
        ])?;
    }
    write_atomic(&out.join("loss_curves.csv"), &wtr.into_inner()?)?;
    let first = log.first().expect("at least one epoch");
    let last = log.last().expect("at least one epoch");
    eprintln!(
        "checkpoint written to {} (train loss {:.4} -> {:.4})",
        ckpt.display(),
        first.total,
        last.total
    );
    Ok(ckpt)
}

/// Evaluate held-out pairwise preference accuracy per (dimension, timestep).
pub fn cmd_eval_reward(
    pipeline: &Pipeline,
    checkpoint: &Path,
    dataset_path: &Path,
    out: &Path,
) -> anyhow::Result<Vec<AccuracyCell>> {
    let dataset = Dataset::load(dataset_path)?;
    check_dataset_compat(pipeline, &dataset)?;
    let (net, header) = RewardNet::load(checkpoint)?;
    anyhow::ensure!(
        (header.frames, header.dim, header.num_conditions, header.steps)
            == (
                dataset.manifest.frames,
                dataset.manifest.dim,
                dataset.manifest.num_components,
                dataset.manifest.schedule_steps
            ),
        "checkpoint shape does not match dataset manifest"
    );
    let cells = eval_cells(pipeline, &net, &dataset)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["timestep", "dim", "accuracy", "pairs", "config_hash", "tool_version"])?;
    for c in &cells {
        wtr.write_record([
            c.timestep.to_string(),
            DIM_NAMES[c.dim].to_string(),
            c.accuracy.to_string(),
            c.pairs.to_string(),
            pipeline.config_hash.clone(),
            TOOL_VERSION.to_string(),
        ])?;
    }
    write_atomic(&out.join("accuracy.csv"), &wtr.into_inner()?)?;
    eprintln!(
        "accuracy table written to {} ({} cells)",
        out.join("accuracy.csv").display(),
        cells.len()
    );
    Ok(cells)
}

pub fn eval_cells(
    pipeline: &Pipeline,
    net: &RewardNet,
    dataset: &Dataset,
) -> anyhow::Result<Vec<AccuracyCell>> {
    // Evaluation labels always come from the credited latent targets.
    let test: Vec<TrainSample> = dataset
        .test()
        .map(|s| TrainSample::from_dataset(s, PrefLabelSource::LatentTarget))
        .collect();
    anyhow::ensure!(!test.is_empty(), "dataset has no test samples");
    let mut rng = stream(pipeline.config.run.master_seed, "eval-accuracy", &[]);
    let cells = eval_preference_accuracy(
        net,
        &test,
        &dataset.manifest.timesteps,
        pipeline.config.train.tie_eps,
        &mut rng,
    )?;
    Ok(cells)
}
