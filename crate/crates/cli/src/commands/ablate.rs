//! Ablation sweeps over credit strategies, softmax temperature, scoring
//! schedules, and the loss mix, each emitting one consolidated CSV.

use std::path::Path;

use latsearch_core::io::write_atomic;
use latsearch_core::reward::DIM_NAMES;
use latsearch_core::search::SearchConfig;

use crate::commands::search::run_benchmark;
use crate::commands::{cmd_build_dataset, cmd_eval_reward, cmd_train_reward, dataset_dir};
use crate::config::{Method, REFERENCE_STEPS, TOOL_VERSION};
use crate::pipeline::Pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Credit,
    Temperature,
    Schedule,
    Loss,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "credit" => Some(Axis::Credit),
            "temperature" => Some(Axis::Temperature),
            "schedule" => Some(Axis::Schedule),
            "loss" => Some(Axis::Loss),
            _ => None,
        }
    }
}

pub fn cmd_ablate(pipeline: &Pipeline, axis: Axis, reps: usize, out: &Path) -> anyhow::Result<()> {
    match axis {
        Axis::Credit => ablate_credit(pipeline, out),
        Axis::Temperature => ablate_temperature(pipeline, reps, out),
        Axis::Schedule => ablate_schedule(pipeline, reps, out),
        Axis::Loss => ablate_loss(pipeline, out),
    }
}

/// Rebuild the dataset under each credit strategy (identical trajectories,
/// different targets), train a model per strategy, report accuracy tables.
fn ablate_credit(pipeline: &Pipeline, out: &Path) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "strategy", "timestep", "dim", "accuracy", "pairs", "config_hash", "tool_version",
    ])?;
    for strategy in ["cosine", "uniform", "exponential", "l2"] {
        let mut config = pipeline.config.clone();
        config.dataset.strategy = strategy.into();
        let sub = Pipeline::assemble(config)?;
        let subdir = out.join("ablate_credit").join(strategy);
        cmd_build_dataset(&sub, &subdir)?;
        let ckpt = cmd_train_reward(&sub, &dataset_dir(&subdir), &subdir)?;
        let cells = cmd_eval_reward(&sub, &ckpt, &dataset_dir(&subdir), &subdir)?;
        for c in &cells {
            wtr.write_record([
                strategy.to_string(),
                c.timestep.to_string(),
                DIM_NAMES[c.dim].to_string(),
                c.accuracy.to_string(),
                c.pairs.to_string(),
                sub.config_hash.clone(),
                TOOL_VERSION.to_string(),
            ])?;
        }
    }
    let path = out.join("ablate_credit.csv");
    write_atomic(&path, &wtr.into_inner()?)?;
    eprintln!("credit ablation written to {}", path.display());
    Ok(())
}

fn ablate_temperature(pipeline: &Pipeline, reps: usize, out: &Path) -> anyhow::Result<()> {
    let net = load_net(out)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "temperature", "mean_composite", "ci95_lo", "ci95_hi", "mean_step_units",
        "config_hash", "tool_version",
    ])?;
    for tau in [0.5, 1.0, 2.0] {
        let mut config = pipeline.config.clone();
        config.search.temperature = tau;
        let sub = reuse_oracle(pipeline, config)?;
        let artifacts = run_benchmark(&sub, Method::Latsearch, reps, Some(&net))?;
        let d = &artifacts.report.deterministic;
        let steps: f64 = d.per_run.iter().map(|r| r.step_units as f64).sum::<f64>()
            / d.per_run.len() as f64;
        wtr.write_record([
            tau.to_string(),
            d.aggregate.mean.to_string(),
            d.aggregate.ci95_lo.to_string(),
            d.aggregate.ci95_hi.to_string(),
            steps.to_string(),
            sub.config_hash.clone(),
            TOOL_VERSION.to_string(),
        ])?;
    }
    let path = out.join("ablate_temperature.csv");
    write_atomic(&path, &wtr.into_inner()?)?;
    eprintln!("temperature ablation written to {}", path.display());
    Ok(())
}

fn ablate_schedule(pipeline: &Pipeline, reps: usize, out: &Path) -> anyhow::Result<()> {
    let net = load_net(out)?;
    let reference: [&[usize]; 4] = [
        &[10, 15],
        &[10, 15, 20],
        &[10, 15, 20, 25],
        &[10, 15, 20, 25, 30],
    ];
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "schedule", "mean_composite", "ci95_lo", "ci95_hi", "mean_step_units",
        "config_hash", "tool_version",
    ])?;
    for schedule in reference {
        let rescaled = SearchConfig::rescale_schedule(
            schedule,
            REFERENCE_STEPS,
            pipeline.config.schedule.steps,
        );
        let mut config = pipeline.config.clone();
        config.search.schedule = rescaled.clone();
        let sub = reuse_oracle(pipeline, config)?;
        let artifacts = run_benchmark(&sub, Method::Latsearch, reps, Some(&net))?;
        let d = &artifacts.report.deterministic;
        let steps: f64 = d.per_run.iter().map(|r| r.step_units as f64).sum::<f64>()
            / d.per_run.len() as f64;
        let label = rescaled
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("+");
        wtr.write_record([
            label,
            d.aggregate.mean.to_string(),
            d.aggregate.ci95_lo.to_string(),
            d.aggregate.ci95_hi.to_string(),
            steps.to_string(),
            sub.config_hash.clone(),
            TOOL_VERSION.to_string(),
        ])?;
    }
    let path = out.join("ablate_schedule.csv");
    write_atomic(&path, &wtr.into_inner()?)?;
    eprintln!("schedule ablation written to {}", path.display());
    Ok(())
}

/// Regression-only against regression + preference, on the same dataset.
fn ablate_loss(pipeline: &Pipeline, out: &Path) -> anyhow::Result<()> {
    let base_dir = out.join("ablate_loss");
    cmd_build_dataset(pipeline, &base_dir)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "setting", "timestep", "dim", "accuracy", "pairs", "config_hash", "tool_version",
    ])?;
    for (label, pref_weight) in [("reg_only", 0.0), ("reg_plus_pref", 1.0)] {
        let mut config = pipeline.config.clone();
        config.train.lambda_pref = [pref_weight; 3];
        let sub = reuse_oracle(pipeline, config)?;
        let subdir = base_dir.join(label);
        std::fs::create_dir_all(&subdir)?;
        let ckpt = cmd_train_reward(&sub, &dataset_dir(&base_dir), &subdir)?;
        let cells = cmd_eval_reward(&sub, &ckpt, &dataset_dir(&base_dir), &subdir)?;
        for c in &cells {
            wtr.write_record([
                label.to_string(),
                c.timestep.to_string(),
                DIM_NAMES[c.dim].to_string(),
                c.accuracy.to_string(),
                c.pairs.to_string(),
                sub.config_hash.clone(),
                TOOL_VERSION.to_string(),
            ])?;
        }
    }
    let path = out.join("ablate_loss.csv");
    write_atomic(&path, &wtr.into_inner()?)?;
    eprintln!("loss ablation written to {}", path.display());
    Ok(())
}

fn load_net(out: &Path) -> anyhow::Result<latsearch_core::reward::RewardNet> {
    let ckpt = crate::commands::checkpoint_path(out);
    anyhow::ensure!(
        ckpt.exists(),
        "no checkpoint at {}; run `build-dataset` and `train-reward` first",
        ckpt.display()
    );
    Ok(latsearch_core::reward::RewardNet::load(&ckpt)?.0)
}

/// Clone the pipeline with a tweaked config but identical calibration, so
/// sweep points stay comparable (config hash still reflects the tweak).
fn reuse_oracle(pipeline: &Pipeline, config: crate::config::RunConfig) -> anyhow::Result<Pipeline> {
    let mut sub = Pipeline::assemble(config)?;
    sub.calibration = pipeline.calibration;
    Ok(sub)
}
