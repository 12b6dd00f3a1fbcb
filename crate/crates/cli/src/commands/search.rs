//! The search benchmark: run a method over repetitions with fresh prompts
//! and base noises, oracle-score the final videos, aggregate with a paired
//! test against vanilla sampling on shared noises.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use latsearch_core::diffusion::EvalCounter;
use latsearch_core::io::write_atomic;
use latsearch_core::oracle::oracle_reward;
use latsearch_core::reward::RewardNet;
use latsearch_core::rng::stream;
use latsearch_core::search::{
    best_of_n, beam_search, latsearch, run_vanilla, BestOfNJudge, PhaseTimings, SearchContext,
    SearchTrace,
};
use latsearch_core::stats::{summarize, wilcoxon_signed_rank};
use latsearch_core::tensor::Latent;

use crate::config::{Method, TOOL_VERSION};
use crate::pipeline::Pipeline;
use crate::report::{DeterministicSection, MetricsReport, RunRow, VanillaComparison};

pub struct RepOutcome {
    pub row: RunRow,
    pub trace: SearchTrace,
    pub vanilla_composite: Option<f64>,
    pub timing: PhaseTimings,
}

/// Execute one repetition of `method`, scoring the final video with the
/// ground-truth oracle (outside the timed region).
pub fn run_one_rep(
    pipeline: &Pipeline,
    method: Method,
    rep: usize,
    net: Option<&RewardNet>,
) -> anyhow::Result<RepOutcome> {
    let cond = pipeline.rep_prompt(rep as u64);
    let base = pipeline.rep_base_noise(rep as u64, 0);
    let mut search_cfg = pipeline.search_config.clone();
    // Independent candidate/resampling streams per repetition.
    search_cfg.master_seed = stream(
        pipeline.config.run.master_seed,
        "rep-search-seed",
        &[rep as u64],
    )
    .random();
    let counter = EvalCounter::new();
    let ctx = SearchContext {
        model: &pipeline.model,
        decoder: &pipeline.decoder,
        cfg_w: pipeline.config.sampler.cfg_scale,
        method: pipeline.config.sampler.method,
        counter: &counter,
    };
    let need_net = || {
        net.ok_or_else(|| anyhow::anyhow!("method '{}' needs a reward model", method.name()))
    };
    let (video, trace) = match method {
        Method::Vanilla => run_vanilla(&base, cond, &search_cfg, &ctx)?,
        Method::Latsearch => latsearch(&base, cond, &search_cfg, &ctx, need_net()?)?,
        Method::Beam => beam_search(&base, cond, &search_cfg, &ctx, need_net()?)?,
        Method::BestOfN => {
            let bases: Vec<Latent> = (0..search_cfg.num_candidates)
                .map(|i| pipeline.rep_base_noise(rep as u64, i as u64))
                .collect();
            let judge = match pipeline.config.run.bon_judge.as_str() {
                "oracle" => BestOfNJudge::Oracle {
                    target: &pipeline.decoded_target,
                    calibration: &pipeline.calibration,
                },
                "model" => BestOfNJudge::Model(need_net()?),
                other => anyhow::bail!("unknown best-of-N judge '{other}'"),
            };
            best_of_n(&bases, cond, &search_cfg, &ctx, &judge)?
        }
    };
    let reward = oracle_reward(&video, cond, &pipeline.decoded_target, &pipeline.calibration)?;
    let composite = latsearch_core::search::composite_reward(
        &reward,
        &pipeline.search_config.reward_weights,
    )?;

    let vanilla_composite = if method == Method::Vanilla {
        None
    } else {
        let vanilla_counter = EvalCounter::new();
        let vanilla_ctx = SearchContext {
            counter: &vanilla_counter,
            ..ctx
        };
        let (vv, _) = run_vanilla(&base, cond, &search_cfg, &vanilla_ctx)?;
        let vr = oracle_reward(&vv, cond, &pipeline.decoded_target, &pipeline.calibration)?;
        Some(latsearch_core::search::composite_reward(
            &vr,
            &pipeline.search_config.reward_weights,
        )?)
    };

    let row = RunRow {
        rep,
        prompt: cond.index().unwrap_or_default(),
        composite,
        vq: reward.vq,
        mq: reward.mq,
        ta: reward.ta,
        step_units: trace.counts.step_units,
        eps_evals: trace.counts.eps_evals,
        reward_evals: trace.counts.reward_evals,
        decode_count: trace.counts.decode_count,
        winner_seed_id: trace.winner_seed_id,
    };
    Ok(RepOutcome {
        timing: trace.timings,
        vanilla_composite,
        row,
        trace,
    })
}

pub struct SearchArtifacts {
    pub report: MetricsReport,
    pub traces: Vec<SearchTrace>,
}

/// Run `reps` repetitions of `method` and assemble the metrics report.
pub fn run_benchmark(
    pipeline: &Pipeline,
    method: Method,
    reps: usize,
    net: Option<&RewardNet>,
) -> anyhow::Result<SearchArtifacts> {
    anyhow::ensure!(reps > 0, "need at least one repetition");
    eprintln!("running {} x{} repetitions", method.name(), reps);
    let outcomes: Vec<anyhow::Result<RepOutcome>> = (0..reps)
        .into_par_iter()
        .map(|rep| run_one_rep(pipeline, method, rep, net))
        .collect();

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut timings = Vec::new();
    let mut vanilla_pairs = Vec::new();
    let mut failures = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                if let Some(v) = o.vanilla_composite {
                    vanilla_pairs.push((o.row.composite, v));
                }
                rows.push(o.row);
                traces.push(o.trace);
                timings.push(o.timing);
            }
            Err(e) => {
                eprintln!("repetition failed: {e}");
                failures += 1;
            }
        }
    }
    anyhow::ensure!(
        (failures as f64) <= 0.05 * reps as f64,
        "{failures} of {reps} repetitions failed (> 5%)"
    );

    let composites: Vec<f64> = rows.iter().map(|r| r.composite).collect();
    let aggregate = summarize(&composites)?;
    let vq_aggregate = summarize(&rows.iter().map(|r| r.vq).collect::<Vec<_>>())?;
    let mq_aggregate = summarize(&rows.iter().map(|r| r.mq).collect::<Vec<_>>())?;
    let ta_aggregate = summarize(&rows.iter().map(|r| r.ta).collect::<Vec<_>>())?;
    let vanilla = if vanilla_pairs.is_empty() {
        None
    } else {
        let method_scores: Vec<f64> = vanilla_pairs.iter().map(|p| p.0).collect();
        let vanilla_scores: Vec<f64> = vanilla_pairs.iter().map(|p| p.1).collect();
        Some(VanillaComparison {
            aggregate: summarize(&vanilla_scores)?,
            wilcoxon: wilcoxon_signed_rank(&method_scores, &vanilla_scores)?,
            per_run_composite: vanilla_scores,
        })
    };
    let deterministic = DeterministicSection {
        method: method.name().to_string(),
        calibration: pipeline.calibration,
        reps_requested: reps,
        reps_completed: rows.len(),
        failures,
        per_run: rows,
        aggregate,
        vq_aggregate,
        mq_aggregate,
        ta_aggregate,
        vanilla,
    };
    let report = MetricsReport::new(
        TOOL_VERSION,
        &pipeline.config_hash,
        deterministic,
        timings,
    );
    Ok(SearchArtifacts { report, traces })
}

/// `search` subcommand: benchmark + report, traces and per-run plot data.
pub fn cmd_search(
    pipeline: &Pipeline,
    method: Method,
    reps: usize,
    net: Option<&RewardNet>,
    out: &Path,
) -> anyhow::Result<MetricsReport> {
    let artifacts = run_benchmark(pipeline, method, reps, net)?;
    let report_path = out.join(format!("report_{}.json", method.name()));
    artifacts.report.save(&report_path)?;

    let mut lines = String::new();
    for t in &artifacts.traces {
        lines.push_str(&serde_json::to_string(t)?);
        lines.push('\n');
    }
    write_atomic(&out.join(format!("traces_{}.jsonl", method.name())), lines.as_bytes())?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "rep", "method", "prompt", "composite", "vq", "mq", "ta", "step_units",
        "config_hash", "tool_version",
    ])?;
    for r in &artifacts.report.deterministic.per_run {
        wtr.write_record([
            r.rep.to_string(),
            method.name().to_string(),
            r.prompt.to_string(),
            r.composite.to_string(),
            r.vq.to_string(),
            r.mq.to_string(),
            r.ta.to_string(),
            r.step_units.to_string(),
            pipeline.config_hash.clone(),
            TOOL_VERSION.to_string(),
        ])?;
    }
    write_atomic(
        &out.join(format!("runs_{}.csv", method.name())),
        &wtr.into_inner()?,
    )?;

    let d = &artifacts.report.deterministic;
    eprint!(
        "{}: mean composite {:.4} (95% CI [{:.4}, {:.4}]) over {} runs",
        method.name(),
        d.aggregate.mean,
        d.aggregate.ci95_lo,
        d.aggregate.ci95_hi,
        d.reps_completed
    );
    if let Some(v) = &d.vanilla {
        eprint!(
            "; vs vanilla mean {:.4}, one-sided Wilcoxon p = {:.3e}",
            v.aggregate.mean, v.wilcoxon.p_one_sided
        );
    }
    eprintln!();
    eprintln!("report written to {}", report_path.display());
    Ok(artifacts.report)
}
