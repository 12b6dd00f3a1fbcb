//! Plot-data emission: consume metrics reports and accuracy CSVs, emit
//! tidy (x, y, series) CSVs plus rendered SVG charts.

use std::path::{Path, PathBuf};

use anyhow::Context;

use latsearch_core::io::write_atomic;

use crate::report::MetricsReport;
use crate::svg::{line_chart, stacked_bar_chart, Series};

#[derive(Debug)]
struct AccuracyRow {
    source: String,
    timestep: usize,
    dim: String,
    accuracy: f64,
    config_hash: String,
}

pub fn cmd_plot(inputs: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    anyhow::ensure!(!inputs.is_empty(), "no input reports given");
    let mut reports: Vec<(String, MetricsReport)> = Vec::new();
    let mut accuracy_rows: Vec<AccuracyRow> = Vec::new();
    for path in inputs {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let report = MetricsReport::load(path)
                    .with_context(|| format!("loading report {}", path.display()))?;
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "report".into());
                reports.push((label, report));
            }
            Some("csv") => {
                accuracy_rows.extend(read_accuracy_csv(path)?);
            }
            _ => anyhow::bail!("unsupported input {}", path.display()),
        }
    }
    std::fs::create_dir_all(out)?;

    if !reports.is_empty() {
        reward_vs_budget(&reports, out)?;
        time_breakdown(&reports, out)?;
    }
    if !accuracy_rows.is_empty() {
        accuracy_vs_timestep(&accuracy_rows, out)?;
    }
    eprintln!("plot data written to {}", out.display());
    Ok(())
}

fn read_accuracy_csv(path: &Path) -> anyhow::Result<Vec<AccuracyRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let need = ["timestep", "dim", "accuracy"];
    for field in need {
        anyhow::ensure!(
            headers.iter().any(|h| h == field),
            "{}: schema error, missing field '{field}'",
            path.display()
        );
    }
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ix = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let hash_ix = headers.iter().position(|h| h == "config_hash");
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(AccuracyRow {
            source: source.clone(),
            timestep: record[ix("timestep")].parse()?,
            dim: record[ix("dim")].to_string(),
            accuracy: record[ix("accuracy")].parse()?,
            config_hash: hash_ix.map(|i| record[i].to_string()).unwrap_or_default(),
        });
    }
    Ok(rows)
}

/// Mean composite reward against mean denoiser step-units per report.
fn reward_vs_budget(reports: &[(String, MetricsReport)], out: &Path) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["x", "y", "series", "config_hash", "tool_version"])?;
    let mut by_method: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for (_, report) in reports {
        let d = &report.deterministic;
        let budget: f64 = d.per_run.iter().map(|r| r.step_units as f64).sum::<f64>()
            / d.per_run.len().max(1) as f64;
        wtr.write_record([
            budget.to_string(),
            d.aggregate.mean.to_string(),
            d.method.clone(),
            report.config_hash.clone(),
            report.tool_version.clone(),
        ])?;
        by_method
            .entry(d.method.clone())
            .or_default()
            .push((budget, d.aggregate.mean));
    }
    write_atomic(&out.join("plot_reward_vs_budget.csv"), &wtr.into_inner()?)?;
    let mut series: Vec<Series> = by_method
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect();
    series.sort_by(|a, b| a.label.cmp(&b.label));
    let svg = line_chart(
        "Oracle reward vs denoiser budget",
        "mean denoiser step-units",
        "mean composite reward",
        &series,
    );
    write_atomic(&out.join("plot_reward_vs_budget.svg"), svg.as_bytes())?;
    Ok(())
}

fn accuracy_vs_timestep(rows: &[AccuracyRow], out: &Path) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["x", "y", "series", "config_hash", "tool_version"])?;
    let mut by_series: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    let multi_source = {
        let mut sources: Vec<&str> = rows.iter().map(|r| r.source.as_str()).collect();
        sources.sort_unstable();
        sources.dedup();
        sources.len() > 1
    };
    for r in rows {
        let series = if multi_source {
            format!("{}/{}", r.source, r.dim)
        } else {
            r.dim.clone()
        };
        wtr.write_record([
            r.timestep.to_string(),
            r.accuracy.to_string(),
            series.clone(),
            r.config_hash.clone(),
            crate::config::TOOL_VERSION.to_string(),
        ])?;
        by_series
            .entry(series)
            .or_default()
            .push((r.timestep as f64, r.accuracy));
    }
    write_atomic(&out.join("plot_accuracy_vs_timestep.csv"), &wtr.into_inner()?)?;
    let series: Vec<Series> = by_series
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect();
    let svg = line_chart(
        "Pairwise preference accuracy vs timestep",
        "timestep",
        "accuracy",
        &series,
    );
    write_atomic(&out.join("plot_accuracy_vs_timestep.svg"), svg.as_bytes())?;
    Ok(())
}

/// Per-method phase times (stacked): denoiser, reward model, decoder.
fn time_breakdown(reports: &[(String, MetricsReport)], out: &Path) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["method", "phase", "seconds_per_run", "config_hash", "tool_version"])?;
    let mut categories = Vec::new();
    let mut values = Vec::new();
    for (_, report) in reports {
        let d = &report.deterministic;
        let n = d.reps_completed.max(1) as f64;
        let t = &report.timing;
        let per_run = [
            t.denoiser_total_s / n,
            t.reward_total_s / n,
            t.decode_total_s / n,
        ];
        for (phase, v) in ["denoiser", "reward_model", "decoder"].iter().zip(per_run) {
            wtr.write_record([
                d.method.clone(),
                phase.to_string(),
                v.to_string(),
                report.config_hash.clone(),
                report.tool_version.clone(),
            ])?;
        }
        categories.push(d.method.clone());
        values.push(per_run.to_vec());
    }
    write_atomic(&out.join("plot_time_breakdown.csv"), &wtr.into_inner()?)?;
    let svg = stacked_bar_chart(
        "Runtime breakdown per run",
        "seconds per run",
        &categories,
        &["denoiser".into(), "reward_model".into(), "decoder".into()],
        &values,
    );
    write_atomic(&out.join("plot_time_breakdown.svg"), svg.as_bytes())?;
    Ok(())
}
