//! End-to-end tests of the binary: exit codes, output conventions, schema
//! conformance of emitted files, and the plot command.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latsearch"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Small config so the whole pipeline runs in a couple of seconds.
fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    write(
        &path,
        r#"
[dataset]
prompts = 6
seeds_per_prompt = 2

[train]
epochs = 4
hidden = 32

[run]
repetitions = 5
calibration_samples = 1000
"#,
    );
    path
}

#[test]
fn unknown_config_key_exits_2_with_field_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    write(&bad, "[search]\nnum_candidates = 4\nbad_key = 1\n");
    let out = bin()
        .args(["build-dataset", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad_key"), "{stderr}");
}

#[test]
fn invalid_method_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["search", "--method", "warp-drive", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_exits_2_and_unreadable_dataset_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bin()
        .args(["search", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "search without checkpoint");

    let out = bin()
        .args(["train-reward", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("--dataset")
        .arg(dir.path().join("no-such-dataset"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "train on missing dataset");
}

#[test]
fn env_var_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_root = dir.path().join("from-env");
    let result = bin()
        .args(["build-dataset", "--config"])
        .arg(&cfg)
        .env("LATSEARCH_OUT", &out_root)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0));
    assert!(out_root.join("dataset/manifest.json").exists());
}

#[test]
fn full_pipeline_then_plot_and_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    for step in [
        vec!["build-dataset"],
        vec!["train-reward"],
        vec!["eval-reward"],
        vec!["search", "--method", "latsearch"],
        vec!["search", "--method", "vanilla"],
    ] {
        let result = bin()
            .args(&step)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .arg("--workers")
            .arg("2")
            .output()
            .unwrap();
        assert_eq!(
            result.status.code(),
            Some(0),
            "step {step:?}: {}",
            String::from_utf8_lossy(&result.stderr)
        );
    }

    // Emitted JSON validates against the shipped schemas.
    let schema_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    let check = |value_path: &Path, schema_file: &str| {
        let value: serde_json::Value =
            serde_json::from_slice(&std::fs::read(value_path).unwrap()).unwrap();
        let schema: serde_json::Value =
            serde_json::from_slice(&std::fs::read(schema_dir.join(schema_file)).unwrap()).unwrap();
        latsearch_cli::report::validate_schema(&value, &schema, "$")
            .unwrap_or_else(|e| panic!("{} fails {schema_file}: {e}", value_path.display()));
    };
    check(&out.join("report_latsearch.json"), "metrics_report.schema.json");
    check(&out.join("dataset/manifest.json"), "dataset_manifest.schema.json");
    let traces = std::fs::read_to_string(out.join("traces_latsearch.jsonl")).unwrap();
    for line in traces.lines().take(3) {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        let schema: serde_json::Value = serde_json::from_slice(
            &std::fs::read(schema_dir.join("search_trace.schema.json")).unwrap(),
        )
        .unwrap();
        latsearch_cli::report::validate_schema(&value, &schema, "$").unwrap();
    }

    // Plot from the two reports plus the accuracy table.
    let plots = dir.path().join("plots");
    let result = bin()
        .arg("plot")
        .arg(out.join("report_latsearch.json"))
        .arg(out.join("report_vanilla.json"))
        .arg(out.join("accuracy.csv"))
        .arg("--out")
        .arg(&plots)
        .output()
        .unwrap();
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    for f in [
        "plot_reward_vs_budget.csv",
        "plot_reward_vs_budget.svg",
        "plot_accuracy_vs_timestep.csv",
        "plot_accuracy_vs_timestep.svg",
        "plot_time_breakdown.csv",
        "plot_time_breakdown.svg",
    ] {
        assert!(plots.join(f).exists(), "missing {f}");
    }
    // Time-breakdown series sum to within 5% of the per-run wall time.
    let report: latsearch_cli::report::MetricsReport =
        serde_json::from_slice(&std::fs::read(out.join("report_latsearch.json")).unwrap())
            .unwrap();
    assert!((0.95..=1.05).contains(&report.timing.phase_sum_ratio));

    // Training descended on the training set.
    let curves = std::fs::read_to_string(out.join("loss_curves.csv")).unwrap();
    let totals: Vec<f64> = curves
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(8).unwrap().parse().unwrap())
        .collect();
    assert!(totals.last().unwrap() < totals.first().unwrap());
    // Every CSV row carries the config hash and tool version.
    let header = curves.lines().next().unwrap();
    assert!(header.contains("config_hash") && header.contains("tool_version"));

    // Temperature ablation reuses the trained checkpoint.
    let result = bin()
        .args(["ablate", "--axis", "temperature", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--reps")
        .arg("3")
        .output()
        .unwrap();
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let sweep = std::fs::read_to_string(out.join("ablate_temperature.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4); // header + tau in {0.5, 1.0, 2.0}

    // Stale/mismatched inputs are rejected with a named field.
    let stale = dir.path().join("stale.json");
    write(&stale, r#"{"schema_version": 1}"#);
    let result = bin()
        .arg("plot")
        .arg(&stale)
        .arg("--out")
        .arg(&plots)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("tool_version"), "{stderr}");
}

#[test]
fn unwritable_output_dir_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    // A path under a regular file can never become a directory.
    let blocker = dir.path().join("blocker");
    write(&blocker, "not a directory");
    let out = bin()
        .args(["build-dataset", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ablate_loss_axis_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let result = bin()
        .args(["ablate", "--axis", "loss", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let table = std::fs::read_to_string(out.join("ablate_loss.csv")).unwrap();
    assert!(table.contains("reg_only") && table.contains("reg_plus_pref"));
}
