//! Metrics report emitted by the search command: deterministic results
//! (hashed) and wall-clock timings (excluded from the hash).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use latsearch_core::io::{sha256_hex, write_atomic};
use latsearch_core::oracle::OracleCalibration;
use latsearch_core::search::PhaseTimings;
use latsearch_core::stats::{Summary, WilcoxonResult};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRow {
    pub rep: usize,
    pub prompt: usize,
    pub composite: f64,
    pub vq: f64,
    pub mq: f64,
    pub ta: f64,
    pub step_units: u64,
    pub eps_evals: u64,
    pub reward_evals: u64,
    pub decode_count: u64,
    pub winner_seed_id: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VanillaComparison {
    pub per_run_composite: Vec<f64>,
    pub aggregate: Summary,
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterministicSection {
    pub method: String,
    /// Oracle calibration constants the scores were produced under.
    pub calibration: OracleCalibration,
    pub reps_requested: usize,
    pub reps_completed: usize,
    pub failures: usize,
    pub per_run: Vec<RunRow>,
    pub aggregate: Summary,
    pub vq_aggregate: Summary,
    pub mq_aggregate: Summary,
    pub ta_aggregate: Summary,
    /// Present when the method was compared against vanilla on shared noise.
    pub vanilla: Option<VanillaComparison>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub per_run: Vec<PhaseTimings>,
    pub denoiser_total_s: f64,
    pub reward_total_s: f64,
    pub decode_total_s: f64,
    pub wall_total_s: f64,
    /// (denoiser + reward + decode) / wall, aggregated over runs.
    pub phase_sum_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub deterministic: DeterministicSection,
    /// Hash of the deterministic section only; timings never affect it.
    pub content_hash: String,
    pub timing: TimingSection,
}

impl MetricsReport {
    pub fn new(
        tool_version: &str,
        config_hash: &str,
        deterministic: DeterministicSection,
        timings: Vec<PhaseTimings>,
    ) -> Self {
        let denoiser_total_s: f64 = timings.iter().map(|t| t.denoiser_s).sum();
        let reward_total_s: f64 = timings.iter().map(|t| t.reward_s).sum();
        let decode_total_s: f64 = timings.iter().map(|t| t.decode_s).sum();
        let wall_total_s: f64 = timings.iter().map(|t| t.total_s).sum();
        let phase_sum_ratio = if wall_total_s > 0.0 {
            (denoiser_total_s + reward_total_s + decode_total_s) / wall_total_s
        } else {
            1.0
        };
        let content_hash = sha256_hex(
            &serde_json::to_vec(&deterministic).expect("deterministic section serializes"),
        );
        MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: tool_version.to_string(),
            config_hash: config_hash.to_string(),
            deterministic,
            content_hash,
            timing: TimingSection {
                per_run: timings,
                denoiser_total_s,
                reward_total_s,
                decode_total_s,
                wall_total_s,
                phase_sum_ratio,
            },
        }
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        write_atomic(path, &bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<MetricsReport> {
        let value: Value = serde_json::from_slice(&std::fs::read(path)?)?;
        let schema: Value = serde_json::from_str(include_str!("../../../schemas/metrics_report.schema.json"))?;
        validate_schema(&value, &schema, "$")
            .map_err(|field| anyhow::anyhow!("report {} failed schema check: {field}", path.display()))?;
        Ok(serde_json::from_value(value)?)
    }
}

/// Minimal structural validator for the shipped schemas: supports `type`,
/// `required`, `properties` and `items`. Returns the offending field path.
pub fn validate_schema(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type").and_then(|t| t.as_str()) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => true,
        };
        if !ok {
            return Err(format!("{path}: expected {ty}"));
        }
    }
    if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
        for key in required {
            let key = key.as_str().unwrap_or_default();
            if value.get(key).is_none() {
                return Err(format!("{path}.{key}: missing required field"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(|p| p.as_object()) {
        for (key, sub) in props {
            if let Some(v) = value.get(key) {
                validate_schema(v, sub, &format!("{path}.{key}"))?;
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate_schema(v, items, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_validator_names_offending_field() {
        let schema: Value = serde_json::from_str(
            r#"{"type":"object","required":["a","b"],"properties":{"a":{"type":"number"},"b":{"type":"array","items":{"type":"string"}}}}"#,
        )
        .unwrap();
        let good: Value = serde_json::from_str(r#"{"a":1,"b":["x"]}"#).unwrap();
        assert!(validate_schema(&good, &schema, "$").is_ok());
        let missing: Value = serde_json::from_str(r#"{"a":1}"#).unwrap();
        let err = validate_schema(&missing, &schema, "$").unwrap_err();
        assert!(err.contains("$.b"), "{err}");
        let wrong: Value = serde_json::from_str(r#"{"a":1,"b":[2]}"#).unwrap();
        let err = validate_schema(&wrong, &schema, "$").unwrap_err();
        assert!(err.contains("b[0]"), "{err}");
    }
}
