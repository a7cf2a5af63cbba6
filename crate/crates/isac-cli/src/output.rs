//! Trace and sweep serialization.
//!
//! CSV carries one header row plus fixed-order columns; every file starts
//! with the resolved configuration as `# key = value` comment lines so any
//! figure can be reproduced from the file alone. Data cells print with 12
//! significant digits; dB values of nonpositive linears render as "-inf",
//! and the undefined delta of the initial record renders as "inf". JSON
//! mirrors the same fields (non-finite values as those strings) plus the
//! config echo.

use isac_core::runner::{db_from_linear, IterationRecord, RunResult, SweepSummary};
use isac_core::scene::Quantization;
use serde_json::{json, Map, Value};

use crate::config::{echo_pairs, Settings};
use crate::CliError;

pub const TRACE_COLUMNS: &str =
    "iter,snr_r_db,snr_c_db,snr_t_db,delta,track_gap_b,track_gap_u,track_gap_p";

fn cell(value: f64) -> String {
    // 12 significant digits; infinities fall through as "inf"/"-inf".
    format!("{value:.11e}")
}

fn comment_header(settings: &Settings) -> String {
    let mut out = String::from("# resolved configuration\n");
    for (key, value) in echo_pairs(settings) {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out
}

/// CSV trace: config echo, header row, one row per record.
pub fn trace_csv(result: &RunResult, settings: &Settings) -> String {
    let mut out = comment_header(settings);
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for r in &result.trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter,
            cell(r.snr_r_db),
            cell(r.snr_c_db),
            cell(r.snr_t_db),
            cell(r.delta),
            cell(r.track_gap_b),
            cell(r.track_gap_u),
            cell(r.track_gap_p),
        ));
    }
    out
}

fn finite_or_text(value: f64) -> Value {
    if value.is_finite() {
        json!(value)
    } else if value == f64::INFINITY {
        json!("inf")
    } else if value == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn record_json(r: &IterationRecord) -> Value {
    json!({
        "iter": r.iter,
        "snr_r_db": finite_or_text(r.snr_r_db),
        "snr_c_db": finite_or_text(r.snr_c_db),
        "snr_t_db": finite_or_text(r.snr_t_db),
        "delta": finite_or_text(r.delta),
        "track_gap_b": finite_or_text(r.track_gap_b),
        "track_gap_u": finite_or_text(r.track_gap_u),
        "track_gap_p": finite_or_text(r.track_gap_p),
    })
}

fn config_json(settings: &Settings) -> Value {
    let mut map = Map::new();
    for (key, value) in echo_pairs(settings) {
        map.insert(key, Value::String(value));
    }
    Value::Object(map)
}

/// JSON trace mirroring the CSV fields plus the config echo.
pub fn trace_json(result: &RunResult, settings: &Settings) -> String {
    let body = json!({
        "config": config_json(settings),
        "converged": result.converged,
        "iterations_used": result.iterations_used,
        "final_snr_t_db": finite_or_text(db_from_linear(result.final_snr.snr_t)),
        "final_snr_r_db": finite_or_text(db_from_linear(result.final_snr.snr_r)),
        "final_snr_c_db": finite_or_text(db_from_linear(result.final_snr.snr_c)),
        "trace": result.trace.iter().map(record_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&body).expect("trace serialization") + "\n"
}

fn json_field_f64(value: &Value, field: &str) -> Result<f64, CliError> {
    let v = value
        .get(field)
        .ok_or_else(|| CliError::config(format!("trace JSON missing field {field}")))?;
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| CliError::config(format!("field {field} is not an f64"))),
        Value::String(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(CliError::config(format!("field {field} has bad sentinel {other:?}"))),
        },
        _ => Err(CliError::config(format!("field {field} has unexpected type"))),
    }
}

/// Parse the trace rows back out of the JSON form (round-trip support).
pub fn parse_trace_json(text: &str) -> Result<Vec<IterationRecord>, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("trace JSON parse failure: {e}")))?;
    let rows = value
        .get("trace")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::config("trace JSON missing 'trace' array".to_string()))?;
    rows.iter()
        .map(|row| {
            Ok(IterationRecord {
                iter: row
                    .get("iter")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| CliError::config("trace row missing iter".to_string()))?
                    as usize,
                snr_r_db: json_field_f64(row, "snr_r_db")?,
                snr_c_db: json_field_f64(row, "snr_c_db")?,
                snr_t_db: json_field_f64(row, "snr_t_db")?,
                delta: json_field_f64(row, "delta")?,
                track_gap_b: json_field_f64(row, "track_gap_b")?,
                track_gap_u: json_field_f64(row, "track_gap_u")?,
                track_gap_p: json_field_f64(row, "track_gap_p")?,
            })
        })
        .collect()
}

fn quantization_text(q: Quantization) -> String {
    match q {
        Quantization::Levels(m) => m.to_string(),
        Quantization::Continuous => "continuous".to_string(),
    }
}

pub const SWEEP_COLUMNS: &str =
    "m,runs,converged_runs,final_snr_t_db_median,final_snr_t_db_q1,final_snr_t_db_q3";

/// CSV sweep summary: one row per quantization level.
pub fn sweep_csv(summary: &SweepSummary, settings: &Settings) -> String {
    let mut out = comment_header(settings);
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for row in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            quantization_text(row.quantization),
            row.final_snr_t.len(),
            row.converged_runs,
            cell(db_from_linear(row.median)),
            cell(db_from_linear(row.lower_quartile)),
            cell(db_from_linear(row.upper_quartile)),
        ));
    }
    out
}

/// JSON sweep summary with the per-seed finals included.
pub fn sweep_json(summary: &SweepSummary, settings: &Settings) -> String {
    let rows: Vec<Value> = summary
        .rows
        .iter()
        .map(|row| {
            json!({
                "m": quantization_text(row.quantization),
                "runs": row.final_snr_t.len(),
                "converged_runs": row.converged_runs,
                "final_snr_t_db_median": finite_or_text(db_from_linear(row.median)),
                "final_snr_t_db_q1": finite_or_text(db_from_linear(row.lower_quartile)),
                "final_snr_t_db_q3": finite_or_text(db_from_linear(row.upper_quartile)),
                "final_snr_t_db_per_seed": row
                    .final_snr_t
                    .iter()
                    .map(|&v| finite_or_text(db_from_linear(v)))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let body = json!({
        "config": config_json(settings),
        "seeds": summary.seeds,
        "rows": rows,
    });
    serde_json::to_string_pretty(&body).expect("sweep serialization") + "\n"
}
