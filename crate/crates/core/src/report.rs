//! Order-parameter report: one CSV row per run plus a JSON block of the labeling constants.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::{LabelThresholds, Phase};

pub const REPORT_HEADER: &str = "run_id,seed,f_p,f_d,s,v_bar,label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run_id: String,
    pub seed: u64,
    pub f_p: f64,
    pub f_d: f64,
    pub s: f64,
    pub v_bar: f64,
    pub label: Phase,
}

/// Constants that produced the labels in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConstants {
    pub bin_width: f64,
    pub r_start: f64,
    pub r_max: f64,
    pub s0: f64,
    pub v0: f64,
    pub warmup: u64,
    pub code_version: String,
    /// Configuration that produced this output, when run from a config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ReportConstants {
    pub fn new(thresholds: &LabelThresholds, warmup: u64) -> Self {
        ReportConstants {
            bin_width: thresholds.rdf_bin_width,
            r_start: thresholds.sdrdf_r_start,
            r_max: thresholds.rdf_r_max,
            s0: thresholds.s0,
            v0: thresholds.v0,
            warmup,
            code_version: crate::CODE_VERSION.to_string(),
            config: None,
        }
    }
}

/// Shortest round-trip formatting keeps files byte-stable.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        if r.run_id.contains([',', '"', '\n']) {
            let _ = write!(out, "\"{}\"", r.run_id.replace('"', "\"\""));
        } else {
            out.push_str(&r.run_id);
        }
        let _ = writeln!(out, ",{},{},{},{},{},{}", r.seed, r.f_p, r.f_d, r.s, r.v_bar, r.label);
    }
    out
}

/// Parse rows written by [`report_csv`] (run ids without quotes or commas).
pub fn parse_report_csv(text: &str) -> std::result::Result<Vec<ReportRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err("missing report header".into());
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("row {}: expected 7 fields", k + 1));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("row {}: {e}", k + 1));
            Ok(ReportRow {
                run_id: f[0].to_string(),
                seed: f[1].parse().map_err(|e| format!("row {}: {e}", k + 1))?,
                f_p: num(2)?,
                f_d: num(3)?,
                s: num(4)?,
                v_bar: num(5)?,
                label: f[6].parse().map_err(|e| format!("row {}: {e}", k + 1))?,
            })
        })
        .collect()
}

/// Write `path` and `<path>.json`.
pub fn write_report(path: &Path, rows: &[ReportRow], constants: &ReportConstants) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, report_csv(rows)).map_err(|e| Error::io(path, e))?;
    let side = crate::trajio::sidecar_path(path);
    let mut json = serde_json::to_string_pretty(constants)?;
    json.push('\n');
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ReportRow {
                run_id: "fp0.03_fd0.002_s7".into(),
                seed: 7,
                f_p: 0.03,
                f_d: 0.002,
                s: 0.612_345_678_9,
                v_bar: 1.5e-5,
                label: Phase::PC,
            },
            ReportRow {
                run_id: "b".into(),
                seed: 8,
                f_p: 0.3,
                f_d: 0.05,
                s: 0.2,
                v_bar: 3.0,
                label: Phase::ML,
            },
        ];
        let text = report_csv(&rows);
        assert!(text.starts_with("run_id,seed,f_p,f_d,s,v_bar,label\nfp0.03_fd0.002_s7,7,0.03,0.002,"));
        assert_eq!(parse_report_csv(&text).unwrap(), rows);
        assert!(parse_report_csv("nope\n").is_err());
    }
}
