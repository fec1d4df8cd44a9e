//! Metrics log, its CSV form, frame dumps and the run summary.
//!
//! `metrics.csv` has one header line followed by one line per tick, `\n`
//! terminated. Reals carry at most 9 significant digits in Rust's shortest
//! round-trip notation (`0.1`, `1e-7`, `nan`), flags are `0`/`1`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::mapping::Frame;

use super::{ScenarioConfig, ScenarioError};

pub const METRICS_HEADER: &str = "t,alignment_error_deg,standoff_error_mm,onface_mean_mm,onface_max_mm,est_distance_m,true_distance_m,q1,q2,q3,q4,q5,q6,detection_valid,predictor_on";

const COLUMNS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Tick time, s. The remaining geometry refers to the frame commanded at
    /// `t`, when it is on screen.
    pub t: f64,
    pub alignment_error_deg: f64,
    pub standoff_error_mm: f64,
    /// NaN while nothing is tracked.
    pub onface_mean_mm: f64,
    pub onface_max_mm: f64,
    /// NaN unless a frame was delivered (true) and estimated (est) this tick.
    pub est_distance_m: f64,
    pub true_distance_m: f64,
    pub q: [f64; 6],
    pub detection_valid: bool,
    pub predictor_on: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

/// Rounds to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v + 0.0;
    }
    format!("{v:.8e}")
        .parse::<f64>()
        .expect("formatted float parses")
        + 0.0
}

pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    format!("{}", round_sig9(v))
}

fn parse_real(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

impl MetricsRow {
    fn reals(&self) -> [f64; 13] {
        let q = self.q;
        [
            self.t,
            self.alignment_error_deg,
            self.standoff_error_mm,
            self.onface_mean_mm,
            self.onface_max_mm,
            self.est_distance_m,
            self.true_distance_m,
            q[0],
            q[1],
            q[2],
            q[3],
            q[4],
            q[5],
        ]
    }

    pub fn to_csv_line(&self) -> String {
        let mut fields: Vec<String> = self.reals().iter().map(|v| format_real(*v)).collect();
        fields.push(u8::from(self.detection_valid).to_string());
        fields.push(u8::from(self.predictor_on).to_string());
        fields.join(",")
    }

    /// The row as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| round_sig9(v);
        Self {
            t: r(self.t),
            alignment_error_deg: r(self.alignment_error_deg),
            standoff_error_mm: r(self.standoff_error_mm),
            onface_mean_mm: r(self.onface_mean_mm),
            onface_max_mm: r(self.onface_max_mm),
            est_distance_m: r(self.est_distance_m),
            true_distance_m: r(self.true_distance_m),
            q: self.q.map(r),
            ..*self
        }
    }
}

impl MetricsLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(128 * (self.rows.len() + 1));
        s.push_str(METRICS_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.to_csv_line());
            s.push('\n');
        }
        s
    }

    /// Reads back a `metrics.csv`.
    pub fn from_csv(text: &str) -> Result<Self, ScenarioError> {
        let err = |line: usize, message: String| ScenarioError::Csv { line, message };
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(err(1, "missing or unexpected header".into()));
        }
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != COLUMNS {
                return Err(err(
                    line_no,
                    format!("expected {COLUMNS} fields, got {}", fields.len()),
                ));
            }
            let mut reals = [0.0; 13];
            for (i, f) in fields[..13].iter().enumerate() {
                reals[i] =
                    parse_real(f).ok_or_else(|| err(line_no, format!("bad number `{f}`")))?;
            }
            let flag = |f: &str| match f {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(err(line_no, format!("bad flag `{f}`"))),
            };
            rows.push(MetricsRow {
                t: reals[0],
                alignment_error_deg: reals[1],
                standoff_error_mm: reals[2],
                onface_mean_mm: reals[3],
                onface_max_mm: reals[4],
                est_distance_m: reals[5],
                true_distance_m: reals[6],
                q: [
                    reals[7], reals[8], reals[9], reals[10], reals[11], reals[12],
                ],
                detection_valid: flag(fields[13])?,
                predictor_on: flag(fields[14])?,
            });
        }
        Ok(Self { rows })
    }
}

/// Aggregates written to `run.json`. Statistics skip NaN rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub rows: usize,
    pub duration_s: f64,
    pub onface_mean_mm: Option<f64>,
    /// Nearest-rank 95th percentile of the per-tick on-face mean.
    pub onface_p95_mm: Option<f64>,
    pub onface_max_mm: Option<f64>,
    pub alignment_mean_deg: Option<f64>,
    pub alignment_final_deg: Option<f64>,
    pub standoff_mean_mm: Option<f64>,
    pub detection_valid_fraction: f64,
    pub config: BTreeMap<String, String>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Nearest-rank percentile (`p` in (0, 100]).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

impl RunSummary {
    pub fn new(log: &MetricsLog, cfg: &ScenarioConfig) -> Self {
        let finite = |f: fn(&MetricsRow) -> f64| -> Vec<f64> {
            log.rows.iter().map(f).filter(|v| v.is_finite()).collect()
        };
        let onface = finite(|r| r.onface_mean_mm);
        let alignment = finite(|r| r.alignment_error_deg);
        let n = log.rows.len();
        Self {
            rows: n,
            duration_s: cfg.duration,
            onface_mean_mm: mean(&onface),
            onface_p95_mm: percentile(&onface, 95.0),
            onface_max_mm: finite(|r| r.onface_max_mm).into_iter().reduce(f64::max),
            alignment_mean_deg: mean(&alignment),
            alignment_final_deg: log.rows.last().map(|r| r.alignment_error_deg),
            standoff_mean_mm: mean(&finite(|r| r.standoff_error_mm)),
            detection_valid_fraction: if n == 0 {
                0.0
            } else {
                log.rows.iter().filter(|r| r.detection_valid).count() as f64 / n as f64
            },
            config: cfg.to_pairs(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn frame_path(out_dir: &Path, tick: u64) -> PathBuf {
    out_dir.join(format!("frame_{tick:06}.ppm"))
}

pub fn write_frame(out_dir: &Path, tick: u64, frame: &Frame) -> Result<(), ScenarioError> {
    frame
        .save(&frame_path(out_dir, tick))
        .map_err(|e| ScenarioError::Io(e.to_string()))
}

/// Writes `metrics.csv`, `run.json` and any frames (tick, frame) into
/// `out_dir`, creating it if needed.
pub fn write_outputs(
    log: &MetricsLog,
    frames: &[(u64, Frame)],
    cfg: &ScenarioConfig,
    out_dir: &Path,
) -> Result<(), ScenarioError> {
    let io = |e: std::io::Error| ScenarioError::Io(format!("{}: {e}", out_dir.display()));
    fs::create_dir_all(out_dir).map_err(io)?;
    fs::write(out_dir.join("metrics.csv"), log.to_csv()).map_err(io)?;
    fs::write(
        out_dir.join("run.json"),
        RunSummary::new(log, cfg).to_json(),
    )
    .map_err(io)?;
    for (tick, frame) in frames {
        write_frame(out_dir, *tick, frame)?;
    }
    Ok(())
}
