//! Run reports and file emission: report JSON, event CSV, phase-trace CSV,
//! and sweep tables. All writers are deterministic: rerunning an identical
//! (config, seed) reproduces every output byte except `wall_time_seconds`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{Error, Result};
use crate::interferometer::PhaseTrace;
use crate::runner::SweepRow;
use crate::tomography::{DetectionEvent, Detector, EventRecord, Origin, TomographyResult, Window};

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub records: Vec<EventRecord>,
    pub phase_trace: Option<PhaseTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: u64,
    pub parallel: bool,
    pub config: ExperimentConfig,
    pub tomography: TomographyResult,
    pub counts: CountSummary,
    pub timing: TimingSummary,
    pub phase: Option<PhaseSummary>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall time zeroed, for byte-level reproducibility
    /// checks.
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.wall_time_seconds = 0.0;
        Ok(serde_json::to_string_pretty(&clone)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSummary {
    pub heralds: u64,
    pub events: u64,
    pub d1: u64,
    pub d2: u64,
    pub d3: u64,
    pub d4: u64,
    pub early: u64,
    pub middle: u64,
    pub late: u64,
    pub signal: u64,
    pub noise: u64,
    pub dark: u64,
    pub attempts: u64,
    pub cr_checks: u64,
    pub protocol_restarts: u64,
}

impl CountSummary {
    pub fn tally(records: &[EventRecord], stats: &crate::runner::WorkStats) -> Self {
        let mut counts = CountSummary {
            heralds: 0,
            events: records.len() as u64,
            d1: 0,
            d2: 0,
            d3: 0,
            d4: 0,
            early: 0,
            middle: 0,
            late: 0,
            signal: 0,
            noise: 0,
            dark: 0,
            attempts: stats.attempts,
            cr_checks: stats.cr_checks,
            protocol_restarts: stats.restarts,
        };
        let mut last_trial: Option<u64> = None;
        for r in records {
            if last_trial != Some(r.event.trial_id) {
                counts.heralds += 1;
                last_trial = Some(r.event.trial_id);
            }
            match r.event.detector {
                Detector::D1 => counts.d1 += 1,
                Detector::D2 => counts.d2 += 1,
                Detector::D3 => counts.d3 += 1,
                Detector::D4 => counts.d4 += 1,
            }
            match r.event.window {
                Window::Early => counts.early += 1,
                Window::Middle => counts.middle += 1,
                Window::Late => counts.late += 1,
            }
            match r.event.origin {
                Origin::Signal => counts.signal += 1,
                Origin::Noise => counts.noise += 1,
                Origin::Dark => counts.dark += 1,
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub cycle_period: f64,
    pub lock_duration: f64,
    /// Simulated measurement time per cycle: cycle_period − lock_duration.
    pub measurement_window: f64,
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub cycles: u64,
    pub lock_failures: u64,
    pub fringe_calibrations: u64,
    pub pre_lock_mean: f64,
    pub pre_lock_std: f64,
    pub post_lock_mean: f64,
    pub post_lock_std: f64,
}

// ---------------------------------------------------------------------------
// Event CSV
// ---------------------------------------------------------------------------

pub const EVENT_CSV_HEADER: &str =
    "trial_id,detector,window,origin,timestamp,readout_basis,spin_outcome";

pub fn events_to_csv(records: &[EventRecord]) -> String {
    let mut out = String::from(EVENT_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.event.trial_id,
            r.event.detector,
            r.event.window,
            r.event.origin,
            r.event.timestamp,
            r.readout,
            r.spin_outcome
        ));
    }
    out
}

pub fn events_from_csv(text: &str) -> Result<Vec<EventRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != EVENT_CSV_HEADER {
                return Err(Error::Parse(format!(
                    "unexpected event CSV header '{line}'"
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "event CSV line {}: expected 7 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str, e: String| Error::Parse(format!("line {}: {what}: {e}", lineno + 1));
        records.push(EventRecord {
            event: DetectionEvent {
                trial_id: fields[0]
                    .parse()
                    .map_err(|e: std::num::ParseIntError| parse_err("trial_id", e.to_string()))?,
                detector: fields[1].parse()?,
                window: fields[2].parse()?,
                origin: fields[3].parse()?,
                timestamp: fields[4]
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| parse_err("timestamp", e.to_string()))?,
            },
            readout: fields[5].parse()?,
            spin_outcome: fields[6]
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err("spin_outcome", e.to_string()))?,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Sweep CSV
// ---------------------------------------------------------------------------

pub const SWEEP_CSV_HEADER: &str = "parameter,value,e_x,e_x_std,e_y,e_y_std,e_z,e_z_std,fidelity,fidelity_std,sigma_above_classical,heralds,events";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    let fmt_opt = |v: Option<(f64, f64)>| match v {
        Some((value, std)) => format!("{value},{std}"),
        None => ",".to_string(),
    };
    for row in rows {
        let t = &row.output.report.tomography;
        let fid = t
            .fidelity
            .map(|f| format!("{},{},{}", f.value, f.std, f.sigma_above_classical))
            .unwrap_or_else(|| ",,".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.parameter,
            row.value,
            fmt_opt(t.e_x.as_ref().map(|e| (e.value, e.std))),
            fmt_opt(t.e_y.as_ref().map(|e| (e.value, e.std))),
            fmt_opt(t.e_z.as_ref().map(|e| (e.value, e.std))),
            fid,
            row.output.report.counts.heralds,
            row.output.report.counts.events,
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------

/// Output format of the data files (the report is always JSON).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Write report.json plus the event and phase-trace data files into
/// `out_dir`; returns the list of paths written.
pub fn write_outputs(
    output: &RunOutput,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, output.report.to_json()?)?;
    written.push(report_path);
    match format {
        OutputFormat::Csv => {
            let events_path = out_dir.join("events.csv");
            std::fs::write(&events_path, events_to_csv(&output.records))?;
            written.push(events_path);
            if let Some(trace) = &output.phase_trace {
                let trace_path = out_dir.join("phase_trace.csv");
                std::fs::write(&trace_path, trace.to_csv())?;
                written.push(trace_path);
            }
        }
        OutputFormat::Json => {
            let events_path = out_dir.join("events.json");
            std::fs::write(&events_path, serde_json::to_string_pretty(&output.records)?)?;
            written.push(events_path);
            if let Some(trace) = &output.phase_trace {
                let trace_path = out_dir.join("phase_trace.json");
                std::fs::write(&trace_path, serde_json::to_string_pretty(trace)?)?;
                written.push(trace_path);
            }
        }
    }
    Ok(written)
}
