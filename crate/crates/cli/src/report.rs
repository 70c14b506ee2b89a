//! Output documents: the per-step CSV table and the TOML reports.

use std::collections::BTreeMap;
use std::io::Write;

use cosym_core::dynamics::{InvariantReport, Trajectory};
use serde::Serialize;

/// Formats a number so that it reads back to the same `f64`.
fn number(x: f64) -> String {
    format!("{x:e}")
}

/// Writes one row per recorded step: `t`, the coordinates in chart order,
/// the energy column, then the diagnostics and the two accumulated
/// quadratures in alphabetical order.
pub fn write_csv<W: Write>(out: W, traj: &Trajectory, energy_label: &str) -> csv::Result<()> {
    let mut extra: Vec<String> = traj.diagnostic_keys();
    extra.push("cumulative_entropy_inflow".into());
    extra.push("cumulative_work".into());
    extra.sort();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(traj.names.iter().cloned());
    header.push(energy_label.to_string());
    header.extend(extra.iter().cloned());
    w.write_record(&header)?;
    for i in 0..traj.len() {
        let mut row = vec![number(traj.times[i])];
        row.extend(traj.states[i].iter().map(|v| number(*v)));
        row.push(number(traj.energy[i]));
        for key in &extra {
            let value = match key.as_str() {
                "cumulative_work" => Some(traj.work[i]),
                "cumulative_entropy_inflow" => Some(traj.entropy_supplied[i]),
                k => traj.diagnostics[i].get(k).copied(),
            };
            row.push(value.map(number).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRow {
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub step: usize,
    pub time: f64,
}

/// Summary of one `simulate` run.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub class: String,
    pub model: String,
    pub status: String,
    pub passed: bool,
    pub scheme: String,
    pub steps: usize,
    pub t_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub failures: Vec<String>,
    pub evaluation_errors: Vec<String>,
    pub info: BTreeMap<String, f64>,
    pub invariants: BTreeMap<String, InvariantRow>,
}

impl SimulationReport {
    pub fn fill_invariants(&mut self, report: &InvariantReport) {
        self.invariants = report
            .entries
            .iter()
            .map(|(k, e)| {
                (
                    k.clone(),
                    InvariantRow {
                        passed: e.passed,
                        max_residual: e.max_residual,
                        tolerance: e.tolerance,
                        step: e.index,
                        time: e.time,
                    },
                )
            })
            .collect();
        self.info = report.info.clone();
        self.failures = report.failures.clone();
        self.evaluation_errors = report
            .evaluation_errors
            .iter()
            .map(|(i, m)| format!("step {i}: {m}"))
            .collect();
    }
}

/// Summary of one `legendre-check` run.
#[derive(Debug, Clone, Serialize)]
pub struct LegendreReport {
    pub scenario: String,
    pub class: String,
    pub status: String,
    pub passed: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport_residual: Option<f64>,
    pub samples: usize,
    pub skipped_samples: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("report types serialize to TOML")
}
