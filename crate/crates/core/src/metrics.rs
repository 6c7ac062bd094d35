//! Multi-run comparison tables and disturbance-rejection figures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fopid::FopidParams;
use crate::simloop::{SimResult, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run_id: usize,
    pub params: FopidParams,
    pub j_iae: f64,
    pub overshoot_pct: Option<f64>,
    pub settling_time: Option<f64>,
    pub switch_count: usize,
    pub stable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceMetrics {
    /// Largest |v̄_out − v_ref| after the step (V).
    pub max_deviation: f64,
    /// Time from the step until the output re-enters the band for good (s);
    /// `None` if it never does.
    pub recovery_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label: String,
    /// Sorted by run id.
    pub rows: Vec<ReportRow>,
    /// Run id of the stable row with minimal `J_IAE` (lowest id on ties).
    pub best_run: usize,
    pub disturbance: Option<DisturbanceMetrics>,
}

impl ComparisonReport {
    pub fn best(&self) -> &ReportRow {
        self.rows
            .iter()
            .find(|r| r.run_id == self.best_run)
            .expect("best run is one of the rows")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Table with one row per run.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run_id",
            "kp",
            "ti",
            "td",
            "lambda",
            "mu",
            "j_iae",
            "overshoot_pct",
            "settling_time_s",
            "switch_count",
            "stable",
            "best",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for r in &self.rows {
            w.write_record([
                r.run_id.to_string(),
                r.params.kp.to_string(),
                r.params.ti.to_string(),
                r.params.td.to_string(),
                r.params.lambda.to_string(),
                r.params.mu.to_string(),
                r.j_iae.to_string(),
                opt(r.overshoot_pct),
                opt(r.settling_time),
                r.switch_count.to_string(),
                r.stable.to_string(),
                (r.run_id == self.best_run).to_string(),
            ])?;
        }
        csv_string(w)
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Tabulate runs and mark the best stable one.
pub fn build_report(
    label: &str,
    runs: &[(usize, FopidParams, &SimResult)],
) -> Result<ComparisonReport> {
    let mut rows: Vec<ReportRow> = runs
        .iter()
        .map(|(id, p, r)| ReportRow {
            run_id: *id,
            params: *p,
            j_iae: r.j_iae,
            overshoot_pct: r.overshoot_pct,
            settling_time: r.settling_time,
            switch_count: r.switch_count,
            stable: r.stable,
        })
        .collect();
    rows.sort_by_key(|r| r.run_id);
    let best = rows
        .iter()
        .filter(|r| r.stable)
        .fold(None::<&ReportRow>, |best, r| match best {
            Some(b) if b.j_iae <= r.j_iae => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::NoStableRun)?;
    Ok(ComparisonReport {
        label: label.to_string(),
        best_run: best.run_id,
        rows,
        disturbance: None,
    })
}

/// Deviation and recovery after a step applied at `t_dist`, on the
/// ripple-filtered output.
pub fn disturbance_metrics(
    trace: &Trace,
    v_ref: f64,
    t_dist: f64,
    band: f64,
) -> Result<DisturbanceMetrics> {
    let start = trace
        .time
        .iter()
        .position(|&t| t >= t_dist)
        .ok_or_else(|| Error::InvalidTrace(format!("trace ends before the step at {t_dist} s")))?;
    let after = &trace.v_avg[start..];
    let max_deviation = after.iter().map(|v| (v - v_ref).abs()).fold(0.0, f64::max);
    let tol = band * v_ref;
    let recovery_time = match after.iter().rposition(|v| (v - v_ref).abs() > tol) {
        None => Some(0.0),
        Some(i) if start + i + 1 < trace.len() => Some(trace.time[start + i + 1] - t_dist),
        Some(_) => None,
    };
    Ok(DisturbanceMetrics {
        max_deviation,
        recovery_time,
    })
}

/// `100·(1 − fopid/pid)`.
pub fn switch_reduction_pct(pid_switches: usize, fopid_switches: usize) -> f64 {
    if pid_switches == 0 {
        return 0.0;
    }
    100.0 * (1.0 - fopid_switches as f64 / pid_switches as f64)
}
