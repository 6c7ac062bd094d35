//! On-disk formats: trace CSV, summary JSON, optimizer history CSV,
//! frequency-response CSV and two-column plot data.
//!
//! All writers are pure functions of their inputs, so reruns with the same
//! configuration and seed produce byte-identical files.

use num_complex::Complex64;
use serde::Serialize;

use crate::abc::IterationRecord;
use crate::config::RunConfig;
use crate::error::Result;
use crate::fopid::FopidParams;
use crate::frac_approx::{approximate_power, OraConfig};
use crate::metrics::{csv_string, DisturbanceMetrics};
use crate::simloop::{SimResult, Trace};

/// `time_s,v_out_V,i_l_A,duty,switch_state`.
pub fn trace_csv(trace: &Trace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "v_out_V", "i_l_A", "duty", "switch_state"])?;
    for i in 0..trace.len() {
        w.write_record([
            trace.time[i].to_string(),
            trace.v_out[i].to_string(),
            trace.i_l[i].to_string(),
            trace.duty[i].to_string(),
            u8::from(trace.switch_state[i]).to_string(),
        ])?;
    }
    csv_string(w)
}

/// Whitespace-separated `time v̄_out` pairs for plotting.
pub fn plot_data(trace: &Trace) -> String {
    let mut out = String::from("# time_s v_out_avg_V\n");
    for (t, v) in trace.time.iter().zip(&trace.v_avg) {
        out.push_str(&format!("{t} {v}\n"));
    }
    out
}

/// `iteration,best_cost,mean_cost`.
pub fn history_csv(history: &[IterationRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "best_cost", "mean_cost"])?;
    for h in history {
        w.write_record([
            h.iteration.to_string(),
            h.best_cost.to_string(),
            h.mean_cost.to_string(),
        ])?;
    }
    csv_string(w)
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    seed: u64,
    params: &'a FopidParams,
    metrics: &'a SimResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    disturbance: Option<&'a DisturbanceMetrics>,
}

/// Scalar metrics plus the resolved configuration and seed.
pub fn summary_json(
    config: &RunConfig,
    seed: u64,
    params: &FopidParams,
    result: &SimResult,
    disturbance: Option<&DisturbanceMetrics>,
) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Summary {
        config,
        seed,
        params,
        metrics: result,
        disturbance,
    })?)
}

#[derive(Serialize)]
struct BestParams<'a> {
    config: &'a RunConfig,
    seed: u64,
    kind: &'a str,
    params: &'a FopidParams,
    best_cost: f64,
    evaluations: usize,
    penalized: bool,
}

pub fn best_params_json(
    config: &RunConfig,
    seed: u64,
    kind: &str,
    params: &FopidParams,
    best_cost: f64,
    evaluations: usize,
    penalized: bool,
) -> Result<String> {
    Ok(serde_json::to_string_pretty(&BestParams {
        config,
        seed,
        kind,
        params,
        best_cost,
        evaluations,
        penalized,
    })?)
}

/// What a Bode table describes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodeTarget {
    /// `s^ν` and its band-limited approximation.
    Power(f64),
    /// The controller with its fractional powers approximated.
    Controller(FopidParams),
}

type Response = Box<dyn Fn(f64) -> Complex64>;

/// `omega_rad_s,magnitude_db,phase_deg,ideal_magnitude_db,ideal_phase_deg`
/// on a log grid of `points_per_decade` over `[w_min, w_max]`.
pub fn bode_csv(
    target: BodeTarget,
    ora: &OraConfig,
    (w_min, w_max): (f64, f64),
    points_per_decade: usize,
) -> Result<String> {
    let (approx, ideal): (Response, Response) = match target {
        BodeTarget::Power(nu) => {
            let h = approximate_power(nu, ora)?;
            (
                Box::new(move |w| h.freq_response(w)),
                Box::new(move |w| Complex64::new(0.0, w).powf(nu)),
            )
        }
        BodeTarget::Controller(p) => {
            p.validate()?;
            let integ = approximate_power(-p.lambda, ora)?;
            let deriv = approximate_power(p.mu, ora)?;
            let ki = if p.ti.is_finite() { p.kp / p.ti } else { 0.0 };
            (
                Box::new(move |w| {
                    p.kp + ki * integ.freq_response(w) + p.kp * p.td * deriv.freq_response(w)
                }),
                Box::new(move |w| p.ideal_response(w)),
            )
        }
    };

    let decades = (w_max / w_min).log10();
    let n = (decades * points_per_decade.max(1) as f64).round().max(1.0) as usize;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "omega_rad_s",
        "magnitude_db",
        "phase_deg",
        "ideal_magnitude_db",
        "ideal_phase_deg",
    ])?;
    for i in 0..=n {
        let omega = w_min * 10f64.powf(decades * i as f64 / n as f64);
        let a = approx(omega);
        let b = ideal(omega);
        w.write_record([
            omega.to_string(),
            (20.0 * a.norm().log10()).to_string(),
            a.arg().to_degrees().to_string(),
            (20.0 * b.norm().log10()).to_string(),
            b.arg().to_degrees().to_string(),
        ])?;
    }
    csv_string(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(csv: &str) -> Vec<Vec<f64>> {
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn half_order_bode_has_45_degree_phase() {
        let csv = bode_csv(
            BodeTarget::Power(0.5),
            &OraConfig::default(),
            (1e1, 1e4),
            10,
        )
        .unwrap();
        for r in rows(&csv) {
            assert!((r[2] - 45.0).abs() < 3.0, "{r:?}");
        }
    }

    #[test]
    fn zero_order_bode_is_flat() {
        let csv = bode_csv(
            BodeTarget::Power(0.0),
            &OraConfig::default(),
            (1e-1, 1e5),
            5,
        )
        .unwrap();
        for r in rows(&csv) {
            assert_eq!(r[1], 0.0);
            assert_eq!(r[2], 0.0);
        }
    }

    #[test]
    fn pid_bode_follows_asymptotes() {
        let p = FopidParams::pid(2.0, 1e-3, 1e-2);
        let csv = bode_csv(
            BodeTarget::Controller(p),
            &OraConfig::default(),
            (1e-1, 1e6),
            10,
        )
        .unwrap();
        let r = rows(&csv);
        // low frequency: integrator, -90°; high frequency: differentiator, +90°
        assert!((r[0][2] + 90.0).abs() < 1.0);
        assert!((r.last().unwrap()[2] - 90.0).abs() < 1.0);
        for row in &r {
            assert!((row[1] - row[3]).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_csv_columns() {
        let t = Trace {
            time: vec![0.0, 1e-6],
            v_out: vec![0.0, 0.1],
            v_avg: vec![0.0, 0.05],
            i_l: vec![0.0, 0.01],
            duty: vec![0.9, 0.9],
            switch_state: vec![true, false],
        };
        let csv = trace_csv(&t).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_s,v_out_V,i_l_A,duty,switch_state"
        );
        assert_eq!(lines.next().unwrap(), "0,0,0,0.9,1");
        assert_eq!(lines.next().unwrap(), "0.000001,0.1,0.01,0.9,0");
    }
}
