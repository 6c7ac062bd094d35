//! Closed-loop fixed-step simulation: reference → error → controller → PWM →
//! converter → feedback, with a breaker that aborts runaway trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fopid::Controller;
use crate::plant::{output_voltage, step_state, ConverterParams, ConverterState, PwmModulator};

/// Carrier frequency and integration resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulatorConfig {
    /// Carrier frequency (Hz).
    pub f_sw: f64,
    /// Plant integration steps per carrier period.
    pub steps_per_period: usize,
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        Self {
            f_sw: 10e3,
            steps_per_period: 200,
        }
    }
}

impl ModulatorConfig {
    pub fn validate(&self) -> Result<()> {
        PwmModulator::new(self.f_sw)?;
        if self.steps_per_period < 2 {
            return Err(Error::config(
                "modulator.steps_per_period must be at least 2",
            ));
        }
        Ok(())
    }

    /// Plant and controller step.
    pub fn dt(&self) -> f64 {
        1.0 / (self.f_sw * self.steps_per_period as f64)
    }
}

/// Multiplicative step on the input voltage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// Onset (s).
    pub time: f64,
    /// Relative step, e.g. `0.1` for +10 %.
    pub relative_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Output reference (V).
    pub v_ref: f64,
    /// Simulated and integrated horizon (s).
    pub horizon: f64,
    pub disturbance: Option<Disturbance>,
    /// Keep every n-th sample in the exported traces.
    pub record_decimation: usize,
    /// Abort once any monitored signal exceeds this magnitude.
    pub break_threshold: f64,
    /// Settling band as a fraction of `v_ref`.
    pub settling_band: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            v_ref: 12.0,
            horizon: 0.05,
            disturbance: None,
            record_decimation: 10,
            break_threshold: 1e6,
            settling_band: 0.02,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_ref.is_finite() && self.v_ref > 0.0) {
            return Err(Error::config(format!(
                "scenario.v_ref must be positive, got {}",
                self.v_ref
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!(
                "scenario.horizon must be positive, got {}",
                self.horizon
            )));
        }
        if let Some(d) = &self.disturbance {
            if !(d.time >= 0.0 && d.time <= self.horizon) {
                return Err(Error::config(format!(
                    "disturbance time {} lies outside the horizon [0, {}]",
                    d.time, self.horizon
                )));
            }
            if !(d.relative_step.is_finite() && d.relative_step > -1.0) {
                return Err(Error::config(format!(
                    "disturbance step must be finite and above -100 %, got {}",
                    d.relative_step
                )));
            }
        }
        if self.record_decimation == 0 {
            return Err(Error::config(
                "scenario.record_decimation must be at least 1",
            ));
        }
        if !(self.break_threshold > 0.0) {
            return Err(Error::config("scenario.break_threshold must be positive"));
        }
        if !(self.settling_band > 0.0 && self.settling_band < 1.0) {
            return Err(Error::config("scenario.settling_band must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Anything that turns the feedback error into a duty command.
pub trait DutySource {
    fn duty(&mut self, t: f64, error: f64) -> f64;

    /// False once any internal signal has gone non-finite.
    fn internal_finite(&self) -> bool {
        true
    }
}

impl DutySource for Controller {
    fn duty(&mut self, _t: f64, error: f64) -> f64 {
        self.update(error)
    }

    fn internal_finite(&self) -> bool {
        self.max_abs_signal().is_finite()
    }
}

/// Open-loop duty schedule `t ↦ D(t)`.
pub struct OpenLoop<F>(pub F);

impl<F: FnMut(f64) -> f64> DutySource for OpenLoop<F> {
    fn duty(&mut self, t: f64, _error: f64) -> f64 {
        (self.0)(t)
    }
}

/// Sampled signals. `v_avg` is the one-carrier-period moving average of
/// `v_out` computed at full resolution before decimation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub time: Vec<f64>,
    pub v_out: Vec<f64>,
    pub v_avg: Vec<f64>,
    pub i_l: Vec<f64>,
    pub duty: Vec<f64>,
    pub switch_state: Vec<bool>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            time: Vec::with_capacity(n),
            v_out: Vec::with_capacity(n),
            v_avg: Vec::with_capacity(n),
            i_l: Vec::with_capacity(n),
            duty: Vec::with_capacity(n),
            switch_state: Vec::with_capacity(n),
        }
    }

    fn decimated(&self, every: usize) -> Self {
        let n = self.len();
        let keep = |i: usize| i.is_multiple_of(every) || i + 1 == n;
        let pick = |v: &Vec<f64>| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, x)| *x)
                .collect()
        };
        Self {
            time: pick(&self.time),
            v_out: pick(&self.v_out),
            v_avg: pick(&self.v_avg),
            i_l: pick(&self.i_l),
            duty: pick(&self.duty),
            switch_state: self
                .switch_state
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, x)| *x)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.time, &self.v_out, &self.v_avg, &self.i_l, &self.duty]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Outcome of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    #[serde(skip)]
    pub trace: Trace,
    /// ∫|v_out − v_ref| dt over the horizon (V·s); partial if unstable.
    pub j_iae: f64,
    pub overshoot_pct: Option<f64>,
    /// `None` when the output never settles inside the band.
    pub settling_time: Option<f64>,
    pub switch_count: usize,
    pub stable: bool,
    pub blowup_time: Option<f64>,
    /// Final ripple-averaged output (V).
    pub final_v_avg: f64,
}

impl SimResult {
    /// Metrics are meaningful only for runs the breaker let finish.
    pub fn metrics_valid(&self) -> bool {
        self.stable
    }
}

/// Run the closed loop. The controller must share the modulator's step.
pub fn simulate(
    controller: &mut Controller,
    converter: &ConverterParams,
    modulator: &ModulatorConfig,
    scenario: &Scenario,
) -> Result<SimResult> {
    let dt = modulator.dt();
    if ((controller.dt() - dt) / dt).abs() > 1e-9 {
        return Err(Error::config(format!(
            "controller step {} s does not match plant step {} s",
            controller.dt(),
            dt
        )));
    }
    simulate_with(controller, converter, modulator, scenario)
}

/// Run the converter driven by any [`DutySource`].
pub fn simulate_with<S: DutySource + ?Sized>(
    source: &mut S,
    converter: &ConverterParams,
    modulator: &ModulatorConfig,
    scenario: &Scenario,
) -> Result<SimResult> {
    converter.validate()?;
    modulator.validate()?;
    scenario.validate()?;

    let dt = modulator.dt();
    let n_steps = (scenario.horizon / dt).round() as usize;
    let mut pwm = PwmModulator::new(modulator.f_sw)?;
    let mut state = ConverterState::default();
    let mut sw_prev = false;
    let mut duty = 0.0;
    let mut full = Trace::with_capacity(n_steps + 1);
    let mut blowup_time = None;

    let disturbed = scenario.disturbance.map(|d| {
        (
            d.time,
            ConverterParams {
                v_g: converter.v_g * (1.0 + d.relative_step),
                ..*converter
            },
        )
    });
    let params_at = |t: f64| match &disturbed {
        Some((t0, p)) if t >= *t0 - 0.5 * dt => p,
        _ => converter,
    };

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let p = params_at(t);
        let v_meas = output_voltage(&state, sw_prev, p);
        let command = source.duty(t, scenario.v_ref - v_meas);
        if !command.is_finite() || !source.internal_finite() {
            blowup_time = Some(t);
            break;
        }
        duty = command;
        let sw = pwm.gate(duty, t);
        full.time.push(t);
        full.v_out.push(v_meas);
        full.i_l.push(state.i_l);
        full.duty.push(duty);
        full.switch_state.push(sw);

        state = step_state(&state, sw, p, dt);
        sw_prev = sw;
        if !state.is_finite()
            || state.i_l.abs() > scenario.break_threshold
            || state.v_c.abs() > scenario.break_threshold
        {
            blowup_time = Some(t + dt);
            break;
        }
    }
    if blowup_time.is_none() {
        let t = n_steps as f64 * dt;
        full.time.push(t);
        full.v_out
            .push(output_voltage(&state, sw_prev, params_at(t)));
        full.i_l.push(state.i_l);
        full.duty.push(duty);
        full.switch_state.push(sw_prev);
    }
    full.v_avg = ripple_filter(&full.v_out, modulator.steps_per_period);

    let stable = blowup_time.is_none();
    let j_iae = if stable {
        iae(&full.time, &full.v_out, scenario.v_ref, scenario.horizon)?
    } else {
        iae_partial(&full.time, &full.v_out, scenario.v_ref)
    };
    let (overshoot_pct, settling_time) = if stable {
        (
            Some(overshoot(&full.v_avg, scenario.v_ref)),
            settling_time(
                &full.time,
                &full.v_avg,
                scenario.v_ref,
                scenario.settling_band,
            ),
        )
    } else {
        (None, None)
    };
    let switch_count = switch_count(&full.time, &full.switch_state, (0.0, scenario.horizon));
    let final_v_avg = full.v_avg.last().copied().unwrap_or(0.0);

    Ok(SimResult {
        trace: full.decimated(scenario.record_decimation),
        j_iae,
        overshoot_pct,
        settling_time,
        switch_count,
        stable,
        blowup_time,
        final_v_avg,
    })
}

fn iae_partial(time: &[f64], v: &[f64], v_ref: f64) -> f64 {
    time.windows(2)
        .zip(v.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * ((v[0] - v_ref).abs() + (v[1] - v_ref).abs()))
        .fold(0.0, |a, x| a + x)
}

/// Trapezoidal `∫₀ᵀ |v − v_ref| dt`. The trace must reach `T`.
pub fn iae(time: &[f64], v: &[f64], v_ref: f64, horizon: f64) -> Result<f64> {
    if time.len() != v.len() || time.is_empty() {
        return Err(Error::InvalidTrace(
            "time and value lengths differ or are empty".into(),
        ));
    }
    let last = *time.last().unwrap();
    let tol = 1e-9 * horizon.abs().max(1.0);
    if last + tol < horizon {
        return Err(Error::InvalidTrace(format!(
            "trace ends at {last} s, before the horizon {horizon} s"
        )));
    }
    let mut acc = 0.0;
    for i in 1..time.len() {
        let (t0, t1) = (time[i - 1], time[i]);
        if t0 >= horizon - tol {
            break;
        }
        let e0 = (v[i - 1] - v_ref).abs();
        let mut e1 = (v[i] - v_ref).abs();
        let mut t_end = t1;
        if t1 > horizon + tol {
            // cut the last interval at the horizon
            let f = (horizon - t0) / (t1 - t0);
            e1 = e0 + f * (e1 - e0);
            t_end = horizon;
        }
        acc += 0.5 * (t_end - t0) * (e0 + e1);
    }
    Ok(acc)
}

/// Trailing moving average over `window` samples (partial near the start).
pub fn ripple_filter(v: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(v.len());
    let mut sum = 0.0;
    for i in 0..v.len() {
        sum += v[i];
        if i >= window {
            sum -= v[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Percent overshoot of a (ripple-filtered) trace above `v_ref`.
pub fn overshoot(v_avg: &[f64], v_ref: f64) -> f64 {
    let peak = v_avg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    100.0 * (peak - v_ref).max(0.0) / v_ref
}

/// Earliest time after which the trace stays within `±band·v_ref`.
pub fn settling_time(time: &[f64], v_avg: &[f64], v_ref: f64, band: f64) -> Option<f64> {
    let tol = band * v_ref;
    match v_avg.iter().rposition(|v| (v - v_ref).abs() > tol) {
        None => time.first().copied(),
        Some(i) if i + 1 < time.len() => Some(time[i + 1]),
        Some(_) => None,
    }
}

/// Switch transitions (either direction) between consecutive samples inside
/// `[start, end]`.
pub fn switch_count(time: &[f64], switch_state: &[bool], window: (f64, f64)) -> usize {
    let (start, end) = window;
    time.windows(2)
        .zip(switch_state.windows(2))
        .filter(|(t, s)| t[1] >= start && t[1] <= end + 1e-12 && s[0] != s[1])
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_open_loop(duty: impl FnMut(f64) -> f64, scenario: &Scenario) -> SimResult {
        simulate_with(
            &mut OpenLoop(duty),
            &ConverterParams::default(),
            &ModulatorConfig::default(),
            scenario,
        )
        .unwrap()
    }

    #[test]
    fn breaker_trips_on_state_threshold() {
        let scenario = Scenario {
            horizon: 0.01,
            break_threshold: 1.0,
            ..Scenario::default()
        };
        let r = run_open_loop(|_| 0.5, &scenario);
        assert!(!r.stable);
        let t = r.blowup_time.unwrap();
        // di/dt = v_g / L at startup, so 1 A takes about 50 µs
        assert!(t > 4e-5 && t < 1e-4, "{t}");
        assert!(r.overshoot_pct.is_none() && r.settling_time.is_none());
        assert!(r.trace.is_finite());
        assert!(*r.trace.time.last().unwrap() < t);
    }

    #[test]
    fn breaker_trips_on_non_finite_command() {
        let r = run_open_loop(
            |t| if t > 1e-3 { f64::NAN } else { 0.5 },
            &Scenario::default(),
        );
        assert!(!r.stable);
        assert!((r.blowup_time.unwrap() - 1e-3).abs() < 1e-6);
        assert!(r.trace.is_finite());
        assert!(r.j_iae >= 0.0);
    }

    #[test]
    fn bounded_plant_never_trips_at_default_threshold() {
        let r = run_open_loop(|_| 0.9, &Scenario::default());
        assert!(r.stable && r.blowup_time.is_none());
    }

    #[test]
    fn iae_basic_cases() {
        let time: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-4).collect();
        let flat = vec![12.0; time.len()];
        assert_eq!(iae(&time, &flat, 12.0, 0.1).unwrap(), 0.0);
        let off = vec![11.5; time.len()];
        assert!((iae(&time, &off, 12.0, 0.1).unwrap() - 0.05).abs() < 1e-12);
        assert!(iae(&time, &off, 12.0, 0.2).is_err());
        assert!(iae(&[], &[], 12.0, 0.1).is_err());
    }

    #[test]
    fn iae_matches_closed_form_for_sine_ramp() {
        // e(t) = 0.5 + 0.3 sin(200 t) + 20 t > 0, so |e| = e
        let dt = 5e-7;
        let horizon: f64 = 0.05;
        let n = (horizon / dt).round() as usize;
        let time: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let v: Vec<f64> = time
            .iter()
            .map(|t| 12.0 + 0.5 + 0.3 * (200.0 * t).sin() + 20.0 * t)
            .collect();
        let exact = 0.5 * horizon
            + 0.3 * (1.0 - (200.0 * horizon).cos()) / 200.0
            + 10.0 * horizon * horizon;
        let got = iae(&time, &v, 12.0, horizon).unwrap();
        assert!(((got - exact) / exact).abs() < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn iae_cuts_at_horizon() {
        let time = [0.0, 1.0, 2.0];
        let v = [1.0, 1.0, 1.0];
        assert!((iae(&time, &v, 0.0, 1.5).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn overshoot_cases() {
        assert_eq!(overshoot(&[0.0, 6.0, 11.9, 12.0], 12.0), 0.0);
        assert!((overshoot(&[0.0, 12.6, 12.0], 12.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn settling_cases() {
        let time: Vec<f64> = (0..100).map(|k| k as f64 * 1e-4).collect();
        assert_eq!(settling_time(&time, &[12.0; 100], 12.0, 0.02), Some(0.0));
        let entering: Vec<f64> = time
            .iter()
            .map(|&t| if t < 3e-3 { 10.0 } else { 12.1 })
            .collect();
        assert!((settling_time(&time, &entering, 12.0, 0.02).unwrap() - 3e-3).abs() < 1e-12);
        let reexit: Vec<f64> = time
            .iter()
            .map(|&t| {
                if t < 1e-3 || (5e-3..6e-3).contains(&t) {
                    11.0
                } else {
                    12.0
                }
            })
            .collect();
        assert!((settling_time(&time, &reexit, 12.0, 0.02).unwrap() - 6e-3).abs() < 1e-12);
        let never: Vec<f64> = time.iter().map(|_| 10.0).collect();
        assert_eq!(settling_time(&time, &never, 12.0, 0.02), None);
    }

    #[test]
    fn switch_count_cases() {
        let time: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(switch_count(&time, &[true; 1000], (0.0, 1e9)), 0);
        // 50 % duty with 10-sample periods: two edges per period
        let sq: Vec<bool> = (0..1000).map(|k| k % 10 < 5).collect();
        let n = switch_count(&time, &sq, (0.0, 999.0));
        assert_eq!(n, 2 * 100 - 1);
        assert_eq!(switch_count(&time, &sq, (0.0, 99.0)), 19);
    }

    #[test]
    fn ripple_filter_flattens_periodic_signal() {
        let period = 200;
        let v: Vec<f64> = (0..10 * period)
            .map(|k| 12.0 + 0.05 * ((k % period) as f64 / period as f64 - 0.3))
            .collect();
        let f = ripple_filter(&v, period);
        let tail = &f[period..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(tail.iter().all(|x| ((x - mean) / mean).abs() < 1e-6));
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::default().validate().is_ok());
        let bad = Scenario {
            disturbance: Some(Disturbance {
                time: 0.15,
                relative_step: 0.1,
            }),
            ..Scenario::default()
        };
        assert!(bad.validate().is_err());
        assert!(Scenario {
            horizon: 0.0,
            ..Scenario::default()
        }
        .validate()
        .is_err());
        assert!(ModulatorConfig {
            f_sw: -1.0,
            ..ModulatorConfig::default()
        }
        .validate()
        .is_err());
    }
}
