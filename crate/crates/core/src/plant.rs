//! Switched boost converter with inductor and capacitor parasitics, an ideal
//! diode that blocks reverse inductor current, and a latched PWM modulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circuit constants. Defaults are the 5 V → 12 V reference design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConverterParams {
    /// Load resistance R (Ω).
    pub r_load: f64,
    /// Filter inductance L (H).
    pub l_filter: f64,
    /// Inductor series resistance (Ω).
    pub r_l: f64,
    /// Filter capacitance C (F).
    pub c_filter: f64,
    /// Capacitor ESR (Ω).
    pub r_c: f64,
    /// Input voltage (V).
    pub v_g: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self {
            r_load: 25.0,
            l_filter: 250e-6,
            r_l: 0.075,
            c_filter: 1056e-6,
            r_c: 0.0375,
            v_g: 5.0,
        }
    }
}

impl ConverterParams {
    /// Same circuit with lossless inductor and capacitor.
    pub fn ideal(self) -> Self {
        Self {
            r_l: 0.0,
            r_c: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_load", self.r_load),
            ("l_filter", self.l_filter),
            ("c_filter", self.c_filter),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "converter.{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("r_l", self.r_l), ("r_c", self.r_c), ("v_g", self.v_g)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "converter.{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Stored energy ½Li² + ½Cv².
    pub fn stored_energy(&self, s: &ConverterState) -> f64 {
        0.5 * self.l_filter * s.i_l * s.i_l + 0.5 * self.c_filter * s.v_c * s.v_c
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConverterState {
    /// Inductor current (A), never negative.
    pub i_l: f64,
    /// Capacitor voltage (V).
    pub v_c: f64,
    /// Diode blocking with the switch open (discontinuous conduction).
    pub diode_blocking: bool,
}

impl ConverterState {
    pub fn is_finite(&self) -> bool {
        self.i_l.is_finite() && self.v_c.is_finite()
    }
}

fn diode_conducts(s: &ConverterState, switch_on: bool) -> bool {
    !switch_on && !s.diode_blocking
}

/// Voltage across the load.
pub fn output_voltage(s: &ConverterState, switch_on: bool, p: &ConverterParams) -> f64 {
    let q = if diode_conducts(s, switch_on) {
        1.0
    } else {
        0.0
    };
    p.r_load * (s.v_c + p.r_c * q * s.i_l) / (p.r_load + p.r_c)
}

/// `(di_l/dt, dv_c/dt)` for a fixed switch position.
pub fn derivatives(s: &ConverterState, switch_on: bool, p: &ConverterParams) -> (f64, f64) {
    let v_out = output_voltage(s, switch_on, p);
    if s.diode_blocking && !switch_on {
        return (0.0, -v_out / (p.r_load * p.c_filter));
    }
    let q = if switch_on { 0.0 } else { 1.0 };
    let di = (p.v_g - p.r_l * s.i_l - q * v_out) / p.l_filter;
    let dv = (q * s.i_l - v_out / p.r_load) / p.c_filter;
    (di, dv)
}

/// One classical RK4 step with the switch held over `[t, t + dt]`, followed
/// by the diode clamp.
pub fn step_state(
    s: &ConverterState,
    switch_on: bool,
    p: &ConverterParams,
    dt: f64,
) -> ConverterState {
    let mut s = *s;
    if switch_on {
        s.diode_blocking = false;
    } else if s.diode_blocking && p.v_g > output_voltage(&s, false, p) {
        // forward-biased again: the diode resumes conduction
        s.diode_blocking = false;
    }

    let at = |i_l: f64, v_c: f64| {
        derivatives(
            &ConverterState {
                i_l,
                v_c,
                diode_blocking: s.diode_blocking,
            },
            switch_on,
            p,
        )
    };
    let h = 0.5 * dt;
    let (k1i, k1v) = at(s.i_l, s.v_c);
    let (k2i, k2v) = at(s.i_l + h * k1i, s.v_c + h * k1v);
    let (k3i, k3v) = at(s.i_l + h * k2i, s.v_c + h * k2v);
    let (k4i, k4v) = at(s.i_l + dt * k3i, s.v_c + dt * k3v);

    let mut next = ConverterState {
        i_l: s.i_l + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
        v_c: s.v_c + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        diode_blocking: s.diode_blocking,
    };
    if next.i_l < 0.0 {
        next.i_l = 0.0;
        if !switch_on {
            next.diode_blocking = true;
        }
    }
    next
}

/// Trailing-edge sawtooth PWM. The duty command is latched at the start of
/// each carrier period, so a period contains at most two transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct PwmModulator {
    f_sw: f64,
    period: Option<i64>,
    latched: f64,
}

impl PwmModulator {
    pub fn new(f_sw: f64) -> Result<Self> {
        if !(f_sw.is_finite() && f_sw > 0.0) {
            return Err(Error::config(format!(
                "modulator.f_sw must be positive, got {f_sw}"
            )));
        }
        Ok(Self {
            f_sw,
            period: None,
            latched: 0.0,
        })
    }

    pub fn f_sw(&self) -> f64 {
        self.f_sw
    }

    pub fn latched_duty(&self) -> f64 {
        self.latched
    }

    pub fn reset(&mut self) {
        self.period = None;
        self.latched = 0.0;
    }

    /// Carrier period index and phase in `[0, 1)` at time `t`.
    fn carrier(&self, t: f64) -> (i64, f64) {
        // snap to 1e-9 of a period so sample instants that land on an edge
        // are not split by rounding
        let x = (t * self.f_sw * 1e9).round() / 1e9;
        let k = x.floor();
        (k as i64, x - k)
    }

    /// Gate signal at time `t` for the commanded duty (clipped to `[0, 1]`).
    pub fn gate(&mut self, duty: f64, t: f64) -> bool {
        let (k, phase) = self.carrier(t);
        if self.period != Some(k) {
            self.period = Some(k);
            self.latched = if duty.is_nan() {
                0.0
            } else {
                duty.clamp(0.0, 1.0)
            };
        }
        phase < self.latched
    }
}
