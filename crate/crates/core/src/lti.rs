//! Discrete-time realization of [`RationalApprox`] for the fixed-step loop.
//!
//! Every first-order factor is mapped through the trapezoidal rule
//! `s ← (2/dt)(z − 1)/(z + 1)` and run as its own one-state section, so the
//! coefficients stay O(1) however many sections the approximation has.
//! Exact integer powers become trapezoidal integrators (`s^-1`) or filtered
//! differentiators `s/(1 + s·τ_f)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frac_approx::RationalApprox;

/// `(1 + s/ω_z)/(1 + s/ω_p)` discretized to `y = b0·x + b1·x[-1] − a1·y[-1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstOrderSection {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
}

impl FirstOrderSection {
    pub fn bilinear(omega_z: f64, omega_p: f64, dt: f64) -> Self {
        let c = 2.0 / dt;
        let den = 1.0 + c / omega_p;
        Self {
            b0: (1.0 + c / omega_z) / den,
            b1: (1.0 - c / omega_z) / den,
            a1: (1.0 - c / omega_p) / den,
        }
    }

    fn response(&self, zinv: Complex64) -> Complex64 {
        (self.b0 + self.b1 * zinv) / (1.0 + self.a1 * zinv)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct IntegratorState {
    acc: f64,
    prev_in: f64,
    primed: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct DifferentiatorState {
    prev_in: f64,
    prev_out: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct FilterState {
    sections: Vec<f64>,
    integrators: Vec<IntegratorState>,
    differentiators: Vec<DifferentiatorState>,
}

impl FilterState {
    fn zeroed(n_sections: usize, n_int: usize, n_diff: usize) -> Self {
        Self {
            sections: vec![0.0; n_sections],
            integrators: vec![IntegratorState::default(); n_int],
            differentiators: vec![DifferentiatorState::default(); n_diff],
        }
    }

    fn reset(&mut self) {
        self.sections.iter_mut().for_each(|s| *s = 0.0);
        self.integrators
            .iter_mut()
            .for_each(|s| *s = IntegratorState::default());
        self.differentiators
            .iter_mut()
            .for_each(|s| *s = DifferentiatorState::default());
    }
}

/// Cascade of first-order sections with exact integrators and filtered
/// differentiators, evaluated gain → sections → integrators → differentiators.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteFilter {
    gain: f64,
    sections: Vec<FirstOrderSection>,
    integrator_count: usize,
    differentiator_count: usize,
    dt: f64,
    tau_f: f64,
    highest_pole: f64,
    state: FilterState,
    saved: FilterState,
}

impl DiscreteFilter {
    /// Realize `approx` at step `dt` with the default differentiator filter
    /// time constant `2·dt`.
    pub fn realize(approx: &RationalApprox, dt: f64) -> Result<Self> {
        Self::realize_with_tau(approx, dt, 2.0 * dt)
    }

    pub fn realize_with_tau(approx: &RationalApprox, dt: f64, tau_f: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!(
                "sample time must be positive, got {dt}"
            )));
        }
        if !(tau_f.is_finite() && tau_f > 0.0) {
            return Err(Error::config(format!(
                "differentiator filter time constant must be positive, got {tau_f}"
            )));
        }
        if approx.zeros.len() != approx.poles.len() {
            return Err(Error::config(
                "approximation has unequal zero and pole counts",
            ));
        }
        let sections: Vec<_> = approx
            .zeros
            .iter()
            .zip(&approx.poles)
            .map(|(&z, &p)| FirstOrderSection::bilinear(z, p, dt))
            .collect();
        let highest_pole = approx.poles.iter().copied().fold(0.0, f64::max);
        let integrator_count = approx.integer_power.min(0).unsigned_abs() as usize;
        let differentiator_count = approx.integer_power.max(0) as usize;
        let state = FilterState::zeroed(sections.len(), integrator_count, differentiator_count);
        Ok(Self {
            gain: approx.gain,
            sections,
            integrator_count,
            differentiator_count,
            dt,
            tau_f,
            highest_pole,
            saved: state.clone(),
            state,
        })
    }

    /// Pass-through filter with an extra scalar gain.
    pub fn scaled(mut self, k: f64) -> Self {
        self.gain *= k;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn sections(&self) -> &[FirstOrderSection] {
        &self.sections
    }

    pub fn integrator_count(&self) -> usize {
        self.integrator_count
    }

    pub fn differentiator_count(&self) -> usize {
        self.differentiator_count
    }

    /// Warns when the fastest pole is too close to Nyquist for the
    /// trapezoidal map to stay accurate.
    pub fn resolution_warning(&self) -> Option<String> {
        (self.dt * self.highest_pole >= 2.0).then(|| {
            format!(
                "highest pole {:.3e} rad/s is poorly resolved at dt = {:.3e} s",
                self.highest_pole, self.dt
            )
        })
    }

    /// Advance one sample.
    pub fn step(&mut self, u: f64) -> f64 {
        let mut x = self.gain * u;
        for (sec, s) in self.sections.iter().zip(self.state.sections.iter_mut()) {
            let y = sec.b0 * x + *s;
            *s = sec.b1 * x - sec.a1 * y;
            x = y;
        }
        let half_dt = 0.5 * self.dt;
        for st in &mut self.state.integrators {
            // The first sample after reset counts as held over the preceding
            // step, which makes the rule exact for constant inputs.
            let prev = if st.primed { st.prev_in } else { x };
            st.acc += half_dt * (x + prev);
            st.prev_in = x;
            st.primed = true;
            x = st.acc;
        }
        let c = 2.0 / self.dt;
        let ct = c * self.tau_f;
        for st in &mut self.state.differentiators {
            let y = (c * (x - st.prev_in) - (1.0 - ct) * st.prev_out) / (1.0 + ct);
            st.prev_in = x;
            st.prev_out = y;
            x = y;
        }
        x
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    /// Remember the current state so a later [`rollback`](Self::rollback)
    /// can undo steps taken since.
    pub fn checkpoint(&mut self) {
        self.saved.clone_from(&self.state);
    }

    pub fn rollback(&mut self) {
        self.state.clone_from(&self.saved);
    }

    /// Largest magnitude among internal state variables.
    pub fn max_abs_state(&self) -> f64 {
        let s = self.state.sections.iter().map(|v| v.abs());
        let i = self.state.integrators.iter().map(|v| v.acc.abs());
        let d = self.state.differentiators.iter().map(|v| v.prev_out.abs());
        s.chain(i).chain(d).fold(0.0, f64::max)
    }

    /// Discrete-time frequency response at `z = e^{jω·dt}`.
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -omega * self.dt);
        let mut h = Complex64::new(self.gain, 0.0);
        for sec in &self.sections {
            h *= sec.response(zinv);
        }
        let integ = 0.5 * self.dt * (1.0 + zinv) / (1.0 - zinv);
        for _ in 0..self.integrator_count {
            h *= integ;
        }
        let c = 2.0 / self.dt;
        let ct = c * self.tau_f;
        let diff = c * (1.0 - zinv) / ((1.0 + ct) + (1.0 - ct) * zinv);
        for _ in 0..self.differentiator_count {
            h *= diff;
        }
        h
    }

    /// Nyquist frequency in rad/s.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }
}
