//! Band-limited rational approximation of fractional powers of `s`.
//!
//! A fractional differentiator `s^ν` with `0 < ν < 1` is replaced over a
//! band `[ω_l, ω_h]` by `N` interlaced first-order zero/pole pairs
//!
//! ```text
//!          N   1 + s/ω_z,n
//! H(s) = k ∏  ------------
//!         n=1  1 + s/ω_p,n
//! ```
//!
//! with the corner frequencies generated recursively (Oustaloup). Orders
//! outside `(0, 1)` are split into an exact integer power of `s` times a
//! fractional remainder in `[0, 1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Band and section count for the recursive approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OraConfig {
    /// Lower band edge (rad/s).
    pub omega_l: f64,
    /// Upper band edge (rad/s).
    pub omega_h: f64,
    /// Number of zero/pole pairs.
    pub n_sections: usize,
}

impl Default for OraConfig {
    fn default() -> Self {
        Self {
            omega_l: 1e-1,
            omega_h: 1e6,
            n_sections: 8,
        }
    }
}

impl OraConfig {
    pub fn new(omega_l: f64, omega_h: f64, n_sections: usize) -> Result<Self> {
        let cfg = Self {
            omega_l,
            omega_h,
            n_sections,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_l.is_finite() && self.omega_l > 0.0) {
            return Err(Error::config(format!(
                "ora.omega_l must be finite and positive, got {}",
                self.omega_l
            )));
        }
        if !(self.omega_h.is_finite() && self.omega_h > self.omega_l) {
            return Err(Error::config(format!(
                "ora.omega_h ({}) must exceed ora.omega_l ({})",
                self.omega_h, self.omega_l
            )));
        }
        if self.n_sections == 0 {
            return Err(Error::config("ora.n_sections must be at least 1"));
        }
        Ok(())
    }

    /// Zero-to-pole spacing ratio `α = (ω_h/ω_l)^{ν/N}`.
    pub fn alpha(&self, nu: f64) -> f64 {
        (self.omega_h / self.omega_l).powf(nu / self.n_sections as f64)
    }

    /// Pole-to-next-zero spacing ratio `η = (ω_h/ω_l)^{(1-ν)/N}`.
    pub fn eta(&self, nu: f64) -> f64 {
        (self.omega_h / self.omega_l).powf((1.0 - nu) / self.n_sections as f64)
    }
}

/// Zeros, poles and gain of `s^integer_power · k ∏ (1 + s/ω_z)/(1 + s/ω_p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    /// Zero corner frequencies (rad/s).
    pub zeros: Vec<f64>,
    /// Pole corner frequencies (rad/s).
    pub poles: Vec<f64>,
    pub gain: f64,
    /// Exact `s` (positive) or `1/s` (negative) factors carried alongside.
    pub integer_power: i32,
}

impl RationalApprox {
    /// The unit operator.
    pub fn identity() -> Self {
        Self {
            zeros: Vec::new(),
            poles: Vec::new(),
            gain: 1.0,
            integer_power: 0,
        }
    }

    /// True when the rational part has no sections and unit gain.
    pub fn is_rational_identity(&self) -> bool {
        self.zeros.is_empty() && self.poles.is_empty() && self.gain == 1.0
    }

    /// Number of zero/pole pairs.
    pub fn order(&self) -> usize {
        self.zeros.len()
    }

    /// Exact inverse: zeros and poles swapped, gain and integer power inverted.
    pub fn inverse(&self) -> Self {
        Self {
            zeros: self.poles.clone(),
            poles: self.zeros.clone(),
            gain: 1.0 / self.gain,
            integer_power: -self.integer_power,
        }
    }

    /// Frequency response of the rational product alone, without the
    /// integer-power factors.
    pub fn rational_response(&self, omega: f64) -> Complex64 {
        let jw = Complex64::new(0.0, omega);
        self.zeros
            .iter()
            .zip(&self.poles)
            .fold(Complex64::new(self.gain, 0.0), |acc, (&z, &p)| {
                acc * (1.0 + jw / z) / (1.0 + jw / p)
            })
    }

    /// `k ∏(1 + jω/ω_z)/(1 + jω/ω_p) · (jω)^integer_power`.
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        self.rational_response(omega) * Complex64::new(0.0, omega).powi(self.integer_power)
    }
}

/// Recursive zero/pole placement for `s^ν`, `0 < ν < 1`, normalized to unit
/// gain at 1 rad/s.
pub fn ora_build(nu: f64, cfg: &OraConfig) -> Result<RationalApprox> {
    cfg.validate()?;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::config(format!(
            "recursive approximation needs an order in (0, 1), got {nu}"
        )));
    }
    let alpha = cfg.alpha(nu);
    let eta = cfg.eta(nu);
    let n = cfg.n_sections;

    let mut zeros = Vec::with_capacity(n);
    let mut poles = Vec::with_capacity(n);
    let mut wz = cfg.omega_l * eta.sqrt();
    for i in 0..n {
        let wp = wz * alpha;
        zeros.push(wz);
        poles.push(wp);
        if i + 1 < n {
            wz = wp * eta;
        }
    }

    Ok(normalize_gain(RationalApprox {
        zeros,
        poles,
        gain: 1.0,
        integer_power: 0,
    }))
}

/// Rescale the gain so the rational product has unit magnitude at 1 rad/s.
pub fn normalize_gain(mut approx: RationalApprox) -> RationalApprox {
    approx.gain = 1.0;
    let mag = approx.rational_response(1.0).norm();
    approx.gain = 1.0 / mag;
    approx
}

/// Approximate `s^ν` for any real `ν` as `s^n · H(s)` with `n = ⌊ν⌋` exact
/// and `H` approximating `s^{ν-n}`.
pub fn approximate_power(nu: f64, cfg: &OraConfig) -> Result<RationalApprox> {
    cfg.validate()?;
    if !nu.is_finite() {
        return Err(Error::config(format!(
            "fractional order must be finite, got {nu}"
        )));
    }
    let n = nu.floor();
    let delta = nu - n;
    if n.abs() > i32::MAX as f64 {
        return Err(Error::config(format!("fractional order {nu} out of range")));
    }
    let mut approx = if delta == 0.0 {
        RationalApprox::identity()
    } else {
        ora_build(delta, cfg)?
    };
    approx.integer_power = n as i32;
    Ok(approx)
}
