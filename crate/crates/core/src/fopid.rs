//! `Kp (1 + 1/(Ti s^λ) + Td s^μ)` realized from discrete filters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac_approx::{approximate_power, OraConfig};
use crate::lti::DiscreteFilter;

/// Upper end of the admissible fractional orders.
pub const MAX_ORDER: f64 = 1.2;

/// The five tunables of the fractional-order PID law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FopidParams {
    pub kp: f64,
    /// Integral time coefficient (s^λ). `+inf` disables integral action and
    /// is written as `null` in JSON.
    #[serde(default = "no_integral", with = "infinite_as_null")]
    pub ti: f64,
    /// Derivative coefficient (s^μ).
    #[serde(default)]
    pub td: f64,
    #[serde(default = "integer_order")]
    pub lambda: f64,
    #[serde(default = "integer_order")]
    pub mu: f64,
}

fn no_integral() -> f64 {
    f64::INFINITY
}

fn integer_order() -> f64 {
    1.0
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl FopidParams {
    /// Integer-order PID: `λ = μ = 1`.
    pub fn pid(kp: f64, ti: f64, td: f64) -> Self {
        Self {
            kp,
            ti,
            td,
            lambda: 1.0,
            mu: 1.0,
        }
    }

    pub fn is_integer_order(&self) -> bool {
        self.lambda == 1.0 && self.mu == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kp.is_finite() {
            return Err(Error::config(format!("kp must be finite, got {}", self.kp)));
        }
        if self.ti.is_nan() || self.ti <= 0.0 {
            return Err(Error::config(format!(
                "ti must be positive, got {}",
                self.ti
            )));
        }
        if !(self.td.is_finite() && self.td >= 0.0) {
            return Err(Error::config(format!(
                "td must be non-negative, got {}",
                self.td
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu)] {
            if !(v > 0.0 && v <= MAX_ORDER) {
                return Err(Error::config(format!(
                    "{name} must lie in (0, {MAX_ORDER}], got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Ideal continuous-time response `Kp(1 + 1/(Ti (jω)^λ) + Td (jω)^μ)`.
    pub fn ideal_response(&self, omega: f64) -> Complex64 {
        let jw = Complex64::new(0.0, omega);
        let integral = if self.ti.is_finite() {
            1.0 / (self.ti * jw.powf(self.lambda))
        } else {
            Complex64::new(0.0, 0.0)
        };
        self.kp * (1.0 + integral + self.td * jw.powf(self.mu))
    }
}

/// Actuator range of the controller output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for OutputLimits {
    fn default() -> Self {
        Self { min: 0.0, max: 1.0 }
    }
}

impl OutputLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::config(format!(
                "output limits must be finite with min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Three-branch controller with clamped output and conditional integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    params: FopidParams,
    integral: DiscreteFilter,
    derivative: DiscreteFilter,
    limits: OutputLimits,
    integral_out: f64,
    last_unsaturated: f64,
}

impl Controller {
    pub fn params(&self) -> &FopidParams {
        &self.params
    }

    pub fn limits(&self) -> OutputLimits {
        self.limits
    }

    pub fn dt(&self) -> f64 {
        self.integral.dt()
    }

    pub fn integral_branch(&self) -> &DiscreteFilter {
        &self.integral
    }

    pub fn derivative_branch(&self) -> &DiscreteFilter {
        &self.derivative
    }

    pub fn with_limits(mut self, limits: OutputLimits) -> Result<Self> {
        limits.validate()?;
        self.limits = limits;
        Ok(self)
    }

    /// One control step: error in volts, returns the clamped duty command.
    pub fn update(&mut self, error: f64) -> f64 {
        let p = self.params.kp * error;
        self.integral.checkpoint();
        let mut i = self.integral.step(error);
        let d = self.derivative.step(error);
        let mut u = p + i + d;

        // freeze the integral while clamped and still pushing outward
        let push = error * self.integral.gain();
        if (u > self.limits.max && push > 0.0) || (u < self.limits.min && push < 0.0) {
            self.integral.rollback();
            i = self.integral_out;
            u = p + i + d;
        }
        self.integral_out = i;
        self.last_unsaturated = u;
        u.clamp(self.limits.min, self.limits.max)
    }

    /// Pre-saturation command of the most recent update.
    pub fn last_unsaturated(&self) -> f64 {
        self.last_unsaturated
    }

    /// Largest magnitude among the controller's internal signals.
    pub fn max_abs_signal(&self) -> f64 {
        self.last_unsaturated
            .abs()
            .max(self.integral.max_abs_state())
            .max(self.derivative.max_abs_state())
    }

    pub fn reset(&mut self) {
        self.integral.reset();
        self.derivative.reset();
        self.integral_out = 0.0;
        self.last_unsaturated = 0.0;
    }

    /// Response of the realized (discrete) controller, ignoring saturation.
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        self.params.kp + self.integral.freq_response(omega) + self.derivative.freq_response(omega)
    }
}

/// Build the fractional controller. The integral branch realizes `s^-λ` as
/// `s^{⌊-λ⌋}·s^{-λ-⌊-λ⌋}`, so it always keeps an exact pole at the origin.
pub fn build_fopid(params: &FopidParams, ora: &OraConfig, dt: f64) -> Result<Controller> {
    params.validate()?;
    ora.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(format!(
            "controller dt must be positive, got {dt}"
        )));
    }
    let ki = if params.ti.is_finite() {
        params.kp / params.ti
    } else {
        0.0
    };
    let integral =
        DiscreteFilter::realize(&approximate_power(-params.lambda, ora)?, dt)?.scaled(ki);
    let derivative = DiscreteFilter::realize(&approximate_power(params.mu, ora)?, dt)?
        .scaled(params.kp * params.td);
    Ok(Controller {
        params: *params,
        integral,
        derivative,
        limits: OutputLimits::default(),
        integral_out: 0.0,
        last_unsaturated: 0.0,
    })
}

/// Integer-order special case (`λ = μ = 1`): exact trapezoidal integrator and
/// filtered differentiator, no fractional sections.
pub fn build_pid(params: &FopidParams, dt: f64) -> Result<Controller> {
    if !params.is_integer_order() {
        return Err(Error::config(format!(
            "PID requires lambda = mu = 1, got lambda = {}, mu = {}",
            params.lambda, params.mu
        )));
    }
    // the band is irrelevant when both orders are integers
    build_fopid(params, &OraConfig::default(), dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DT: f64 = 5e-7;

    fn table3_run2() -> FopidParams {
        FopidParams {
            kp: 1.7274,
            ti: 9.3187e-4,
            td: 0.0345,
            lambda: 0.7157,
            mu: 0.8914,
        }
    }

    fn wide() -> OutputLimits {
        OutputLimits {
            min: -1e12,
            max: 1e12,
        }
    }

    #[test]
    fn integer_orders_reduce_to_pid() {
        let p = FopidParams::pid(3.6058, 2.7894e-4, 0.0147);
        let a = build_fopid(&p, &OraConfig::default(), DT).unwrap();
        let b = build_pid(&p, DT).unwrap();
        assert_eq!(a, b);
        assert!(a.integral_branch().sections().is_empty());
        assert_eq!(a.integral_branch().integrator_count(), 1);
        assert!(a.derivative_branch().sections().is_empty());
        assert_eq!(a.derivative_branch().differentiator_count(), 1);
    }

    #[test]
    fn paper_tuned_controllers_build_stable() {
        let fo = build_fopid(&table3_run2(), &OraConfig::default(), DT).unwrap();
        let pid = build_pid(&FopidParams::pid(3.6058, 2.7894e-4, 0.0147), DT).unwrap();
        for c in [&fo, &pid] {
            for s in c
                .integral_branch()
                .sections()
                .iter()
                .chain(c.derivative_branch().sections())
            {
                assert!(s.a1.abs() < 1.0);
            }
        }
        assert_eq!(fo.integral_branch().integrator_count(), 1);
        assert_eq!(fo.integral_branch().sections().len(), 8);
    }

    #[test]
    fn rejects_invalid_params() {
        let good = table3_run2();
        let ora = OraConfig::default();
        assert!(build_fopid(&good, &ora, 0.0).is_err());
        for bad in [
            FopidParams { ti: 0.0, ..good },
            FopidParams { td: -1.0, ..good },
            FopidParams {
                lambda: 0.0,
                ..good
            },
            FopidParams { mu: 1.3, ..good },
            FopidParams {
                kp: f64::NAN,
                ..good
            },
        ] {
            assert!(build_fopid(&bad, &ora, DT).is_err());
        }
        assert!(build_pid(&good, DT).is_err());
    }

    #[test]
    fn integral_branch_grows_without_bound() {
        let mut c = build_fopid(&table3_run2(), &OraConfig::default(), DT)
            .unwrap()
            .with_limits(wide())
            .unwrap();
        let mut last = 0.0;
        for k in 0..200_000 {
            let u = c.update(0.01);
            if k % 50_000 == 49_999 {
                assert!(u > last);
                last = u;
            }
        }
        assert!(last > 1.0);
    }

    #[test]
    fn zero_gain_gives_zero_output() {
        let mut c = build_pid(&FopidParams::pid(0.0, 1e-3, 0.01), DT)
            .unwrap()
            .with_limits(wide())
            .unwrap();
        for e in [1.0, -3.0, 12.0, 0.5] {
            assert_eq!(c.update(e), 0.0);
        }
    }

    #[test]
    fn first_sample_of_step() {
        let (kp, ti, td) = (2.0, 1e-3, 1e-5);
        let mut c = build_pid(&FopidParams::pid(kp, ti, td), DT)
            .unwrap()
            .with_limits(wide())
            .unwrap();
        let u0 = c.update(1.0);
        let tau = 2.0 * DT;
        // discrete closed form: kp + ki·dt + kp·td·(2/dt)/(1 + 2τ/dt)
        let expect = kp + kp / ti * DT + kp * td * (2.0 / DT) / (1.0 + 2.0 * tau / DT);
        assert!((u0 - expect).abs() / expect < 1e-12, "{u0} vs {expect}");
        // continuous limit kp(1 + td/τ) is approached within the bilinear factor 0.8
        let continuous = kp * (1.0 + td / tau);
        assert!(u0 > 0.75 * continuous && u0 < continuous);
    }

    #[test]
    fn saturation_and_simple_cases() {
        let mut c = build_fopid(&table3_run2(), &OraConfig::default(), DT).unwrap();
        assert_eq!(c.update(0.0), 0.0);
        assert_eq!(c.update(1e9), 1.0);
        c.reset();
        // small error, unsaturated: integral action ramps the output
        let mut c = build_pid(&FopidParams::pid(0.01, 1e-2, 0.0), 1e-4).unwrap();
        let a = c.update(0.5);
        let b = c.update(0.5);
        let d = c.update(0.5);
        assert!(a < b && b < d && d < 1.0);
    }

    #[test]
    fn params_json_uses_null_for_disabled_integral() {
        let p = FopidParams {
            kp: 2.0,
            ti: f64::INFINITY,
            td: 0.0,
            lambda: 1.0,
            mu: 1.0,
        };
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"ti\":null"), "{text}");
        assert_eq!(serde_json::from_str::<FopidParams>(&text).unwrap(), p);
        let short: FopidParams = serde_json::from_str(r#"{"kp": 2.0}"#).unwrap();
        assert_eq!(short, p);
    }

    #[test]
    fn anti_windup_recovers_after_long_saturation() {
        let p = FopidParams::pid(0.05, 1e-3, 0.0);
        let mut c = build_pid(&p, 1e-5).unwrap();
        // long saturating pulse, then a small negative error
        for _ in 0..100_000 {
            let u = c.update(50.0);
            assert!((0.0..=1.0).contains(&u));
        }
        // the clamped integrator never stored more than the limit requires
        assert!(c.last_unsaturated() < 1.0 + 0.05 * 50.0 + 1e-9);
        let mut steps = 0;
        loop {
            let u = c.update(-1.0);
            steps += 1;
            if u < 1.0 {
                break;
            }
            assert!(steps < 1000, "integral state ran away");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn realized_controller_matches_ideal_mid_band(
            kp in 0.1f64..10.0,
            ti in 1e-5f64..1e-2,
            td in 1e-4f64..0.1,
            lambda in 0.1f64..1.2,
            mu in 0.1f64..1.2,
        ) {
            let p = FopidParams { kp, ti, td, lambda, mu };
            let c = build_fopid(&p, &OraConfig::default(), DT).unwrap();
            for i in 0..=40 {
                let w = 10f64.powf(0.5 + 0.1 * i as f64);
                let ideal = p.ideal_response(w);
                let real = c.freq_response(w);
                let mag = (real.norm() - ideal.norm()).abs() / ideal.norm();
                let ph = (real / ideal).arg().to_degrees().abs();
                prop_assert!(mag < 0.05, "mag err {} at {}", mag, w);
                prop_assert!(ph < 5.0, "phase err {} at {}", ph, w);
            }
        }

        #[test]
        fn output_always_within_limits(errs in proptest::collection::vec(-100.0f64..100.0, 1..300)) {
            let mut c = build_fopid(&table3_run2(), &OraConfig::default(), DT).unwrap();
            for e in errs {
                let u = c.update(e);
                prop_assert!((0.0..=1.0).contains(&u));
            }
        }
    }
}
