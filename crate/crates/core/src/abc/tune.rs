use serde::{Deserialize, Serialize};

use super::{optimize, AbcConfig, OptimizeResult};
use crate::config::LoopConfig;
use crate::error::{Error, Result};
use crate::fopid::{FopidParams, MAX_ORDER};
use crate::simloop::SimResult;

/// Cost assigned to candidates the breaker aborted.
pub const PENALTY_COST: f64 = 1e6;

/// Per-parameter search intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBox {
    pub kp: (f64, f64),
    pub ti: (f64, f64),
    pub td: (f64, f64),
    pub lambda: (f64, f64),
    pub mu: (f64, f64),
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            kp: (0.1, 10.0),
            ti: (1e-5, 1e-2),
            td: (1e-4, 0.1),
            lambda: (0.1, 1.2),
            mu: (0.1, 1.2),
        }
    }
}

impl SearchBox {
    pub fn validate(&self) -> Result<()> {
        // (name, interval, smallest admissible lower bound, lower bound may equal it)
        let checks = [
            ("kp", self.kp, f64::NEG_INFINITY, true),
            ("ti", self.ti, 0.0, false),
            ("td", self.td, 0.0, true),
            ("lambda", self.lambda, 0.0, false),
            ("mu", self.mu, 0.0, false),
        ];
        for (name, (lo, hi), floor, inclusive) in checks {
            let floor_ok = if inclusive { lo >= floor } else { lo > floor };
            if !(lo.is_finite() && hi.is_finite() && lo < hi && floor_ok) {
                return Err(Error::config(format!(
                    "search.{name} = [{lo}, {hi}] is not a valid interval"
                )));
            }
        }
        for (name, (_, hi)) in [("lambda", self.lambda), ("mu", self.mu)] {
            if hi > MAX_ORDER {
                return Err(Error::config(format!(
                    "search.{name} upper bound {hi} exceeds {MAX_ORDER}"
                )));
            }
        }
        Ok(())
    }

    /// Bounds for `[kp, ti, td, lambda, mu]`.
    pub fn fopid_bounds(&self) -> Vec<(f64, f64)> {
        vec![self.kp, self.ti, self.td, self.lambda, self.mu]
    }

    /// Bounds for `[kp, ti, td]`.
    pub fn pid_bounds(&self) -> Vec<(f64, f64)> {
        vec![self.kp, self.ti, self.td]
    }
}

fn decode(position: &[f64]) -> FopidParams {
    match *position {
        [kp, ti, td] => FopidParams::pid(kp, ti, td),
        [kp, ti, td, lambda, mu] => FopidParams {
            kp,
            ti,
            td,
            lambda,
            mu,
        },
        _ => unreachable!("positions are 3- or 5-dimensional"),
    }
}

/// Result of one tuning run.
#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    pub params: FopidParams,
    pub result: SimResult,
    pub optimization: OptimizeResult,
}

impl TuneOutcome {
    /// True when even the best candidate was aborted by the breaker.
    pub fn penalized(&self) -> bool {
        self.optimization.best.cost >= PENALTY_COST
    }
}

/// `J_IAE` of a candidate, or [`PENALTY_COST`] if unstable or unbuildable.
pub fn objective(setup: &LoopConfig, params: &FopidParams) -> f64 {
    match setup.evaluate(params) {
        Ok(r) if r.stable => r.j_iae,
        _ => PENALTY_COST,
    }
}

fn tune(setup: &LoopConfig, bounds: &[(f64, f64)], abc: &AbcConfig) -> Result<TuneOutcome> {
    setup.validate()?;
    let f = |x: &[f64]| objective(setup, &decode(x));
    let optimization = optimize(&f, bounds, abc)?;
    let params = decode(&optimization.best.position);
    let result = setup.evaluate(&params)?;
    Ok(TuneOutcome {
        params,
        result,
        optimization,
    })
}

/// Five-parameter search over `[kp, ti, td, lambda, mu]`.
pub fn tune_fopid(setup: &LoopConfig, search: &SearchBox, abc: &AbcConfig) -> Result<TuneOutcome> {
    search.validate()?;
    tune(setup, &search.fopid_bounds(), abc)
}

/// Three-parameter search with `λ = μ = 1`.
pub fn tune_pid(setup: &LoopConfig, search: &SearchBox, abc: &AbcConfig) -> Result<TuneOutcome> {
    search.validate()?;
    tune(setup, &search.pid_bounds(), abc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simloop::Scenario;

    fn short_setup() -> LoopConfig {
        LoopConfig {
            scenario: Scenario {
                horizon: 0.005,
                ..Scenario::default()
            },
            ..LoopConfig::default()
        }
    }

    fn small_abc(seed: u64) -> AbcConfig {
        AbcConfig {
            colony_size: 4,
            max_iterations: 2,
            rng_seed: seed,
            ..AbcConfig::default()
        }
    }

    #[test]
    fn pid_tuning_keeps_integer_orders() {
        let out = tune_pid(&short_setup(), &SearchBox::default(), &small_abc(1)).unwrap();
        assert_eq!(out.params.lambda, 1.0);
        assert_eq!(out.params.mu, 1.0);
        assert_eq!(out.optimization.best.position.len(), 3);
        assert!(out.result.stable);
        assert_eq!(out.result.j_iae, out.optimization.best.cost);
    }

    #[test]
    fn seeded_tuning_is_reproducible() {
        let a = tune_fopid(&short_setup(), &SearchBox::default(), &small_abc(7)).unwrap();
        let b = tune_fopid(&short_setup(), &SearchBox::default(), &small_abc(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_unstable_box_returns_flagged_penalty() {
        // a one-volt breaker threshold trips on every candidate
        let mut setup = short_setup();
        setup.scenario.break_threshold = 1.0;
        let out = tune_pid(&setup, &SearchBox::default(), &small_abc(3)).unwrap();
        assert!(out.penalized());
        assert_eq!(out.optimization.best.cost, PENALTY_COST);
        assert!(!out.result.stable);
    }

    #[test]
    fn search_box_validation() {
        assert!(SearchBox::default().validate().is_ok());
        let bad = SearchBox {
            ti: (0.0, 1e-2),
            ..SearchBox::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchBox {
            mu: (0.1, 2.0),
            ..SearchBox::default()
        };
        assert!(bad.validate().is_err());
    }
}
