//! Fractional-order PID control workbench for a switched boost converter.
//!
//! - [`frac_approx`]: band-limited rational approximation of `s^ν`.
//! - [`lti`]: discrete cascade realization of those approximations.
//! - [`fopid`]: the `Kp(1 + 1/(Ti s^λ) + Td s^μ)` controller and its PID case.
//! - [`plant`]: nonlinear boost converter with parasitics and latched PWM.
//! - [`simloop`]: closed-loop simulation, breaker, and trace metrics.
//! - [`abc`]: Artificial Bee Colony optimizer and controller tuning.
//! - [`metrics`]: multi-run comparison reports and disturbance figures.

pub mod abc;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod fopid;
pub mod frac_approx;
pub mod lti;
pub mod metrics;
pub mod plant;
pub mod simloop;

pub use config::{LoopConfig, RunConfig};
pub use error::{Error, Result};
pub use fopid::{build_fopid, build_pid, Controller, FopidParams, OutputLimits};
pub use frac_approx::{approximate_power, OraConfig, RationalApprox};
pub use simloop::{simulate, Scenario, SimResult};
