//! TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Interpolation;
use crate::params::{validate_params, Check, DelaySpec, Severity, SystemParams, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Interior nodes; h = L/(n + 1).
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dt: f64,
    pub horizon: f64,
    pub theta: f64,
    pub nonlinear: bool,
    pub picard_iters: usize,
    pub picard_tol: f64,
    /// Scale of the initial bump.
    pub amplitude: f64,
    /// Exponent of the bump (4x(L − x)/L²)^p.
    pub profile_power: i32,
    /// Adds random smooth modes to the initial data when set.
    pub seed: Option<u64>,
    /// Lyapunov weights used when no certificate is available.
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub interpolation: Interpolation,
    /// Trapezoid points for the delay channel; exact cell quadrature when absent.
    pub quadrature_points: Option<usize>,
    /// Relative slack of the decay-bound check.
    pub slack: f64,
    /// Final fraction of the horizon used by the decay fit.
    pub fit_window: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: 1e-3,
            horizon: 5.0,
            theta: 0.5,
            nonlinear: false,
            picard_iters: 50,
            picard_tol: 1e-12,
            amplitude: 1.0,
            profile_power: 6,
            seed: None,
            mu1: None,
            mu2: None,
            interpolation: Interpolation::MonotoneCubic,
            quadrature_points: None,
            slack: 0.02,
            fit_window: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub system: SystemParams,
    pub delay: DelaySpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parameter hypotheses plus the numerical settings.
    pub fn validate(&self) -> ValidationReport {
        let mut r = validate_params(&self.system, &self.delay, self.run.horizon);
        let run = &self.run;
        let mut push = |name, passed, value, detail: String| {
            r.checks.push(Check {
                name,
                passed,
                severity: Severity::Error,
                value,
                detail,
            })
        };
        push(
            "grid_size",
            self.grid.n >= 8,
            self.grid.n as f64,
            format!("n = {} (need >= 8)", self.grid.n),
        );
        push(
            "time_step",
            run.dt > 0.0 && run.dt < self.delay.tau0,
            run.dt,
            format!("dt = {} must lie in (0, tau0)", run.dt),
        );
        push(
            "horizon",
            run.horizon >= 0.0 && run.horizon.is_finite(),
            run.horizon,
            format!("horizon = {}", run.horizon),
        );
        push(
            "theta",
            (0.5..=1.0).contains(&run.theta),
            run.theta,
            format!("theta = {} must lie in [1/2, 1]", run.theta),
        );
        push(
            "fit_window",
            run.fit_window > 0.0 && run.fit_window <= 1.0,
            run.fit_window,
            format!("fit window = {} must lie in (0, 1]", run.fit_window),
        );
        r
    }

    /// Sets a parameter by dotted or bare name, as used by sweep axes.
    pub fn set(&mut self, name: &str, v: f64) -> Result<()> {
        let key = name.rsplit('.').next().unwrap_or(name);
        match key {
            "a" => self.system.a = v,
            "a1" => self.system.a1 = v,
            "L" => self.system.l = v,
            "alpha" => self.system.alpha = v,
            "beta" => self.system.beta = v,
            "tau0" => self.delay.tau0 = v,
            "M" => self.delay.m = v,
            "d" => self.delay.d = v,
            "n" => self.grid.n = v as usize,
            "dt" => self.run.dt = v,
            "horizon" => self.run.horizon = v,
            "amplitude" => self.run.amplitude = v,
            _ => return Err(Error::Config(format!("unknown sweep parameter '{name}'"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[system]
a = 0.001
a1 = 0.01
L = 3.0
alpha = 2.0
beta = 0.02

[delay]
tau0 = 0.5
M = 0.5
d = 0.0
form = { kind = "constant" }

[grid]
n = 200

[run]
dt = 0.001
horizon = 5.0
seed = 7
"#;

    #[test]
    fn round_trip() {
        let c = Config::parse(SAMPLE).unwrap();
        let again = Config::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.run.seed, Some(7));
        assert_eq!(c.run.theta, 0.5);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let bad = SAMPLE.replace("alpha = 2.0", "alpah = 2.0");
        assert!(matches!(Config::parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn set_by_name() {
        let mut c = Config::parse(SAMPLE).unwrap();
        c.set("system.alpha", 3.0).unwrap();
        c.set("tau0", 0.25).unwrap();
        assert_eq!((c.system.alpha, c.delay.tau0), (3.0, 0.25));
        assert!(c.set("bogus", 1.0).is_err());
    }
}
