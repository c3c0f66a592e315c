//! Model parameters, delay laws, the spatial grid and hypothesis checks.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{Interpolation, Samples};

/// Physical coefficients, nonlinear coefficients and feedback gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub a: f64,
    pub a1: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub alpha_p: f64,
    #[serde(default = "one")]
    pub beta_p: f64,
    #[serde(default = "one")]
    pub rho_nl: f64,
    /// Coefficient of (ωω_x)_xx. Defaults to `a` when omitted from a config file.
    #[serde(default)]
    pub c_nl: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl SystemParams {
    /// Linear-only parameter set; nonlinear coefficients default to 1 and c = a.
    pub fn new(a: f64, a1: f64, l: f64, alpha: f64, beta: f64) -> Self {
        SystemParams {
            a,
            a1,
            l,
            alpha,
            beta,
            alpha_p: 1.0,
            beta_p: 1.0,
            rho_nl: 1.0,
            c_nl: None,
        }
    }

    pub fn c(&self) -> f64 {
        self.c_nl.unwrap_or(self.a)
    }

    /// Largest admissible length for certification, π·sqrt(5a₁/(3a)).
    pub fn critical_length(&self) -> f64 {
        PI * (5.0 * self.a1 / (3.0 * self.a)).sqrt()
    }

    pub fn length_ok(&self) -> bool {
        self.l > 0.0 && self.l < self.critical_length()
    }
}

/// Closed-form delay laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayForm {
    Constant,
    /// τ₀ + slope·t, saturating at M.
    Affine {
        slope: f64,
    },
    /// τ₀ + amplitude·sin(ν t).
    Sinusoidal {
        amplitude: f64,
        nu: f64,
    },
}

/// Delay function with its bounds and the initial boundary-trace history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub tau0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub d: f64,
    pub form: DelayForm,
    /// Uniform samples of z₀ on [−τ(0), 0]; empty means zero history.
    #[serde(default)]
    pub history: Vec<f64>,
}

impl DelaySpec {
    pub fn constant(tau0: f64) -> Self {
        DelaySpec {
            tau0,
            m: tau0,
            d: 0.0,
            form: DelayForm::Constant,
            history: Vec::new(),
        }
    }

    /// z₀(s) for s ∈ [−τ(0), 0], clamped outside that window.
    pub fn history_at(&self, s: f64, kind: Interpolation) -> f64 {
        match self.history.len() {
            0 => 0.0,
            1 => self.history[0],
            k => {
                let step = self.tau0 / (k - 1) as f64;
                let times: Vec<f64> = (0..k).map(|j| -self.tau0 + j as f64 * step).collect();
                let samples = Samples::new(&times, &self.history);
                samples.eval(s.clamp(-self.tau0, 0.0), kind)
            }
        }
    }
}

/// τ(t) and τ̇(t) for the closed-form laws.
pub fn tau_at(dly: &DelaySpec, t: f64) -> (f64, f64) {
    match dly.form {
        DelayForm::Constant => (dly.tau0, 0.0),
        DelayForm::Affine { slope } => {
            let raw = dly.tau0 + slope * t;
            if slope > 0.0 && raw >= dly.m {
                (dly.m, 0.0)
            } else {
                (raw, slope)
            }
        }
        DelayForm::Sinusoidal { amplitude, nu } => (
            dly.tau0 + amplitude * (nu * t).sin(),
            amplitude * nu * (nu * t).cos(),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Config(format!(
                "grid needs n >= 8 interior nodes, got {n}"
            )));
        }
        if !(l > 0.0) {
            return Err(Error::Config(format!(
                "domain length must be positive, got {l}"
            )));
        }
        let h = l / (n + 1) as f64;
        let nodes = (1..=n).map(|i| i as f64 * h).collect();
        Ok(Grid { n, h, nodes })
    }

    pub fn length(&self) -> f64 {
        self.h * (self.n + 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub severity: Severity,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// No failed error-level checks: simulation is allowed.
    pub fn ok(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.passed || c.severity == Severity::Warning)
    }

    /// Every check passed: certification is allowed.
    pub fn certifiable(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.passed, c.severity) {
                (true, _) => "ok",
                (false, Severity::Error) => "ERROR",
                (false, Severity::Warning) => "warning",
            };
            writeln!(f, "{:<18} {:<8} {}", c.name, tag, c.detail)?;
        }
        Ok(())
    }
}

const SAMPLES: usize = 10_000;

/// Checks every standing hypothesis; delay bounds are sampled on [0, horizon].
pub fn validate_params(p: &SystemParams, dly: &DelaySpec, horizon: f64) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name, passed, severity, value, detail: String| {
        checks.push(Check {
            name,
            passed,
            severity,
            value,
            detail,
        })
    };
    push(
        "a_positive",
        p.a > 0.0,
        Severity::Error,
        p.a,
        format!("a = {}", p.a),
    );
    push(
        "a1_positive",
        p.a1 > 0.0,
        Severity::Error,
        p.a1,
        format!("a1 = {}", p.a1),
    );
    push(
        "length_positive",
        p.l > 0.0,
        Severity::Error,
        p.l,
        format!("L = {}", p.l),
    );
    if p.a > 0.0 && p.a1 > 0.0 {
        let lc = p.critical_length();
        push(
            "length_bound",
            p.l < lc,
            Severity::Warning,
            p.l,
            format!("L = {} against critical length {:.6}", p.l, lc),
        );
    }
    push(
        "tau0_positive",
        dly.tau0 > 0.0,
        Severity::Error,
        dly.tau0,
        format!("tau0 = {}", dly.tau0),
    );
    push(
        "slope_bound",
        (0.0..1.0).contains(&dly.d),
        Severity::Error,
        dly.d,
        format!("d = {} must lie in [0, 1)", dly.d),
    );

    let span = horizon.max(0.0);
    let (mut lo, mut hi, mut sl) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut t_lo, mut t_hi, mut t_sl) = (0.0, 0.0, 0.0);
    for j in 0..=SAMPLES {
        let t = span * j as f64 / SAMPLES as f64;
        let (tau, dot) = tau_at(dly, t);
        if tau < lo {
            lo = tau;
            t_lo = t;
        }
        if tau > hi {
            hi = tau;
            t_hi = t;
        }
        if dot > sl {
            sl = dot;
            t_sl = t;
        }
    }
    let tol = 1e-12;
    push(
        "delay_lower",
        lo >= dly.tau0 * (1.0 - tol) && lo > 0.0,
        Severity::Error,
        lo,
        format!("min tau = {lo} at t = {t_lo} (tau0 = {})", dly.tau0),
    );
    push(
        "delay_upper",
        hi <= dly.m * (1.0 + tol),
        Severity::Error,
        hi,
        format!("max tau = {hi} at t = {t_hi} (M = {})", dly.m),
    );
    push(
        "delay_slope",
        sl <= dly.d + tol * dly.d.abs().max(1.0),
        Severity::Error,
        sl,
        format!("max tau_dot = {sl} at t = {t_sl} (d = {})", dly.d),
    );
    ValidationReport { checks }
}
