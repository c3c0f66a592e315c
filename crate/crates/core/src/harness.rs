//! Run orchestration: initial data, simulation reports, decay fits, bound
//! checks and parameter sweeps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{certify, check_gains, StabilityCertificate};
use crate::config::Config;
use crate::energy::{dissipation_residual, DelayQuadrature, EnergySample, KatoCheck};
use crate::error::{Error, Result};
use crate::operators::build_operators;
use crate::params::Grid;
use crate::stepper::{run, RunOptions, RunReport, RunStatus, SimState, StepConfig, Stepper};

/// Smooth bump η₀ = A·b, ω₀ = ½A·b·x/L with b = (4x(L − x)/L²)^p; a seed adds
/// random modes b·sin(jπx/L).
pub fn initial_data(cfg: &Config, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let l = cfg.system.l;
    let amp = cfg.run.amplitude;
    let bump = |x: f64| (4.0 * x * (l - x) / (l * l)).powi(cfg.run.profile_power);
    let mut eta: Vec<f64> = grid.nodes.iter().map(|&x| amp * bump(x)).collect();
    let mut omega: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&x| 0.5 * amp * bump(x) * x / l)
        .collect();
    if let Some(seed) = cfg.run.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 1..=4 {
            let ce: f64 = rng.gen_range(-0.5..0.5) * amp;
            let cw: f64 = rng.gen_range(-0.5..0.5) * amp;
            let k = j as f64 * std::f64::consts::PI / l;
            for (i, &x) in grid.nodes.iter().enumerate() {
                let m = bump(x) * (k * x).sin();
                eta[i] += ce * m;
                omega[i] += cw * m;
            }
        }
    }
    (eta, omega)
}

pub fn build_stepper(cfg: &Config) -> Result<Stepper> {
    let grid = Grid::new(cfg.grid.n, cfg.system.l)?;
    let ops = build_operators(&cfg.system, &grid)?;
    let sc = StepConfig {
        dt: cfg.run.dt,
        theta: cfg.run.theta,
        nonlinear: cfg.run.nonlinear,
        picard_iters: cfg.run.picard_iters,
        picard_tol: cfg.run.picard_tol,
    };
    Stepper::new(ops, cfg.system.clone(), cfg.delay.clone(), sc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub lambda_obs: f64,
    pub r2: f64,
    pub window: f64,
    pub points: usize,
    /// Samples with E <= 0 were dropped from the end of the window.
    pub truncated: bool,
}

/// Least-squares slope of ln E over the final `window` fraction of the series.
pub fn fit_decay(series: &[(f64, f64)], window: f64) -> Result<DecayFit> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "decay fit needs at least two samples".into(),
        ));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Config(format!(
            "fit window {window} must lie in (0, 1]"
        )));
    }
    let (t0, t1) = (series[0].0, series[series.len() - 1].0);
    let start = t1 - window * (t1 - t0);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut truncated = false;
    for &(t, e) in series.iter().filter(|(t, _)| *t >= start - 1e-12) {
        if !(e > 0.0) {
            truncated = true;
            break;
        }
        pts.push((t, e.ln()));
    }
    if truncated {
        eprintln!(
            "warning: energy reached zero inside the fit window; fit truncated to {} samples",
            pts.len()
        );
    }
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} positive samples in the fit window",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    Ok(DecayFit {
        lambda_obs: -slope,
        r2,
        window,
        points: pts.len(),
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    /// max_t E(t) / (ζ E(0) e^{−λt})
    pub max_ratio: f64,
    pub slack: f64,
    pub violations: usize,
    pub passed: bool,
}

pub fn bound_check(rows: &[EnergySample], lambda: f64, zeta: f64, slack: f64) -> BoundCheck {
    let e0 = rows.first().map_or(0.0, |r| r.e);
    let mut max_ratio = 0.0f64;
    let mut violations = 0;
    for r in rows {
        let bound = zeta * e0 * (-lambda * r.t).exp();
        let ratio = if bound > 0.0 {
            r.e / bound
        } else if r.e > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > 1.0 + slack {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    BoundCheck {
        max_ratio,
        slack,
        violations,
        passed: violations == 0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub lambda_theory: f64,
    pub zeta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu1_star: f64,
    pub lambda_star: f64,
    pub threshold: f64,
}

impl From<&StabilityCertificate> for CertificateSummary {
    fn from(c: &StabilityCertificate) -> Self {
        CertificateSummary {
            lambda_theory: c.lambda,
            zeta: c.zeta,
            mu1: c.mu1,
            mu2: c.mu2,
            mu1_star: c.mu1_star,
            lambda_star: c.lambda_star,
            threshold: c.threshold,
        }
    }
}

/// Structured run summary, written as TOML.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: String,
    pub certified: bool,
    pub uncertified_reason: Option<String>,
    pub rows: usize,
    pub e0: f64,
    pub e_final: f64,
    pub max_energy_increment: f64,
    pub dissipation_residual: Option<f64>,
    pub max_picard_iters: usize,
    pub certificate: Option<CertificateSummary>,
    pub fit: Option<DecayFit>,
    pub bound: Option<BoundCheck>,
    pub kato: Option<KatoCheck>,
    pub config: Config,
}

pub struct Simulation {
    pub report: RunReport,
    pub certificate: std::result::Result<StabilityCertificate, String>,
    pub summary: Summary,
}

fn status_text(s: RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::NonlinearDivergence { t, iters } => {
            format!("nonlinear divergence at t = {t} after {iters} iterations")
        }
        RunStatus::Unstable { t } => format!("unstable: energy blow-up at t = {t}"),
    }
}

/// Runs one configuration end to end. Certification failures never block the run.
pub fn simulate(cfg: &Config) -> Result<Simulation> {
    let report = cfg.validate();
    if !report.ok() {
        let msgs: Vec<String> = report.failed().map(|c| c.detail.clone()).collect();
        return Err(Error::Config(msgs.join("; ")));
    }
    let certificate = certify(&cfg.system, &cfg.delay).map_err(|e| e.to_string());
    let mu = match &certificate {
        Ok(c) => (c.mu1, c.mu2),
        Err(_) => (cfg.run.mu1.unwrap_or(0.0), cfg.run.mu2.unwrap_or(0.0)),
    };
    let stepper = build_stepper(cfg)?;
    let (eta, omega) = initial_data(cfg, &stepper.ops.grid);
    let s0 = SimState::initial(
        &stepper.ops,
        &cfg.delay,
        eta,
        omega,
        cfg.run.dt,
        cfg.run.interpolation,
    );
    let opts = RunOptions {
        horizon: cfg.run.horizon,
        mu,
        quadrature: cfg
            .run
            .quadrature_points
            .map_or(DelayQuadrature::Exact, DelayQuadrature::Trapezoid),
        kato: !cfg.run.nonlinear,
        ..RunOptions::default()
    };
    let rr = run(&stepper, s0, &opts)?;
    let rows = &rr.rows;
    let e0 = rows[0].e;
    let max_inc = rows
        .windows(2)
        .map(|w| w[1].e - w[0].e)
        .fold(f64::NEG_INFINITY, f64::max);
    let fit = if e0 > 0.0 && rows.len() >= 3 {
        let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.e)).collect();
        fit_decay(&series, cfg.run.fit_window).ok()
    } else {
        None
    };
    let bound = certificate
        .as_ref()
        .ok()
        .map(|c| bound_check(rows, c.lambda, c.zeta, cfg.run.slack));
    let summary = Summary {
        status: status_text(rr.status),
        certified: certificate.is_ok(),
        uncertified_reason: certificate.as_ref().err().cloned(),
        rows: rows.len(),
        e0,
        e_final: rows[rows.len() - 1].e,
        max_energy_increment: if max_inc.is_finite() { max_inc } else { 0.0 },
        dissipation_residual: dissipation_residual(rows).ok(),
        max_picard_iters: rr.max_picard_iters,
        certificate: certificate.as_ref().ok().map(CertificateSummary::from),
        fit,
        bound,
        kato: rr.kato.map(|k| k.check(&cfg.system)),
        config: cfg.clone(),
    };
    Ok(Simulation {
        report: rr,
        certificate,
        summary,
    })
}

pub const CSV_HEADER: [&str; 7] = ["t", "E", "V", "V1", "V2", "trace_now", "trace_delayed"];

pub fn write_series(path: &Path, rows: &[EnergySample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(CSV_HEADER)
        .map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        let rec =
            [r.t, r.e, r.v, r.v1, r.v2, r.trace_now, r.trace_delayed].map(|v| format!("{v:.16e}"));
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, s: &Summary) -> Result<()> {
    let text = toml::to_string(s).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepTask {
    Certify,
    Simulate,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub task: SweepTask,
    /// Table file name inside the output directory.
    #[serde(default = "default_sweep_output")]
    pub output: String,
    pub axis: Vec<Axis>,
    #[serde(flatten)]
    pub base: Config,
}

fn default_sweep_output() -> String {
    "sweep.csv".into()
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let s: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if s.axis.is_empty() {
            return Err(Error::Config("sweep needs at least one axis".into()));
        }
        for a in &s.axis {
            if a.values.is_empty() {
                return Err(Error::Config(format!("axis '{}' has no values", a.name)));
            }
            s.base.clone().set(&a.name, a.values[0])?;
        }
        Ok(s)
    }

    /// Grid points in row-major order, last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for a in &self.axis {
            pts = pts
                .into_iter()
                .flat_map(|p| a.values.iter().map(move |v| [p.clone(), vec![*v]].concat()))
                .collect();
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub admissible: bool,
    pub certified: bool,
    pub lambda_star: Option<f64>,
    pub zeta: Option<f64>,
    pub lambda_obs: Option<f64>,
    pub error: Option<String>,
}

fn sweep_point(spec: &SweepSpec, values: &[f64]) -> SweepRow {
    let mut row = SweepRow {
        values: values.to_vec(),
        admissible: false,
        certified: false,
        lambda_star: None,
        zeta: None,
        lambda_obs: None,
        error: None,
    };
    let mut cfg = spec.base.clone();
    for (a, v) in spec.axis.iter().zip(values) {
        if let Err(e) = cfg.set(&a.name, *v) {
            row.error = Some(e.to_string());
            return row;
        }
    }
    match check_gains(&cfg.system, &cfg.delay) {
        Ok(g) => row.admissible = g.admissible,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    if let Ok(c) = certify(&cfg.system, &cfg.delay) {
        row.certified = true;
        row.lambda_star = Some(c.lambda_star);
        row.zeta = Some(c.zeta);
    }
    if spec.task != SweepTask::Certify {
        match simulate(&cfg) {
            Ok(sim) => row.lambda_obs = sim.summary.fit.map(|f| f.lambda_obs),
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row
}

/// Evaluates every grid point in parallel; rows keep grid order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    spec.points()
        .par_iter()
        .map(|p| sweep_point(spec, p))
        .collect()
}

pub fn write_sweep(path: &Path, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut header: Vec<String> = spec.axis.iter().map(|a| a.name.clone()).collect();
    header.extend(
        [
            "admissible",
            "certified",
            "lambda_star",
            "zeta",
            "lambda_obs",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
    for r in rows {
        let mut rec: Vec<String> = r.values.iter().map(|v| format!("{v}")).collect();
        rec.push(r.admissible.to_string());
        rec.push(r.certified.to_string());
        rec.push(opt(r.lambda_star));
        rec.push(opt(r.zeta));
        rec.push(opt(r.lambda_obs));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_exponential() {
        let s: Vec<(f64, f64)> = (0..=500)
            .map(|k| (k as f64 * 1e-2, 5.0 * (-0.7 * k as f64 * 1e-2).exp()))
            .collect();
        let f = fit_decay(&s, 0.5).unwrap();
        assert!((f.lambda_obs - 0.7).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_constant_is_zero() {
        let s: Vec<(f64, f64)> = (0..100).map(|k| (k as f64, 2.0)).collect();
        assert_eq!(fit_decay(&s, 0.5).unwrap().lambda_obs, 0.0);
    }

    #[test]
    fn fit_truncates_at_zero() {
        let mut s: Vec<(f64, f64)> = (0..100)
            .map(|k| (k as f64, (-0.1 * k as f64).exp()))
            .collect();
        s[90].1 = 0.0;
        let f = fit_decay(&s, 0.5).unwrap();
        assert!(f.truncated);
        assert!((f.lambda_obs - 0.1).abs() < 1e-10);
    }

    #[test]
    fn bound_on_zero_energy() {
        let rows = vec![EnergySample::default(); 3];
        assert!(bound_check(&rows, 1.0, 1.0, 0.02).passed);
    }
}
