//! Criterion checks shared by the acceptance report and the asserting tests.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boussinesq_delay::certificate::{
    check_gains, decay_constants, f_of_mu1, g_of_mu1, mu1_right_endpoint, optimal_mu1,
};
use boussinesq_delay::config::Config;
use boussinesq_delay::energy::c_l;
use boussinesq_delay::harness::{build_stepper, initial_data, simulate, Simulation};
use boussinesq_delay::history::HistoryLine;
use boussinesq_delay::interp::Interpolation;
use boussinesq_delay::mms::{mms_study, self_convergence};
use boussinesq_delay::operators::build_operators;
use boussinesq_delay::params::{DelaySpec, Grid, SystemParams};
use boussinesq_delay::stepper::{RunStatus, SimState, StepConfig, Stepper};

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

pub fn acceptance_config() -> Config {
    let text = include_str!("../../configs/acceptance.toml");
    Config::parse(text).expect("acceptance config parses")
}

/// Unit-scale parameters with an admissible gain pair.
pub fn unit_case() -> (SystemParams, DelaySpec) {
    let p = SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0);
    let mut d = DelaySpec::constant(1.0);
    d.m = 1.0;
    (p, d)
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn gain_admissibility() -> Outcome {
    let (p, d) = unit_case();
    let g = check_gains(&p, &d).unwrap();
    let rows = g.phi.as_rows();
    let (l1, l2) = g.phi.eigenvalues();
    let ok = close(g.threshold, 1.0, 1e-12)
        && rows == [[-3.0, -1.0], [-1.0, -1.0]]
        && close(g.phi.det(), 2.0, 1e-12)
        && l1 < 0.0
        && l2 < 0.0
        && g.admissible;
    let mut eq = p.clone();
    eq.alpha = 1.0;
    let ge = check_gains(&eq, &d).unwrap();
    let ok = ok && ge.phi.det() == 0.0 && !ge.admissible;
    Outcome::new(
        ok,
        format!(
            "threshold {}, det {}, eigenvalues ({l1:.6}, {l2:.6}), equality det {}",
            g.threshold,
            g.phi.det(),
            ge.phi.det()
        ),
    )
}

pub fn decay_constants_case() -> Outcome {
    let (p, d) = unit_case();
    let dc = decay_constants(&p, &d, 0.1, 0.5).unwrap();
    let first = 0.1 * PI * PI * (5.0 * PI * PI - 3.0) / 1.1;
    let ok = close(dc.lambda, 1.0 / 3.0, 1e-10)
        && close(dc.zeta, 3.0, 1e-10)
        && close(dc.bracket_kato, first, 1e-10)
        && (dc.bracket_kato - 41.584).abs() < 2e-3
        && dc.shrinks == 0;
    Outcome::new(
        ok,
        format!(
            "lambda {:.12}, zeta {}, first bracket {:.6}",
            dc.lambda, dc.zeta, dc.bracket_kato
        ),
    )
}

pub fn optimal_mu1_case() -> Outcome {
    let (p, d) = unit_case();
    let r = mu1_right_endpoint(&p, &d);
    let f = |m: f64| f_of_mu1(&p, &d, m).unwrap();
    let g = |m: f64| g_of_mu1(&p, &d, m).unwrap();
    let ends = close(r, 0.4, 1e-12)
        && close(g(0.0), 2.0 / 3.0, 1e-12)
        && g(r).abs() < 1e-12
        && f(0.0) == 0.0;
    let opt = optimal_mu1(&p, &d, 1e-12).unwrap();
    let k = 1_000_000;
    let scan = (0..=k)
        .map(|j| r * j as f64 / k as f64)
        .min_by(|a, b| (f(*a) - g(*a)).abs().total_cmp(&(f(*b) - g(*b)).abs()))
        .unwrap();
    let lam = opt.lambda_star;
    let optimal = (1..1000).all(|j| {
        let m = r * j as f64 / 1000.0;
        lam >= f(m).min(g(m)) - 1e-12
    });
    let ok = ends && (opt.mu1_star - scan).abs() <= 1e-6 && optimal;
    Outcome::new(
        ok,
        format!(
            "mu1* {:.9}, scan {:.9}, lambda* {:.9}, interval [0, {r}]",
            opt.mu1_star, scan, lam
        ),
    )
}

/// Acceptance run and its dyadic refinement in (h, dt).
pub fn acceptance_runs() -> &'static (Simulation, Simulation) {
    static RUNS: OnceLock<(Simulation, Simulation)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let base = acceptance_config();
        let mut fine = base.clone();
        fine.grid.n = 2 * base.grid.n + 1;
        fine.run.dt = base.run.dt / 2.0;
        (simulate(&base).unwrap(), simulate(&fine).unwrap())
    })
}

pub fn dissipation_identity() -> Outcome {
    let (c, f) = acceptance_runs();
    let (rc, rf) = (
        c.summary.dissipation_residual.unwrap(),
        f.summary.dissipation_residual.unwrap(),
    );
    let ratio = rc / rf;
    Outcome::new(
        rc.is_finite() && ratio >= 3.0,
        format!("residual {rc:.3e} -> {rf:.3e}, factor {ratio:.3}"),
    )
}

pub fn monotone_energy() -> Outcome {
    let (c, _) = acceptance_runs();
    let rows = &c.report.rows;
    let e0 = rows[0].e;
    let worst = rows
        .windows(2)
        .map(|w| w[1].e - w[0].e)
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        worst <= 1e-10 * e0,
        format!(
            "max increment {worst:.3e} against 1e-10 E(0) = {:.3e}",
            1e-10 * e0
        ),
    )
}

pub fn decay_bound() -> Outcome {
    let (c, _) = acceptance_runs();
    let s = &c.summary;
    let (Some(cert), Some(bound), Some(fit)) = (&s.certificate, &s.bound, &s.fit) else {
        return Outcome::new(false, format!("uncertified: {:?}", s.uncertified_reason));
    };
    let ok = bound.passed && fit.lambda_obs >= 0.98 * cert.lambda_theory;
    Outcome::new(
        ok,
        format!(
            "max ratio {:.3e}, lambda_obs {:.4} (R2 {:.3}) vs lambda_theory {:.3e}, zeta {}",
            bound.max_ratio, fit.lambda_obs, fit.r2, cert.lambda_theory, cert.zeta
        ),
    )
}

pub fn kato_constant() -> f64 {
    c_l(&SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0))
}

pub fn kato_identity() -> Outcome {
    let (c, f) = acceptance_runs();
    let (kc, kf) = (c.summary.kato.unwrap(), f.summary.kato.unwrap());
    let ratio = kc.residual / kf.residual;
    let cl = kato_constant();
    let cl_ok = (cl - 0.5 * (5.0 * PI * PI - 3.0)).abs() < 1e-10 && (cl - 23.1740).abs() < 5e-5;
    Outcome::new(
        cl_ok && ratio >= 3.0,
        format!(
            "residual {:.3e} -> {:.3e} (scale {:.3e}), factor {ratio:.3} (second order needs >= 3); C_L {cl:.10}",
            kc.residual, kf.residual, kc.scale
        ),
    )
}

/// Largest relative violation of (1 − m)E <= V <= (1 + m)E, m = max{μ₁L, μ₂}.
pub fn lyapunov_sandwich(draws: usize, seed: u64) -> (f64, usize) {
    let (c, _) = acceptance_runs();
    let l = c.summary.config.system.l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..draws {
        let mu1 = rng.gen_range(0.0..1.0 / l);
        let mu2 = rng.gen_range(0.0..1.0);
        let m = (mu1 * l).max(mu2);
        for r in &c.report.rows {
            let v = r.e - mu1 * r.v1 + mu2 * r.v2;
            let excess = ((1.0 - m) * r.e - v).max(v - (1.0 + m) * r.e);
            worst = worst.max(excess / r.e.max(f64::MIN_POSITIVE));
            checked += 1;
        }
    }
    (worst, checked)
}

pub fn lyapunov_equivalence() -> Outcome {
    let (worst, checked) = lyapunov_sandwich(100, 11);
    Outcome::new(
        worst <= 1e-12,
        format!("{checked} samples over 100 draws, worst relative excess {worst:.3e}"),
    )
}

/// Transport residual for z = sin on aligned grids: τΔρ = 2Δt, Δt halved twice.
pub fn transport_orders() -> (Vec<f64>, Vec<f64>) {
    let dly = DelaySpec::constant(0.5);
    let t = 2.0;
    let mut res = Vec::new();
    for k in 0..3 {
        let steps = 400 * (1 << k);
        let dt = 1.0 / steps as f64;
        let m = steps / 4;
        let mut h = HistoryLine::new(1.0, 0.2, Interpolation::Linear);
        for j in -(steps as i64)..=(2 * steps as i64) {
            let s = j as f64 * dt;
            h.push_trace(s, s.sin()).unwrap();
        }
        res.push(h.transport_residual(&dly, t, m).unwrap());
    }
    let orders = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (res, orders)
}

pub fn transport_consistency() -> Outcome {
    let (res, orders) = transport_orders();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome::new(
        min >= 1.9,
        format!("residuals [{}], orders {orders:.3?}", sci(&res)),
    )
}

pub fn spatial_convergence() -> Outcome {
    let (p, _) = unit_case();
    let dly = DelaySpec::constant(0.5);
    match mms_study(&p, &dly, &[19, 39, 79], 1.0, 0.2, &[1.0]) {
        Ok(s) => {
            let errs: Vec<f64> = s.levels.iter().map(|l| l.error).collect();
            Outcome::new(
                s.min_order() >= 1.9,
                format!("errors [{}], orders {:.3?}", sci(&errs), s.orders),
            )
        }
        Err(e) => Outcome::new(false, format!("study failed: {e}")),
    }
}

/// Linear stepper on a short grid with a random state and random history.
pub fn superposition_error(seed: u64) -> f64 {
    let p = SystemParams::new(0.001, 0.01, 3.0, 2.0, 0.02);
    let grid = Grid::new(60, 3.0).unwrap();
    let ops = build_operators(&p, &grid).unwrap();
    let dt = 1e-3;
    let dly = DelaySpec::constant(0.05);
    let st = Stepper::new(
        ops,
        p,
        dly.clone(),
        StepConfig {
            dt,
            ..StepConfig::default()
        },
    )
    .unwrap();
    let n = st.ops.grid.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| {
        (0..k)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let (e1, w1, h1) = (draw(n), draw(n), draw(11));
    let (e2, w2, h2) = (draw(n), draw(n), draw(11));
    let c = 1.7;
    let comb = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| c * x + y)
            .collect::<Vec<f64>>()
    };
    let state = |eta: Vec<f64>, omega: Vec<f64>, hist: Vec<f64>| {
        let mut d = dly.clone();
        d.history = hist;
        SimState::initial(&st.ops, &d, eta, omega, dt, Interpolation::Linear)
    };
    let mut a = state(e1.clone(), w1.clone(), h1.clone());
    let mut b = state(e2.clone(), w2.clone(), h2.clone());
    let mut s = state(comb(&e1, &e2), comb(&w1, &w2), comb(&h1, &h2));
    let mut worst = 0.0f64;
    // past one full delay so the pushed traces feed back in
    for _ in 0..80 {
        st.step(&mut a).unwrap();
        st.step(&mut b).unwrap();
        st.step(&mut s).unwrap();
        let want = [comb(&a.eta, &b.eta), comb(&a.omega, &b.omega)].concat();
        let got = [s.eta.clone(), s.omega.clone()].concat();
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = got
            .iter()
            .zip(&want)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(err / scale);
    }
    worst
}

pub fn superposition() -> Outcome {
    let worst = (0..5).map(superposition_error).fold(0.0f64, f64::max);
    Outcome::new(
        worst <= 1e-10,
        format!("worst relative defect {worst:.3e} over 5 random pairs, 80 steps"),
    )
}

pub struct NonlinearSmoke {
    pub small_status: RunStatus,
    pub small_e: (f64, f64),
    pub diffs: Vec<f64>,
    pub order: f64,
    pub large_status: RunStatus,
}

pub fn nonlinear_smoke() -> NonlinearSmoke {
    let mut c = acceptance_config();
    c.run.horizon = 1.0;
    c.run.nonlinear = true;
    c.run.amplitude = 1e-3;
    let small = simulate(&c).unwrap();
    let make = |n: usize, dt: f64| {
        let mut k = c.clone();
        k.grid.n = n;
        k.run.dt = dt;
        let st = build_stepper(&k)?;
        let (e, w) = initial_data(&k, &st.ops.grid);
        let s0 = SimState::initial(&st.ops, &k.delay, e, w, dt, k.run.interpolation);
        Ok((st, s0))
    };
    let (diffs, order) = self_convergence(make, 99, 2e-3, 1.0).unwrap();
    c.run.amplitude = 10.0;
    let large = simulate(&c).unwrap();
    let rows = &small.report.rows;
    let e_max = rows.iter().map(|r| r.e).fold(0.0f64, f64::max);
    NonlinearSmoke {
        small_status: small.report.status,
        small_e: (rows[0].e, e_max),
        diffs,
        order,
        large_status: large.report.status,
    }
}

pub fn nonlinear_sanity() -> Outcome {
    let s = nonlinear_smoke();
    let bounded = s.small_status == RunStatus::Completed
        && s.small_e.1.is_finite()
        && s.small_e.1 <= 1.01 * s.small_e.0;
    let flagged = !matches!(s.large_status, RunStatus::Completed);
    Outcome::new(
        bounded && s.order >= 1.5 && flagged,
        format!(
            "small data {:?}, max E / E(0) {:.4}; self-convergence order {:.3}; amplitude 10: {:?}",
            s.small_status,
            s.small_e.1 / s.small_e.0,
            s.order,
            s.large_status
        ),
    )
}
