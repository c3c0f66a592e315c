//! θ-scheme time stepping for the coupled system on interleaved unknowns
//! (η₁, ω₁, η₂, ω₂, …).
//!
//! The feedback α·η_xx(L) is implicit and sits inside the banded matrix. The
//! delayed datum enters as a boundary source: the mean of the cell history
//! over [t − τ(t), t + dt − τ(t + dt)]. After each step the trace of the
//! θ-weighted η is stored as the history cell for [t, t + dt].

use crate::banded::{BandLu, BandedMatrix};
use crate::energy::{self, DelayQuadrature, EnergySample, KatoTerms};
use crate::error::{Error, Result};
use crate::history::HistoryLine;
use crate::interp::Interpolation;
use crate::operators::{omega_xx_left, Operators};
use crate::params::{tau_at, DelaySpec, SystemParams};

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub theta: f64,
    pub nonlinear: bool,
    pub picard_iters: usize,
    pub picard_tol: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 1e-3,
            theta: 0.5,
            nonlinear: false,
            picard_iters: 50,
            picard_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
    pub history: HistoryLine,
}

impl SimState {
    /// Initial state at t = 0 with the history seeded from the delay spec's z₀.
    pub fn initial(
        ops: &Operators,
        dly: &DelaySpec,
        eta: Vec<f64>,
        omega: Vec<f64>,
        dt: f64,
        kind: Interpolation,
    ) -> Self {
        let mut history = HistoryLine::seeded(dly, dt, kind);
        history.set_head(0.0, ops.trace(&eta));
        SimState {
            t: 0.0,
            eta,
            omega,
            history,
        }
    }
}

/// Manufactured forcing: interior sources for both equations and an extra ω_xx(L) datum.
pub trait Forcing: Send + Sync {
    fn interior(&self, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>);
    fn boundary(&self, t: f64) -> f64;
}

/// Quantities of one step on the cell [t, t + dt].
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// η_xx(L) of the θ-weighted state.
    pub trace_cell: f64,
    /// Mean delayed trace applied during the step.
    pub delayed_cell: f64,
    /// ω_xx(L) imposed during the step.
    pub feedback_cell: f64,
    pub picard_iters: usize,
}

pub struct Stepper {
    pub ops: Operators,
    pub params: SystemParams,
    pub delay: DelaySpec,
    pub cfg: StepConfig,
    lu: BandLu,
    implicit: BandedMatrix,
    explicit: BandedMatrix,
    forcing: Option<Box<dyn Forcing>>,
}

fn system_matrix(ops: &Operators, p: &SystemParams) -> BandedMatrix {
    let n = ops.grid.n;
    let h2 = ops.grid.h * ops.grid.h;
    let trace_w = [(n - 2, -1.0 / (2.0 * h2)), (n - 1, 8.0 / (2.0 * h2))];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2 * n];
    for i in 0..n {
        let row = &mut rows[2 * i];
        for j in ops.p_omega.row_span(i) {
            row.push((2 * j + 1, -ops.p_omega.get(i, j)));
        }
        let s = ops.closure.d5_source[i];
        if s != 0.0 {
            for &(j, w) in &trace_w {
                row.push((2 * j, -p.a1 * s * p.alpha * w));
            }
        }
        let row = &mut rows[2 * i + 1];
        for j in ops.p_eta.row_span(i) {
            row.push((2 * j, -ops.p_eta.get(i, j)));
        }
    }
    BandedMatrix::from_rows(&rows)
}

/// 2n×2n interleaved matrix from the four n×n blocks [[ee, ew], [we, ww]].
fn interleave_blocks(
    ee: &BandedMatrix,
    ew: &BandedMatrix,
    we: &BandedMatrix,
    ww: &BandedMatrix,
) -> BandedMatrix {
    let n = ee.n();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2 * n];
    for i in 0..n {
        for (blk, r, c) in [(ee, 0, 0), (ew, 0, 1), (we, 1, 0), (ww, 1, 1)] {
            for j in blk.row_span(i) {
                rows[2 * i + r].push((2 * j + c, blk.get(i, j)));
            }
        }
    }
    BandedMatrix::from_rows(&rows)
}

fn interleave(eta: &[f64], omega: &[f64]) -> Vec<f64> {
    eta.iter().zip(omega).flat_map(|(e, w)| [*e, *w]).collect()
}

fn split(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        u.iter().step_by(2).copied().collect(),
        u.iter().skip(1).step_by(2).copied().collect(),
    )
}

fn all_finite(u: &[f64]) -> bool {
    u.iter().all(|v| v.is_finite())
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

impl Stepper {
    pub fn new(
        ops: Operators,
        params: SystemParams,
        delay: DelaySpec,
        cfg: StepConfig,
    ) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(Error::Config(format!("dt = {} must be positive", cfg.dt)));
        }
        if !(0.5..=1.0).contains(&cfg.theta) {
            return Err(Error::Config(format!(
                "theta = {} must lie in [1/2, 1]",
                cfg.theta
            )));
        }
        if !(cfg.dt < delay.tau0) {
            return Err(Error::Config(format!(
                "dt = {} must be below tau0 = {}",
                cfg.dt, delay.tau0
            )));
        }
        let a = system_matrix(&ops, &params);
        let n2 = a.n();
        let implicit =
            BandedMatrix::identity(n2, a.lower(), a.upper()).plus(-cfg.theta * cfg.dt, &a);
        let explicit =
            BandedMatrix::identity(n2, a.lower(), a.upper()).plus((1.0 - cfg.theta) * cfg.dt, &a);
        let lu = BandLu::factor(&implicit)?;
        Ok(Stepper {
            ops,
            params,
            delay,
            cfg,
            lu,
            implicit,
            explicit,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, f: Box<dyn Forcing>) -> Self {
        self.forcing = Some(f);
        self
    }

    /// Nonlinear right-hand sides of both equations.
    pub fn nonlinear_terms(&self, eta: &[f64], omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let o = &self.ops;
        let p = &self.params;
        let d1 = |u: &[f64]| o.d1_omega.matrix.matvec(u);
        let d2 = |u: &[f64]| o.d2.matvec(u);
        let mul = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).collect::<Vec<f64>>();
        let w_x = d1(omega);
        let w_xx = d2(omega);
        let w_xxx = o.d3_omega.apply(omega);
        let e_xx = d2(eta);
        let ew = d1(&mul(eta, omega));
        let ewxx = d1(&mul(eta, &w_xx));
        let wwx = mul(omega, &w_x);
        let wwx_xx = d2(&wwx);
        let eexx_x = d1(&mul(eta, &e_xx));
        let n = eta.len();
        let mut ne = vec![0.0; n];
        let mut nw = vec![0.0; n];
        for i in 0..n {
            ne[i] = -ew[i] - p.alpha_p * ewxx[i];
            nw[i] = -wwx[i] - p.c() * wwx_xx[i] - eexx_x[i]
                + p.beta_p * w_x[i] * w_xx[i]
                + p.rho_nl * omega[i] * w_xxx[i];
        }
        (ne, nw)
    }

    /// Banded L(U) with L(U)U equal to the nonlinear terms at U: each product
    /// keeps its differentiated factor as the unknown.
    pub fn frozen_operator(&self, eta: &[f64], omega: &[f64]) -> BandedMatrix {
        let o = &self.ops;
        let p = &self.params;
        let d1 = &o.d1_omega.matrix;
        let d2 = &o.d2;
        let w_x = d1.matvec(omega);
        let minus = |m: BandedMatrix| m.scaled(-1.0);
        let ee = minus(d1.matmul(&BandedMatrix::diagonal(omega)));
        let ew = minus(d1.matmul(&d2.scale_rows(eta))).scaled(p.alpha_p);
        let we = minus(d1.matmul(&d2.scale_rows(eta)));
        let d1w = d1.scale_rows(omega);
        let ww = minus(d1w.clone())
            .plus(-p.c(), &d2.matmul(&d1w))
            .plus(p.beta_p, &d2.scale_rows(&w_x))
            .plus(p.rho_nl, &o.d3_omega.matrix.scale_rows(omega));
        interleave_blocks(&ee, &ew, &we, &ww)
    }

    pub fn step(&self, s: &mut SimState) -> Result<StepInfo> {
        let dt = self.cfg.dt;
        let th = self.cfg.theta;
        let t = s.t;
        let (tau0, _) = tau_at(&self.delay, t);
        let (tau1, _) = tau_at(&self.delay, t + dt);
        let delayed = if self.params.beta != 0.0 {
            s.history.cell_average(t - tau0, t + dt - tau1)?
        } else {
            0.0
        };
        let tm = t + th * dt;
        let extra = self.forcing.as_ref().map_or(0.0, |f| f.boundary(tm));
        let datum = self.params.beta * delayed + extra;

        let u0 = interleave(&s.eta, &s.omega);
        let mut rhs = self.explicit.matvec(&u0);
        let src = self.ops.closure.source_for(datum);
        for (i, v) in src.iter().enumerate() {
            rhs[2 * i] += dt * v;
        }
        if let Some(f) = &self.forcing {
            let (fe, fw) = f.interior(tm, &self.ops.grid.nodes);
            for i in 0..fe.len() {
                rhs[2 * i] += dt * fe[i];
                rhs[2 * i + 1] += dt * fw[i];
            }
        }

        let mut iters = 0;
        let u1 = if self.cfg.nonlinear {
            let mut cur = u0.clone();
            let mut prev = f64::INFINITY;
            loop {
                let half: Vec<f64> = cur
                    .iter()
                    .zip(&u0)
                    .map(|(a, b)| th * a + (1.0 - th) * b)
                    .collect();
                let (he, hw) = split(&half);
                // coefficients frozen at the current iterate, derivatives implicit
                let lk = self.frozen_operator(&he, &hw);
                let mut r = rhs.clone();
                let lag = lk.matvec(&u0);
                for (ri, li) in r.iter_mut().zip(&lag) {
                    *ri += (1.0 - th) * dt * li;
                }
                BandLu::factor(&self.implicit.plus(-th * dt, &lk))?.solve_in_place(&mut r);
                iters += 1;
                let diff = r
                    .iter()
                    .zip(&cur)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                let size = sup(&r);
                if !all_finite(&r) {
                    return Err(Error::NonlinearDivergence {
                        t,
                        iters,
                        update: f64::INFINITY,
                    });
                }
                cur = r;
                let floor = size.max(1e-300);
                // stalled updates this small are round-off in the solve
                if diff <= self.cfg.picard_tol * floor
                    || (diff > 0.5 * prev && diff <= 1e-8 * floor)
                {
                    break cur;
                }
                prev = diff;
                if iters >= self.cfg.picard_iters {
                    return Err(Error::NonlinearDivergence {
                        t,
                        iters,
                        update: diff,
                    });
                }
            }
        } else {
            let mut r = rhs;
            self.lu.solve_in_place(&mut r);
            if !all_finite(&r) {
                return Err(Error::Numerical(format!(
                    "non-finite state at t = {}",
                    t + dt
                )));
            }
            r
        };

        let (eta1, omega1) = split(&u1);
        let eta_th: Vec<f64> = eta1
            .iter()
            .zip(&s.eta)
            .map(|(a, b)| th * a + (1.0 - th) * b)
            .collect();
        let trace_cell = self.ops.trace(&eta_th);
        s.history.push_trace(t + 0.5 * dt, trace_cell)?;
        s.history.set_head(t + dt, self.ops.trace(&eta1));
        s.eta = eta1;
        s.omega = omega1;
        s.t = t + dt;
        Ok(StepInfo {
            trace_cell,
            delayed_cell: delayed,
            feedback_cell: self.params.alpha * trace_cell + datum,
            picard_iters: iters,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Picard iteration failed; rows stop at the last completed step.
    NonlinearDivergence {
        t: f64,
        iters: usize,
    },
    /// Energy grew past the divergence guard.
    Unstable {
        t: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub horizon: f64,
    /// (μ₁, μ₂) for the Lyapunov columns; zeros give V = E.
    pub mu: (f64, f64),
    pub quadrature: DelayQuadrature,
    pub kato: bool,
    /// A run is flagged unstable once E exceeds this multiple of E(0).
    pub blowup_factor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: 1.0,
            mu: (0.0, 0.0),
            quadrature: DelayQuadrature::Exact,
            kato: true,
            blowup_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dt: f64,
    pub rows: Vec<EnergySample>,
    pub status: RunStatus,
    pub kato: Option<KatoTerms>,
    pub final_state: SimState,
    pub max_picard_iters: usize,
}

struct KatoAcc {
    terms: KatoTerms,
}

impl KatoAcc {
    fn new(ops: &Operators, s: &SimState) -> Self {
        let x_initial = weighted_cross(ops, &s.eta, &s.omega);
        KatoAcc {
            terms: KatoTerms {
                x_initial,
                ..KatoTerms::default()
            },
        }
    }

    fn add(&mut self, ops: &Operators, dt: f64, eta: &[f64], omega: &[f64], info: &StepInfo) {
        let h = ops.grid.h;
        let sq = |u: &[f64]| u.iter().map(|v| v * v).sum::<f64>();
        let d1 = &ops.d1_omega.matrix;
        self.terms.l2 += dt * h * (sq(eta) + sq(omega));
        self.terms.h1 += dt * h * (sq(&d1.matvec(eta)) + sq(&d1.matvec(omega)));
        let walls = info.trace_cell.powi(2)
            + omega_xx_left(omega, &ops.grid).powi(2)
            + info.feedback_cell.powi(2);
        // D₁D₁ rather than the 3-point stencil: it ignores the O(h²) checkerboard
        // content that the centered operators leave in the discrete fields
        let dd = |u: &[f64]| d1.matvec(&d1.matvec(u));
        self.terms.h2 += dt * (h * (sq(&dd(eta)) + sq(&dd(omega))) + 0.5 * h * walls);
        self.terms.boundary += dt * (info.trace_cell.powi(2) + info.feedback_cell.powi(2));
    }
}

fn weighted_cross(ops: &Operators, eta: &[f64], omega: &[f64]) -> f64 {
    let h = ops.grid.h;
    ops.grid
        .nodes
        .iter()
        .zip(eta.iter().zip(omega))
        .map(|(x, (e, w))| h * x * e * w)
        .sum()
}

/// Steps to the horizon, recording one energy sample per time level.
pub fn run(stepper: &Stepper, s0: SimState, opts: &RunOptions) -> Result<RunReport> {
    let dt = stepper.cfg.dt;
    let steps = (opts.horizon / dt + 1e-9).floor() as usize;
    let (p, dly, ops) = (&stepper.params, &stepper.delay, &stepper.ops);
    let mut s = s0;
    let mut kato = (opts.kato && !stepper.cfg.nonlinear).then(|| KatoAcc::new(ops, &s));
    let sample = |s: &SimState| energy::sample(s, p, dly, ops, opts.mu, opts.quadrature);

    let mut rows = Vec::with_capacity(steps + 1);
    let mut first = sample(&s)?;
    first.trace_now = ops.trace(&s.eta);
    rows.push(first);
    let e0 = rows[0].e;
    let mut status = RunStatus::Completed;
    let mut max_iters = 0;
    let th = stepper.cfg.theta;
    for k in 0..steps {
        let prev = if kato.is_some() {
            Some((s.eta.clone(), s.omega.clone()))
        } else {
            None
        };
        let info = match stepper.step(&mut s) {
            Ok(info) => info,
            Err(Error::NonlinearDivergence { t, iters, .. }) => {
                status = RunStatus::NonlinearDivergence { t, iters };
                break;
            }
            Err(e) => return Err(e),
        };
        s.t = (k + 1) as f64 * dt;
        max_iters = max_iters.max(info.picard_iters);
        if let (Some(acc), Some((e_old, w_old))) = (kato.as_mut(), prev) {
            let mix = |a: &[f64], b: &[f64]| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| th * x + (1.0 - th) * y)
                    .collect::<Vec<f64>>()
            };
            acc.add(ops, dt, &mix(&s.eta, &e_old), &mix(&s.omega, &w_old), &info);
        }
        if k > 0 {
            // centered in time: mean of the two adjacent cells
            let t_k = k as f64 * dt;
            rows[k].trace_now = s.history.value_at(t_k)?;
        }
        let row = sample(&s)?;
        let blown = !row.e.is_finite() || row.e > opts.blowup_factor * e0.max(f64::MIN_POSITIVE);
        rows.push(row);
        if blown {
            status = RunStatus::Unstable { t: s.t };
            break;
        }
    }
    let last = rows.len() - 1;
    if last > 0 {
        rows[last].trace_now = ops.trace(&s.eta);
    }
    for r in rows.iter_mut() {
        r.dissipation_rhs = energy::dissipation_rhs(p, dly, r.t, r.trace_now, r.trace_delayed);
    }
    let kato = kato.map(|mut acc| {
        acc.terms.x_final = weighted_cross(ops, &s.eta, &s.omega);
        acc.terms.horizon = s.t;
        acc.terms
    });
    Ok(RunReport {
        dt,
        rows,
        status,
        kato,
        final_state: s,
        max_picard_iters: max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_operators;
    use crate::params::Grid;

    fn setup(beta: f64) -> Stepper {
        let p = SystemParams::new(0.001, 0.01, 3.0, 2.0, beta);
        let ops = build_operators(&p, &Grid::new(40, 3.0).unwrap()).unwrap();
        Stepper::new(ops, p, DelaySpec::constant(0.5), StepConfig::default()).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let st = setup(0.02);
        let n = st.ops.grid.n;
        let mut s = SimState::initial(
            &st.ops,
            &st.delay,
            vec![0.0; n],
            vec![0.0; n],
            1e-3,
            Interpolation::MonotoneCubic,
        );
        for _ in 0..50 {
            st.step(&mut s).unwrap();
        }
        assert!(s.eta.iter().chain(&s.omega).all(|&v| v == 0.0));
    }

    #[test]
    fn dt_must_be_below_delay() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0);
        let ops = build_operators(&p, &Grid::new(20, 1.0).unwrap()).unwrap();
        let cfg = StepConfig {
            dt: 0.6,
            ..StepConfig::default()
        };
        assert!(Stepper::new(ops, p, DelaySpec::constant(0.5), cfg).is_err());
    }

    #[test]
    fn zero_horizon_has_one_row() {
        let st = setup(0.02);
        let n = st.ops.grid.n;
        let eta: Vec<f64> = st
            .ops
            .grid
            .nodes
            .iter()
            .map(|x| (x * (3.0 - x)).powi(6) * 1e-3)
            .collect();
        let s = SimState::initial(
            &st.ops,
            &st.delay,
            eta.clone(),
            vec![0.0; n],
            1e-3,
            Interpolation::MonotoneCubic,
        );
        let r = run(
            &st,
            s,
            &RunOptions {
                horizon: 0.0,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        let e: f64 = 0.5 * st.ops.grid.h * eta.iter().map(|v| v * v).sum::<f64>();
        assert!((r.rows[0].e - e).abs() < 1e-15);
    }

    #[test]
    fn frozen_operator_reproduces_nonlinear_terms() {
        let st = setup(0.02);
        let x = &st.ops.grid.nodes;
        let eta: Vec<f64> = x
            .iter()
            .map(|&x: &f64| (x * 1.3).sin() * x * (3.0 - x))
            .collect();
        let omega: Vec<f64> = x
            .iter()
            .map(|&x: &f64| (x * 0.7).cos() * x * (3.0 - x))
            .collect();
        let (ne, nw) = st.nonlinear_terms(&eta, &omega);
        let got = st
            .frozen_operator(&eta, &omega)
            .matvec(&interleave(&eta, &omega));
        let want = interleave(&ne, &nw);
        let scale = sup(&want);
        assert!(got
            .iter()
            .zip(&want)
            .all(|(a, b)| (a - b).abs() <= 1e-10 * scale));
    }
}
