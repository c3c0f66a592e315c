//! Manufactured-solution forcing and order studies.
//!
//! Exact pair η* = e^{−t}x³(L − x)², ω* = e^{−t}x²(L − x)². The cubic factor in
//! η* keeps η_xx(0) = 0, which the scheme imposes. Interior sources make the
//! pair solve the forced system; an extra boundary datum makes ω*_xx(L) match
//! the feedback law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::Interpolation;
use crate::operators::build_operators;
use crate::params::{DelayForm, DelaySpec, Grid, SystemParams};
use crate::stepper::{run, Forcing, RunOptions, RunStatus, SimState, StepConfig, Stepper};

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn deriv(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    fn times(&self, q: &[f64]) -> Poly {
        let mut c = vec![0.0; self.0.len() + q.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }

    fn nth(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.deriv())
    }
}

#[derive(Debug, Clone)]
pub struct Manufactured {
    p: SystemParams,
    tau: f64,
    eta: Poly,
    omega: Poly,
}

impl Manufactured {
    pub fn new(p: &SystemParams, dly: &DelaySpec) -> Result<Self> {
        if dly.form != DelayForm::Constant {
            return Err(Error::Config(
                "manufactured solution needs a constant delay".into(),
            ));
        }
        let l = p.l;
        Ok(Manufactured {
            p: p.clone(),
            tau: dly.tau0,
            eta: Poly(vec![0.0, 0.0, 0.0, l * l, -2.0 * l, 1.0]),
            omega: Poly(vec![0.0, 0.0, l * l, -2.0 * l, 1.0]),
        })
    }

    /// Multiplies both profiles by a polynomial (ascending coefficients).
    pub fn with_factor(mut self, q: &[f64]) -> Self {
        self.eta = self.eta.times(q);
        self.omega = self.omega.times(q);
        self
    }

    pub fn eta(&self, t: f64, x: f64) -> f64 {
        (-t).exp() * self.eta.eval(x)
    }

    pub fn omega(&self, t: f64, x: f64) -> f64 {
        (-t).exp() * self.omega.eval(x)
    }

    /// η*_xx(s, L), the boundary trace.
    pub fn trace(&self, s: f64) -> f64 {
        (-s).exp() * self.eta.nth(2).eval(self.p.l)
    }

    /// Uniform samples of the trace on [−τ, 0].
    pub fn history(&self, samples: usize) -> Vec<f64> {
        (0..samples)
            .map(|j| self.trace(-self.tau + self.tau * j as f64 / (samples - 1) as f64))
            .collect()
    }

    // u_x + a u_xxx + a1 u_xxxxx
    fn dispersive(&self, u: &Poly, x: f64) -> f64 {
        u.nth(1).eval(x) + self.p.a * u.nth(3).eval(x) + self.p.a1 * u.nth(5).eval(x)
    }
}

impl Forcing for Manufactured {
    fn interior(&self, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let e = (-t).exp();
        let fe = x
            .iter()
            .map(|&x| e * (-self.eta.eval(x) + self.dispersive(&self.omega, x)))
            .collect();
        let fw = x
            .iter()
            .map(|&x| e * (-self.omega.eval(x) + self.dispersive(&self.eta, x)))
            .collect();
        (fe, fw)
    }

    fn boundary(&self, t: f64) -> f64 {
        let wxx = (-t).exp() * self.omega.nth(2).eval(self.p.l);
        wxx - self.p.alpha * self.trace(t) - self.p.beta * self.trace(t - self.tau)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<ConvergenceLevel>,
    /// log2-type observed orders between consecutive levels.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn observed_orders(levels: &[ConvergenceLevel]) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
        .collect()
}

/// Discrete L² error of the forced run at the horizon, one level per grid size.
/// The step is dt = c·h², keeping the time error below the spatial one.
pub fn mms_study(
    p: &SystemParams,
    dly: &DelaySpec,
    sizes: &[usize],
    dt_over_h2: f64,
    horizon: f64,
    factor: &[f64],
) -> Result<ConvergenceStudy> {
    let mut levels = Vec::new();
    for &n in sizes {
        let grid = Grid::new(n, p.l)?;
        let h = grid.h;
        let steps = (horizon / (dt_over_h2 * h * h)).ceil().max(1.0);
        let dt = horizon / steps;
        let ops = build_operators(p, &grid)?;
        let mms = Manufactured::new(p, dly)?.with_factor(factor);
        let mut d = dly.clone();
        d.history = mms.history(4001);
        let eta: Vec<f64> = grid.nodes.iter().map(|&x| mms.eta(0.0, x)).collect();
        let omega: Vec<f64> = grid.nodes.iter().map(|&x| mms.omega(0.0, x)).collect();
        let s0 = SimState::initial(&ops, &d, eta, omega, dt, Interpolation::MonotoneCubic);
        let cfg = StepConfig {
            dt,
            ..StepConfig::default()
        };
        let stepper = Stepper::new(ops, p.clone(), d, cfg)?.with_forcing(Box::new(mms.clone()));
        let opts = RunOptions {
            horizon,
            kato: false,
            ..RunOptions::default()
        };
        let rep = run(&stepper, s0, &opts)?;
        let s = &rep.final_state;
        let t = s.t;
        let err2: f64 = grid
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                (s.eta[i] - mms.eta(t, x)).powi(2) + (s.omega[i] - mms.omega(t, x)).powi(2)
            })
            .sum::<f64>();
        levels.push(ConvergenceLevel {
            n,
            h,
            dt,
            error: (h * err2).sqrt(),
        });
    }
    let orders = observed_orders(&levels);
    Ok(ConvergenceStudy { levels, orders })
}

/// Self-convergence of nested runs: grids n, 2n + 1, 4n + 3 with dt halved
/// each time. Order from the Richardson ratio of successive differences at the
/// horizon, sampled on the coarse nodes.
pub fn self_convergence(
    make: impl Fn(usize, f64) -> Result<(Stepper, SimState)>,
    n: usize,
    dt: f64,
    horizon: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut finals = Vec::new();
    for k in 0..3 {
        let nk = (n + 1) * (1 << k) - 1;
        let (st, s0) = make(nk, dt / (1 << k) as f64)?;
        let rep = run(
            &st,
            s0,
            &RunOptions {
                horizon,
                kato: false,
                ..RunOptions::default()
            },
        )?;
        if rep.status != RunStatus::Completed {
            return Err(Error::Numerical(format!(
                "self-convergence run at n = {nk} did not complete: {:?}",
                rep.status
            )));
        }
        let stride = 1 << k;
        let coarse = |v: &[f64]| {
            (0..n)
                .map(|i| v[(i + 1) * stride - 1])
                .collect::<Vec<f64>>()
        };
        finals.push([coarse(&rep.final_state.eta), coarse(&rep.final_state.omega)].concat());
    }
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let d01 = diff(&finals[0], &finals[1]);
    let d12 = diff(&finals[1], &finals[2]);
    Ok((vec![d01, d12], (d01 / d12).log2()))
}
