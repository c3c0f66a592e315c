//! Energy, the Lyapunov functional, the dissipation residual and the Kato identity.

use std::f64::consts::PI;

use serde::Serialize;

use crate::certificate::phi_matrix;
use crate::error::{Error, Result};
use crate::operators::Operators;
use crate::params::{tau_at, DelaySpec, SystemParams};
use crate::stepper::SimState;

/// Quadrature for the delay channel ∫₀¹ z² dρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayQuadrature {
    /// Exact integral of the piecewise-constant history.
    Exact,
    /// Trapezoid rule on m + 1 points of the interpolated profile.
    Trapezoid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub e: f64,
    pub v1: f64,
    pub v2: f64,
    pub v: f64,
    pub trace_now: f64,
    pub trace_delayed: f64,
    /// ½ qᵀ Φ(τ̇(t)) q with q = (trace_now, trace_delayed).
    pub dissipation_rhs: f64,
}

fn delay_square(s: &SimState, dly: &DelaySpec, quad: DelayQuadrature) -> Result<f64> {
    let tau = tau_at(dly, s.t).0;
    match quad {
        DelayQuadrature::Exact => s.history.cell_square_integral(s.t - tau, s.t),
        DelayQuadrature::Trapezoid(m) => {
            let z = s.history.z_profile(dly, s.t, m.max(1))?;
            let w = 1.0 / m.max(1) as f64;
            let k = z.values.len() - 1;
            let inner: f64 = z.values.iter().map(|v| v * v).sum::<f64>()
                - 0.5 * (z.values[0].powi(2) + z.values[k].powi(2));
            Ok(tau * w * inner)
        }
    }
}

/// ½∫(η² + ω²) + (|β|/2)∫_{t−τ}^{t} η_xx(s, L)² ds.
pub fn energy(
    s: &SimState,
    p: &SystemParams,
    dly: &DelaySpec,
    ops: &Operators,
    quad: DelayQuadrature,
) -> Result<f64> {
    let h = ops.grid.h;
    let field = 0.5 * h * s.eta.iter().chain(&s.omega).map(|v| v * v).sum::<f64>();
    if p.beta == 0.0 {
        return Ok(field);
    }
    Ok(field + 0.5 * p.beta.abs() * delay_square(s, dly, quad)?)
}

/// (V₁, V₂, V) with V₁ = ∫xηω and V₂ = (|β|/2)∫_{t−τ}^{t}(1 − (t − s)/τ)η_xx(s, L)² ds.
pub fn lyapunov(
    s: &SimState,
    p: &SystemParams,
    dly: &DelaySpec,
    ops: &Operators,
    mu1: f64,
    mu2: f64,
    e: f64,
) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0 / p.l).contains(&mu1) || !(0.0..1.0).contains(&mu2) {
        return Err(Error::Config(format!(
            "need 0 <= mu1 < 1/L and 0 <= mu2 < 1, got ({mu1}, {mu2})"
        )));
    }
    let h = ops.grid.h;
    let v1: f64 = ops
        .grid
        .nodes
        .iter()
        .zip(s.eta.iter().zip(&s.omega))
        .map(|(x, (a, b))| h * x * a * b)
        .sum();
    let v2 = if p.beta == 0.0 {
        0.0
    } else {
        let tau = tau_at(dly, s.t).0;
        0.5 * p.beta.abs() * s.history.cell_tail_integral(s.t, tau)?
    };
    Ok((v1, v2, e - mu1 * v1 + mu2 * v2))
}

/// Energy row without the trace columns' time-centering.
pub fn sample(
    s: &SimState,
    p: &SystemParams,
    dly: &DelaySpec,
    ops: &Operators,
    mu: (f64, f64),
    quad: DelayQuadrature,
) -> Result<EnergySample> {
    let e = energy(s, p, dly, ops, quad)?;
    let (v1, v2, v) = lyapunov(s, p, dly, ops, mu.0, mu.1, e)?;
    let trace_delayed = if p.beta == 0.0 {
        s.history.delayed_trace(dly, s.t).unwrap_or(0.0)
    } else {
        s.history.delayed_trace(dly, s.t)?
    };
    Ok(EnergySample {
        t: s.t,
        e,
        v1,
        v2,
        v,
        trace_now: ops.trace(&s.eta),
        trace_delayed,
        dissipation_rhs: 0.0,
    })
}

pub fn dissipation_rhs(p: &SystemParams, dly: &DelaySpec, t: f64, now: f64, delayed: f64) -> f64 {
    0.5 * phi_matrix(p, tau_at(dly, t).1).quad(now, delayed)
}

/// max over interior samples of |centered dE/dt − ½qᵀΦq|.
pub fn dissipation_residual(rows: &[EnergySample]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "dissipation residual needs 3 samples, got {}",
            rows.len()
        )));
    }
    let mut worst = 0.0f64;
    for w in rows.windows(3) {
        let de = (w[2].e - w[0].e) / (w[2].t - w[0].t);
        worst = worst.max((de - w[1].dissipation_rhs).abs());
    }
    Ok(worst)
}

/// Time integrals entering the Kato identity over [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KatoTerms {
    pub horizon: f64,
    /// ∫∫(η² + ω²)
    pub l2: f64,
    /// ∫∫(η_x² + ω_x²)
    pub h1: f64,
    /// ∫∫(η_xx² + ω_xx²)
    pub h2: f64,
    /// ∫(η_xx(t, L)² + ω_xx(t, L)²)
    pub boundary: f64,
    /// ∫xη₀ω₀
    pub x_initial: f64,
    /// ∫xη(T)ω(T)
    pub x_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KatoCheck {
    pub residual: f64,
    /// Largest single term, for relative comparisons.
    pub scale: f64,
    pub c_l: f64,
    pub c_l_positive: bool,
}

/// ½(5a₁π² − 3aL²).
pub fn c_l(p: &SystemParams) -> f64 {
    0.5 * (5.0 * p.a1 * PI * PI - 3.0 * p.a * p.l * p.l)
}

impl KatoTerms {
    pub fn check(&self, p: &SystemParams) -> KatoCheck {
        let terms = [
            0.5 * self.l2,
            -1.5 * p.a * self.h1,
            2.5 * p.a1 * self.h2,
            -0.5 * p.a1 * p.l * self.boundary,
            -(self.x_final - self.x_initial),
        ];
        let residual = terms.iter().sum::<f64>().abs();
        let scale = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c = c_l(p);
        KatoCheck {
            residual,
            scale,
            c_l: c,
            c_l_positive: c > 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, e: f64, rhs: f64) -> EnergySample {
        EnergySample {
            t,
            e,
            dissipation_rhs: rhs,
            ..EnergySample::default()
        }
    }

    #[test]
    fn residual_of_exact_rate_is_zero() {
        let rows: Vec<_> = (0..10)
            .map(|k| row(k as f64 * 0.1, 1.0 - 0.3 * k as f64 * 0.1, -0.3))
            .collect();
        assert!(dissipation_residual(&rows).unwrap() < 1e-12);
        assert!(dissipation_residual(&rows[..2]).is_err());
    }

    #[test]
    fn c_l_sign() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0);
        assert!(c_l(&p) > 0.0);
        let q = SystemParams::new(1.0, 0.01, 3.0, 2.0, 1.0);
        assert!(c_l(&q) < 0.0);
    }
}
