//! Boundary-trace history and the transport variable z(t, ρ) = η_xx(t − τ(t)ρ, L).
//!
//! Samples are point values for interpolation. The same samples, read as a
//! piecewise-constant function whose cells end halfway between neighbouring
//! sample times, give exact averages and squared integrals used by the
//! stepper's delayed source and by the energy's delay channel.

use crate::error::{Error, Result};
use crate::interp::{Interpolation, Samples};
use crate::params::{tau_at, DelaySpec};

#[derive(Debug, Clone)]
pub struct HistoryLine {
    times: Vec<f64>,
    values: Vec<f64>,
    head: Option<(f64, f64)>,
    pub kind: Interpolation,
    /// Samples older than (last time − keep) are evicted.
    pub keep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub rho_nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl HistoryLine {
    pub fn new(max_delay: f64, slack: f64, kind: Interpolation) -> Self {
        HistoryLine {
            times: Vec::new(),
            values: Vec::new(),
            head: None,
            kind,
            keep: max_delay + slack,
        }
    }

    /// History seeded from z₀ on cells of width `dt` ending at t = 0.
    pub fn seeded(dly: &DelaySpec, dt: f64, kind: Interpolation) -> Self {
        let cells = (dly.tau0 / dt).ceil() as usize + 4;
        let mut h = HistoryLine::new(dly.m.max(dly.tau0), 4.0 * dt, kind);
        for j in 0..cells {
            let s = -((cells - j) as f64 - 0.5) * dt;
            h.times.push(s);
            h.values.push(dly.history_at(s, kind));
        }
        h
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_time(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn head(&self) -> Option<(f64, f64)> {
        self.head
    }

    /// Provisional value at the current time, used only for queries past the last sample.
    pub fn set_head(&mut self, t: f64, v: f64) {
        self.head = Some((t, v));
    }

    pub fn push_trace(&mut self, t: f64, v: f64) -> Result<()> {
        if let Some(last) = self.last_time() {
            if !(t > last) {
                return Err(Error::NonMonotoneTime { t, last });
            }
        }
        self.times.push(t);
        self.values.push(v);
        let cutoff = t - self.keep;
        let drop = self.times.partition_point(|&s| s < cutoff);
        if drop > 0 {
            self.times.drain(..drop);
            self.values.drain(..drop);
        }
        Ok(())
    }

    /// Interpolated trace at time `s`.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        let first = self.first_time().ok_or(Error::HistoryUnderrun {
            query: s,
            start: f64::NAN,
        })?;
        if s < first {
            return Err(Error::HistoryUnderrun {
                query: s,
                start: first,
            });
        }
        let last = self.times[self.times.len() - 1];
        if s <= last {
            return Ok(Samples::new(&self.times, &self.values).eval(s, self.kind));
        }
        match self.head {
            Some((th, vh)) if s <= th && th > last => {
                let k = self.times.len().saturating_sub(3);
                let mut t: Vec<f64> = self.times[k..].to_vec();
                let mut v: Vec<f64> = self.values[k..].to_vec();
                t.push(th);
                v.push(vh);
                Ok(Samples::new(&t, &v).eval(s, self.kind))
            }
            _ => Err(Error::Domain(format!(
                "history query at {s} is past the last stored time {last}"
            ))),
        }
    }

    pub fn delayed_trace(&self, dly: &DelaySpec, t: f64) -> Result<f64> {
        self.value_at(t - tau_at(dly, t).0)
    }

    pub fn z_profile(&self, dly: &DelaySpec, t: f64, m: usize) -> Result<ZProfile> {
        let tau = tau_at(dly, t).0;
        let rho_nodes: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
        let values = rho_nodes
            .iter()
            .map(|r| self.value_at(t - tau * r))
            .collect::<Result<_>>()?;
        Ok(ZProfile { rho_nodes, values })
    }

    /// max_j |τ z_t + (1 − τ̇ρ_j) z_ρ| at time t − δ, δ the latest sample spacing.
    pub fn transport_residual(&self, dly: &DelaySpec, t: f64, m: usize) -> Result<f64> {
        if self.times.len() < 2 || m < 2 {
            return Err(Error::InsufficientData(
                "transport residual needs two samples and m >= 2".into(),
            ));
        }
        let k = self.times.len();
        let dt = self.times[k - 1] - self.times[k - 2];
        let tc = t - dt;
        let later = self.z_profile(dly, t, m)?;
        let earlier = self.z_profile(dly, t - 2.0 * dt, m)?;
        let mid = self.z_profile(dly, tc, m)?;
        let (tau, tau_dot) = tau_at(dly, tc);
        let drho = 1.0 / m as f64;
        let mut worst = 0.0f64;
        for j in 1..m {
            let zt = (later.values[j] - earlier.values[j]) / (2.0 * dt);
            let zr = (mid.values[j + 1] - mid.values[j - 1]) / (2.0 * drho);
            let r = tau * zt + (1.0 - tau_dot * mid.rho_nodes[j]) * zr;
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let t = &self.times;
        let k = t.len();
        let lo = if i > 0 {
            0.5 * (t[i - 1] + t[i])
        } else if k > 1 {
            t[0] - 0.5 * (t[1] - t[0])
        } else {
            t[0]
        };
        let hi = if i + 1 < k {
            0.5 * (t[i] + t[i + 1])
        } else if k > 1 {
            t[i] + 0.5 * (t[i] - t[i - 1])
        } else {
            t[0]
        };
        (lo, hi)
    }

    /// Span covered by the piecewise-constant cells.
    pub fn cell_span(&self) -> Option<(f64, f64)> {
        if self.times.len() < 2 {
            return None;
        }
        Some((
            self.cell_bounds(0).0,
            self.cell_bounds(self.times.len() - 1).1,
        ))
    }

    /// Σ over cell pieces of w(piece midpoint)·value^p·length on [s0, s1].
    fn cell_integral(&self, s0: f64, s1: f64, p: i32, w: impl Fn(f64) -> f64) -> Result<f64> {
        let (lo, hi) = self.cell_span().ok_or(Error::InsufficientData(
            "history has fewer than two samples".into(),
        ))?;
        let tol = 1e-9 * (hi - lo).abs().max(1.0);
        if s0 < lo - tol {
            return Err(Error::HistoryUnderrun {
                query: s0,
                start: lo,
            });
        }
        if s1 > hi + tol {
            return Err(Error::Domain(format!(
                "cell integral up to {s1} past covered span end {hi}"
            )));
        }
        if s1 <= s0 {
            return Ok(0.0);
        }
        let mut i = self.times.partition_point(|&t| t < s0).saturating_sub(1);
        let mut total = 0.0;
        while i < self.times.len() {
            let (a, b) = self.cell_bounds(i);
            if a >= s1 {
                break;
            }
            let (x0, x1) = (a.max(s0), b.min(s1));
            if x1 > x0 {
                total += w(0.5 * (x0 + x1)) * self.values[i].powi(p) * (x1 - x0);
            }
            i += 1;
        }
        Ok(total)
    }

    /// Exact mean of the piecewise-constant history over [s0, s1].
    pub fn cell_average(&self, s0: f64, s1: f64) -> Result<f64> {
        if s1 <= s0 {
            return Err(Error::Domain(format!(
                "empty averaging window [{s0}, {s1}]"
            )));
        }
        Ok(self.cell_integral(s0, s1, 1, |_| 1.0)? / (s1 - s0))
    }

    /// ∫_{s0}^{s1} Y(s)² ds.
    pub fn cell_square_integral(&self, s0: f64, s1: f64) -> Result<f64> {
        self.cell_integral(s0, s1, 2, |_| 1.0)
    }

    /// ∫_{t−τ}^{t} (1 − (t − s)/τ) Y(s)² ds.
    pub fn cell_tail_integral(&self, t: f64, tau: f64) -> Result<f64> {
        self.cell_integral(t - tau, t, 2, |s| 1.0 - (t - s) / tau)
    }
}
