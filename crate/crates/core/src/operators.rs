//! Discrete derivative operators with the boundary conditions folded in.
//!
//! The ω-side operators are built at half nodes and differenced back to the
//! nodes, which reproduces the centered D1, D3, D5 stencils in the interior.
//! Near the walls the missing values come from ghost extrapolation that is
//! exact for polynomials of degree 5 with u = u_x = 0; at x = L the fifth-order
//! ghosts also carry the datum g = ω_xx(L). The η-side operators are the
//! negated transposes of the ω-side ones, so that
//!
//!   h·(ηᵀ P_ω ω + ωᵀ P_η η) = a₁ · T(η) · g,
//!
//! with T the three-point one-sided trace (8η_n − η_{n−1})/(2h²).

use nalgebra::{Matrix4, Vector4};

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::params::{Grid, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Eta,
    Omega,
}

#[derive(Debug, Clone)]
pub struct BandedOperator {
    pub matrix: BandedMatrix,
    pub unknown: Unknown,
    pub order: u8,
    pub bc_tag: &'static str,
}

impl BandedOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.matvec(u)
    }
}

/// Ghost-value relations and the feedback row at x = L.
#[derive(Debug, Clone)]
pub struct BoundaryClosure {
    /// u(−m h) = Σ_j left[m-1][j] u_{j+1}
    pub left: [[f64; 4]; 2],
    /// u(L + m h) = Σ_j right[m-1][j] u_{n-j} + right_g[m-1]·g  (fifth-order part)
    pub right: [[f64; 4]; 2],
    pub right_g: [f64; 2],
    /// u(L + h) = Σ_j right_plain[j] u_{n-j}  (third-order part, no datum)
    pub right_plain: [f64; 4],
    /// D5 response to a unit datum g, nonzero only in the last two rows.
    pub d5_source: Vec<f64>,
    pub a1: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BoundaryClosure {
    /// ω_xx(t, L) prescribed by the feedback law (plus an optional extra datum).
    pub fn feedback_value(&self, trace_now: f64, trace_delayed: f64) -> f64 {
        self.alpha * trace_now + self.beta * trace_delayed
    }

    /// Boundary source entering the η-equation, −a₁·d5_source·g.
    pub fn source_for(&self, g: f64) -> Vec<f64> {
        self.d5_source.iter().map(|s| -self.a1 * s * g).collect()
    }

    /// Source vector for given current and delayed traces.
    pub fn source(&self, trace_now: f64, trace_delayed: f64) -> Vec<f64> {
        self.source_for(self.feedback_value(trace_now, trace_delayed))
    }
}

#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: Grid,
    pub d1_omega: BandedOperator,
    pub d3_omega: BandedOperator,
    pub d5_omega: BandedOperator,
    pub d1_eta: BandedOperator,
    pub d3_eta: BandedOperator,
    pub d5_eta: BandedOperator,
    /// Dirichlet three-point second difference (u = 0 at both walls).
    pub d2: BandedMatrix,
    /// D1 + a·D3 + a₁·D5 on ω (homogeneous part).
    pub p_omega: BandedMatrix,
    /// −p_omegaᵀ.
    pub p_eta: BandedMatrix,
    pub closure: BoundaryClosure,
}

// c_1..c_4 with Σ_j c_j j^p = target_p for p = 2..5.
fn ghost_weights(targets: [f64; 4]) -> [f64; 4] {
    let m = Matrix4::from_fn(|p, j| ((j + 1) as f64).powi(p as i32 + 2));
    let c = m
        .lu()
        .solve(&Vector4::from(targets))
        .expect("moment matrix is nonsingular");
    [c[0], c[1], c[2], c[3]]
}

type GhostPair = [[f64; 4]; 2];

/// Ghost coefficients: left[m], right[m] with datum weights γ_m h², plain right.
fn closure_weights(h: f64) -> (GhostPair, GhostPair, [f64; 2], [f64; 4]) {
    let pow = |m: f64| [m.powi(2), -m.powi(3), m.powi(4), -m.powi(5)];
    let left = [ghost_weights(pow(1.0)), ghost_weights(pow(2.0))];
    // γ₁ = −1, γ₂ = 4 make the energy trace the three-point formula
    let gamma = [-1.0, 4.0];
    let mut right = [[0.0; 4]; 2];
    for m in 0..2 {
        let mut t = pow((m + 1) as f64);
        t[0] -= 2.0 * gamma[m];
        right[m] = ghost_weights(t);
    }
    (left, right, [gamma[0] * h * h, gamma[1] * h * h], left[0])
}

#[derive(Clone, Copy)]
enum Part {
    First,
    Third,
    Fifth,
}

struct HalfNode {
    n: usize,
    left: [[f64; 4]; 2],
    right: [[f64; 4]; 2],
    right_g: [f64; 2],
    right_plain: [f64; 4],
}

impl HalfNode {
    // Value at extended index i (0 and n+1 are the walls) as interior weights plus datum weight.
    fn value(&self, i: isize, part: Part, out: &mut Vec<(usize, f64)>, c: f64) -> f64 {
        let n = self.n as isize;
        if (1..=n).contains(&i) {
            out.push(((i - 1) as usize, c));
            return 0.0;
        }
        if i == 0 || i == n + 1 {
            return 0.0;
        }
        if i < 0 {
            let w = &self.left[(-i - 1) as usize];
            for (j, wj) in w.iter().enumerate() {
                out.push((j, c * wj));
            }
            return 0.0;
        }
        let m = (i - n - 2) as usize;
        let (w, g) = match part {
            Part::Fifth => (&self.right[m], self.right_g[m]),
            _ => (&self.right_plain, 0.0),
        };
        for (j, wj) in w.iter().enumerate() {
            out.push((self.n - 1 - j, c * wj));
        }
        c * g
    }

    // Rows i = 0..=n for the half node x_{i+1/2}, plus datum column.
    fn rows(&self, part: Part, h: f64) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
        let stencil: Vec<(isize, f64)> = match part {
            Part::First => vec![(0, 0.5), (1, 0.5)],
            Part::Third => {
                let s = 1.0 / (2.0 * h * h);
                vec![(-1, s), (0, -s), (1, -s), (2, s)]
            }
            Part::Fifth => {
                let s = 1.0 / (2.0 * h.powi(4));
                vec![
                    (-2, s),
                    (-1, -3.0 * s),
                    (0, 2.0 * s),
                    (1, 2.0 * s),
                    (2, -3.0 * s),
                    (3, s),
                ]
            }
        };
        let mut rows = Vec::with_capacity(self.n + 1);
        let mut datum = vec![0.0; self.n + 1];
        for i in 0..=self.n as isize {
            let mut row = Vec::new();
            for &(off, c) in &stencil {
                datum[i as usize] += self.value(i + off, part, &mut row, c);
            }
            rows.push(row);
        }
        (rows, datum)
    }

    // Node operator (Q_{i} − Q_{i−1})/h.
    fn node_operator(&self, part: Part, h: f64) -> (BandedMatrix, Vec<f64>) {
        let (q, qd) = self.rows(part, h);
        let mut rows = Vec::with_capacity(self.n);
        let mut src = vec![0.0; self.n];
        for r in 0..self.n {
            let mut row: Vec<(usize, f64)> = Vec::new();
            row.extend(q[r + 1].iter().map(|&(j, v)| (j, v / h)));
            row.extend(q[r].iter().map(|&(j, v)| (j, -v / h)));
            rows.push(merge(row));
            src[r] = (qd[r + 1] - qd[r]) / h;
        }
        (BandedMatrix::from_rows(&rows), src)
    }
}

fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    // cancellation residue
    let scale = out.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
    out.retain(|e| e.1.abs() > 1e-13 * scale);
    out
}

fn dirichlet_d2(n: usize, h: f64) -> BandedMatrix {
    let mut m = BandedMatrix::zeros(n, 1, 1);
    let s = 1.0 / (h * h);
    for i in 0..n {
        m.add(i, i, -2.0 * s);
        if i > 0 {
            m.add(i, i - 1, s);
        }
        if i + 1 < n {
            m.add(i, i + 1, s);
        }
    }
    m
}

pub fn build_operators(p: &SystemParams, g: &Grid) -> Result<Operators> {
    if g.n < 8 {
        return Err(Error::Config(format!("stencil needs n >= 8, got {}", g.n)));
    }
    let h = g.h;
    let (left, right, right_g, right_plain) = closure_weights(h);
    let hn = HalfNode {
        n: g.n,
        left,
        right,
        right_g,
        right_plain,
    };
    let (d1, _) = hn.node_operator(Part::First, h);
    let (d3, _) = hn.node_operator(Part::Third, h);
    let (d5, d5_source) = hn.node_operator(Part::Fifth, h);

    let p_omega = d1.plus(p.a, &d3).plus(p.a1, &d5);
    let p_eta = p_omega.transpose().scaled(-1.0);
    let wrap = |m: BandedMatrix, unknown, order, bc_tag| BandedOperator {
        matrix: m,
        unknown,
        order,
        bc_tag,
    };
    let neg_t = |m: &BandedMatrix| m.transpose().scaled(-1.0);
    Ok(Operators {
        grid: g.clone(),
        d1_eta: wrap(neg_t(&d1), Unknown::Eta, 1, "eta: adjoint of omega closure"),
        d3_eta: wrap(neg_t(&d3), Unknown::Eta, 3, "eta: adjoint of omega closure"),
        d5_eta: wrap(neg_t(&d5), Unknown::Eta, 5, "eta: adjoint of omega closure"),
        d1_omega: wrap(d1, Unknown::Omega, 1, "omega: clamped walls"),
        d3_omega: wrap(d3, Unknown::Omega, 3, "omega: clamped walls"),
        d5_omega: wrap(d5, Unknown::Omega, 5, "omega: clamped walls, u_xx(L) datum"),
        d2: dirichlet_d2(g.n, h),
        p_omega,
        p_eta,
        closure: BoundaryClosure {
            left,
            right,
            right_g,
            right_plain,
            d5_source,
            a1: p.a1,
            alpha: p.alpha,
            beta: p.beta,
        },
    })
}

impl Operators {
    /// D5 on ω with the datum g = ω_xx(L).
    pub fn d5_omega_with_datum(&self, omega: &[f64], g: f64) -> Vec<f64> {
        let mut y = self.d5_omega.apply(omega);
        for (yi, s) in y.iter_mut().zip(&self.closure.d5_source) {
            *yi += s * g;
        }
        y
    }

    pub fn trace(&self, eta: &[f64]) -> f64 {
        trace_eta_xx_l(eta, &self.grid)
    }
}

/// One-sided second-order η_xx(L) using η(L) = η_x(L) = 0.
pub fn trace_eta_xx_l(eta: &[f64], g: &Grid) -> f64 {
    let n = eta.len();
    (8.0 * eta[n - 1] - eta[n - 2]) / (2.0 * g.h * g.h)
}

/// One-sided ω_xx(0) using ω(0) = ω_x(0) = 0.
pub fn omega_xx_left(omega: &[f64], g: &Grid) -> f64 {
    (8.0 * omega[0] - omega[1]) / (2.0 * g.h * g.h)
}
