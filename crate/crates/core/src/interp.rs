//! Piecewise interpolation on strictly increasing abscissae.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Fritsch–Carlson shape-preserving Hermite cubic.
    #[default]
    MonotoneCubic,
    Linear,
}

pub struct Samples<'a> {
    t: &'a [f64],
    v: &'a [f64],
}

impl<'a> Samples<'a> {
    pub fn new(t: &'a [f64], v: &'a [f64]) -> Self {
        debug_assert_eq!(t.len(), v.len());
        Samples { t, v }
    }

    /// Value at `x`, which must lie within [t[0], t[last]].
    pub fn eval(&self, x: f64, kind: Interpolation) -> f64 {
        let (t, v) = (self.t, self.v);
        let n = t.len();
        if n == 1 {
            return v[0];
        }
        let i = t.partition_point(|&s| s <= x).clamp(1, n - 1) - 1;
        if x == t[i] {
            return v[i];
        }
        if x == t[i + 1] {
            return v[i + 1];
        }
        let h = t[i + 1] - t[i];
        let s = (x - t[i]) / h;
        match kind {
            Interpolation::Linear => v[i] + s * (v[i + 1] - v[i]),
            Interpolation::MonotoneCubic => {
                let d0 = self.slope(i);
                let d1 = self.slope(i + 1);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * v[i] + h10 * h * d0 + h01 * v[i + 1] + h11 * h * d1
            }
        }
    }

    fn secant(&self, k: usize) -> (f64, f64) {
        let h = self.t[k + 1] - self.t[k];
        (h, (self.v[k + 1] - self.v[k]) / h)
    }

    // Derivative estimate at node k.
    fn slope(&self, k: usize) -> f64 {
        let n = self.t.len();
        if n == 2 {
            return self.secant(0).1;
        }
        if k == 0 || k == n - 1 {
            let (j0, j1) = if k == 0 { (0, 1) } else { (n - 2, n - 3) };
            let (h0, m0) = self.secant(j0);
            let (h1, m1) = self.secant(j1);
            let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
            if d.signum() != m0.signum() {
                return 0.0;
            }
            if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
                return 3.0 * m0;
            }
            return d;
        }
        let (hl, ml) = self.secant(k - 1);
        let (hr, mr) = self.secant(k);
        if ml * mr <= 0.0 {
            return 0.0;
        }
        let w1 = 2.0 * hr + hl;
        let w2 = hr + 2.0 * hl;
        (w1 + w2) / (w1 / ml + w2 / mr)
    }
}
