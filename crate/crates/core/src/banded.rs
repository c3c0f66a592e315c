//! Row-major band storage and LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    /// Assemble from row-wise triplets, sizing the band to fit.
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let n = rows.len();
        let (mut kl, mut ku) = (0, 0);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if v == 0.0 {
                    continue;
                }
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if v != 0.0 {
                    m.add(i, j, v);
                }
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i},{j}) outside band ({},{})",
            self.kl,
            self.ku
        );
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    /// Column range of row `i` inside the band.
    pub fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = 0.0;
            for j in self.row_span(i) {
                s += row[j + self.kl - i] * x[j];
            }
            *yi = s;
        }
    }

    /// xᵀA, i.e. Aᵀx.
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let w = self.width();
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            for j in self.row_span(i) {
                y[j] += row[j + self.kl - i] * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_span(i) {
                t.add(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// self + c·other, widening the band as needed.
    pub fn plus(&self, c: f64, other: &BandedMatrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.row_span(i) {
                m.add(i, j, self.get(i, j));
            }
            for j in other.row_span(i) {
                m.add(i, j, c * other.get(i, j));
            }
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), 0, 0);
        for (i, v) in d.iter().enumerate() {
            m.add(i, i, *v);
        }
        m
    }

    /// diag(d)·self
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut m = self.clone();
        let w = self.width();
        for (i, di) in d.iter().enumerate() {
            m.data[i * w..(i + 1) * w].iter_mut().for_each(|v| *v *= di);
        }
        m
    }

    /// Product of two banded matrices.
    pub fn matmul(&self, other: &BandedMatrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_span(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.row_span(k) {
                    m.add(i, j, a * other.get(k, j));
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Bandwidths actually occupied by nonzero entries.
    pub fn occupied_bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for j in self.row_span(i) {
                if self.get(i, j) != 0.0 {
                    if j < i {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a banded matrix; U carries kl extra super-diagonals from pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    u: Vec<f64>,
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let w = 2 * kl + ku + 1;
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            for j in a.row_span(i) {
                u[i * w + j + kl - i] = a.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = u[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = u[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular banded matrix at pivot {k}"
                )));
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    u.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = u[idx(k, k)];
            for i in k + 1..=last {
                let m = u[idx(i, k)] / pivot;
                l[k * kl + (i - k - 1)] = m;
                u[idx(i, k)] = 0.0;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        u[idx(i, j)] -= m * u[idx(k, j)];
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            w,
            u,
            l,
            piv,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.w);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let hi = (k + kl).min(n - 1);
                for (bi, li) in b[k + 1..=hi].iter_mut().zip(&self.l[k * kl..]) {
                    *bi -= li * bk;
                }
            }
        }
        let span = kl + self.ku;
        for i in (0..n).rev() {
            let row = &self.u[i * w..(i + 1) * w];
            let mut s = b[i];
            for j in i + 1..=(i + span).min(n - 1) {
                s -= row[j + kl - i] * b[j];
            }
            b[i] = s / row[kl];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
