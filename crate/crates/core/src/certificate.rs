//! Gain admissibility, the matrices Φ and Ψ, decay constants and the optimal μ₁.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{DelaySpec, SystemParams};

/// Symmetric 2×2 matrix [[p, q], [q, r]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sym2 {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.p * self.r - self.q * self.q
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.p + self.r);
        let s = (0.25 * (self.p - self.r).powi(2) + self.q * self.q).sqrt();
        (m - s, m + s)
    }

    pub fn negative_definite(&self) -> bool {
        self.p < 0.0 && self.det() > 0.0
    }

    pub fn quad(&self, x: f64, y: f64) -> f64 {
        self.p * x * x + 2.0 * self.q * x * y + self.r * y * y
    }

    pub fn as_rows(&self) -> [[f64; 2]; 2] {
        [[self.p, self.q], [self.q, self.r]]
    }
}

/// Φ with the slope bound d replaced by any slope value s.
pub fn phi_matrix(p: &SystemParams, slope: f64) -> Sym2 {
    let b = p.beta.abs();
    Sym2 {
        p: -2.0 * p.a1 * p.alpha + b,
        q: -p.a1 * p.beta,
        r: b * (slope - 1.0),
    }
}

pub fn psi_matrix(p: &SystemParams, dly: &DelaySpec, mu1: f64, mu2: f64) -> Sym2 {
    let phi = phi_matrix(p, dly.d);
    let c = 0.5 * p.a1 * p.l * mu1;
    Sym2 {
        p: phi.p + c * (p.alpha * p.alpha + 1.0) + 0.5 * p.beta.abs() * mu2,
        q: phi.q + c * p.alpha * p.beta,
        r: phi.r + c * p.beta * p.beta,
    }
}

// With β = 0 the delay channel drops out and only the (1,1) entry matters.
fn gate(p: &SystemParams, m: &Sym2) -> bool {
    if p.beta == 0.0 {
        m.p < 0.0
    } else {
        m.negative_definite()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCheck {
    pub admissible: bool,
    pub phi: Sym2,
    pub threshold: f64,
}

pub fn check_gains(p: &SystemParams, dly: &DelaySpec) -> Result<GainCheck> {
    if !(dly.d < 1.0) {
        return Err(Error::Config(format!(
            "slope bound d = {} must be < 1",
            dly.d
        )));
    }
    if !(p.a1 > 0.0) {
        return Err(Error::Config(format!("a1 = {} must be positive", p.a1)));
    }
    let d = dly.d;
    let threshold = p.beta.abs() / (2.0 * p.a1) * (p.a1 * p.a1 + 1.0 - d) / (1.0 - d);
    let phi = phi_matrix(p, d);
    let admissible = if p.beta == 0.0 {
        p.alpha > 0.0
    } else {
        phi.negative_definite()
    };
    Ok(GainCheck {
        admissible,
        phi,
        threshold,
    })
}

/// First bracket of the decay rate with denominator L⁴(1 + μ₁·len_factor).
fn kato_bracket(p: &SystemParams, mu1: f64, len_factor: f64) -> f64 {
    let l4 = p.l.powi(4);
    mu1 * PI * PI * (5.0 * p.a1 * PI * PI - 3.0 * p.a * p.l * p.l) / (l4 * (1.0 + mu1 * len_factor))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayConstants {
    pub lambda: f64,
    pub zeta: f64,
    /// μ₁π²(5a₁π² − 3aL²)/(L⁴(1 + μ₁L)).
    pub bracket_kato: f64,
    /// Same with denominator L⁴(1 + μ₁).
    pub bracket_kato_alt: f64,
    pub bracket_delay: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Number of halvings applied to (μ₁, μ₂) to make Ψ negative definite.
    pub shrinks: u32,
}

pub fn decay_constants(
    p: &SystemParams,
    dly: &DelaySpec,
    mu1: f64,
    mu2: f64,
) -> Result<DecayConstants> {
    if !p.length_ok() {
        return Err(Error::CertificationRefused(format!(
            "L = {} is not below the critical length {:.6}",
            p.l,
            p.critical_length()
        )));
    }
    if !(0.0..1.0 / p.l).contains(&mu1) || !(0.0..1.0).contains(&mu2) {
        return Err(Error::Config(format!(
            "need 0 <= mu1 < 1/L and 0 <= mu2 < 1, got ({mu1}, {mu2})"
        )));
    }
    let (mut m1, mut m2, mut shrinks) = (mu1, mu2, 0u32);
    while !gate(p, &psi_matrix(p, dly, m1, m2)) {
        if shrinks >= 200 {
            return Err(Error::Inadmissible(
                "Psi is not negative definite for any shrink of (mu1, mu2)".into(),
            ));
        }
        m1 *= 0.5;
        m2 *= 0.5;
        shrinks += 1;
    }
    let bracket_kato = kato_bracket(p, m1, p.l);
    let bracket_kato_alt = kato_bracket(p, m1, 1.0);
    let bracket_delay = m2 * (1.0 - dly.d) / (dly.m * (1.0 + m2));
    let mx = (m1 * p.l).max(m2);
    Ok(DecayConstants {
        lambda: bracket_kato.min(bracket_delay),
        zeta: (1.0 + mx) / (1.0 - mx),
        bracket_kato,
        bracket_kato_alt,
        bracket_delay,
        mu1: m1,
        mu2: m2,
        shrinks,
    })
}

/// Right end of the admissible μ₁ interval.
pub fn mu1_right_endpoint(p: &SystemParams, dly: &DelaySpec) -> f64 {
    let (a1, al, b, d) = (p.a1, p.alpha, p.beta.abs(), dly.d);
    ((2.0 * a1 * al - b) * (1.0 - d) - a1 * a1 * b) / (p.l * (1.0 - d) * (a1 * a1 + al * al))
}

fn in_interval(p: &SystemParams, dly: &DelaySpec, mu1: f64) -> Result<()> {
    let r = mu1_right_endpoint(p, dly);
    let tol = 1e-12 * r.abs().max(1e-300);
    if mu1 < -tol || mu1 > r + tol {
        return Err(Error::Domain(format!("mu1 = {mu1} outside [0, {r}]")));
    }
    Ok(())
}

pub fn f_of_mu1(p: &SystemParams, dly: &DelaySpec, mu1: f64) -> Result<f64> {
    in_interval(p, dly, mu1)?;
    Ok(kato_bracket(p, mu1, p.l))
}

pub fn g_of_mu1(p: &SystemParams, dly: &DelaySpec, mu1: f64) -> Result<f64> {
    in_interval(p, dly, mu1)?;
    let (a1, al, b, d) = (p.a1, p.alpha, p.beta.abs(), dly.d);
    if b == 0.0 {
        // numerator and denominator coincide; keep the limit at the right end
        return Ok((1.0 - d) / dly.m);
    }
    let shift = p.l * (1.0 - d) * (a1 * a1 + al * al) * mu1;
    let den = dly.m * (2.0 * a1 * al * (1.0 - d) - a1 * a1 * b - shift);
    if !(den > 0.0) {
        return Err(Error::Inadmissible(format!(
            "g denominator {den} is not positive"
        )));
    }
    Ok((1.0 - d) * ((2.0 * a1 * al - b) * (1.0 - d) - a1 * a1 * b - shift) / den)
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalRate {
    pub mu1_star: f64,
    pub lambda_star: f64,
    pub interval: (f64, f64),
    pub iterations: u32,
}

/// Bisection for the crossing of f (increasing) and g (decreasing).
pub fn optimal_mu1(p: &SystemParams, dly: &DelaySpec, tol: f64) -> Result<OptimalRate> {
    if !p.length_ok() {
        return Err(Error::CertificationRefused(format!(
            "L = {} out of range",
            p.l
        )));
    }
    let gains = check_gains(p, dly)?;
    if !gains.admissible {
        return Err(Error::Inadmissible(format!(
            "alpha = {} is not above threshold {}",
            p.alpha, gains.threshold
        )));
    }
    let r = mu1_right_endpoint(p, dly);
    let big_f = |m: f64| -> Result<f64> { Ok(f_of_mu1(p, dly, m)? - g_of_mu1(p, dly, m)?) };
    let (f0, f1) = (big_f(0.0)?, big_f(r)?);
    if p.beta == 0.0 && f0 < 0.0 && f1 <= 0.0 {
        // g is flat without the delay channel: min{f, g} peaks at the right end
        return Ok(OptimalRate {
            mu1_star: r,
            lambda_star: f_of_mu1(p, dly, r)?,
            interval: (0.0, r),
            iterations: 0,
        });
    }
    if !(f0 < 0.0 && f1 > 0.0) {
        return Err(Error::Inconsistent(format!(
            "F(0) = {f0}, F(right) = {f1}; expected a sign change"
        )));
    }
    let (mut lo, mut hi) = (0.0, r);
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    while iterations < 400 {
        mid = 0.5 * (lo + hi);
        let v = big_f(mid)?;
        iterations += 1;
        if v.abs() <= tol || hi - lo <= f64::EPSILON * r {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OptimalRate {
        mu1_star: mid,
        lambda_star: f_of_mu1(p, dly, mid)?,
        interval: (0.0, r),
        iterations,
    })
}

/// Largest μ₂ on a geometric grid below 1 keeping Ψ negative definite.
pub fn choose_mu2(p: &SystemParams, dly: &DelaySpec, mu1: f64) -> Result<f64> {
    let gains = check_gains(p, dly)?;
    if !gains.admissible {
        return Err(Error::Inadmissible(format!(
            "alpha = {} is not above threshold {}",
            p.alpha, gains.threshold
        )));
    }
    if !(mu1 * p.l < 1.0) {
        return Err(Error::Inadmissible(format!(
            "mu1*L = {} must be < 1",
            mu1 * p.l
        )));
    }
    let top = 1.0 - 1.0 / 1024.0;
    for k in 0..800 {
        let mu2 = top * 0.97f64.powi(k);
        if gate(p, &psi_matrix(p, dly, mu1, mu2)) {
            return Ok(mu2);
        }
    }
    Err(Error::Inadmissible(format!(
        "no mu2 keeps Psi negative definite at mu1 = {mu1}"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate {
    pub admissible: bool,
    pub threshold: f64,
    pub phi: Sym2,
    pub psi: Sym2,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub mu1_interval: (f64, f64),
    pub mu1_star: f64,
    pub lambda_star: f64,
    pub bracket_kato: f64,
    pub bracket_kato_alt: f64,
    pub bracket_delay: f64,
    pub shrinks: u32,
    pub l_condition_ok: bool,
}

/// Full certificate: μ₁* from the f/g crossing, μ₂ from the grid, then λ and ζ.
pub fn certify(p: &SystemParams, dly: &DelaySpec) -> Result<StabilityCertificate> {
    let gains = check_gains(p, dly)?;
    if !p.length_ok() {
        return Err(Error::CertificationRefused(format!(
            "L = {} is not below the critical length {:.6}",
            p.l,
            p.critical_length()
        )));
    }
    if !gains.admissible {
        return Err(Error::Inadmissible(format!(
            "alpha = {} is not above threshold {}",
            p.alpha, gains.threshold
        )));
    }
    let opt = optimal_mu1(p, dly, 1e-12)?;
    let mu2 = choose_mu2(p, dly, opt.mu1_star)?;
    let dc = decay_constants(p, dly, opt.mu1_star, mu2)?;
    Ok(StabilityCertificate {
        admissible: true,
        threshold: gains.threshold,
        phi: gains.phi,
        psi: psi_matrix(p, dly, dc.mu1, dc.mu2),
        mu1: dc.mu1,
        mu2: dc.mu2,
        lambda: dc.lambda,
        zeta: dc.zeta,
        mu1_interval: opt.interval,
        mu1_star: opt.mu1_star,
        lambda_star: opt.lambda_star,
        bracket_kato: dc.bracket_kato,
        bracket_kato_alt: dc.bracket_kato_alt,
        bracket_delay: dc.bracket_delay,
        shrinks: dc.shrinks,
        l_condition_ok: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (SystemParams, DelaySpec) {
        let p = SystemParams::new(1.0, 1.0, 1.0, 2.0, 1.0);
        let mut d = DelaySpec::constant(1.0);
        d.m = 1.0;
        (p, d)
    }

    #[test]
    fn equality_case_is_rejected() {
        let (mut p, d) = base();
        p.alpha = 1.0;
        let g = check_gains(&p, &d).unwrap();
        assert_eq!(g.threshold, 1.0);
        assert_eq!(g.phi.det(), 0.0);
        assert!(!g.admissible);
    }

    #[test]
    fn zero_delay_gain_reduces_to_positive_alpha() {
        let (mut p, d) = base();
        p.beta = 0.0;
        p.alpha = 0.3;
        assert!(check_gains(&p, &d).unwrap().admissible);
        p.alpha = -0.1;
        assert!(!check_gains(&p, &d).unwrap().admissible);
    }

    #[test]
    fn slope_bound_one_is_config_error() {
        let (p, mut d) = base();
        d.d = 1.0;
        assert!(matches!(check_gains(&p, &d), Err(Error::Config(_))));
    }

    #[test]
    fn zero_mu1_gives_zero_rate() {
        let (p, d) = base();
        assert_eq!(decay_constants(&p, &d, 0.0, 0.5).unwrap().lambda, 0.0);
    }

    #[test]
    fn endpoint_values() {
        let (p, d) = base();
        let r = mu1_right_endpoint(&p, &d);
        assert!((r - 0.4).abs() < 1e-15);
        assert_eq!(f_of_mu1(&p, &d, 0.0).unwrap(), 0.0);
        assert!(g_of_mu1(&p, &d, r).unwrap().abs() < 1e-15);
        assert!((g_of_mu1(&p, &d, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(f_of_mu1(&p, &d, 0.41).is_err());
    }

    #[test]
    fn mu2_choice() {
        let (p, d) = base();
        assert!(choose_mu2(&p, &d, 1e-3).unwrap() > 0.0);
        let mut q = p.clone();
        q.beta = 0.0;
        assert_eq!(choose_mu2(&q, &d, 1e-3).unwrap(), 1.0 - 1.0 / 1024.0);
        let mut bad = p.clone();
        bad.alpha = 0.5;
        assert!(choose_mu2(&bad, &d, 1e-3).is_err());
    }

    #[test]
    fn length_out_of_range_refuses() {
        let (mut p, d) = base();
        p.l = 4.1;
        assert!(matches!(
            decay_constants(&p, &d, 0.1, 0.5),
            Err(Error::CertificationRefused(_))
        ));
    }

    #[test]
    fn zero_delay_gain_certifies_at_right_end() {
        let p = SystemParams::new(0.001, 0.01, 3.0, 2.0, 0.0);
        let mut d = DelaySpec::constant(0.5);
        d.m = 0.5;
        assert_eq!(g_of_mu1(&p, &d, 0.0).unwrap(), 2.0);
        let opt = optimal_mu1(&p, &d, 1e-12).unwrap();
        assert_eq!(opt.mu1_star, mu1_right_endpoint(&p, &d));
        let c = certify(&p, &d).unwrap();
        assert!(c.lambda > 0.0 && c.zeta > 1.0);
    }
}
