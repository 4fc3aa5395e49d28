//! Roots of real polynomials whose coefficients may span many orders of
//! magnitude, and the canonical ordering used for root sets.
//!
//! Coefficients are carried as sign and log-magnitude. Starting values come
//! from a balanced companion matrix when the normalized coefficients fit in
//! `f64`, otherwise from the Newton polygon; Aberth–Ehrlich iteration with
//! scaled evaluation then polishes all roots simultaneously.

use std::f64::consts::PI;

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative size at or below which a leading coefficient counts as
/// zero. Only exact zeros qualify: an eigenvector of an unreduced tridiagonal
/// block never has a vanishing last component.
pub const DEFAULT_DEFLATION: f64 = 0.0;

const ABERTH_MAX_ITER: usize = 500;
/// Normalized coefficients below `e^{-LN_RANGE}` would underflow in the
/// companion matrix.
const LN_RANGE: f64 = 600.0;

/// Real coefficients as `sign · e^{ln_abs}`; zero has `ln_abs = −∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogCoeffs {
    pub sign: Vec<f64>,
    pub ln_abs: Vec<f64>,
}

impl LogCoeffs {
    pub fn from_f64(coeffs: &[f64]) -> Self {
        LogCoeffs {
            sign: coeffs.iter().map(|c| if *c == 0.0 { 0.0 } else { c.signum() }).collect(),
            ln_abs: coeffs.iter().map(|c| c.abs().ln()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sign.is_empty()
    }

    pub fn is_zero_at(&self, n: usize) -> bool {
        self.sign[n] == 0.0 || self.ln_abs[n] == f64::NEG_INFINITY
    }

    pub fn max_ln(&self) -> f64 {
        self.ln_abs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Coefficients divided by the largest magnitude; tiny ones may flush to
    /// zero.
    pub fn normalized(&self) -> Vec<f64> {
        let top = self.max_ln();
        (0..self.len())
            .map(|n| if self.is_zero_at(n) { 0.0 } else { self.sign[n] * (self.ln_abs[n] - top).exp() })
            .collect()
    }

    /// `−c_{d−1}/c_d`: the sum of the roots of the degree-`d` truncation.
    pub fn root_sum(&self, degree: usize) -> Option<f64> {
        if degree == 0 || degree >= self.len() || self.is_zero_at(degree) {
            return None;
        }
        if self.is_zero_at(degree - 1) {
            return Some(0.0);
        }
        Some(-self.sign[degree - 1] * self.sign[degree] * (self.ln_abs[degree - 1] - self.ln_abs[degree]).exp())
    }

    fn slice(&self, lo: usize, hi: usize) -> LogCoeffs {
        LogCoeffs { sign: self.sign[lo..=hi].to_vec(), ln_abs: self.ln_abs[lo..=hi].to_vec() }
    }

    /// `p(z)/p'(z)`, evaluated with a common scale factor so neither
    /// overflows.
    fn newton_ratio(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r == 0.0 {
            let c0 = if self.is_zero_at(0) { 0.0 } else { self.sign[0] * self.ln_abs[0].exp() };
            let c1 = if self.is_zero_at(1) { 0.0 } else { self.sign[1] * self.ln_abs[1].exp() };
            return Complex64::new(c0 / c1, 0.0);
        }
        let lr = r.ln();
        let u = z / r;
        let top = (0..self.len())
            .filter(|&n| !self.is_zero_at(n))
            .map(|n| self.ln_abs[n] + n as f64 * lr)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        let mut un = Complex64::new(1.0, 0.0);
        let mut un1 = Complex64::new(0.0, 0.0);
        for n in 0..self.len() {
            if !self.is_zero_at(n) {
                let t = self.ln_abs[n] + n as f64 * lr - top;
                p += un * (self.sign[n] * t.exp());
                if n > 0 {
                    // Scaled by |z| relative to p'; undone below.
                    dp += un1 * (self.sign[n] * n as f64 * t.exp());
                }
            }
            un1 = un;
            un *= u;
        }
        div(p, dp) * r
    }
}

/// Roots of `Σ coeffs[n] z^n`. Leading coefficients at or below
/// `deflation · max|coeffs|` are dropped and `reduced` is set.
pub fn roots_from_eigenvector(coeffs: &[f64], deflation: f64) -> Result<(Vec<Complex64>, bool)> {
    roots_from_log_coeffs(&LogCoeffs::from_f64(coeffs), deflation)
}

/// Same as [`roots_from_eigenvector`] for log-magnitude coefficients.
pub fn roots_from_log_coeffs(coeffs: &LogCoeffs, deflation: f64) -> Result<(Vec<Complex64>, bool)> {
    let top = coeffs.max_ln();
    if coeffs.is_empty() || top == f64::NEG_INFINITY || top.is_nan() {
        return Err(Error::ZeroPolynomial);
    }
    let cut = if deflation > 0.0 { top + deflation.ln() } else { f64::NEG_INFINITY };
    let mut degree = coeffs.len() - 1;
    while coeffs.is_zero_at(degree) || coeffs.ln_abs[degree] <= cut {
        degree -= 1;
    }
    let reduced = degree + 1 < coeffs.len();
    let zeros = (0..=degree).take_while(|&n| coeffs.is_zero_at(n)).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    if degree > zeros {
        roots.extend(nonzero_roots(&coeffs.slice(zeros, degree))?);
    }
    canonical_sort(&mut roots, 1e-13);
    Ok((roots, reduced))
}

/// Roots of a polynomial with nonzero constant and leading coefficients.
fn nonzero_roots(c: &LogCoeffs) -> Result<Vec<Complex64>> {
    let finite_range = (0..c.len())
        .filter(|&n| !c.is_zero_at(n))
        .map(|n| c.max_ln() - c.ln_abs[n])
        .fold(0.0, f64::max);
    let start = if finite_range < LN_RANGE {
        companion_roots(&c.normalized())?
    } else {
        newton_polygon_starts(c)
    };
    Ok(aberth(c, start))
}

/// Eigenvalues of the balanced companion matrix of a real polynomial.
pub fn companion_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let m = coeffs.len() - 1;
    let lead = coeffs[m];
    if lead == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    let mut companion = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        companion[(i, m - 1)] = -coeffs[i] / lead;
    }
    balance_parlett_reinsch(&mut companion);
    let max_iter = 100 * m.max(1);
    let schur = Schur::try_new(companion, f64::EPSILON, max_iter)
        .ok_or(Error::NoConvergence { iterations: max_iter })?;
    Ok(schur.complex_eigenvalues().iter().cloned().collect())
}

/// Starting points on circles whose radii come from the upper convex hull of
/// `(n, ln|c_n|)`.
fn newton_polygon_starts(c: &LogCoeffs) -> Vec<Complex64> {
    let pts: Vec<(f64, f64)> = (0..c.len())
        .filter(|&n| !c.is_zero_at(n))
        .map(|n| (n as f64, c.ln_abs[n]))
        .collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut starts = Vec::new();
    for w in hull.windows(2) {
        let count = (w[1].0 - w[0].0) as usize;
        let radius = ((w[0].1 - w[1].1) / count as f64).exp();
        for j in 0..count {
            let angle = 2.0 * PI * (j as f64 + 0.5) / count as f64 + 0.4;
            starts.push(Complex64::from_polar(radius, angle));
        }
    }
    starts
}

/// `1/z` without overflow in `|z|²`.
fn recip(z: Complex64) -> Complex64 {
    let m = z.re.abs().max(z.im.abs());
    if m == 0.0 {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    let w = z / m;
    w.conj() / (w.norm_sqr() * m)
}

fn div(a: Complex64, b: Complex64) -> Complex64 {
    a * recip(b)
}

/// Simultaneous Aberth–Ehrlich refinement.
fn aberth(c: &LogCoeffs, mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    let mut done = vec![false; n];
    for _ in 0..ABERTH_MAX_ITER {
        let mut all = true;
        for p in 0..n {
            if done[p] {
                continue;
            }
            let w = c.newton_ratio(roots[p]);
            if !(w.re.is_finite() && w.im.is_finite()) {
                done[p] = true;
                continue;
            }
            let s: Complex64 = (0..n).filter(|&m| m != p).map(|m| recip(roots[p] - roots[m])).sum();
            let corr = div(w, 1.0 - w * s);
            if !(corr.re.is_finite() && corr.im.is_finite()) {
                done[p] = true;
                continue;
            }
            roots[p] -= corr;
            if corr.norm() <= 4.0 * f64::EPSILON * roots[p].norm() {
                done[p] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }
    roots
}

/// Sorts by real part, then imaginary part, after making near-real roots real
/// and near-conjugate pairs exact conjugates. `tol` is relative to
/// `max(1, |z|)`.
pub fn canonical_sort(roots: &mut [Complex64], tol: f64) {
    let scale = |z: Complex64| tol * z.norm().max(1.0);
    let mut paired = vec![false; roots.len()];
    for i in 0..roots.len() {
        if paired[i] || roots[i].im <= 0.0 {
            continue;
        }
        let partner = (0..roots.len())
            .filter(|&j| j != i && !paired[j] && roots[j].im <= 0.0)
            .map(|j| (j, (roots[j] - roots[i].conj()).norm()))
            .filter(|(_, d)| *d <= scale(roots[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, _)) = partner {
            let re = 0.5 * (roots[i].re + roots[j].re);
            let im = 0.5 * (roots[i].im - roots[j].im);
            roots[i] = Complex64::new(re, im);
            roots[j] = Complex64::new(re, -im);
            paired[i] = true;
            paired[j] = true;
        }
    }
    // Unpaired near-real roots become real.
    for (z, p) in roots.iter_mut().zip(&paired) {
        if !p && z.im.abs() <= scale(*z) {
            z.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Smallest pairwise distance, `∞` for fewer than two roots.
pub fn min_separation(roots: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            best = best.min((roots[i] - roots[j]).norm());
        }
    }
    best
}

/// Whether every root has its conjugate in the set, within `tol` relative to
/// `max(1, |z|)`.
pub fn is_conjugate_closed(roots: &[Complex64], tol: f64) -> bool {
    roots.iter().all(|z| {
        roots
            .iter()
            .any(|w| (w - z.conj()).norm() <= tol * z.norm().max(1.0))
    })
}
