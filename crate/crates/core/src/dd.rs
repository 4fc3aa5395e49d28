//! Double-double evaluation of the Bethe residuals.
//!
//! Root clusters of the eigenvector polynomial are ill-conditioned: a set
//! with backward error near machine precision can still be off by ~1e-6 in
//! each root. Evaluating `(Hψ)(α_p)` in double-double arithmetic lets Newton
//! drive the roots to full f64 accuracy.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};
use twofloat::TwoFloat;

use crate::bethe::{robust_scales, scaled_max};
use crate::diffop::{expand_diffop, hop_values_exact, DiffOpForm};
use crate::error::Result;
use crate::fock::{occupations_at, ModelSpec, Sector};
use crate::poly::Polynomial;
use crate::scalar::{rational_to_f64, Rational, Scalar};

pub type ComplexDD = Complex<TwoFloat>;

pub fn dd_from_rational(q: &Rational) -> TwoFloat {
    let hi = rational_to_f64(q);
    match Rational::from_float(hi) {
        Some(h) => TwoFloat::new_add(hi, rational_to_f64(&(q - h))),
        None => TwoFloat::from(hi),
    }
}

fn lift(z: &Complex64) -> ComplexDD {
    Complex::new(TwoFloat::from(z.re), TwoFloat::from(z.im))
}

fn lower(z: &ComplexDD) -> Complex64 {
    Complex64::new(f64::from(z.re), f64::from(z.im))
}

/// Operator with coefficients rounded to double-double from an exact
/// expansion of the couplings.
#[derive(Clone, Debug)]
pub struct PreciseOperator {
    op: DiffOpForm<ComplexDD>,
    rounded: DiffOpForm<Complex64>,
}

impl PreciseOperator {
    pub fn new<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Self {
        let exact = expand_diffop(&model.map(|c| c.to_rational()), sector);
        PreciseOperator {
            op: exact.map(|q| Complex::new(dd_from_rational(q), TwoFloat::from(0.0))),
            rounded: exact.to_complex(),
        }
    }

    /// The same operator rounded to f64.
    pub fn rounded(&self) -> &DiffOpForm<Complex64> {
        &self.rounded
    }

    /// `max_p |(Hψ)(α_p)| / (|H| |ψ|)(|α_p|)` with the numerator in
    /// double-double.
    pub fn scaled_residual(&self, roots: &[Complex64]) -> f64 {
        scaled_max(&self.residuals(roots), &robust_scales(&self.rounded, roots))
    }

    /// `(Hψ)(α_p)` for monic `ψ` with the given roots, rounded to f64.
    pub fn residuals(&self, roots: &[Complex64]) -> Vec<Complex64> {
        let lifted: Vec<ComplexDD> = roots.iter().map(lift).collect();
        let hpsi = self.op.apply_unchecked(&from_roots(&lifted));
        lifted.iter().map(|a| lower(&hpsi.eval(a))).collect()
    }

    /// `J_pq = ∂(Hψ)(α_p)/∂α_q = −(H φ_q)(α_p) + δ_pq (Hψ)'(α_p)` with
    /// `φ_q = ψ/(z − α_q)`. Clustered roots make every entry a small
    /// difference of large terms, so this too is formed in double-double.
    pub fn jacobian(&self, roots: &[Complex64]) -> DMatrix<Complex64> {
        let lifted: Vec<ComplexDD> = roots.iter().map(lift).collect();
        let n = lifted.len();
        let dhpsi = self.op.apply_unchecked(&from_roots(&lifted)).derivative();
        let mut j = DMatrix::zeros(n, n);
        for q in 0..n {
            let others: Vec<ComplexDD> = lifted.iter().enumerate().filter(|(i, _)| *i != q).map(|(_, z)| *z).collect();
            let hphi = self.op.apply_unchecked(&from_roots(&others));
            for p in 0..n {
                j[(p, q)] = -lower(&hphi.eval(&lifted[p]));
            }
            j[(q, q)] += lower(&dhpsi.eval(&lifted[q]));
        }
        j
    }
}

/// Monomial-basis block with entries rounded to double-double from their
/// exact values.
#[derive(Clone, Debug)]
pub struct PreciseBlock {
    diag: Vec<TwoFloat>,
    upper: Vec<TwoFloat>,
    lower: Vec<TwoFloat>,
}

const SECANT_MAX_ITER: usize = 8;
const ABERTH_MAX_ITER: usize = 30;

impl PreciseBlock {
    pub fn new<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Result<Self> {
        let exact = model.map(|c| c.to_rational());
        let diag = (0..sector.dim())
            .map(|n| Ok(dd_from_rational(&exact.diagonal_energy(&occupations_at(sector, &exact, n)?))))
            .collect::<Result<Vec<_>>>()?;
        let (a, c) = hop_values_exact(&exact, sector);
        let g = exact.g();
        let upper = a.iter().map(|q| dd_from_rational(&(q * g))).collect();
        let lower = c.iter().map(|q| dd_from_rational(&(q * g))).collect();
        Ok(PreciseBlock { diag, upper, lower })
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Ratios `p_i = c_{i−1}/c_i` and `q_i = c_{i+1}/c_i` of the
    /// eigenvector for energy `e`, from the two one-sided factorizations.
    fn ratios(&self, e: TwoFloat) -> (Vec<TwoFloat>, Vec<TwoFloat>) {
        let n = self.dim();
        let zero = TwoFloat::from(0.0);
        let guard = |x: TwoFloat| if x == zero { TwoFloat::from(f64::MIN_POSITIVE) } else { x };
        let mut p = vec![zero; n];
        let mut d = self.diag[0] - e;
        for i in 1..n {
            p[i] = -self.lower[i - 1] / guard(d);
            d = self.diag[i] - e + self.upper[i - 1] * p[i];
        }
        let mut q = vec![zero; n];
        let mut f = self.diag[n - 1] - e;
        for i in (0..n - 1).rev() {
            q[i] = -self.upper[i] / guard(f);
            f = self.diag[i] - e + self.lower[i] * q[i];
        }
        (p, q)
    }

    fn gamma(&self, e: TwoFloat, p: &[TwoFloat], q: &[TwoFloat], k: usize) -> TwoFloat {
        let mut g = self.diag[k] - e;
        if k > 0 {
            g += self.upper[k - 1] * p[k];
        }
        if k + 1 < self.dim() {
            g += self.lower[k] * q[k];
        }
        g
    }

    /// Monic eigenpolynomial coefficients for the eigenvalue nearest
    /// `energy`: the eigenvalue is sharpened by secant iteration on the
    /// twisted pivot, then the vector follows from the ratios. `None` when
    /// the coefficients leave the double-double range or the top one
    /// vanishes.
    pub fn eigenpolynomial(&self, energy: f64) -> Option<Vec<TwoFloat>> {
        let n = self.dim();
        if n < 2 {
            return None;
        }
        let mut e1 = TwoFloat::from(energy);
        let (p, q) = self.ratios(e1);
        let twist = (0..n).min_by(|&a, &b| {
            let ga = f64::from(self.gamma(e1, &p, &q, a)).abs();
            let gb = f64::from(self.gamma(e1, &p, &q, b)).abs();
            ga.total_cmp(&gb)
        })?;
        let pivot = |e: TwoFloat| {
            let (p, q) = self.ratios(e);
            self.gamma(e, &p, &q, twist)
        };
        let scale = self.diag.iter().map(|d| f64::from(*d).abs()).fold(energy.abs(), f64::max).max(f64::MIN_POSITIVE);
        let mut e0 = e1 + TwoFloat::from(scale * 1e-13);
        let mut g0 = pivot(e0);
        let mut g1 = pivot(e1);
        for _ in 0..SECANT_MAX_ITER {
            if g1 == TwoFloat::from(0.0) || g1 == g0 {
                break;
            }
            let next = e1 - g1 * (e1 - e0) / (g1 - g0);
            if !next.is_valid() {
                return None;
            }
            let moved = f64::from((next - e1).abs());
            e0 = e1;
            g0 = g1;
            e1 = next;
            g1 = pivot(e1);
            if moved <= 1e-30 * scale {
                break;
            }
        }
        let (p, q) = self.ratios(e1);
        let mut c = vec![TwoFloat::from(0.0); n];
        c[twist] = TwoFloat::from(1.0);
        for i in (1..=twist).rev() {
            c[i - 1] = p[i] * c[i];
        }
        for i in twist..n - 1 {
            c[i + 1] = q[i] * c[i];
        }
        let top = c[n - 1];
        if top == TwoFloat::from(0.0) {
            return None;
        }
        let monic: Vec<TwoFloat> = c.iter().map(|v| *v / top).collect();
        monic.iter().all(|v| v.is_valid() && f64::from(*v).is_finite()).then_some(monic)
    }
}

/// Aberth–Ehrlich iteration in double-double on a monic real polynomial,
/// starting from `roots`. Returns `None` if the iteration breaks down.
pub fn polish_roots(monic: &[TwoFloat], roots: &[Complex64]) -> Option<Vec<Complex64>> {
    let coeffs: Vec<ComplexDD> = monic.iter().map(|c| Complex::new(*c, TwoFloat::from(0.0))).collect();
    let mut z: Vec<ComplexDD> = roots.iter().map(lift).collect();
    let one = ComplexDD::one();
    for _ in 0..ABERTH_MAX_ITER {
        let mut worst = 0.0f64;
        for i in 0..z.len() {
            let (mut p, mut dp) = (ComplexDD::zero(), ComplexDD::zero());
            for c in coeffs.iter().rev() {
                dp = dp * z[i] + p;
                p = p * z[i] + c;
            }
            if p == ComplexDD::zero() {
                continue;
            }
            let w = p / dp;
            let mut s = ComplexDD::zero();
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    s += one / (z[i] - zj);
                }
            }
            let corr = w / (one - w * s);
            let size = lower(&corr).norm();
            if !size.is_finite() {
                return None;
            }
            worst = worst.max(size / lower(&z[i]).norm().max(f64::MIN_POSITIVE));
            z[i] -= corr;
        }
        if worst < 1e-28 {
            break;
        }
    }
    Some(z.iter().map(lower).collect())
}

fn from_roots(roots: &[ComplexDD]) -> Polynomial<ComplexDD> {
    let mut coeffs = vec![ComplexDD::one()];
    for root in roots {
        let mut next = vec![ComplexDD::zero(); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * root;
        }
        coeffs = next;
    }
    Polynomial::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;

    #[test]
    fn rational_split_captures_low_part() {
        let third = dd_from_rational(&rational(1, 3));
        let err = (third * TwoFloat::from(3.0) - TwoFloat::from(1.0)).abs();
        assert!(f64::from(err) < 1e-30);
    }
}
