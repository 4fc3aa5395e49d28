//! The Hamiltonian of one sector as a differential operator in `z`.
//!
//! On monomials the operator acts as
//! `H z^n = A(n) z^{n+1} + B(n) z^n + C(n) z^{n−1}`. Writing each hop
//! polynomial in the falling-factorial basis `n(n−1)…(n−i+1)` turns it into
//! `H = Σ_i P_i(z) (d/dz)^i`, since `z^i (d/dz)^i z^n = n(n−1)…(n−i+1) z^n`.

use num_complex::Complex64;
use num_traits::Num;

use crate::error::{Error, Result};
use crate::fock::{ModelSpec, Sector};
use crate::poly::{from_usize, Polynomial};
use crate::scalar::{int, rational, Rational, Scalar};

/// `A(n)`, `B(n)`, `C(n)` as polynomials in the chain index `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HopCoefficients<T> {
    pub a: Polynomial<T>,
    pub b: Polynomial<T>,
    pub c: Polynomial<T>,
}

/// `H = Σ_{i=0}^{M} P_i(z) (d/dz)^i` together with its hop form.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOpForm<T> {
    /// `M = max(Σ_{i≤r} k_i, Σ_{i>r} k_i, 2)`.
    pub order: usize,
    /// `N`: the invariant subspace is spanned by `1, z, …, z^N`.
    pub n_max: usize,
    pub p: Vec<Polynomial<T>>,
    pub hop: HopCoefficients<T>,
}

/// Exact rational parts of `A(n)/g` and `C(n)/g`.
fn hop_products<S: Scalar>(model: &ModelSpec<S>, sector: &Sector) -> (Polynomial<Rational>, Polynomial<Rational>) {
    let r = sector.r();
    let offset = int(sector.offset() as i64);
    let q_r = sector.q_r();

    // A(n)/g = ∏_{j>r} ∏_i k_j(−ν − q_r − t + 2κ + s_j^(2) − ((i−1)k_j+1)/k_j²)
    let mut a_factors = Vec::new();
    for (j, &kj) in model.k()[r..].iter().enumerate() {
        let kj = kj as i64;
        let base = int(2) * sector.kappa() - q_r - sector.t() + sector.s2(j) - &offset;
        for i in 1..=kj {
            let c = int(kj) * (&base - rational((i - 1) * kj + 1, kj * kj));
            a_factors.push(Polynomial::linear(c, int(-kj)));
        }
    }
    // C(n)/g = ∏_{j≤r} ∏_i k_j(ν + q_r + s_j^(1) − ((i−1)k_j+1)/k_j²)
    let mut c_factors = Vec::new();
    for (j, &kj) in model.k()[..r].iter().enumerate() {
        let kj = kj as i64;
        let base = &offset + q_r + sector.s1(j);
        for i in 1..=kj {
            let c = int(kj) * (&base - rational((i - 1) * kj + 1, kj * kj));
            c_factors.push(Polynomial::linear(c, int(kj)));
        }
    }
    (Polynomial::product(&a_factors), Polynomial::product(&c_factors))
}

/// `A(n)` for `n < N` and `C(n)` for `1 ≤ n ≤ N`, evaluated exactly before
/// rounding; the expanded polynomials lose digits to cancellation.
pub fn hop_values<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> (Vec<f64>, Vec<f64>) {
    let (a, c) = hop_values_exact(model, sector);
    let g = model.g().clone();
    let round = |v: &[Rational]| v.iter().map(|q| (T::from_rational(q) * g.clone()).to_f64()).collect();
    (round(&a), round(&c))
}

/// `A(n)/g` and `C(n)/g` at the chain points, exactly.
pub fn hop_values_exact<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> (Vec<Rational>, Vec<Rational>) {
    let (a_rat, c_rat) = hop_products(model, sector);
    let n_max = sector.n_max();
    let at = |p: &Polynomial<Rational>, n: usize| p.eval(&int(n as i64));
    ((0..n_max).map(|n| at(&a_rat, n)).collect(), (1..=n_max).map(|n| at(&c_rat, n)).collect())
}

/// Hop coefficients of the sector's Hamiltonian as polynomials in `n`.
pub fn hop_coefficients<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> HopCoefficients<T> {
    let (a_rat, c_rat) = hop_products(model, sector);
    let g = model.g().clone();
    let a = a_rat.map(T::from_rational).scale(&g);
    let c = c_rat.map(T::from_rational).scale(&g);

    // m_i(n) as exact linear polynomials in n.
    let lines: Vec<Polynomial<T>> = (0..model.modes())
        .map(|i| {
            let m0 = sector.occupation_expr(model, i, &sector.nu(0));
            Polynomial::linear(T::from_rational(&m0), T::from_i64(model.step(i)))
        })
        .collect();
    let mut b = Polynomial::zero();
    for i in 0..model.modes() {
        b = &b + &lines[i].scale(&model.w()[i]);
        for j in i..model.modes() {
            b = &b + &(&lines[i] * &lines[j]).scale(model.wq(i, j));
        }
    }
    HopCoefficients { a, b, c }
}

/// Stirling numbers of the second kind `S(j, i)` for `j ≤ max`.
fn stirling2(max: usize) -> Vec<Vec<i64>> {
    let mut s = vec![vec![0i64; max + 1]; max + 1];
    s[0][0] = 1;
    for j in 1..=max {
        for i in 1..=j {
            s[j][i] = i as i64 * s[j - 1][i] + s[j - 1][i - 1];
        }
    }
    s
}

/// Coefficients `c_i` with `Q(n) = Σ_i c_i n(n−1)…(n−i+1)`.
pub fn falling_factorial_coeffs<T: Scalar>(q: &Polynomial<T>) -> Vec<T> {
    let deg = match q.degree() {
        Some(d) => d,
        None => return Vec::new(),
    };
    let s = stirling2(deg);
    (0..=deg)
        .map(|i| {
            (i..=deg).fold(T::zero(), |acc, j| acc + q.coeff(j) * T::from_i64(s[j][i]))
        })
        .collect()
}

/// Expands the sector Hamiltonian into `P_0 … P_M`.
pub fn expand_diffop<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> DiffOpForm<T> {
    let hop = hop_coefficients(model, sector);
    let r = model.r();
    let sum1: u32 = model.k()[..r].iter().sum();
    let sum2: u32 = model.k()[r..].iter().sum();
    let order = (sum1.max(sum2) as usize).max(2);

    let fa = falling_factorial_coeffs(&hop.a);
    let fb = falling_factorial_coeffs(&hop.b);
    let fc = falling_factorial_coeffs(&hop.c);
    let get = |v: &[T], i: usize| v.get(i).cloned().unwrap_or_else(T::zero);

    // C(0) = 0 makes the z^{-1} part of P_0 vanish identically.
    debug_assert!(get(&fc, 0).is_zero(), "C(0) must vanish");

    let p = (0..=order)
        .map(|i| {
            let mut coeffs = vec![T::zero(); i + 2];
            coeffs[i + 1] = get(&fa, i);
            coeffs[i] = get(&fb, i);
            if i > 0 {
                coeffs[i - 1] = get(&fc, i);
            }
            Polynomial::new(coeffs)
        })
        .collect();
    DiffOpForm { order, n_max: sector.n_max(), p, hop }
}

impl<T: Clone + Num> DiffOpForm<T> {
    /// `(Hψ)(z) = Σ_i P_i(z) ψ^{(i)}(z)` for `deg ψ ≤ N`.
    pub fn apply(&self, psi: &Polynomial<T>) -> Result<Polynomial<T>> {
        if let Some(d) = psi.degree() {
            if d > self.n_max {
                return Err(Error::DegreeOverflow { degree: d, bound: self.n_max });
            }
        }
        Ok(self.apply_unchecked(psi))
    }

    /// Same as [`DiffOpForm::apply`] without the subspace bound; used for
    /// Jacobian columns and tests beyond `N`.
    pub fn apply_unchecked(&self, psi: &Polynomial<T>) -> Polynomial<T> {
        let mut out = Polynomial::zero();
        let mut deriv = psi.clone();
        for p in &self.p {
            if deriv.is_zero() {
                break;
            }
            out = &out + &(p * &deriv);
            deriv = deriv.derivative();
        }
        out
    }

    /// `H` applied through the hop form, `Σ_n c_n (A(n) z^{n+1} + B(n) z^n + C(n) z^{n−1})`.
    pub fn apply_hop(&self, psi: &Polynomial<T>) -> Polynomial<T> {
        let mut out = vec![T::zero(); psi.coeffs().len() + 1];
        for (n, c) in psi.coeffs().iter().enumerate() {
            let nn: T = from_usize(n);
            out[n + 1] = out[n + 1].clone() + c.clone() * self.hop.a.eval(&nn);
            out[n] = out[n].clone() + c.clone() * self.hop.b.eval(&nn);
            if n > 0 {
                out[n - 1] = out[n - 1].clone() + c.clone() * self.hop.c.eval(&nn);
            }
        }
        Polynomial::new(out)
    }

    pub fn map<U: Clone + Num>(&self, f: impl Fn(&T) -> U + Copy) -> DiffOpForm<U> {
        DiffOpForm {
            order: self.order,
            n_max: self.n_max,
            p: self.p.iter().map(|p| p.map(f)).collect(),
            hop: HopCoefficients { a: self.hop.a.map(f), b: self.hop.b.map(f), c: self.hop.c.map(f) },
        }
    }
}

impl<T: Scalar> DiffOpForm<T> {
    pub fn to_f64(&self) -> DiffOpForm<f64> {
        self.map(|c| c.to_f64())
    }

    pub fn to_complex(&self) -> DiffOpForm<Complex64> {
        self.map(|c| Complex64::new(c.to_f64(), 0.0))
    }

    /// Whether `A(N) = 0` and `C(0) = 0` hold exactly.
    pub fn is_quasi_exactly_solvable(&self) -> bool {
        let n = T::from_i64(self.n_max as i64);
        self.hop.a.eval(&n).is_zero() && self.hop.c.eval(&T::zero()).is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::sector_from_occupations;
    use crate::scalar::int;

    fn model_a(g: f64) -> ModelSpec<f64> {
        ModelSpec::with_interaction_only(2, 1, vec![1, 1, 1], g).unwrap()
    }

    #[test]
    fn hop_polynomials_model_a() {
        let m = model_a(1.0);
        let sec = sector_from_occupations(&m, &[0, 0, 1]).unwrap();
        let hop = hop_coefficients(&m, &sec);
        assert_eq!(hop.a.coeffs(), &[1.0, -1.0]);
        assert_eq!(hop.c.coeffs(), &[0.0, 0.0, 1.0]);
        assert!(hop.b.is_zero());
    }

    #[test]
    fn diffop_model_a_two_level() {
        let m = model_a(1.0);
        let sec = sector_from_occupations(&m, &[0, 0, 1]).unwrap();
        let op = expand_diffop(&m, &sec);
        assert_eq!(op.order, 2);
        // H·1 = A(0) z, so P_0 = g N z with N = 1.
        assert_eq!(op.p[0].coeffs(), &[0.0, 1.0]);
        assert_eq!(op.p[1].coeffs(), &[1.0, 0.0, -1.0]);
        assert_eq!(op.p[2].coeffs(), &[0.0, 1.0]);

        let plus = Polynomial::new(vec![1.0, 1.0]);
        assert_eq!(op.apply(&plus).unwrap(), plus);
        let minus = Polynomial::new(vec![1.0, -1.0]);
        assert_eq!(op.apply(&minus).unwrap(), minus.scale(&-1.0));
        let top = Polynomial::monomial(1.0, 1);
        assert!(op.apply(&top).unwrap().coeff(2) == 0.0);
        assert!(matches!(
            op.apply(&Polynomial::monomial(1.0, 2)),
            Err(Error::DegreeOverflow { .. })
        ));
    }

    #[test]
    fn falling_factorial_round_trip() {
        // n³ = n(n−1)(n−2) + 3 n(n−1) + n
        let p = Polynomial::new(vec![int(0), int(0), int(0), int(1)]);
        assert_eq!(falling_factorial_coeffs(&p), vec![int(0), int(1), int(3), int(1)]);
    }

    #[test]
    fn exact_reassembly_and_closure() {
        let w: Vec<Rational> = (0..4).map(|i| rational(2 * i - 3, 5)).collect();
        let wq: Vec<Rational> = (0..10).map(|i| rational(i - 4, 7)).collect();
        let m = ModelSpec::new(2, 2, vec![1, 2, 1, 3], w, wq, rational(3, 2)).unwrap();
        let sec = sector_from_occupations(&m, &[3, 4, 5, 7]).unwrap();
        let op = expand_diffop(&m, &sec);
        assert!(op.is_quasi_exactly_solvable());
        assert_eq!(op.order, 4);
        for n in 0..=sec.n_max() + 2 {
            let zn = Polynomial::monomial(int(1), n);
            assert_eq!(op.apply_unchecked(&zn), op.apply_hop(&zn), "n = {n}");
        }
        assert_eq!(op.hop.a.degree(), Some(4));
        assert_eq!(op.hop.c.degree(), Some(3));
        assert!(op.hop.b.degree().unwrap() <= 2);
        for (i, p) in op.p.iter().enumerate().skip(1) {
            assert!(p.degree().is_none_or(|d| d <= i + 1));
        }
    }
}
