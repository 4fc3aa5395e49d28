//! Polynomial deformations of sl(2).
//!
//! Single-mode realization `Q_± = (a^†)^k / k^{k/2}`, `Q_0 = (N + 1/k)/k`
//! closes on `[Q_+, Q_−] = φ(Q_0) − φ(Q_0 − 1)` with a degree-`k` structure
//! polynomial `φ`. Two groups of modes combine into the finite-dimensional
//! algebra `P_± , P_0` whose irreducible representations are the sectors of
//! [`crate::fock`].

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::fock::{occupations_at, ModelSpec, Sector};
use crate::poly::Polynomial;
use crate::scalar::{int, rational, rational_to_f64, Rational, Scalar};

/// Occupations above which factorial ratios are accumulated in log space.
pub const LOG_SPACE_THRESHOLD: u64 = 20;

/// `φ^(k)(x) = −∏_{i=1}^k (x + (ik−1)/k²) + ∏_{i=1}^k ((i−k)/k − 1/k²)`.
pub fn phi_polynomial(k: u32, x: &Rational) -> Rational {
    phi_as_polynomial(k).eval(x)
}

/// `φ^(k)` as an exact polynomial in `Q_0`.
pub fn phi_as_polynomial(k: u32) -> Polynomial<Rational> {
    let kk = k as i64;
    let factors: Vec<Polynomial<Rational>> = (1..=kk)
        .map(|i| Polynomial::linear(rational(i * kk - 1, kk * kk), int(1)))
        .collect();
    let product = Polynomial::product(&factors);
    &(-&product) + &Polynomial::constant(casimir_value(k))
}

/// Value of `Q_− Q_+ + φ(Q_0)` in the one-mode boson realization:
/// `∏_{j=1}^k ((j−k)/k − 1/k²)`.
pub fn casimir_value(k: u32) -> Rational {
    let kk = k as i64;
    (1..=kk).fold(Rational::one(), |acc, j| acc * (rational(j - kk, kk) - rational(1, kk * kk)))
}

/// One-mode generators on the Fock levels `0..trunc`.
#[derive(Clone, Debug)]
pub struct TruncatedGeneratorSet {
    pub k: u32,
    pub trunc: usize,
    pub qplus: DMatrix<f64>,
    pub qminus: DMatrix<f64>,
    pub qzero: DMatrix<f64>,
}

impl TruncatedGeneratorSet {
    pub fn new(k: u32, trunc: usize) -> Self {
        let kk = k as usize;
        let norm = (k as f64).powf(k as f64 / 2.0);
        let mut qplus = DMatrix::zeros(trunc, trunc);
        for m in 0..trunc.saturating_sub(kk) {
            let ratio: f64 = (m + 1..=m + kk).map(|v| v as f64).product();
            qplus[(m + kk, m)] = ratio.sqrt() / norm;
        }
        let qminus = qplus.transpose();
        let qzero = DMatrix::from_fn(trunc, trunc, |i, j| {
            if i == j {
                (i as f64 + 1.0 / k as f64) / k as f64
            } else {
                0.0
            }
        });
        TruncatedGeneratorSet { k, trunc, qplus, qminus, qzero }
    }

    /// Diagonal matrix `f(Q_0)` for an exact function of the `Q_0` eigenvalue.
    fn diag_fn(&self, shift: i64) -> DMatrix<f64> {
        let k = self.k as i64;
        DMatrix::from_fn(self.trunc, self.trunc, |i, j| {
            if i == j {
                let q0 = rational(i as i64 * k + 1, k * k) - int(shift);
                rational_to_f64(&phi_polynomial(self.k, &q0))
            } else {
                0.0
            }
        })
    }

    /// Basis states far enough from the cutoff for the identities to hold.
    pub fn interior(&self) -> usize {
        self.trunc.saturating_sub(2 * self.k as usize)
    }

    fn max_interior_column_norm(&self, m: &DMatrix<f64>) -> f64 {
        (0..=self.interior().min(self.trunc - 1))
            .map(|c| m.column(c).amax())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `[Q_0, Q_±] ∓ Q_±` on interior states.
    pub fn ladder_residual(&self) -> f64 {
        let plus = &self.qzero * &self.qplus - &self.qplus * &self.qzero - &self.qplus;
        let minus = &self.qzero * &self.qminus - &self.qminus * &self.qzero + &self.qminus;
        self.max_interior_column_norm(&plus).max(self.max_interior_column_norm(&minus))
    }

    /// Largest deviation of `[Q_+, Q_−] − (φ(Q_0) − φ(Q_0 − 1))` on interior states.
    pub fn commutator_residual(&self) -> f64 {
        let comm = &self.qplus * &self.qminus - &self.qminus * &self.qplus;
        let rhs = self.diag_fn(0) - self.diag_fn(1);
        self.max_interior_column_norm(&(comm - rhs))
    }

    /// Largest deviation of `Q_− Q_+ + φ(Q_0) − C` on interior states.
    pub fn casimir_residual(&self) -> f64 {
        let c = rational_to_f64(&casimir_value(self.k));
        let cas = &self.qminus * &self.qplus + self.diag_fn(0)
            - DMatrix::<f64>::identity(self.trunc, self.trunc) * c;
        self.max_interior_column_norm(&cas)
    }
}

/// Outcome of one algebra identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub k: u32,
    pub identity: &'static str,
    pub max_error: f64,
    pub pass: bool,
}

/// Runs the one-mode identities for a single `k`.
pub fn verify_single_mode(k: u32, trunc: usize, tol: f64) -> Vec<IdentityCheck> {
    let gens = TruncatedGeneratorSet::new(k, trunc);
    let mut checks: Vec<IdentityCheck> = [
        ("[Q0,Q+-] = +-Q+-", gens.ladder_residual()),
        ("[Q+,Q-] = phi(Q0) - phi(Q0-1)", gens.commutator_residual()),
        ("Q-Q+ + phi(Q0) = C", gens.casimir_residual()),
    ]
    .into_iter()
    .map(|(identity, max_error)| IdentityCheck { k, identity, max_error, pass: max_error <= tol })
    .collect();

    // Degree and leading coefficient via exact k-th finite difference:
    // Δ^k φ = k! · leading coefficient for a degree-k polynomial.
    let values: Vec<Rational> = (0..=k as i64 + 1).map(|x| phi_polynomial(k, &int(x))).collect();
    let mut diffs = values;
    for _ in 0..k {
        diffs = diffs.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    let factorial = (1..=k as i64).fold(Rational::one(), |a, b| a * int(b));
    let leading = &diffs[0] / &factorial;
    let constant_kth = diffs.windows(2).all(|w| w[0] == w[1]);
    let degree_ok = constant_kth && leading == -Rational::one() && phi_as_polynomial(k).degree() == Some(k as usize);
    checks.push(IdentityCheck {
        k,
        identity: "phi has degree k, leading coefficient -1",
        max_error: if degree_ok { 0.0 } else { rational_to_f64(&(leading + Rational::one())).abs().max(1.0) },
        pass: degree_ok,
    });
    checks
}

/// Matrix elements of `P_0`, `P_±` in one sector.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderCoefficients {
    /// `P_0` eigenvalue per level.
    pub diag: Vec<f64>,
    /// `⟨n+1| P_+ |n⟩`.
    pub up: Vec<f64>,
    /// `⟨n| P_− |n+1⟩`, computed from the lowering formula.
    pub down: Vec<f64>,
}

/// Exact `⟨n+1|P_+|n⟩²` from the quantum-number product formula.
pub fn raising_product(model: &ModelSpec<impl Scalar>, sector: &Sector, n: usize) -> Rational {
    let nu = sector.nu(n);
    let q_r = sector.q_r();
    let r = sector.r();
    let mut acc = Rational::one();
    for (j, &kj) in model.k()[r..].iter().enumerate() {
        let kj = kj as i64;
        let base = int(2) * sector.kappa() - &nu - q_r - sector.t() + sector.s2(j);
        for i in 1..=kj {
            acc *= &base - rational((i - 1) * kj + 1, kj * kj);
        }
    }
    for (j, &kj) in model.k()[..r].iter().enumerate() {
        let kj = kj as i64;
        let base = &nu + q_r + sector.s1(j);
        for i in 1..=kj {
            acc *= &base + rational(i * kj - 1, kj * kj);
        }
    }
    acc
}

/// Exact `⟨n−1|P_−|n⟩²` from the lowering product formula at level `n`.
pub fn lowering_product(model: &ModelSpec<impl Scalar>, sector: &Sector, n: usize) -> Rational {
    let nu = sector.nu(n);
    let q_r = sector.q_r();
    let r = sector.r();
    let mut acc = Rational::one();
    for (j, &kj) in model.k()[r..].iter().enumerate() {
        let kj = kj as i64;
        let base = int(2) * sector.kappa() - &nu - q_r - sector.t() + sector.s2(j);
        for i in 1..=kj {
            acc *= &base + rational(i * kj - 1, kj * kj);
        }
    }
    for (j, &kj) in model.k()[..r].iter().enumerate() {
        let kj = kj as i64;
        let base = &nu + q_r + sector.s1(j);
        for i in 1..=kj {
            acc *= &base - rational((i - 1) * kj + 1, kj * kj);
        }
    }
    acc
}

fn sqrt_checked(value: &Rational, level: usize) -> Result<f64> {
    if value.is_negative() {
        return Err(Error::NegativeSqrtArgument { level, value: rational_to_f64(value) });
    }
    Ok(rational_to_f64(value).sqrt())
}

/// `P_0`, `P_±` matrix elements of the sector's irreducible representation.
pub fn ladder_coefficients(model: &ModelSpec<impl Scalar>, sector: &Sector) -> Result<LadderCoefficients> {
    let n_max = sector.n_max();
    let r = sector.r() as i64;
    let s1_avg = (0..sector.r()).map(|i| sector.s1(i)).fold(Rational::zero(), |a, b| a + b) / int(r);
    let diag = (0..=n_max)
        .map(|n| rational_to_f64(&(-sector.kappa() + sector.q_r() + sector.nu(n) + &s1_avg)))
        .collect();
    let up = (0..n_max)
        .map(|n| sqrt_checked(&raising_product(model, sector, n), n))
        .collect::<Result<Vec<_>>>()?;
    let down = (1..=n_max)
        .map(|n| sqrt_checked(&lowering_product(model, sector, n), n))
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderCoefficients { diag, up, down })
}

/// `P_0` eigenvalue at level `n`, exact.
pub fn p0_value(sector: &Sector, n: usize) -> Rational {
    let r = sector.r() as i64;
    let s1_avg = (0..sector.r()).map(|i| sector.s1(i)).fold(Rational::zero(), |a, b| a + b) / int(r);
    -sector.kappa() + sector.q_r() + sector.nu(n) + s1_avg
}

/// `∏_{i≤r} φ_1^{(k_i)}(p) ∏_{i>r} φ_2^{(k_i)}(p)` with the sector's central
/// values substituted. `[P_+, P_−] = −F(P_0) + F(P_0 − 1)`.
pub fn structure_function(model: &ModelSpec<impl Scalar>, sector: &Sector, p: &Rational) -> Rational {
    let (r, s) = (sector.r(), sector.s());
    let s1_avg = (0..r).map(|i| sector.s1(i)).fold(Rational::zero(), |a, b| a + b) / int(r as i64);
    let s2_avg = (0..s).map(|j| sector.s2(j)).fold(Rational::zero(), |a, b| a + b) / int(s as i64);
    let mut acc = Rational::one();
    for (i, &ki) in model.k()[..r].iter().enumerate() {
        let ki = ki as i64;
        let base = sector.kappa() + p + sector.s1(i) - &s1_avg;
        for j in 1..=ki {
            acc *= &base + rational(j * ki - 1, ki * ki);
        }
    }
    for (i, &ki) in model.k()[r..].iter().enumerate() {
        let ki = ki as i64;
        let base = sector.kappa() - p - int(1) + sector.s2(i) - &s2_avg;
        for j in 1..=ki {
            acc *= &base + rational(j * ki - 1, ki * ki);
        }
    }
    acc
}

/// Exact residual of `[P_+, P_−] = −F(P_0) + F(P_0 − 1)` on every level of
/// the sector, using the squared ladder products.
pub fn p_algebra_residuals(model: &ModelSpec<impl Scalar>, sector: &Sector) -> Vec<Rational> {
    let n_max = sector.n_max();
    (0..=n_max)
        .map(|n| {
            let into_n = if n > 0 { raising_product(model, sector, n - 1) } else { Rational::zero() };
            let out_of_n = if n < n_max { raising_product(model, sector, n) } else { Rational::zero() };
            let lhs = into_n - out_of_n;
            let p = p0_value(sector, n);
            let rhs = -structure_function(model, sector, &p) + structure_function(model, sector, &(&p - int(1)));
            lhs - rhs
        })
        .collect()
}

/// `⟨m + δ| ∏_{i≤r} a_i^{†k_i} ∏_{i>r} a_i^{k_i} |m⟩` for the raising
/// interaction, without the `k^{k/2}` normalization. Zero when an
/// annihilation-group mode has fewer than `k_i` bosons.
pub fn raising_element(model: &ModelSpec<impl Scalar>, occupations: &[u64]) -> f64 {
    let r = model.r();
    let k = model.k();
    let mut factors: Vec<u64> = Vec::new();
    for (i, &m) in occupations.iter().enumerate() {
        let ki = k[i] as u64;
        if i < r {
            factors.extend(m + 1..=m + ki);
        } else {
            if m < ki {
                return 0.0;
            }
            factors.extend(m - ki + 1..=m);
        }
    }
    let large = occupations.iter().any(|&m| m > LOG_SPACE_THRESHOLD);
    if large {
        (0.5 * factors.iter().map(|&f| (f as f64).ln()).sum::<f64>()).exp()
    } else {
        (factors.iter().map(|&f| f as u128).product::<u128>() as f64).sqrt()
    }
}

/// `∏_i (√k_i)^{k_i}`.
pub fn generator_normalization(model: &ModelSpec<impl Scalar>) -> f64 {
    model.k().iter().map(|&k| (k as f64).powf(k as f64 / 2.0)).product()
}

/// `⟨n+1|P_+|n⟩` from the boson matrix element at `occupations_at(n)`.
pub fn direct_up(model: &ModelSpec<impl Scalar>, sector: &Sector, n: usize) -> Result<f64> {
    let occ = occupations_at(sector, model, n)?;
    Ok(raising_element(model, &occ) / generator_normalization(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::sector_from_occupations;

    #[test]
    fn phi_values() {
        assert_eq!(phi_polynomial(1, &int(0)), int(-1));
        for x in -3..4 {
            assert_eq!(phi_polynomial(1, &int(x)), int(-x - 1));
        }
        assert_eq!(phi_polynomial(2, &rational(1, 4)), rational(-5, 16));
        assert_eq!(phi_polynomial(2, &int(0)), int(0));
        // φ^(2)(x) = −x² − x
        assert_eq!(phi_as_polynomial(2).coeffs(), &[int(0), int(-1), int(-1)]);
    }

    #[test]
    fn casimir_values() {
        assert_eq!(casimir_value(2), rational(3, 16));
        assert_eq!(casimir_value(1), int(-1));
        assert_eq!(casimir_value(3), rational(-28, 729));
    }

    #[test]
    fn single_mode_identities() {
        for k in 1..=4 {
            for check in verify_single_mode(k, 6 * k as usize, 1e-12) {
                assert!(check.pass, "{check:?}");
            }
        }
    }

    #[test]
    fn truncation_breaks_identities_at_the_edge() {
        // The excluded top levels really are where the commutator fails.
        let gens = TruncatedGeneratorSet::new(2, 12);
        let comm = &gens.qplus * &gens.qminus - &gens.qminus * &gens.qplus;
        let rhs = gens.diag_fn(0) - gens.diag_fn(1);
        let top = gens.trunc - 1;
        assert!((comm - rhs).column(top).amax() > 1e-3);
    }

    #[test]
    fn generator_structure() {
        let g = TruncatedGeneratorSet::new(3, 18);
        assert_eq!(g.qplus.transpose(), g.qminus);
        for i in 0..18 {
            for j in 0..18 {
                if g.qplus[(i, j)] != 0.0 {
                    assert_eq!(i, j + 3);
                }
            }
        }
    }

    #[test]
    fn ladder_examples() {
        let a = ModelSpec::<f64>::with_interaction_only(2, 1, vec![1, 1, 1], 1.0).unwrap();
        let sec = sector_from_occupations(&a, &[0, 0, 1]).unwrap();
        let lad = ladder_coefficients(&a, &sec).unwrap();
        assert_eq!(lad.up, vec![1.0]);
        assert_eq!(lad.down, lad.up);

        let b = ModelSpec::<f64>::with_interaction_only(2, 1, vec![1, 1, 2], 1.0).unwrap();
        let sec = sector_from_occupations(&b, &[2, 1, 4]).unwrap();
        let lad = ladder_coefficients(&b, &sec).unwrap();
        // ⟨2,1,4| a1† a2† a3² |1,0,6⟩ / (√2)² = √(2·1·6·5)/2
        assert!((lad.up[0] - 60f64.sqrt() / 2.0).abs() < 1e-14);
        for n in 0..sec.n_max() {
            let direct = direct_up(&b, &sec, n).unwrap();
            assert!((lad.up[n] - direct).abs() <= 1e-12 * direct.abs());
            assert_eq!(lad.up[n], lad.down[n]);
        }
        // Lowering from the base state vanishes.
        assert!(lowering_product(&b, &sec, 0).is_zero());
    }

    #[test]
    fn p_algebra_closes_exactly() {
        for (r, s, k, occ) in [
            (2, 1, vec![1, 1, 2], vec![2u64, 1, 4]),
            (2, 2, vec![1, 2, 1, 3], vec![3, 4, 5, 7]),
            (3, 1, vec![2, 1, 1, 2], vec![5, 2, 3, 9]),
            (1, 3, vec![3, 1, 2, 1], vec![2, 6, 7, 4]),
        ] {
            let m = ModelSpec::<f64>::with_interaction_only(r, s, k, 1.0).unwrap();
            let sec = sector_from_occupations(&m, &occ).unwrap();
            for res in p_algebra_residuals(&m, &sec) {
                assert!(res.is_zero(), "{res}");
            }
        }
    }

    #[test]
    fn log_space_agrees_with_exact() {
        let m = ModelSpec::<f64>::with_interaction_only(1, 1, vec![2, 3], 1.0).unwrap();
        let small = raising_element(&m, &[20, 20]);
        let exact = ((21.0f64 * 22.0) * (18.0 * 19.0 * 20.0)).sqrt();
        assert!((small - exact).abs() < 1e-12 * exact);
        let big = raising_element(&m, &[21, 20]);
        let exact = ((22.0f64 * 23.0) * (18.0 * 19.0 * 20.0)).sqrt();
        assert!((big - exact).abs() < 1e-12 * exact);
    }
}
