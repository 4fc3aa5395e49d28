//! Functional Bethe ansatz: eigenfunctions `ψ(z) = ∏ (z − α_i)` of the
//! sector differential operator, the equations for their roots, and the
//! closed-form energy in terms of `Σ α_i`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dd::{polish_roots, PreciseBlock, PreciseOperator};
use crate::diffop::DiffOpForm;
use crate::error::{Error, Result};
use crate::fock::{ModelSpec, Sector};
use crate::hamiltonian::{build_monomial_matrix, build_sector_matrix, diagonalize, twisted_eigenvector};
use crate::poly::Polynomial;
use crate::roots::{canonical_sort, min_separation, roots_from_log_coeffs, DEFAULT_DEFLATION};
use crate::scalar::{int, rational, rational_to_f64, Rational, Scalar};

/// Numerical settings for root solving and validation.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Newton target for the scaled robust residual.
    pub tol: f64,
    /// Largest scaled residual accepted when validating a level.
    pub accept_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub direct: bool,
    pub starts: usize,
    /// Relative energy agreement required against the oracle.
    pub energy_tol: f64,
    pub dedup_tol: f64,
    /// Roots closer than `degenerate_tol · max(1, max|α|)` count as coincident.
    pub degenerate_tol: f64,
    pub deflation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            accept_tol: 1e-10,
            max_iter: 50,
            seed: 0,
            direct: false,
            starts: 64,
            energy_tol: 1e-8,
            dedup_tol: 1e-7,
            degenerate_tol: 1e-6,
            deflation: DEFAULT_DEFLATION,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionSource {
    /// Companion-matrix roots of the oracle eigenvector, unrefined.
    Extracted,
    /// Extracted roots after Newton refinement.
    Refined,
    /// Found by multi-start Newton on the Bethe equations alone.
    Direct,
}

impl fmt::Display for SolutionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionSource::Extracted => "extracted",
            SolutionSource::Refined => "refined",
            SolutionSource::Direct => "direct",
        })
    }
}

/// One eigenlevel in Bethe form.
#[derive(Clone, Debug, PartialEq)]
pub struct BetheSolution {
    pub level: usize,
    /// Canonically sorted.
    pub roots: Vec<Complex64>,
    /// Closed-form energy, or the oracle energy for reduced-degree levels.
    pub energy: f64,
    /// Closed-form energy from the roots; `None` when the degree is reduced.
    pub closed_form_energy: Option<f64>,
    /// Eigenvalue of the monomial block the roots were extracted from.
    pub oracle_energy: f64,
    /// Scaled max product-form residual; `None` for degenerate root sets.
    pub residual_product: Option<f64>,
    /// Scaled max `|(Hψ)(α_p)|`.
    pub residual_robust: f64,
    pub source: SolutionSource,
    pub degenerate: bool,
    pub reduced: bool,
    pub iterations: usize,
}

/// `(Hψ)(α_p)` for monic `ψ` with the given roots.
pub fn robust_residuals(op: &DiffOpForm<Complex64>, roots: &[Complex64]) -> Vec<Complex64> {
    let hpsi = op.apply_unchecked(&Polynomial::from_roots(roots));
    roots.iter().map(|a| hpsi.eval(a)).collect()
}

/// Rounding-error scale of each robust residual: `(|H| |ψ|)(|α_p|)` with
/// `|H|` and `|ψ|` the coefficientwise absolute values.
pub fn robust_scales(op: &DiffOpForm<Complex64>, roots: &[Complex64]) -> Vec<f64> {
    let abs_op = op.map(|c| Complex64::new(c.norm(), 0.0));
    let bound = abs_op.apply_unchecked(&Polynomial::from_roots(roots).abs_coeffs());
    roots.iter().map(|a| bound.abs_eval(*a)).collect()
}

/// `max_p |(Hψ)(α_p)| / (|H| |ψ|)(|α_p|)`.
pub fn scaled_robust_residual(op: &DiffOpForm<Complex64>, roots: &[Complex64]) -> f64 {
    let res = robust_residuals(op, roots);
    let scales = robust_scales(op, roots);
    scaled_max(&res, &scales)
}

pub(crate) fn scaled_max(res: &[Complex64], scales: &[f64]) -> f64 {
    res.iter()
        .zip(scales)
        .map(|(r, s)| if r.norm() == 0.0 { 0.0 } else { r.norm() / s.max(f64::MIN_POSITIVE) })
        .fold(0.0, f64::max)
}

/// Elementary symmetric polynomials `e_0 … e_{max}` of `xs`.
fn elementary_symmetric(xs: impl Iterator<Item = Complex64>, max: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); max + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for x in xs {
        for j in (1..=max).rev() {
            e[j] = e[j] + e[j - 1] * x;
        }
    }
    e
}

fn factorial(i: usize) -> f64 {
    (1..=i).map(|v| v as f64).product()
}

/// Product-form residual of root `p` and its rounding scale:
/// `Σ_{i≥1} P_i(α_p) i! e_{i−1}({1/(α_p − α_m)}_{m≠p})`.
fn product_component(op: &DiffOpForm<Complex64>, roots: &[Complex64], p: usize) -> (Complex64, f64) {
    let a = roots[p];
    let inv = roots
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != p)
        .map(|(_, b)| 1.0 / (a - b));
    let e = elementary_symmetric(inv.clone(), op.order);
    let e_abs = elementary_symmetric(inv.map(|x| Complex64::new(x.norm(), 0.0)), op.order);
    let mut value = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for i in 1..op.p.len() {
        let f = factorial(i);
        value += op.p[i].eval(&a) * f * e[i - 1];
        scale += op.p[i].abs_eval(a) * f * e_abs[i - 1].re;
    }
    (value, scale)
}

/// Bethe equations in the form `Σ_i P_i(α_p) i! Σ_{subsets} ∏ 1/(α_p − α_m)`,
/// which equals `(Hψ)(α_p)/ψ'(α_p)`. Rejects roots closer than `min_sep`.
pub fn bethe_residuals(op: &DiffOpForm<Complex64>, roots: &[Complex64], min_sep: f64) -> Result<Vec<Complex64>> {
    check_separation(roots, min_sep)?;
    Ok((0..roots.len()).map(|p| product_component(op, roots, p).0).collect())
}

/// Scaled max product-form residual.
pub fn scaled_product_residual(op: &DiffOpForm<Complex64>, roots: &[Complex64], min_sep: f64) -> Result<f64> {
    check_separation(roots, min_sep)?;
    let (res, scales): (Vec<_>, Vec<_>) = (0..roots.len()).map(|p| product_component(op, roots, p)).unzip();
    Ok(scaled_max(&res, &scales))
}

fn check_separation(roots: &[Complex64], min_sep: f64) -> Result<()> {
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).norm() < min_sep {
                return Err(Error::CoincidentRoots { i, j, threshold: min_sep });
            }
        }
    }
    Ok(())
}

fn root_scale(roots: &[Complex64]) -> f64 {
    roots.iter().fold(1.0f64, |a, z| a.max(z.norm()))
}

/// Whether two roots lie within `tol · max(1, max|α|)` of each other.
pub fn is_degenerate(roots: &[Complex64], tol: f64) -> bool {
    min_separation(roots) < tol * root_scale(roots)
}

/// `−g ∏_{j>r} ∏_i k_j(q_{r+s} + 1 + s_j^(2) − ((i−1)k_j+1)/k_j²)`: the factor
/// multiplying `Σ α_i` in the energy.
pub fn energy_prefactor<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> f64 {
    let r = model.r();
    let q2 = sector.top_q2();
    let mut prod = int(1);
    for (j, &kj) in model.k()[r..].iter().enumerate() {
        let kj = kj as i64;
        for i in 1..=kj {
            prod = prod * int(kj) * (&q2 + int(1) + sector.s2(j) - rational((i - 1) * kj + 1, kj * kj));
        }
    }
    -model.g().to_f64() * rational_to_f64(&prod)
}

/// Root-independent part of the energy, term by term as in the closed form:
/// quadratic self terms, cross-group terms, intra-group terms, linear terms.
pub fn energy_constant<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> f64 {
    let r = model.r();
    let modes = model.modes();
    let k = model.k();
    let nu = sector.nu(sector.n_max());
    let q2 = sector.top_q2();
    // x_i = k_i(N + q_r + s_i^(1)) − 1/k_i,   x_j = k_j(q_{r+s} + s_j^(2)) − 1/k_j
    let x: Vec<f64> = (0..modes)
        .map(|i| {
            let ki = int(k[i] as i64);
            let inv = rational(1, k[i] as i64);
            let v: Rational = if i < r {
                &ki * (&nu + sector.q_r() + sector.s1(i)) - inv
            } else {
                &ki * (&q2 + sector.s2(i - r)) - inv
            };
            rational_to_f64(&v)
        })
        .collect();
    let wq = |i: usize, j: usize| model.wq(i, j).to_f64();
    let mut e = 0.0;
    for i in 0..modes {
        e += wq(i, i) * x[i] * x[i];
    }
    for j in r..modes {
        for i in 0..r {
            e += wq(i, j) * x[i] * x[j];
        }
    }
    for j in 1..r {
        for i in 0..j {
            e += wq(i, j) * x[i] * x[j];
        }
    }
    for j in r + 1..modes {
        for i in r..j {
            e += wq(i, j) * x[i] * x[j];
        }
    }
    for i in 0..modes {
        e += model.w()[i].to_f64() * x[i];
    }
    e
}

/// Closed-form energy from `N` roots. The imaginary part of `Σ α_i` must
/// cancel to within `tol` relative to the size of the terms.
pub fn energy_from_roots<T: Scalar>(model: &ModelSpec<T>, sector: &Sector, roots: &[Complex64], tol: f64) -> Result<f64> {
    if roots.len() != sector.n_max() {
        return Err(Error::RootCount { expected: sector.n_max(), got: roots.len() });
    }
    let sum: Complex64 = roots.iter().sum();
    let pre = energy_prefactor(model, sector);
    let constant = energy_constant(model, sector);
    let imag = (pre * sum.im).abs();
    let size = constant.abs().max(pre.abs() * roots.iter().map(|z| z.norm()).sum::<f64>()).max(1.0);
    if imag > tol * size {
        return Err(Error::ComplexEnergy { imag, tol });
    }
    Ok(constant + pre * sum.re)
}

struct NewtonOutcome {
    roots: Vec<Complex64>,
    iterations: usize,
}

const MAX_HALVINGS: usize = 10;
const SVD_CUTOFF: f64 = 1e-15;
/// Relative step size below which further iterations cannot change the roots.
const STEP_FLOOR: f64 = 4.0 * f64::EPSILON;

/// Damped Newton on `F(α) = r(α)` where `residual` is the scaled max of `r`.
fn damped_newton(
    mut roots: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
    residual: impl Fn(&[Complex64]) -> (DVector<Complex64>, f64),
    jac: impl Fn(&[Complex64]) -> DMatrix<Complex64>,
) -> NewtonOutcome {
    let (mut f, mut current) = residual(&roots);
    let mut iterations = 0;
    while current > tol && iterations < max_iter {
        iterations += 1;
        let j = jac(&roots);
        let svd = j.svd(true, true);
        // Directions below the rounding level of J are noise, not information.
        let cutoff = svd.singular_values.max() * SVD_CUTOFF;
        let solved = svd.solve(&f, cutoff).ok();
        let step = match solved {
            Some(s) if s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => s,
            _ => break,
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<Complex64> = roots.iter().zip(step.iter()).map(|(a, d)| a - d * lambda).collect();
            let (ft, rt) = residual(&trial);
            if rt < current {
                let settled = step.iter().zip(&roots).all(|(d, a)| (d * lambda).norm() <= STEP_FLOOR * a.norm().max(f64::MIN_POSITIVE));
                roots = trial;
                f = ft;
                current = rt;
                improved = !settled;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    NewtonOutcome { roots, iterations }
}

/// Newton refinement of a root set on the robust residuals, evaluated in
/// double-double. Iterates until the residual stops decreasing or
/// `max_iter`.
///
/// With `trace`, the system is augmented by `Σ α = trace` and solved in the
/// least-squares sense. Near-multiple clusters leave directions that the
/// residuals cannot resolve, and `Σ α` drifts along them; the extra row pins
/// it to the value read off the polynomial's coefficients.
pub fn refine_roots(op: &PreciseOperator, roots: &[Complex64], trace: Option<f64>, max_iter: usize) -> (Vec<Complex64>, f64, usize) {
    // Scales are frozen at the start so the merit cannot drop by inflating them.
    let scales = robust_scales(op.rounded(), roots);
    let weights: Vec<f64> = scales.iter().map(|s| 1.0 / s.max(f64::MIN_POSITIVE)).collect();
    let sum_scale = roots.iter().map(|z| z.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let out = damped_newton(
        roots.to_vec(),
        f64::EPSILON,
        max_iter,
        |r| {
            let mut res: Vec<Complex64> = op.residuals(r).iter().zip(&weights).map(|(f, w)| f * *w).collect();
            if let Some(t) = trace {
                res.push((r.iter().sum::<Complex64>() - t) / sum_scale);
            }
            // Gauss–Newton steps descend on the 2-norm, not the max-norm.
            let v = DVector::from_vec(res);
            let merit = v.norm();
            (v, merit)
        },
        |r| {
            let mut j = op.jacobian(r);
            for (p, w) in weights.iter().enumerate() {
                j.row_mut(p).scale_mut(*w);
            }
            if trace.is_some() {
                let n = r.len();
                j = j.insert_row(n, Complex64::new(1.0 / sum_scale, 0.0));
            }
            j
        },
    );
    let residual = op.scaled_residual(&out.roots);
    (out.roots, residual, out.iterations)
}

fn finish_roots(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    canonical_sort(&mut roots, 1e-13);
    roots
}

/// Solves every level of the sector: diagonalize the monomial block, extract
/// eigenvector roots, refine them by Newton, and evaluate the closed-form
/// energy. Per-level refinement failures are reported through the residual
/// fields rather than as errors.
pub fn solve_bethe<T: Scalar>(model: &ModelSpec<T>, sector: &Sector, config: &SolverConfig) -> Result<Vec<BetheSolution>> {
    let op = PreciseOperator::new(model, sector);
    let precise = PreciseBlock::new(model, sector)?;
    let block = build_monomial_matrix(model, sector)?;
    let spectrum = diagonalize(&block)?;
    let mut out = Vec::with_capacity(sector.dim());
    for (level, &oracle) in spectrum.energies.iter().enumerate() {
        let coeffs = twisted_eigenvector(&block, oracle);
        let (extracted, reduced) = roots_from_log_coeffs(&coeffs, config.deflation)?;
        let mut trace = coeffs.root_sum(extracted.len());
        let mut start = extracted.clone();
        if !reduced {
            if let Some(monic) = precise.eigenpolynomial(oracle) {
                trace = Some(-f64::from(monic[monic.len() - 2]));
                if let Some(polished) = polish_roots(&monic, &extracted) {
                    if op.scaled_residual(&polished) < op.scaled_residual(&start) {
                        start = polished;
                    }
                }
            }
        }
        let initial = op.scaled_residual(&extracted);
        let (refined, res, iterations) = refine_roots(&op, &start, trace, config.max_iter);
        let refined = finish_roots(refined);
        let (roots, source) = if refined != extracted && res <= initial.max(config.tol) {
            (refined, SolutionSource::Refined)
        } else {
            (extracted, SolutionSource::Extracted)
        };
        out.push(assemble(model, sector, &op, level, roots, oracle, source, reduced, iterations, config));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn assemble<T: Scalar>(
    model: &ModelSpec<T>,
    sector: &Sector,
    op: &PreciseOperator,
    level: usize,
    roots: Vec<Complex64>,
    oracle: f64,
    source: SolutionSource,
    reduced: bool,
    iterations: usize,
    config: &SolverConfig,
) -> BetheSolution {
    let degenerate = is_degenerate(&roots, config.degenerate_tol);
    let residual_robust = op.scaled_residual(&roots);
    let residual_product = if degenerate { None } else { scaled_product_residual(op.rounded(), &roots, 0.0).ok() };
    let closed_form_energy = if reduced { None } else { energy_from_roots(model, sector, &roots, config.energy_tol).ok() };
    BetheSolution {
        level,
        energy: closed_form_energy.unwrap_or(oracle),
        closed_form_energy,
        oracle_energy: oracle,
        roots,
        residual_product,
        residual_robust,
        source,
        degenerate,
        reduced,
        iterations,
    }
}

/// Solutions found by multi-start Newton on the Bethe equations.
#[derive(Clone, Debug)]
pub struct DirectReport {
    pub solutions: Vec<BetheSolution>,
    /// Level of the extracted solution each direct solution coincides with.
    pub matches: Vec<Option<usize>>,
    pub starts: usize,
}

impl DirectReport {
    /// Whether every direct solution is one of the extracted ones.
    pub fn is_subset(&self) -> bool {
        self.matches.iter().all(Option::is_some)
    }
}

fn same_roots(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    let scale = root_scale(a).max(root_scale(b));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale)
}

/// Typical root modulus from the balance of the `z^{n+1}` and `z^{n−1}` hops.
fn start_radius(op: &DiffOpForm<Complex64>) -> f64 {
    let mut logs = Vec::new();
    for n in 0..op.n_max {
        let a = op.hop.a.eval(&Complex64::new(n as f64, 0.0)).norm();
        let c = op.hop.c.eval(&Complex64::new(n as f64 + 1.0, 0.0)).norm();
        if a > 0.0 && c > 0.0 {
            logs.push(0.5 * (c.ln() - a.ln()));
        }
    }
    if logs.is_empty() {
        return 1.0;
    }
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

/// Conjugation-symmetric random root set in a disk of radius `radius`.
fn random_start(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(n);
    while roots.len() < n {
        let re = radius * rng.gen_range(-1.0..1.0);
        if n - roots.len() >= 2 && rng.gen_bool(0.5) {
            let im = radius * rng.gen_range(0.0..1.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    roots
}

/// Multi-start Newton on the product-form equations with a finite-difference
/// Jacobian, seeded from `config.seed`. Converged, non-degenerate solutions
/// are deduplicated and matched against `extracted`.
pub fn solve_direct<T: Scalar>(
    model: &ModelSpec<T>,
    sector: &Sector,
    config: &SolverConfig,
    extracted: &[BetheSolution],
) -> Result<DirectReport> {
    let precise = PreciseOperator::new(model, sector);
    let op = precise.rounded().clone();
    let n = sector.n_max();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let radius = start_radius(&op);
    let mut found: Vec<BetheSolution> = Vec::new();

    let product = |r: &[Complex64]| -> (DVector<Complex64>, f64) {
        let (res, scales): (Vec<_>, Vec<_>) = (0..r.len()).map(|p| product_component(&op, r, p)).unzip();
        let s = scaled_max(&res, &scales);
        let s = if s.is_finite() { s } else { f64::INFINITY };
        (DVector::from_vec(res), s)
    };
    let fd_jacobian = |r: &[Complex64]| -> DMatrix<Complex64> {
        let base = product(r).0;
        let mut j = DMatrix::zeros(r.len(), r.len());
        for q in 0..r.len() {
            let h = 1e-7 * r[q].norm().max(1.0);
            let mut shifted = r.to_vec();
            shifted[q] += h;
            let col = (product(&shifted).0 - &base) / Complex64::new(h, 0.0);
            j.set_column(q, &col);
        }
        j
    };

    if n == 0 {
        if let Some(s) = extracted.first() {
            let mut s = s.clone();
            s.source = SolutionSource::Direct;
            found.push(s);
        }
    } else {
        for _ in 0..config.starts {
            let start = random_start(&mut rng, n, radius);
            if is_degenerate(&start, config.degenerate_tol) {
                continue;
            }
            let out = damped_newton(start, config.tol, config.max_iter, product, fd_jacobian);
            let (roots, _, _) = refine_roots(&precise, &out.roots, None, config.max_iter);
            let roots = finish_roots(roots);
            if is_degenerate(&roots, config.degenerate_tol) || precise.scaled_residual(&roots) > config.accept_tol {
                continue;
            }
            if found.iter().any(|s| same_roots(&s.roots, &roots, config.dedup_tol)) {
                continue;
            }
            let energy = energy_from_roots(model, sector, &roots, config.energy_tol).ok();
            let mut sol = assemble(model, sector, &precise, usize::MAX, roots, f64::NAN, SolutionSource::Direct, false, out.iterations, config);
            sol.energy = energy.unwrap_or(f64::NAN);
            found.push(sol);
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let matches = found
        .iter_mut()
        .map(|s| {
            let hit = extracted.iter().find(|e| same_roots(&e.roots, &s.roots, 1e-6)).map(|e| e.level);
            if let Some(level) = hit {
                s.level = level;
                s.oracle_energy = extracted[level].oracle_energy;
            }
            hit
        })
        .collect();
    Ok(DirectReport { solutions: found, matches, starts: config.starts })
}

/// Diagnostics for one level of a cross-validation run.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub fock_energy: f64,
    pub monomial_energy: f64,
    pub bethe_energy: f64,
    /// `|E_bethe − E_fock|` relative to the spectral radius.
    pub energy_error: f64,
    pub monomial_error: f64,
    pub residual_robust: f64,
    pub residual_product: Option<f64>,
    pub roots: Vec<Complex64>,
    pub source: SolutionSource,
    pub degenerate: bool,
    pub reduced: bool,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub sector: String,
    pub levels: Vec<LevelRecord>,
    pub max_energy_error: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn describe(sector: &Sector) -> String {
    format!(
        "base={:?} N={} kappa={} t={} offset={}",
        sector.base_occupations(),
        sector.n_max(),
        sector.kappa(),
        sector.t(),
        sector.offset()
    )
}

/// Checks supplied solutions against the exact spectrum. Residuals and
/// energies are recomputed from the roots, so corrupted roots are caught.
pub fn validate_solutions<T: Scalar>(
    model: &ModelSpec<T>,
    sector: &Sector,
    solutions: &[BetheSolution],
    config: &SolverConfig,
) -> Result<ValidationReport> {
    let op = PreciseOperator::new(model, sector);
    let fock = diagonalize(&build_sector_matrix(model, sector)?)?.energies;
    let mono = diagonalize(&build_monomial_matrix(model, sector)?)?.energies;
    let scale = fock.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let rel = |d: f64| if scale > 0.0 { d / scale } else { d };

    let mut failures = Vec::new();
    if solutions.len() != fock.len() {
        failures.push(format!("expected {} levels, got {}", fock.len(), solutions.len()));
    }
    let mut levels = Vec::new();
    for sol in solutions {
        let Some(&fock_energy) = fock.get(sol.level) else {
            failures.push(format!("level {} out of range", sol.level));
            continue;
        };
        let monomial_energy = mono[sol.level];
        let degenerate = is_degenerate(&sol.roots, config.degenerate_tol);
        let residual_robust = op.scaled_residual(&sol.roots);
        let residual_product = if degenerate { None } else { scaled_product_residual(op.rounded(), &sol.roots, 0.0).ok() };
        let bethe_energy = if sol.reduced {
            sol.oracle_energy
        } else {
            match energy_from_roots(model, sector, &sol.roots, config.energy_tol) {
                Ok(e) => e,
                Err(e) => {
                    failures.push(format!("level {}: {e}", sol.level));
                    f64::NAN
                }
            }
        };
        let energy_error = rel((bethe_energy - fock_energy).abs());
        let monomial_error = rel((monomial_energy - fock_energy).abs());
        let accepted = residual_robust <= config.accept_tol
            && energy_error <= config.energy_tol
            && monomial_error <= config.energy_tol;
        if !accepted {
            failures.push(format!(
                "level {}: energy error {energy_error:.3e}, monomial error {monomial_error:.3e}, residual {residual_robust:.3e}",
                sol.level
            ));
        }
        levels.push(LevelRecord {
            level: sol.level,
            fock_energy,
            monomial_energy,
            bethe_energy,
            energy_error,
            monomial_error,
            residual_robust,
            residual_product,
            roots: sol.roots.clone(),
            source: sol.source,
            degenerate,
            reduced: sol.reduced,
            accepted,
        });
    }
    let max_energy_error = levels.iter().map(|l| l.energy_error.max(l.monomial_error)).fold(0.0, nan_max);
    let max_residual = levels.iter().map(|l| l.residual_robust).fold(0.0, nan_max);
    Ok(ValidationReport {
        sector: describe(sector),
        pass: failures.is_empty(),
        levels,
        max_energy_error,
        max_residual,
        tol: config.energy_tol,
        failures,
    })
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Fock diagonalization, monomial diagonalization and the Bethe solution,
/// compared level by level. Disagreement is reported, not raised.
pub fn cross_validate<T: Scalar>(model: &ModelSpec<T>, sector: &Sector, config: &SolverConfig) -> Result<ValidationReport> {
    let solutions = solve_bethe(model, sector, config)?;
    validate_solutions(model, sector, &solutions, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::expand_diffop;
    use crate::fock::{occupations_at, sector_from_occupations};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn model_a_unit() -> (ModelSpec<f64>, Sector) {
        let m = ModelSpec::with_interaction_only(2, 1, vec![1, 1, 1], 1.0).unwrap();
        let s = sector_from_occupations(&m, &[0, 0, 1]).unwrap();
        (m, s)
    }

    /// Literal sum over `(i−1)`-subsets of the other roots.
    fn subset_oracle(op: &DiffOpForm<Complex64>, roots: &[Complex64], p: usize) -> Complex64 {
        let others: Vec<Complex64> = roots.iter().enumerate().filter(|(m, _)| *m != p).map(|(_, z)| *z).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for mask in 0u32..(1 << others.len()) {
            let size = mask.count_ones() as usize;
            if size + 1 >= op.p.len() {
                continue;
            }
            let i = size + 1;
            let prod = (0..others.len())
                .filter(|b| mask & (1 << b) != 0)
                .fold(Complex64::new(1.0, 0.0), |acc, b| acc / (roots[p] - others[b]));
            total += op.p[i].eval(&roots[p]) * factorial(i) * prod;
        }
        total
    }

    #[test]
    fn micro_case_residuals() {
        let (m, s) = model_a_unit();
        let op = expand_diffop(&m, &s).to_complex();
        assert_eq!(bethe_residuals(&op, &[c(1.0)], 0.0).unwrap(), vec![c(0.0)]);
        assert_eq!(bethe_residuals(&op, &[c(0.0)], 0.0).unwrap(), vec![c(1.0)]);
        assert_eq!(robust_residuals(&op, &[c(1.0)]), vec![c(0.0)]);
        assert_eq!(robust_residuals(&op, &[c(-1.0)]), vec![c(0.0)]);
        assert!(robust_residuals(&op, &[c(0.0)])[0].norm() > 0.5);
        assert!(matches!(bethe_residuals(&op, &[c(1.0), c(1.0)], 1e-9), Err(Error::CoincidentRoots { .. })));
    }

    #[test]
    fn micro_case_energies_and_solve() {
        let (m, s) = model_a_unit();
        assert_eq!(energy_from_roots(&m, &s, &[c(1.0)], 1e-12).unwrap(), -1.0);
        assert_eq!(energy_from_roots(&m, &s, &[c(-1.0)], 1e-12).unwrap(), 1.0);
        assert!(matches!(energy_from_roots(&m, &s, &[Complex64::new(1.0, 0.5)], 1e-12), Err(Error::ComplexEnergy { .. })));
        let sols = solve_bethe(&m, &s, &SolverConfig::default()).unwrap();
        assert_eq!(sols.len(), 2);
        assert!((sols[0].roots[0] - c(1.0)).norm() < 1e-12 && (sols[0].energy + 1.0).abs() < 1e-12);
        assert!((sols[1].roots[0] - c(-1.0)).norm() < 1e-12 && (sols[1].energy - 1.0).abs() < 1e-12);
        assert!(cross_validate(&m, &s, &SolverConfig::default()).unwrap().pass);
    }

    #[test]
    fn constant_part_is_top_state_energy() {
        let m = ModelSpec::new(2, 2, vec![1, 2, 1, 3], vec![0.3, -0.2, 0.9, 0.1], (0..10).map(|i| 0.1 * i as f64 - 0.4).collect(), 0.7)
            .unwrap();
        for occ in [[3u64, 4, 5, 7], [0, 5, 0, 3], [2, 2, 2, 2]] {
            let s = sector_from_occupations(&m, &occ).unwrap();
            let top = occupations_at(&s, &m, s.n_max()).unwrap();
            let want = m.diagonal_energy(&top);
            assert!((energy_constant(&m, &s) - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn zero_dimensional_sector() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 1], vec![0.5, 0.25, -1.0], vec![0.1; 6], 1.3).unwrap();
        let s = sector_from_occupations(&m, &[0, 3, 0]).unwrap();
        assert_eq!(s.n_max(), 0);
        let sols = solve_bethe(&m, &s, &SolverConfig::default()).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].roots.is_empty());
        assert!((sols[0].energy - energy_constant(&m, &s)).abs() < 1e-15);
        assert!((sols[0].energy - m.diagonal_energy(&[0, 3, 0])).abs() < 1e-12);
    }

    #[test]
    fn product_form_matches_subset_enumeration() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 2], vec![0.3, -0.7, 0.2], vec![0.1, 0.4, -0.2, 0.05, 0.6, 0.3], 0.8).unwrap();
        let s = sector_from_occupations(&m, &[2, 1, 8]).unwrap();
        let op = expand_diffop(&m, &s).to_complex();
        let roots = [Complex64::new(0.3, 0.4), Complex64::new(0.3, -0.4), c(-1.2), c(2.5)];
        let product = bethe_residuals(&op, &roots, 1e-9).unwrap();
        let robust = robust_residuals(&op, &roots);
        let dpsi = Polynomial::from_roots(&roots).derivative();
        for p in 0..roots.len() {
            let lit = subset_oracle(&op, &roots, p);
            assert!((product[p] - lit).norm() <= 1e-12 * lit.norm());
            let lhs = product[p] * dpsi.eval(&roots[p]);
            assert!((lhs - robust[p]).norm() <= 1e-10 * robust[p].norm());
        }
    }

    #[test]
    fn generic_sector_three_way_agreement() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 2], vec![0.3, -0.7, 0.2], vec![0.1, 0.4, -0.2, 0.05, 0.6, 0.3], 0.8).unwrap();
        let s = sector_from_occupations(&m, &[2, 1, 16]).unwrap();
        let report = cross_validate(&m, &s, &SolverConfig::default()).unwrap();
        assert!(report.pass, "{:#?}", report.failures);
    }

    #[test]
    fn corrupted_root_fails_validation() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 1], vec![0.3, -0.7, 0.2], vec![0.1, 0.4, -0.2, 0.05, 0.6, 0.3], 0.7).unwrap();
        let s = sector_from_occupations(&m, &[0, 0, 10]).unwrap();
        let config = SolverConfig::default();
        let mut sols = solve_bethe(&m, &s, &config).unwrap();
        assert!(validate_solutions(&m, &s, &sols, &config).unwrap().pass);
        sols[3].roots[0] += 1e-2;
        let report = validate_solutions(&m, &s, &sols, &config).unwrap();
        assert!(!report.pass);
        assert!(report.levels[3].residual_robust > config.accept_tol);
    }

    #[test]
    fn zero_coupling_levels_are_reduced_and_degenerate() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 1], vec![0.3, -0.7, 0.2], vec![0.0; 6], 0.0).unwrap();
        let s = sector_from_occupations(&m, &[0, 0, 4]).unwrap();
        let config = SolverConfig::default();
        let sols = solve_bethe(&m, &s, &config).unwrap();
        assert!(sols.iter().filter(|x| x.roots.len() < 4).all(|x| x.reduced));
        assert!(sols.iter().filter(|x| x.roots.len() > 1).all(|x| x.degenerate && x.residual_product.is_none()));
        assert!(cross_validate(&m, &s, &config).unwrap().pass);
    }

    #[test]
    fn direct_mode_finds_subset_of_extracted() {
        let m = ModelSpec::new(2, 1, vec![1, 1, 1], vec![0.3, -0.7, 0.2], vec![0.1, 0.4, -0.2, 0.05, 0.6, 0.3], 0.7).unwrap();
        let s = sector_from_occupations(&m, &[0, 0, 3]).unwrap();
        let config = SolverConfig { starts: 40, seed: 7, ..SolverConfig::default() };
        let sols = solve_bethe(&m, &s, &config).unwrap();
        let direct = solve_direct(&m, &s, &config, &sols).unwrap();
        assert!(!direct.solutions.is_empty());
        assert!(direct.is_subset());
        let again = solve_direct(&m, &s, &config, &sols).unwrap();
        assert_eq!(direct.solutions, again.solutions);
    }
}
