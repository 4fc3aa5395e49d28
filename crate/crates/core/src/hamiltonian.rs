//! Sector blocks of the Hamiltonian and their exact diagonalization.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::diffop::hop_values;
use crate::error::{Error, Result};
use crate::fock::{occupations_at, ModelSpec, Sector};
use crate::polyalg::raising_element;
use crate::roots::LogCoeffs;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Normalized Fock states; the block is real symmetric.
    Fock,
    /// Monomials `z^n`; the block is the matrix of `H z^n`.
    Monomial,
}

/// Tridiagonal `(N+1)×(N+1)` block of `H` in one sector.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalBlock {
    pub basis: Basis,
    pub diag: Vec<f64>,
    /// `⟨n+1| H |n⟩`, the amplitude for `n → n+1`.
    pub upper: Vec<f64>,
    /// `⟨n| H |n+1⟩`, the amplitude for `n+1 → n`.
    pub lower: Vec<f64>,
}

impl TridiagonalBlock {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..n.saturating_sub(1) {
            m[(i + 1, i)] = self.upper[i];
            m[(i, i + 1)] = self.lower[i];
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.upper)
            .chain(&self.lower)
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Eigendecomposition of a block.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `i` is the eigenvector of `energies[i]` in the block's basis,
    /// with its largest-magnitude component positive.
    pub vectors: DMatrix<f64>,
    /// `max_i ‖H v_i − E_i v_i‖ / ‖v_i‖`.
    pub residual_norm: f64,
    pub warning: Option<String>,
}

/// Fock-basis block: `diag[n] = Σ w_i m_i + Σ_{i≤j} w_ij m_i m_j`,
/// `upper[n] = lower[n] = g ⟨m(n+1)| interaction |m(n)⟩`.
pub fn build_sector_matrix<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Result<TridiagonalBlock> {
    let occs = (0..sector.dim())
        .map(|n| occupations_at(sector, model, n))
        .collect::<Result<Vec<_>>>()?;
    let diag = occs.iter().map(|m| model.diagonal_energy(m).to_f64()).collect();
    let g = model.g().to_f64();
    let upper: Vec<f64> = occs[..occs.len() - 1]
        .iter()
        .map(|m| g * raising_element(model, m))
        .collect();
    Ok(TridiagonalBlock { basis: Basis::Fock, lower: upper.clone(), diag, upper })
}

/// Monomial-basis block: `upper[n] = A(n)`, `lower[n] = C(n+1)`, `diag[n] = B(n)`.
pub fn build_monomial_matrix<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Result<TridiagonalBlock> {
    // B(n) is the diagonal energy; evaluate it from occupations to keep
    // the two bases bit-identical on the diagonal.
    let diag = build_sector_diag(model, sector)?;
    let (upper, lower) = hop_values(model, sector);
    Ok(TridiagonalBlock { basis: Basis::Monomial, diag, upper, lower })
}

fn build_sector_diag<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Result<Vec<f64>> {
    (0..sector.dim())
        .map(|n| Ok(model.diagonal_energy(&occupations_at(sector, model, n)?).to_f64()))
        .collect()
}

/// `ln √(∏_i m_i(n)!)`: the Fock normalization of `z^n`, so that
/// `z^n = e^{norm_n} |n⟩`.
pub fn fock_log_norms<T: Scalar>(model: &ModelSpec<T>, sector: &Sector) -> Result<Vec<f64>> {
    (0..sector.dim())
        .map(|n| {
            let occ = occupations_at(sector, model, n)?;
            Ok(0.5 * occ.iter().map(|&m| ln_factorial(m)).sum::<f64>())
        })
        .collect()
}

fn ln_factorial(m: u64) -> f64 {
    (2..=m).map(|v| (v as f64).ln()).sum()
}

/// Maps a Fock-basis eigenvector to monomial coefficients, `c_n = v_n / norm_n`,
/// rescaled so the largest coefficient has magnitude one.
pub fn fock_to_monomial(v: &[f64], log_norms: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = v
        .iter()
        .zip(log_norms)
        .map(|(x, ln)| if *x == 0.0 { f64::NEG_INFINITY } else { x.abs().ln() - ln })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter()
        .zip(&logs)
        .map(|(x, l)| x.signum() * (l - top).exp())
        .map(|c| if c.is_nan() { 0.0 } else { c })
        .collect()
}

const MAX_SWEEPS: usize = 1000;

/// Full eigendecomposition, energies ascending.
pub fn diagonalize(block: &TridiagonalBlock) -> Result<SpectrumResult> {
    let n = block.dim();
    if n == 0 {
        return Err(Error::InvalidSector("empty block".into()));
    }
    let (symmetric, log_scale) = match block.basis {
        Basis::Fock => (block.clone(), vec![0.0; n]),
        Basis::Monomial => symmetrize(block)?,
    };
    let eig = SymmetricEigen::try_new(symmetric.to_dense(), f64::EPSILON, MAX_SWEEPS * n)
        .ok_or(Error::NoConvergence { iterations: MAX_SWEEPS * n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    // Undo the similarity: c = S v, S = diag(exp(log_scale)).
    let top = log_scale.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut v: Vec<f64> = (0..n)
            .map(|row| eig.eigenvectors[(row, src)] * (log_scale[row] - top).exp())
            .collect();
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
        let scale = v[imax].signum() / v[imax].abs().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x *= scale);
        for row in 0..n {
            vectors[(row, col)] = v[row];
        }
    }

    let dense = block.to_dense();
    let mut residual_norm: f64 = 0.0;
    for (col, e) in energies.iter().enumerate() {
        let v = vectors.column(col);
        let res = &dense * v - v * *e;
        residual_norm = residual_norm.max(res.norm() / v.norm());
    }

    let warning = condition_warning(block);
    Ok(SpectrumResult { energies, vectors, residual_norm, warning })
}

/// Eigenvector of a tridiagonal block for a known eigenvalue by twisted
/// factorization: ratios `c_{n−1}/c_n` are accumulated from the bottom and
/// `c_{n+1}/c_n` from the top, and the two sweeps are joined where the twist
/// pivot is smallest. Each component is returned as sign and log-magnitude
/// with small relative error, so coefficients spanning hundreds of decades
/// (as in the monomial basis) stay usable.
pub fn twisted_eigenvector(block: &TridiagonalBlock, energy: f64) -> LogCoeffs {
    let n = block.dim();
    let guard = |x: f64, i: usize| {
        if x == 0.0 {
            f64::EPSILON * (block.diag[i].abs() + energy.abs()).max(f64::MIN_POSITIVE)
        } else {
            x
        }
    };
    // p[i] = c_{i−1}/c_i
    let mut p = vec![0.0; n];
    let mut d = block.diag[0] - energy;
    for i in 1..n {
        p[i] = -block.lower[i - 1] / guard(d, i - 1);
        d = block.diag[i] - energy + block.upper[i - 1] * p[i];
    }
    // q[i] = c_{i+1}/c_i
    let mut q = vec![0.0; n];
    let mut e = block.diag[n - 1] - energy;
    for i in (0..n - 1).rev() {
        q[i] = -block.upper[i] / guard(e, i + 1);
        e = block.diag[i] - energy + block.lower[i] * q[i];
    }
    let gamma = |k: usize| {
        let mut g = block.diag[k] - energy;
        if k > 0 {
            g += block.upper[k - 1] * p[k];
        }
        if k + 1 < n {
            g += block.lower[k] * q[k];
        }
        g.abs()
    };
    let twist = (0..n).min_by(|&a, &b| gamma(a).total_cmp(&gamma(b))).unwrap_or(0);

    let mut sign = vec![0.0; n];
    let mut ln_abs = vec![f64::NEG_INFINITY; n];
    sign[twist] = 1.0;
    ln_abs[twist] = 0.0;
    for i in (1..=twist).rev() {
        sign[i - 1] = sign[i] * p[i].signum() * (p[i] != 0.0) as u8 as f64;
        ln_abs[i - 1] = ln_abs[i] + p[i].abs().ln();
    }
    for i in twist..n - 1 {
        sign[i + 1] = sign[i] * q[i].signum() * (q[i] != 0.0) as u8 as f64;
        ln_abs[i + 1] = ln_abs[i] + q[i].abs().ln();
    }
    LogCoeffs { sign, ln_abs }
}

/// Diagonal similarity `M = S T S^{-1}` with `T` symmetric; returns `T` and
/// `ln S`.
fn symmetrize(block: &TridiagonalBlock) -> Result<(TridiagonalBlock, Vec<f64>)> {
    let n = block.dim();
    let mut log_scale = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        let (a, c) = (block.upper[i], block.lower[i]);
        if a == 0.0 && c == 0.0 {
            log_scale[i + 1] = log_scale[i];
            continue;
        }
        if a * c <= 0.0 {
            return Err(Error::NotSymmetrizable(format!(
                "off-diagonal pair ({a:e}, {c:e}) at level {i} has no real symmetric form"
            )));
        }
        off[i] = a.signum() * (a * c).sqrt();
        // M[i+1][i] = s_{i+1} T / s_i = A  ⇒  s_{i+1}/s_i = √(A/C)
        log_scale[i + 1] = log_scale[i] + 0.5 * (a.abs().ln() - c.abs().ln());
    }
    let sym = TridiagonalBlock { basis: Basis::Fock, diag: block.diag.clone(), upper: off.clone(), lower: off };
    Ok((sym, log_scale))
}

fn condition_warning(block: &TridiagonalBlock) -> Option<String> {
    let n = block.dim();
    if n <= 61 {
        return None;
    }
    let max = block.max_abs();
    let min_off = block
        .upper
        .iter()
        .chain(&block.lower)
        .filter(|x| **x != 0.0)
        .fold(f64::INFINITY, |a, b| a.min(b.abs()));
    let spread = max / min_off;
    (spread > 1e12).then(|| {
        format!("N = {} with matrix entries spanning {spread:.1e}; spectrum accuracy not guaranteed", n - 1)
    })
}
