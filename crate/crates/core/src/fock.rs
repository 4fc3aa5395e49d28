//! Occupation vectors, mode labels and invariant sectors.
//!
//! Each mode `i` carries a one-mode label `(q_i, n_i)` with
//! `m_i = k_i n_i + j`, `q_i = (j k_i + 1)/k_i²`. The interaction moves every
//! creation-group mode up by `k_i` and every annihilation-group mode down by
//! `k_i` (or the reverse), so a sector is a finite chain of occupation
//! vectors labelled by the central values `(q, l, κ)`.

use std::hash::{Hash, Hasher};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{int, is_nonnegative_integer, rational, to_integer, Rational, Scalar};

/// Parameters of one Hamiltonian of the family.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec<T = f64> {
    r: usize,
    s: usize,
    k: Vec<u32>,
    w: Vec<T>,
    /// Upper triangle `i ≤ j`, row-major.
    wq: Vec<T>,
    g: T,
}

/// A single coupling constant of a [`ModelSpec`], with 0-based mode indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Linear(usize),
    Quadratic(usize, usize),
    Interaction,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(r: usize, s: usize, k: Vec<u32>, w: Vec<T>, wq: Vec<T>, g: T) -> Result<Self> {
        if r == 0 || s == 0 {
            return Err(Error::InvalidModel(format!("group sizes must be positive (r={r}, s={s})")));
        }
        let modes = r + s;
        if k.len() != modes {
            return Err(Error::InvalidModel(format!("k has {} entries, expected {modes}", k.len())));
        }
        if k.contains(&0) {
            return Err(Error::InvalidModel("all powers k_i must be at least 1".into()));
        }
        if w.len() != modes {
            return Err(Error::InvalidModel(format!("w has {} entries, expected {modes}", w.len())));
        }
        if wq.len() != modes * (modes + 1) / 2 {
            return Err(Error::InvalidModel(format!(
                "wq has {} entries, expected {} (upper triangle)",
                wq.len(),
                modes * (modes + 1) / 2
            )));
        }
        Ok(ModelSpec { r, s, k, w, wq, g })
    }

    /// All couplings zero except `g`.
    pub fn with_interaction_only(r: usize, s: usize, k: Vec<u32>, g: T) -> Result<Self> {
        let modes = r + s;
        Self::new(r, s, k, vec![T::zero(); modes], vec![T::zero(); modes * (modes + 1) / 2], g)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn modes(&self) -> usize {
        self.r + self.s
    }

    pub fn k(&self) -> &[u32] {
        &self.k
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn g(&self) -> &T {
        &self.g
    }

    /// `w_ij`, symmetric in its arguments.
    pub fn wq(&self, i: usize, j: usize) -> &T {
        &self.wq[self.tri_index(i, j)]
    }

    pub fn wq_upper(&self) -> &[T] {
        &self.wq
    }

    fn tri_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.modes();
        i * n - i * (i + 1) / 2 + j
    }

    pub fn coupling(&self, c: Coupling) -> &T {
        match c {
            Coupling::Linear(i) => &self.w[i],
            Coupling::Quadratic(i, j) => self.wq(i, j),
            Coupling::Interaction => &self.g,
        }
    }

    pub fn with_coupling(&self, c: Coupling, value: T) -> Result<Self> {
        let mut out = self.clone();
        match c {
            Coupling::Linear(i) if i < self.modes() => out.w[i] = value,
            Coupling::Quadratic(i, j) if i < self.modes() && j < self.modes() => {
                let idx = self.tri_index(i, j);
                out.wq[idx] = value;
            }
            Coupling::Interaction => out.g = value,
            _ => return Err(Error::InvalidModel(format!("coupling {c:?} out of range"))),
        }
        Ok(out)
    }

    pub fn in_creation_group(&self, mode: usize) -> bool {
        mode < self.r
    }

    /// Change of `m_mode` under one application of the raising interaction.
    pub fn step(&self, mode: usize) -> i64 {
        let k = self.k[mode] as i64;
        if self.in_creation_group(mode) {
            k
        } else {
            -k
        }
    }

    /// `Σ w_i m_i + Σ_{i≤j} w_ij m_i m_j`.
    pub fn diagonal_energy(&self, occupations: &[u64]) -> T {
        let m: Vec<T> = occupations.iter().map(|&v| T::from_i64(v as i64)).collect();
        let mut e = T::zero();
        for i in 0..self.modes() {
            e = e + self.w[i].clone() * m[i].clone();
            for j in i..self.modes() {
                e = e + self.wq(i, j).clone() * m[i].clone() * m[j].clone();
            }
        }
        e
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ModelSpec<U> {
        ModelSpec {
            r: self.r,
            s: self.s,
            k: self.k.clone(),
            w: self.w.iter().map(&f).collect(),
            wq: self.wq.iter().map(&f).collect(),
            g: f(&self.g),
        }
    }

    pub fn to_f64(&self) -> ModelSpec<f64> {
        self.map(|c| c.to_f64())
    }

    pub(crate) fn check_occupations(&self, occupations: &[u64]) -> Result<()> {
        if occupations.len() != self.modes() {
            return Err(Error::OccupationLength { expected: self.modes(), got: occupations.len() });
        }
        Ok(())
    }
}

/// One-mode label `|q, n⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub q: Rational,
    pub n: u64,
}

impl ModeLabel {
    /// Inverse of [`q_from_occupation`]: `m = k(n + q − 1/k²)`.
    pub fn occupation(&self, k: u32) -> u64 {
        let k = int(k as i64);
        let m = &k * (int(self.n as i64) + &self.q - Rational::one() / (&k * &k));
        to_integer(&m).expect("label is not a valid Fock label") as u64
    }

    /// `Q_0 = q + n`.
    pub fn q0(&self) -> Rational {
        &self.q + int(self.n as i64)
    }
}

/// `q = ((m mod k) k + 1)/k²`, `n = ⌊m/k⌋`.
pub fn q_from_occupation(k: u32, m: u64) -> ModeLabel {
    let kk = k as u64;
    let j = (m % kk) as i64;
    let k = k as i64;
    ModeLabel { q: rational(j * k + 1, k * k), n: m / kk }
}

/// `Q_0 = (m + 1/k)/k` for one mode.
pub fn q0_of_occupation(k: u32, m: u64) -> Rational {
    let k = int(k as i64);
    (int(m as i64) + Rational::one() / &k) / &k
}

/// An invariant sector of the Hamiltonian.
///
/// The chain index `n = 0..=N` runs from the state annihilated by the
/// lowering interaction to the one annihilated by the raising interaction.
/// Closed-form expressions are written in the label index `ν = offset + n`;
/// `offset` is zero whenever mode `r` is the first creation-group mode to
/// empty, which is the ordering the label formulas assume.
#[derive(Clone, Debug)]
pub struct Sector {
    q1: Vec<Rational>,
    q2: Vec<Rational>,
    l1: Vec<Rational>,
    l2: Vec<Rational>,
    kappa: Rational,
    t: Rational,
    dim: usize,
    offset: u64,
    base_occupations: Vec<u64>,
}

impl PartialEq for Sector {
    fn eq(&self, other: &Self) -> bool {
        self.q1 == other.q1
            && self.q2 == other.q2
            && self.l1 == other.l1
            && self.l2 == other.l2
            && self.kappa == other.kappa
    }
}

impl Eq for Sector {}

impl Hash for Sector {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.q1.hash(state);
        self.q2.hash(state);
        self.l1.hash(state);
        self.l2.hash(state);
        self.kappa.hash(state);
    }
}

impl Sector {
    pub fn q1(&self) -> &[Rational] {
        &self.q1
    }

    pub fn q2(&self) -> &[Rational] {
        &self.q2
    }

    /// Central values `l_1 … l_{r−1}`.
    pub fn l1(&self) -> &[Rational] {
        &self.l1
    }

    /// Central values `l_{r+1} … l_{r+s−1}`.
    pub fn l2(&self) -> &[Rational] {
        &self.l2
    }

    pub fn kappa(&self) -> &Rational {
        &self.kappa
    }

    pub fn t(&self) -> &Rational {
        &self.t
    }

    /// `N + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N`, the degree of the eigenpolynomials.
    pub fn n_max(&self) -> usize {
        self.dim - 1
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn base_occupations(&self) -> &[u64] {
        &self.base_occupations
    }

    pub fn r(&self) -> usize {
        self.q1.len()
    }

    pub fn s(&self) -> usize {
        self.q2.len()
    }

    pub fn q_r(&self) -> &Rational {
        self.q1.last().expect("creation group is never empty")
    }

    pub fn q_rs(&self) -> &Rational {
        self.q2.last().expect("annihilation group is never empty")
    }

    /// `s_i^(1) = Σ_{j=i}^{r−1} l_j` for 0-based creation mode `i`.
    pub fn s1(&self, i: usize) -> Rational {
        self.l1[i.min(self.l1.len())..].iter().fold(Rational::zero(), |a, b| a + b)
    }

    /// `s_j^(2)` for 0-based position `j` inside the annihilation group.
    pub fn s2(&self, j: usize) -> Rational {
        self.l2[j.min(self.l2.len())..].iter().fold(Rational::zero(), |a, b| a + b)
    }

    /// `2κ − q_r − q_{r+s} − t`: the chain length the labels predict when
    /// `offset = 0` and mode `r+s` is the first annihilation mode to empty.
    pub fn label_n(&self) -> Rational {
        int(2) * &self.kappa - self.q_r() - self.q_rs() - &self.t
    }

    /// Whether the chain coincides with the label-formula chain
    /// `ν = 0..=2κ − q_r − q_{r+s} − t`.
    pub fn in_label_regime(&self) -> bool {
        self.offset == 0 && self.label_n() == int(self.n_max() as i64)
    }

    /// Label index `ν = offset + n`.
    pub fn nu(&self, n: usize) -> Rational {
        int(self.offset as i64 + n as i64)
    }

    /// `2κ − q_r − t − ν` at the top of the chain. Equals `q_{r+s}` in the
    /// label regime.
    pub fn top_q2(&self) -> Rational {
        int(2) * &self.kappa - self.q_r() - &self.t - self.nu(self.n_max())
    }

    /// Exact occupation of `mode` at label index `nu`, before any integrality
    /// check.
    pub fn occupation_expr<T: Scalar>(&self, model: &ModelSpec<T>, mode: usize, nu: &Rational) -> Rational {
        let k = int(model.k()[mode] as i64);
        let inv_k2 = Rational::one() / (&k * &k);
        if mode < self.r() {
            &k * (nu + self.q_r() + self.s1(mode) - inv_k2)
        } else {
            let j = mode - self.r();
            &k * (int(2) * &self.kappa - self.q_r() - &self.t + self.s2(j) - inv_k2 - nu)
        }
    }
}

/// The sector containing the Fock state `occupations`.
pub fn sector_from_occupations<T: Scalar>(model: &ModelSpec<T>, occupations: &[u64]) -> Result<Sector> {
    model.check_occupations(occupations)?;
    let (r, s) = (model.r(), model.s());
    let k = model.k();
    let labels: Vec<ModeLabel> = occupations
        .iter()
        .zip(k)
        .map(|(&m, &ki)| q_from_occupation(ki, m))
        .collect();
    let q0: Vec<Rational> = labels.iter().map(ModeLabel::q0).collect();

    let q1: Vec<Rational> = labels[..r].iter().map(|l| l.q.clone()).collect();
    let q2: Vec<Rational> = labels[r..].iter().map(|l| l.q.clone()).collect();
    let l1: Vec<Rational> = (0..r - 1).map(|j| &q0[j] - &q0[j + 1]).collect();
    let l2: Vec<Rational> = (r..r + s - 1).map(|j| &q0[j] - &q0[j + 1]).collect();

    let avg = |xs: &[Rational]| xs.iter().fold(Rational::zero(), |a, b| a + b) / int(xs.len() as i64);
    let kappa = (avg(&q0[..r]) + avg(&q0[r..])) / int(2);

    let mut sector = Sector {
        q1,
        q2,
        l1,
        l2,
        kappa,
        t: Rational::zero(),
        dim: 1,
        offset: 0,
        base_occupations: Vec::new(),
    };
    let s1_sum = (0..r).map(|i| sector.s1(i)).fold(Rational::zero(), |a, b| a + b);
    let s2_sum = (0..s).map(|j| sector.s2(j)).fold(Rational::zero(), |a, b| a + b);
    sector.t = s1_sum / int(r as i64) + s2_sum / int(s as i64);

    // Lowest label index reachable: every creation-group level
    // ν + q_r + s_i − q_i must stay nonnegative.
    let q_r = sector.q_r().clone();
    let lowest = (0..r)
        .map(|i| &sector.q1[i] - &q_r - sector.s1(i))
        .max()
        .expect("r >= 1");
    // Highest: every annihilation-group level 2κ − q_r − t + s_j − q_j − ν
    // must stay nonnegative.
    let highest = (0..s)
        .map(|j| int(2) * &sector.kappa - &q_r - &sector.t + sector.s2(j) - &sector.q2[j])
        .min()
        .expect("s >= 1");
    let (lo, hi) = match (to_integer(&lowest), to_integer(&highest)) {
        (Some(lo), Some(hi)) if lo >= 0 && hi >= lo => (lo, hi),
        _ => {
            return Err(Error::InvalidSector(format!(
                "label range [{lowest}, {highest}] is not a nonnegative integer interval"
            )))
        }
    };
    sector.offset = lo as u64;
    sector.dim = (hi - lo) as usize + 1;
    sector.base_occupations = occupations_at(&sector, model, 0)?;
    Ok(sector)
}

/// Occupations of the `n`-th state of the chain, `0 ≤ n ≤ N`.
pub fn occupations_at<T: Scalar>(sector: &Sector, model: &ModelSpec<T>, n: usize) -> Result<Vec<u64>> {
    if n > sector.n_max() {
        return Err(Error::LevelOutOfRange { n, max: sector.n_max() });
    }
    if model.r() != sector.r() || model.s() != sector.s() {
        return Err(Error::InvalidSector("sector does not belong to this model".into()));
    }
    let nu = sector.nu(n);
    (0..model.modes())
        .map(|mode| {
            let m = sector.occupation_expr(model, mode, &nu);
            if is_nonnegative_integer(&m) {
                Ok(to_integer(&m).expect("checked integer") as u64)
            } else {
                Err(Error::InvalidSector(format!("mode {mode} has occupation {m} at level {n}")))
            }
        })
        .collect()
}

/// Occupations as linear functions of the chain index: `m_i(n) = base_i + step_i · n`.
pub fn occupation_lines<T: Scalar>(sector: &Sector, model: &ModelSpec<T>) -> Vec<(i64, i64)> {
    sector
        .base_occupations()
        .iter()
        .enumerate()
        .map(|(i, &b)| (b as i64, model.step(i)))
        .collect()
}

/// `N_i` as an exact function of the chain index, used to check that the
/// label formulas and the stored base occupations agree.
pub fn occupation_is_consistent<T: Scalar>(sector: &Sector, model: &ModelSpec<T>) -> bool {
    (0..=sector.n_max()).all(|n| match occupations_at(sector, model, n) {
        Ok(occ) => occ
            .iter()
            .zip(occupation_lines(sector, model))
            .all(|(&m, (b, st))| m as i64 == b + st * n as i64),
        Err(_) => false,
    })
}
