//! States and operators on the composite `spin_1 ⊗ ... ⊗ spin_N ⊗ cavity`
//! space.
//!
//! Within each spin factor the excited state is basis index 0, so
//! `σ^z = diag(+1, -1)`. Within a spin-`j` factor, basis index `i` holds
//! `|j, j - i>`; for `j = 1/2` both conventions coincide.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::angular::{wigner_3j, HalfInt};
use crate::linalg::kron_vec;
use crate::{Error, Result, C64};

pub use crate::linalg::{DensityMatrix, Operator};

/// Tensor layout of the composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    n_spins: usize,
    fock_dim: usize,
}

impl SpaceLayout {
    /// `n_max` is the highest retained Fock level.
    pub fn new(n_spins: usize, n_max: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::param("n_spins", "at least one spin is required"));
        }
        if n_spins > 16 {
            return Err(Error::param("n_spins", "more than 16 spins is not supported"));
        }
        if n_max < 1 {
            return Err(Error::param("n_max", "Fock truncation must keep at least |0> and |1>"));
        }
        Ok(SpaceLayout {
            n_spins,
            fock_dim: n_max + 1,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn n_max(&self) -> usize {
        self.fock_dim - 1
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_dim
    }

    /// Composite index of spin configuration `spins` (bit `N-1-k` is spin
    /// `k`, 0 = excited) and Fock level `n`.
    pub fn index(&self, spins: usize, n: usize) -> usize {
        spins * self.fock_dim + n
    }

    /// Whether spin `k` (0-based) is excited in composite basis state `i`.
    pub fn spin_excited(&self, i: usize, k: usize) -> bool {
        let spins = i / self.fock_dim;
        (spins >> (self.n_spins - 1 - k)) & 1 == 0
    }

    pub fn photon_count(&self, i: usize) -> usize {
        i % self.fock_dim
    }

    /// Lift single-factor operators into the composite space. `spin_ops[k]`
    /// acts on spin `k` (identity when `None`), `cavity` on the cavity factor.
    pub fn embed(&self, spin_ops: &[Option<&Operator>], cavity: Option<&Operator>) -> Operator {
        assert_eq!(spin_ops.len(), self.n_spins);
        let id2 = Operator::identity(2);
        let mut acc: Option<Operator> = None;
        for op in spin_ops {
            let f = op.unwrap_or(&id2);
            assert_eq!(f.dim(), 2, "spin factor must be 2-dimensional");
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => a.kron(f),
            });
        }
        let idf = Operator::identity(self.fock_dim);
        let c = cavity.unwrap_or(&idf);
        assert_eq!(c.dim(), self.fock_dim, "cavity factor has wrong dimension");
        acc.expect("at least one spin").kron(c)
    }

    fn check_site(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_spins {
            return Err(Error::IndexOutOfRange {
                what: "spin site",
                index: k as i64,
                allowed: format!("1..={}", self.n_spins),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinOp {
    Z,
    Plus,
    Minus,
}

/// The 2×2 Pauli-type operator in the `(|e>, |g>)` basis.
pub fn pauli(which: SpinOp) -> Operator {
    let one = C64::new(1.0, 0.0);
    match which {
        SpinOp::Z => Operator::from_triplets(2, [(0, 0, one), (1, 1, -one)]).with_hermitian_hint(true),
        SpinOp::Plus => Operator::from_triplets(2, [(0, 1, one)]),
        SpinOp::Minus => Operator::from_triplets(2, [(1, 0, one)]),
    }
}

/// Truncated annihilation operator on a `fock_dim`-level mode.
pub fn annihilation(fock_dim: usize) -> Operator {
    Operator::from_triplets(
        fock_dim,
        (1..fock_dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

/// `(a, a†)` on the composite space.
pub fn boson_ops(layout: &SpaceLayout) -> (Operator, Operator) {
    let a_f = annihilation(layout.fock_dim);
    let a = layout.embed(&vec![None; layout.n_spins], Some(&a_f));
    let ad = a.adjoint();
    (a, ad)
}

/// Single-site spin operator for 1-based site `k`.
pub fn spin_site_op(layout: &SpaceLayout, k: usize, which: SpinOp) -> Result<Operator> {
    layout.check_site(k)?;
    let p = pauli(which);
    let mut ops: Vec<Option<&Operator>> = vec![None; layout.n_spins];
    ops[k - 1] = Some(&p);
    Ok(layout.embed(&ops, None))
}

/// Frequencies and couplings (ħ = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub omega: Vec<f64>,
    pub omega_c: f64,
    pub g: Vec<f64>,
}

impl SystemParams {
    pub fn validate(&self, layout: &SpaceLayout) -> Result<()> {
        let n = layout.n_spins();
        if self.omega.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.omega.len(),
            });
        }
        if self.g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.g.len(),
            });
        }
        if !self.omega_c.is_finite() || self.omega.iter().chain(&self.g).any(|x| !x.is_finite()) {
            return Err(Error::param("system", "frequencies and couplings must be finite"));
        }
        Ok(())
    }
}

/// `H = ½ Σ ω_k σ^z_k + ω_c a†a + Σ g_k (σ^+_k a + σ^-_k a†)`.
pub fn build_hamiltonian(layout: &SpaceLayout, params: &SystemParams) -> Result<Operator> {
    params.validate(layout)?;
    let (a, ad) = boson_ops(layout);
    let mut h = ad.matmul(&a).scale(C64::new(params.omega_c, 0.0));
    for k in 1..=layout.n_spins() {
        let sz = spin_site_op(layout, k, SpinOp::Z)?;
        let sp = spin_site_op(layout, k, SpinOp::Plus)?;
        let sm = spin_site_op(layout, k, SpinOp::Minus)?;
        let gk = C64::new(params.g[k - 1], 0.0);
        h = h
            .add(&sz.scale(C64::new(0.5 * params.omega[k - 1], 0.0)))
            .add(&sp.matmul(&a).scale(gk))
            .add(&sm.matmul(&ad).scale(gk));
    }
    Ok(h.with_hermitian_hint(true))
}

/// `Σ_k σ^+_k σ^-_k + a†a`.
pub fn excitation_number(layout: &SpaceLayout) -> Operator {
    let diag: Vec<C64> = (0..layout.dim())
        .map(|i| {
            let spins = (0..layout.n_spins()).filter(|&k| layout.spin_excited(i, k)).count();
            C64::new((spins + layout.photon_count(i)) as f64, 0.0)
        })
        .collect();
    Operator::diagonal_from(&diag).with_hermitian_hint(true)
}

/// A truncated, renormalized field coherent state.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub amplitudes: Array1<C64>,
    /// Poisson weight beyond the truncation, `1 - Σ_{n <= n_max} P(n)`.
    pub tail: f64,
}

/// Coherent state with mean photon number `mean_n` and phase `zeta` on
/// `fock_dim` levels. Fails if the discarded Poisson tail exceeds `tail_tol`.
pub fn coherent_state(mean_n: f64, zeta: f64, fock_dim: usize, tail_tol: f64) -> Result<CoherentState> {
    if !(mean_n >= 0.0) || !mean_n.is_finite() {
        return Err(Error::param("mean_photons", "must be finite and non-negative"));
    }
    let mut amps = Array1::zeros(fock_dim);
    if mean_n == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return Ok(CoherentState {
            amplitudes: amps,
            tail: 0.0,
        });
    }
    let ln_mean = mean_n.ln();
    let mut ln_fact = 0.0;
    let mut ln_p = Vec::with_capacity(fock_dim);
    for n in 0..fock_dim {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        ln_p.push(-mean_n + n as f64 * ln_mean - ln_fact);
    }
    // Tail summed forward from the first discarded level.
    let mut tail = 0.0;
    let mut ln_term = ln_p[fock_dim - 1];
    let mut n = fock_dim;
    loop {
        ln_term += ln_mean - (n as f64).ln();
        let term = ln_term.exp();
        tail += term;
        n += 1;
        if term < 1e-300 || (term < tail * 1e-17 && n as f64 > mean_n) {
            break;
        }
    }
    if tail > tail_tol {
        return Err(Error::TruncationTail { tail, tol: tail_tol });
    }
    let norm: f64 = ln_p.iter().map(|l| l.exp()).sum::<f64>().sqrt();
    for (n, l) in ln_p.iter().enumerate() {
        amps[n] = C64::from_polar((0.5 * l).exp() / norm, n as f64 * zeta);
    }
    Ok(CoherentState { amplitudes: amps, tail })
}

/// Atomic coherent state `|theta, phi>` of a spin `j`, in basis-index order
/// `m = j, j-1, ..., -j`.
pub fn atomic_coherent_state(j: HalfInt, theta: f64, phi: f64) -> Array1<C64> {
    let tj = j.twice();
    let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    Array1::from_iter(j.projections().map(|m| {
        let up = (tj + m.twice()) / 2; // j + m
        let down = tj - up; // j - m
        let binom = binomial(tj as u32, up as u32);
        let mag = binom.sqrt() * s.powi(up) * c.powi(down);
        C64::from_polar(mag, -(up as f64) * phi)
    }))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Multipole operator `T_{mu eta}` on a spin-`j` factor.
pub fn multipole_operator(j: HalfInt, mu: u32, eta: i32) -> Result<Operator> {
    let tj = j.twice();
    if tj < 0 {
        return Err(Error::param("j", "angular momentum must be non-negative"));
    }
    if mu as i32 > tj {
        return Err(Error::IndexOutOfRange {
            what: "multipole rank mu",
            index: i64::from(mu),
            allowed: format!("0..={tj}"),
        });
    }
    if eta.unsigned_abs() > mu {
        return Err(Error::IndexOutOfRange {
            what: "multipole component eta",
            index: i64::from(eta),
            allowed: format!("-{mu}..={mu}"),
        });
    }
    let dim = (tj + 1) as usize;
    let rank = HalfInt::from_int(mu as i32);
    let comp = HalfInt::from_int(eta);
    let pref = f64::from(2 * mu + 1).sqrt();
    let mut t = Vec::new();
    for (a, m) in j.projections().enumerate() {
        for (b, mp) in j.projections().enumerate() {
            let w = wigner_3j(j, rank, j, -m, comp, mp)?;
            if w == 0.0 {
                continue;
            }
            let sign = if ((tj - m.twice()) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            t.push((a, b, C64::new(sign * pref * w, 0.0)));
        }
    }
    Ok(Operator::from_triplets(dim, t))
}

/// `Tr[rho · T†_{mu_1 eta_1} ⊗ ... ⊗ T†_{mu_N eta_N}]` for `N` spin-½ factors.
pub fn multipole_component(rho_spins: &DensityMatrix, indices: &[(u32, i32)]) -> Result<C64> {
    let n = indices.len();
    let expected = 1usize << n;
    if rho_spins.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: rho_spins.dim(),
        });
    }
    let factors = indices
        .iter()
        .map(|&(mu, eta)| multipole_operator(HalfInt::HALF, mu, eta).map(|t| t.adjoint()))
        .collect::<Result<Vec<_>>>()?;
    Ok(tensor_trace(rho_spins, &factors))
}

/// `Tr[rho · (A_1 ⊗ ... ⊗ A_N)]` without forming the tensor product.
pub(crate) fn tensor_trace(rho: &DensityMatrix, factors: &[Operator]) -> C64 {
    let dims: Vec<usize> = factors.iter().map(Operator::dim).collect();
    let entries: Vec<Vec<(usize, usize, C64)>> = factors.iter().map(|f| f.iter().collect()).collect();
    let m = rho.matrix();
    let mut total = C64::new(0.0, 0.0);
    // Walk the product of nonzero entries; A[r, c] pairs with rho[c, r].
    let mut cursor = vec![0usize; factors.len()];
    if entries.iter().any(Vec::is_empty) {
        return total;
    }
    loop {
        let mut row = 0usize;
        let mut col = 0usize;
        let mut val = C64::new(1.0, 0.0);
        for (k, e) in entries.iter().enumerate() {
            let (r, c, v) = e[cursor[k]];
            row = row * dims[k] + r;
            col = col * dims[k] + c;
            val *= v;
        }
        total += val * m[[col, row]];
        // advance odometer
        let mut k = factors.len();
        loop {
            if k == 0 {
                return total;
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < entries[k].len() {
                break;
            }
            cursor[k] = 0;
        }
    }
}

/// Initial spin configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum SpinState {
    AllGround,
    Custom(DensityMatrix),
}

/// Field coherent-state parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentParams {
    pub mean_photons: f64,
    pub zeta: f64,
    pub tail_tol: f64,
}

impl Default for CoherentParams {
    fn default() -> Self {
        CoherentParams {
            mean_photons: 6.0,
            zeta: std::f64::consts::FRAC_PI_2,
            tail_tol: 1e-9,
        }
    }
}

/// `rho_spins ⊗ |alpha><alpha|`.
pub fn initial_state(layout: &SpaceLayout, spins: &SpinState, cavity: &CoherentParams) -> Result<DensityMatrix> {
    let field = coherent_state(cavity.mean_photons, cavity.zeta, layout.fock_dim(), cavity.tail_tol)?;
    match spins {
        SpinState::AllGround => {
            let mut g = Array1::zeros(layout.spin_dim());
            g[layout.spin_dim() - 1] = C64::new(1.0, 0.0);
            Ok(DensityMatrix::from_pure(&kron_vec(&g, &field.amplitudes)))
        }
        SpinState::Custom(rho_s) => {
            if rho_s.dim() != layout.spin_dim() {
                return Err(Error::DimensionMismatch {
                    expected: layout.spin_dim(),
                    found: rho_s.dim(),
                });
            }
            Ok(rho_s.kron(&DensityMatrix::from_pure(&field.amplitudes)))
        }
    }
}
