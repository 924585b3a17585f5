//! W, P and Q quasi-probability distributions of the reduced `N`-spin state.
//!
//! Each distribution is a contraction of the multipole components
//! `ρ_{μ₁η₁…μ_Nη_N} = Tr[ρ T†_{μ₁η₁} ⊗ … ⊗ T†_{μ_Nη_N}]` with per-spin factors
//! `w(μ, η) Y_{μη}(θ_k, φ_k)`. For a spin `j` the weights are
//!
//! ```text
//! W: sqrt((2j+1)/4π)
//! P: (1/sqrt(4π)) (-1)^{μ-η} sqrt((2j-μ)! (2j+μ+1)!) / (2j)!
//! Q: ((2j+1)/sqrt(4π)) (-1)^{μ-η} (2j)! / sqrt((2j-μ)! (2j+μ+1)!)
//! ```
//!
//! The W prefactor is the square-root form, which makes `∫W = 1`. P is the
//! density of `ρ = ∫ P |Ω⟩⟨Ω| sinθ dθ dφ`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::angular::{spherical_harmonic, HalfInt};
use crate::hilbert::{atomic_coherent_state, multipole_operator, tensor_trace, SpaceLayout};
use crate::linalg::{kron_vec, DensityMatrix, Operator};
use crate::par::{self, Execution};
use crate::quadrature::SphereRule;
use crate::{Error, Result, C64};

/// Largest imaginary part tolerated in a distribution value.
pub const IMAGINARY_TOL: f64 = 1e-9;

/// The `(μ, η)` pairs of a spin-½ factor, in component order.
pub const SPIN_HALF_PAIRS: [(u32, i32); 4] = [(0, 0), (1, -1), (1, 0), (1, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QdKind {
    W,
    P,
    Q,
}

impl QdKind {
    pub const ALL: [QdKind; 3] = [QdKind::W, QdKind::P, QdKind::Q];

    pub fn label(self) -> &'static str {
        match self {
            QdKind::W => "W",
            QdKind::P => "P",
            QdKind::Q => "Q",
        }
    }

    /// Per-spin weight multiplying `ρ_{μη} Y_{μη}`.
    pub fn weight(self, j: HalfInt, mu: u32, eta: i32) -> f64 {
        let tj = j.twice() as u32;
        let two_j_plus_1 = f64::from(tj + 1);
        let sign = if (mu as i32 - eta).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let ratio = (factorial(tj - mu) * factorial(tj + mu + 1)).sqrt() / factorial(tj);
        let inv_sqrt_4pi = 1.0 / (4.0 * PI).sqrt();
        match self {
            QdKind::W => (two_j_plus_1 / (4.0 * PI)).sqrt(),
            QdKind::P => inv_sqrt_4pi * sign * ratio,
            QdKind::Q => two_j_plus_1 * inv_sqrt_4pi * sign / ratio,
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// One `(θ, φ)` pair per spin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleTuple {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl AngleTuple {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                found: phi.len(),
            });
        }
        if let Some(t) = theta.iter().find(|t| !(0.0..=PI).contains(*t)) {
            return Err(Error::param("theta", format!("{t} is outside [0, π]")));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("phi", "must be finite"));
        }
        Ok(AngleTuple { theta, phi })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Partial trace over the cavity.
pub fn reduce_to_spins(rho: &DensityMatrix, layout: &SpaceLayout) -> Result<DensityMatrix> {
    if rho.dim() != layout.dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim(),
            found: rho.dim(),
        });
    }
    let m = rho.matrix();
    let ns = layout.spin_dim();
    let out = Array2::from_shape_fn((ns, ns), |(s, sp)| {
        (0..layout.fock_dim())
            .map(|n| m[[layout.index(s, n), layout.index(sp, n)]])
            .sum::<C64>()
    });
    DensityMatrix::from_matrix(out)
}

fn spin_count(rho_spins: &DensityMatrix) -> Result<usize> {
    let d = rho_spins.dim();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two().max(2),
            found: d,
        });
    }
    Ok(d.trailing_zeros() as usize)
}

/// All `4^N` multipole components of an `N`-spin-½ state. Index digits are
/// positions in [`SPIN_HALF_PAIRS`], spin 1 most significant.
#[derive(Clone, Debug)]
pub struct SpinComponents {
    n_spins: usize,
    values: Vec<C64>,
}

impl SpinComponents {
    pub fn new(rho_spins: &DensityMatrix) -> Result<Self> {
        let n = spin_count(rho_spins)?;
        let adjoints = SPIN_HALF_PAIRS
            .iter()
            .map(|&(mu, eta)| multipole_operator(HalfInt::HALF, mu, eta).map(|t| t.adjoint()))
            .collect::<Result<Vec<Operator>>>()?;
        let total = 1usize << (2 * n);
        let values = (0..total)
            .map(|idx| {
                let factors: Vec<Operator> = (0..n).map(|k| adjoints[digit(idx, n, k)].clone()).collect();
                tensor_trace(rho_spins, &factors)
            })
            .collect();
        Ok(SpinComponents { n_spins: n, values })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `Σ_c ρ_c ∏_k f_k[c_k]` for per-spin factor tables `f_k`.
    fn contract(&self, factors: &[[C64; 4]]) -> C64 {
        let n = self.n_spins;
        // Fold from the last spin upward: partial sums over trailing digits.
        let mut layer: Vec<C64> = self.values.clone();
        for k in (0..n).rev() {
            let f = &factors[k];
            layer = layer
                .chunks_exact(4)
                .map(|c| c[0] * f[0] + c[1] * f[1] + c[2] * f[2] + c[3] * f[3])
                .collect();
        }
        layer[0]
    }

    /// Distribution value at one angle tuple.
    pub fn evaluate(&self, angles: &AngleTuple, kind: QdKind) -> Result<f64> {
        if angles.len() != self.n_spins {
            return Err(Error::DimensionMismatch {
                expected: self.n_spins,
                found: angles.len(),
            });
        }
        let factors = angles
            .theta
            .iter()
            .zip(&angles.phi)
            .map(|(&th, &ph)| site_factors(kind, th, ph))
            .collect::<Result<Vec<_>>>()?;
        real_part(self.contract(&factors), "quasi-probability")
    }
}

fn digit(idx: usize, n: usize, k: usize) -> usize {
    (idx >> (2 * (n - 1 - k))) & 3
}

fn site_factors(kind: QdKind, theta: f64, phi: f64) -> Result<[C64; 4]> {
    let mut out = [C64::new(0.0, 0.0); 4];
    for (o, &(mu, eta)) in out.iter_mut().zip(&SPIN_HALF_PAIRS) {
        *o = spherical_harmonic(mu, eta, theta, phi)? * kind.weight(HalfInt::HALF, mu, eta);
    }
    Ok(out)
}

fn real_part(v: C64, quantity: &'static str) -> Result<f64> {
    let scale = v.re.abs().max(1.0);
    if v.im.abs() > IMAGINARY_TOL * scale {
        return Err(Error::ImaginaryResidue {
            quantity,
            residue: v.im.abs(),
            tol: IMAGINARY_TOL,
        });
    }
    Ok(v.re)
}

/// W, P or Q of `rho_spins` at `angles`.
pub fn qd_point(rho_spins: &DensityMatrix, angles: &AngleTuple, kind: QdKind) -> Result<f64> {
    SpinComponents::new(rho_spins)?.evaluate(angles, kind)
}

/// `Q = ∏_k (2/4π) · ⟨Ω|ρ|Ω⟩` with `|Ω⟩ = ⊗_k |θ_k, φ_k⟩`.
pub fn qd_direct_q(rho_spins: &DensityMatrix, angles: &AngleTuple) -> Result<f64> {
    let n = spin_count(rho_spins)?;
    if angles.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: angles.len(),
        });
    }
    let omega = coherent_product(angles);
    let m = rho_spins.matrix();
    let d = omega.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += omega[i].conj() * m[[i, j]] * omega[j];
        }
    }
    let pref = (2.0 / (4.0 * PI)).powi(n as i32);
    real_part(acc * pref, "coherent-state expectation")
}

fn coherent_product(angles: &AngleTuple) -> ndarray::Array1<C64> {
    angles
        .theta
        .iter()
        .zip(&angles.phi)
        .map(|(&th, &ph)| atomic_coherent_state(HalfInt::HALF, th, ph))
        .reduce(|a, b| kron_vec(&a, &b))
        .expect("at least one spin")
}

fn check_order(order: usize) -> Result<()> {
    // 2·(2j) + 2 with j = 1/2 per sphere
    if order < 4 {
        return Err(Error::param(
            "quadrature_order",
            format!("must be at least 4 (got {order})"),
        ));
    }
    Ok(())
}

/// `∫ ∏_k sinθ_k dθ_k dφ_k` of the distribution, by a Gauss-Legendre ×
/// trapezoid product rule of `order` nodes per axis on every sphere.
///
/// The product rule is applied factor by factor: the integrand is a sum of
/// products of single-sphere functions, so summing the rule over each sphere
/// separately gives the same result as summing over the full product grid.
pub fn qd_normalization(rho_spins: &DensityMatrix, kind: QdKind, order: usize) -> Result<f64> {
    check_order(order)?;
    let comps = SpinComponents::new(rho_spins)?;
    let rule = SphereRule::new(order, order);
    let mut integrated = [C64::new(0.0, 0.0); 4];
    for &(th, ph, w) in &rule.points {
        let f = site_factors(kind, th, ph)?;
        for (acc, v) in integrated.iter_mut().zip(f) {
            *acc += v * w;
        }
    }
    let factors = vec![integrated; comps.n_spins()];
    real_part(comps.contract(&factors), "normalization integral")
}

/// Reconstruct `∫ P(Ω) |Ω⟩⟨Ω| ∏ sinθ_k dθ_k dφ_k` on the full product grid.
/// Intended for one or two spins.
pub fn p_reconstruct(rho_spins: &DensityMatrix, order: usize) -> Result<DensityMatrix> {
    check_order(order)?;
    let comps = SpinComponents::new(rho_spins)?;
    let n = comps.n_spins();
    let rule = SphereRule::new(order, order);
    let per_sphere = rule.points.len();
    let total = per_sphere.pow(n as u32);
    let d = rho_spins.dim();
    let mut out = Array2::<C64>::zeros((d, d));
    for flat in 0..total {
        let mut theta = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        let mut weight = 1.0;
        let mut rest = flat;
        for _ in 0..n {
            let (th, ph, w) = rule.points[rest % per_sphere];
            rest /= per_sphere;
            theta.push(th);
            phi.push(ph);
            weight *= w;
        }
        let angles = AngleTuple { theta, phi };
        let p = comps.evaluate(&angles, QdKind::P)?;
        let omega = coherent_product(&angles);
        for i in 0..d {
            for j in 0..d {
                out[[i, j]] += omega[i] * omega[j].conj() * (p * weight);
            }
        }
    }
    DensityMatrix::from_matrix(out)
}

/// P sampled on a `(θ, φ)` grid, with `θ_k = s_k θ` and `φ_k = t_k φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    /// Grid `θ` values, `[0, π]` inclusive.
    pub thetas: Vec<f64>,
    /// Grid `φ` values, `[0, 2π)`.
    pub phis: Vec<f64>,
    /// Row-major, one row per `θ`.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, i_theta: usize, i_phi: usize) -> f64 {
        self.values[i_theta * self.phis.len() + i_phi]
    }
}

pub fn p_heatmap(
    rho_spins: &DensityMatrix,
    theta_scalings: &[f64],
    phi_scalings: &[f64],
    resolution: (usize, usize),
    exec: Execution,
) -> Result<Heatmap> {
    let comps = SpinComponents::new(rho_spins)?;
    let n = comps.n_spins();
    for (name, s) in [("theta_scalings", theta_scalings), ("phi_scalings", phi_scalings)] {
        if s.len() != n {
            return Err(Error::param(name, format!("expected {n} values, got {}", s.len())));
        }
    }
    if let Some(s) = theta_scalings.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::param("theta_scalings", format!("{s} would leave [0, π]")));
    }
    let (n_theta, n_phi) = resolution;
    if n_theta < 2 || n_phi < 1 {
        return Err(Error::param("resolution", "need at least 2 θ rows and 1 φ column"));
    }
    let thetas: Vec<f64> = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|i| 2.0 * PI * i as f64 / n_phi as f64).collect();
    let rows = par::map(exec, &thetas, |&th| -> Result<Vec<f64>> {
        phis.iter()
            .map(|&ph| {
                let angles = AngleTuple {
                    theta: theta_scalings.iter().map(|s| s * th).collect(),
                    phi: phi_scalings.iter().map(|s| s * ph).collect(),
                };
                comps.evaluate(&angles, QdKind::P)
            })
            .collect()
    });
    let values = rows.into_iter().collect::<Result<Vec<_>>>()?.concat();
    Ok(Heatmap { thetas, phis, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{initial_state, CoherentParams, SpinState};
    use approx::assert_abs_diff_eq;

    fn angles(theta: &[f64], phi: &[f64]) -> AngleTuple {
        AngleTuple::new(theta.to_vec(), phi.to_vec()).unwrap()
    }

    fn pure(psi: &[C64]) -> DensityMatrix {
        DensityMatrix::from_pure(&ndarray::Array1::from_vec(psi.to_vec()))
    }

    #[test]
    fn mixed_single_spin_is_uniform() {
        let rho = DensityMatrix::maximally_mixed(2);
        for kind in QdKind::ALL {
            for &(th, ph) in &[(0.0, 0.0), (0.7, 2.1), (PI, 5.0)] {
                let v = qd_point(&rho, &angles(&[th], &[ph]), kind).unwrap();
                assert_abs_diff_eq!(v, 1.0 / (4.0 * PI), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn spin_up_q_values() {
        let up = pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_abs_diff_eq!(
            qd_direct_q(&up, &angles(&[PI], &[0.3])).unwrap(),
            2.0 / (4.0 * PI),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(qd_direct_q(&up, &angles(&[0.0], &[0.3])).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            qd_point(&up, &angles(&[PI], &[0.3]), QdKind::Q).unwrap(),
            2.0 / (4.0 * PI),
            epsilon = 1e-14
        );
    }

    #[test]
    fn reduce_product_state() {
        let layout = SpaceLayout::new(2, 12).unwrap();
        let rho = initial_state(
            &layout,
            &SpinState::AllGround,
            &CoherentParams {
                mean_photons: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        let r = reduce_to_spins(&rho, &layout).unwrap();
        assert_abs_diff_eq!(r.matrix()[[3, 3]].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.trace().re, rho.trace().re, epsilon = 1e-12);
    }

    #[test]
    fn reduce_bell_pair() {
        let layout = SpaceLayout::new(1, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // (|e,0> + |g,1>)/√2
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[layout.index(0, 0)] = C64::new(h, 0.0);
        psi[layout.index(1, 1)] = C64::new(h, 0.0);
        let r = reduce_to_spins(&pure(&psi), &layout).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((r.matrix() - mixed.matrix()).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn heatmap_of_mixed_state_is_constant() {
        let rho = DensityMatrix::maximally_mixed(16);
        let map = p_heatmap(
            &rho,
            &[0.25, 0.6, 2.0 / 3.0, 0.75],
            &[0.75, 1.0 / 3.0, 0.25, 1.0 / 6.0],
            (9, 8),
            Execution::Sequential,
        )
        .unwrap();
        for v in &map.values {
            assert_abs_diff_eq!(*v, (4.0 * PI).powi(-4), epsilon = 1e-15);
        }
        assert_eq!(map.thetas[0], 0.0);
        assert_eq!(map.thetas[8], PI);
    }

    #[test]
    fn normalization_of_a_spin_pair() {
        let psi = [
            C64::new(0.3, 0.1),
            C64::new(-0.5, 0.2),
            C64::new(0.1, 0.7),
            C64::new(0.2, -0.1),
        ];
        let rho = pure(&psi);
        for kind in QdKind::ALL {
            assert_abs_diff_eq!(qd_normalization(&rho, kind, 4).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert!(qd_normalization(&rho, QdKind::W, 3).is_err());
    }

    #[test]
    fn p_reconstruction_single_spin() {
        let rho = pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let rec = p_reconstruct(&rho, 4).unwrap();
        assert!((rec.matrix() - rho.matrix()).iter().all(|v| v.norm() < 1e-12));
    }
}
