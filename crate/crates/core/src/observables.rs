//! Scalar observables along trajectories: photon number, spin excitation,
//! second-order coherence and the Mandel Q parameter.

use serde::{Deserialize, Serialize};

use crate::evolver::PhotonCorrelator;
use crate::hilbert::{boson_ops, spin_site_op, SpaceLayout, SpinOp};
use crate::linalg::{DensityMatrix, Operator};
use crate::{Error, Result};

/// Photon numbers below this make g² undefined.
pub const DEFAULT_THRESHOLD: f64 = 1e-9;

/// A named time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(name: impl Into<String>) -> Self {
        ObservableSeries {
            name: name.into(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }
}

/// Canonical series names.
pub mod names {
    pub const N_PHOTON: &str = "n_photon";
    pub const EXC_TOTAL: &str = "exc_total";
    pub const G2_0: &str = "g2_0";
    pub const G2_TAU: &str = "g2_tau";
    pub const MANDEL_Q: &str = "mandel_q";
    pub const BUNCHING: &str = "bunching";

    /// `exc_k`, `k` 1-based.
    pub fn exc(k: usize) -> String {
        format!("exc_{k}")
    }
}

/// Operators needed by the observables on one layout.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    layout: SpaceLayout,
    number: Operator,
    pair: Operator,
    excitation: Vec<Operator>,
    threshold: f64,
}

impl ObservableSet {
    pub fn new(layout: &SpaceLayout) -> Result<Self> {
        let (a, ad) = boson_ops(layout);
        let number = ad.matmul(&a);
        let pair = ad.matmul(&ad).matmul(&a).matmul(&a);
        let excitation = (1..=layout.n_spins())
            .map(|k| Ok(spin_site_op(layout, k, SpinOp::Plus)?.matmul(&spin_site_op(layout, k, SpinOp::Minus)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ObservableSet {
            layout: *layout,
            number,
            pair,
            excitation,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.dim(),
                found: rho.dim(),
            });
        }
        Ok(())
    }

    /// `Re Tr[a†a ρ]`.
    pub fn photon_number(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check(rho)?;
        Ok(rho.expect(&self.number).re)
    }

    /// `Re Tr[σ⁺_k σ⁻_k ρ]`, `k` 1-based.
    pub fn spin_excitation(&self, rho: &DensityMatrix, k: usize) -> Result<f64> {
        self.check(rho)?;
        let op = k
            .checked_sub(1)
            .and_then(|i| self.excitation.get(i))
            .ok_or_else(|| Error::IndexOutOfRange {
                what: "spin",
                index: k as i64,
                allowed: format!("1..={}", self.excitation.len()),
            })?;
        Ok(rho.expect(op).re)
    }

    pub fn total_excitation(&self, rho: &DensityMatrix) -> Result<f64> {
        (1..=self.excitation.len()).map(|k| self.spin_excitation(rho, k)).sum()
    }

    fn defined_number(&self, rho: &DensityMatrix, quantity: &'static str) -> Result<f64> {
        let n = self.photon_number(rho)?;
        if n <= self.threshold {
            return Err(Error::Undefined {
                quantity,
                photon_number: n,
                threshold: self.threshold,
            });
        }
        Ok(n)
    }

    /// `Re Tr[a†a†aa ρ] / (Re Tr[a†a ρ])²`.
    pub fn g2_zero(&self, rho: &DensityMatrix) -> Result<f64> {
        let n = self.defined_number(rho, "g2(0)")?;
        Ok(rho.expect(&self.pair).re / (n * n))
    }

    /// `⟨n⟩ (g²(0) - 1)`.
    pub fn mandel_q(&self, rho: &DensityMatrix) -> Result<f64> {
        let n = self.defined_number(rho, "Mandel Q")?;
        Ok(rho.expect(&self.pair).re / n - n)
    }

    /// Two-time correlator over `⟨a†a(t)⟩²`.
    pub fn g2_tau(&self, correlator: &PhotonCorrelator, t: f64, rho_t: &DensityMatrix) -> Result<f64> {
        let n = self.defined_number(rho_t, "g2(tau)")?;
        Ok(correlator.numerator(t, rho_t)? / (n * n))
    }

    /// `g²(0) - g²(τ)`; negative means anti-bunched at `(t, τ)`.
    pub fn bunching_indicator(&self, correlator: &PhotonCorrelator, t: f64, rho_t: &DensityMatrix) -> Result<f64> {
        Ok(self.g2_zero(rho_t)? - self.g2_tau(correlator, t, rho_t)?)
    }
}
