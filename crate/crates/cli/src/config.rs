//! Experiment description, its TOML form and schema validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcqd::channels::{build_channel, CavityLoss, ChannelFamily};
use tcqd::evolver::{EvolveOptions, TimeGrid};
use tcqd::hilbert::{CoherentParams, SpaceLayout, SystemParams};
use tcqd::quasiprob::QdKind;
use tcqd::Execution;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub n_spins: usize,
    pub n_max: usize,
}

/// Coherent initial field; the spins start in their ground state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mean_photons: f64,
    pub zeta: f64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    CoherentParams::default().tail_tol
}

impl Default for InitialConfig {
    fn default() -> Self {
        let c = CoherentParams::default();
        InitialConfig {
            mean_photons: c.mean_photons,
            zeta: c.zeta,
            tail_tol: c.tail_tol,
        }
    }
}

/// Quasi-probability time series at one angle tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QdConfig {
    pub kinds: Vec<QdKind>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

/// P on the scaled-angle manifold at one sampled time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub time: f64,
    pub theta_scalings: Vec<f64>,
    pub phi_scalings: Vec<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    NPhoton,
    /// One column per spin.
    Exc,
    ExcTotal,
    #[serde(rename = "g2_0")]
    G2Zero,
    MandelQ,
    /// One column per entry of `tau`.
    G2Tau,
    /// One column per entry of `tau`.
    Bunching,
}

impl Observable {
    pub fn needs_tau(self) -> bool {
        matches!(self, Observable::G2Tau | Observable::Bunching)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "yes")]
    pub hermitian_projection: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_tail_tol: Option<f64>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            hermitian_projection: true,
            trace_tol: None,
            rate_cap: None,
            fock_tail_tol: None,
            parallel: true,
        }
    }
}

impl NumericsConfig {
    pub fn evolve_options(&self) -> EvolveOptions {
        let d = EvolveOptions::default();
        EvolveOptions {
            hermitian_projection: self.hermitian_projection,
            trace_tol: self.trace_tol.or(d.trace_tol),
            rate_cap: self.rate_cap,
            fock_tail_tol: self.fock_tail_tol.or(d.fock_tail_tol),
            monitor_positivity: true,
            execution: if self.parallel {
                Execution::Parallel
            } else {
                Execution::Sequential
            },
        }
    }
}

/// A complete, deterministic experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub name: String,
    /// Parameter values that are not printed in the source captions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    pub layout: LayoutConfig,
    pub system: SystemParams,
    pub channel: ChannelFamily,
    pub cavity: CavityLoss,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd: Option<QdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::output::write_atomic(path, self.to_toml().as_bytes())
    }

    pub fn space_layout(&self) -> Result<SpaceLayout, CliError> {
        Ok(SpaceLayout::new(self.layout.n_spins, self.layout.n_max)?)
    }

    pub fn coherent_params(&self) -> CoherentParams {
        CoherentParams {
            mean_photons: self.initial.mean_photons,
            zeta: self.initial.zeta,
            tail_tol: self.initial.tail_tol,
        }
    }

    /// Same experiment at half the step, sampling the same times.
    pub fn with_halved_step(&self) -> Self {
        let mut c = self.clone();
        c.grid.dt /= 2.0;
        c.grid.sample_stride *= 2;
        c
    }

    /// Every schema violation, each naming its key.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut push = |key: &str, msg: String| errs.push(format!("{key}: {msg}"));
        let n = self.layout.n_spins;

        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            push("name", "must be a non-empty file-name-safe string".into());
        }
        if !(1..=8).contains(&n) {
            push("layout.n_spins", format!("must be in 1..=8 (got {n})"));
        }
        if self.layout.n_max < 1 {
            push("layout.n_max", "must be at least 1".into());
        }
        for (key, v) in [("system.omega", &self.system.omega), ("system.g", &self.system.g)] {
            if v.len() != n {
                push(key, format!("expected {n} values, got {}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                push(key, "values must be finite".into());
            }
        }
        if !self.system.omega_c.is_finite() {
            push("system.omega_c", "must be finite".into());
        }

        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let per_spin = |key: &str, v: &[f64], ok: &dyn Fn(f64) -> bool, what: &str, errs: &mut Vec<String>| {
            if v.len() != n {
                errs.push(format!("{key}: expected {n} values, got {}", v.len()));
            }
            if let Some(x) = v.iter().find(|x| !ok(**x)) {
                errs.push(format!("{key}: values must be {what} (got {x})"));
            }
        };
        let mut chan_errs = Vec::new();
        match &self.channel {
            ChannelFamily::GkslThermal { gamma, temperature } => {
                per_spin("channel.gamma", gamma, &nonneg, "non-negative", &mut chan_errs);
                if !nonneg(*temperature) {
                    chan_errs.push(format!("channel.temperature: must be non-negative (got {temperature})"));
                }
            }
            ChannelFamily::Sgad { gamma, squeeze } => {
                per_spin("channel.gamma", gamma, &nonneg, "non-negative", &mut chan_errs);
                if !nonneg(squeeze.r) {
                    chan_errs.push(format!("channel.squeeze.r: must be non-negative (got {})", squeeze.r));
                }
                if !nonneg(squeeze.temperature) {
                    chan_errs.push(format!(
                        "channel.squeeze.temperature: must be non-negative (got {})",
                        squeeze.temperature
                    ));
                }
                if !squeeze.phi.is_finite() {
                    chan_errs.push("channel.squeeze.phi: must be finite".into());
                }
            }
            ChannelFamily::Pcenm { nu, q, .. } => {
                per_spin("channel.nu", nu, &positive, "positive", &mut chan_errs);
                if !(q.abs() < 1.0) {
                    chan_errs.push(format!("channel.q: |q| must be < 1 (got {q})"));
                }
            }
            ChannelFamily::Nmad { gamma_prime, q_prime } => {
                per_spin(
                    "channel.gamma_prime",
                    gamma_prime,
                    &positive,
                    "positive",
                    &mut chan_errs,
                );
                if !positive(*q_prime) {
                    chan_errs.push(format!("channel.q_prime: must be positive (got {q_prime})"));
                }
            }
            ChannelFamily::SemiMarkov { gamma_tilde, s } => {
                per_spin(
                    "channel.gamma_tilde",
                    gamma_tilde,
                    &positive,
                    "positive",
                    &mut chan_errs,
                );
                if !positive(*s) {
                    chan_errs.push(format!("channel.s: must be positive (got {s})"));
                }
            }
        }
        errs.extend(chan_errs);
        let mut push = |key: &str, msg: String| errs.push(format!("{key}: {msg}"));
        match self.cavity {
            CavityLoss::Constant { kappa, n_th } => {
                if !nonneg(kappa) {
                    push("cavity.kappa", format!("must be non-negative (got {kappa})"));
                }
                if !nonneg(n_th) {
                    push("cavity.n_th", format!("must be non-negative (got {n_th})"));
                }
            }
            CavityLoss::Nmad { kappa_prime, b } => {
                if !positive(kappa_prime) {
                    push("cavity.kappa_prime", format!("must be positive (got {kappa_prime})"));
                }
                if !positive(b) {
                    push("cavity.b", format!("must be positive (got {b})"));
                }
            }
        }

        if !nonneg(self.initial.mean_photons) {
            push(
                "initial.mean_photons",
                format!("must be non-negative (got {})", self.initial.mean_photons),
            );
        }
        if !self.initial.zeta.is_finite() {
            push("initial.zeta", "must be finite".into());
        }
        if !positive(self.initial.tail_tol) {
            push("initial.tail_tol", "must be positive".into());
        }
        if let Err(e) = self.grid.validate() {
            push("grid", e.to_string());
        }

        let needs_tau = self.observables.iter().any(|o| o.needs_tau());
        if needs_tau && self.tau.is_empty() {
            push("tau", "g2_tau and bunching need at least one tau".into());
        }
        if let Some(t) = self.tau.iter().find(|t| !nonneg(**t)) {
            push("tau", format!("values must be non-negative (got {t})"));
        }
        for (i, a) in self.observables.iter().enumerate() {
            if self.observables[..i].contains(a) {
                push("observables", format!("{a:?} listed twice"));
            }
        }

        if let Some(qd) = &self.qd {
            if qd.kinds.is_empty() {
                push("qd.kinds", "must list at least one of W, P, Q".into());
            }
            for (key, v) in [("qd.theta", &qd.theta), ("qd.phi", &qd.phi)] {
                if v.len() != n {
                    push(key, format!("expected {n} values, got {}", v.len()));
                }
            }
            if let Some(t) = qd.theta.iter().find(|t| !(0.0..=std::f64::consts::PI).contains(*t)) {
                push("qd.theta", format!("values must lie in [0, π] (got {t})"));
            }
            if qd.phi.iter().any(|p| !p.is_finite()) {
                push("qd.phi", "values must be finite".into());
            }
        }

        if let Some(hm) = &self.heatmap {
            for (key, v) in [
                ("heatmap.theta_scalings", &hm.theta_scalings),
                ("heatmap.phi_scalings", &hm.phi_scalings),
            ] {
                if v.len() != n {
                    push(key, format!("expected {n} values, got {}", v.len()));
                }
            }
            if let Some(s) = hm.theta_scalings.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                push("heatmap.theta_scalings", format!("values must lie in [0, 1] (got {s})"));
            }
            if hm.n_theta < 2 || hm.n_phi < 1 {
                push("heatmap", "resolution must be at least 2 x 1".into());
            }
            if self.grid.validate().is_ok() && self.sample_index(hm.time).is_none() {
                push("heatmap.time", format!("{} is not a sampled time of the grid", hm.time));
            }
        }

        let n_opt = |key: &str, v: Option<f64>, errs: &mut Vec<String>| {
            if let Some(x) = v {
                if !positive(x) {
                    errs.push(format!("{key}: must be positive (got {x})"));
                }
            }
        };
        n_opt("numerics.trace_tol", self.numerics.trace_tol, &mut errs);
        n_opt("numerics.rate_cap", self.numerics.rate_cap, &mut errs);
        n_opt("numerics.fock_tail_tol", self.numerics.fock_tail_tol, &mut errs);

        // Anything the builders still reject.
        if errs.is_empty() {
            if let Err(e) = SpaceLayout::new(n, self.layout.n_max)
                .and_then(|l| build_channel(&l, &self.system.omega, &self.channel, &self.cavity))
            {
                errs.push(format!("channel: {e}"));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    /// Sample index whose time equals `t`.
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        let spacing = self.grid.dt * self.grid.sample_stride as f64;
        let x = (t - self.grid.t_start) / spacing;
        let i = x.round();
        ((x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.grid.n_samples()).then_some(i as usize)
    }
}
