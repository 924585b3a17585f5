//! Execute a [`SimConfig`] in memory.

use std::time::Instant;

use serde::Serialize;
use tcqd::channels::build_channel;
use tcqd::evolver::{evolve_observed, Diagnostics, Generator, PhotonCorrelator};
use tcqd::hilbert::{build_hamiltonian, initial_state, SpinState};
use tcqd::observables::{names, ObservableSet};
use tcqd::quasiprob::{p_heatmap, reduce_to_spins, AngleTuple, Heatmap, SpinComponents};

use crate::config::{Observable, SimConfig};
use crate::error::CliError;

/// Sampled series of one run, column-major.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutput {
    pub config: SimConfig,
    /// `t` first.
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub heatmap: Option<Heatmap>,
    pub diagnostics: Diagnostics,
    pub uses_heisenberg_picture: bool,
    pub elapsed_seconds: f64,
}

impl RunOutput {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(&self.data[i])
    }

    pub fn times(&self) -> &[f64] {
        &self.data[0]
    }

    pub fn n_rows(&self) -> usize {
        self.data[0].len()
    }
}

fn tau_suffix(tau: &[f64], i: usize) -> String {
    if tau.len() == 1 {
        String::new()
    } else {
        format!("@{}", tau[i])
    }
}

/// Column names in output order.
pub fn column_names(cfg: &SimConfig) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    if let Some(qd) = &cfg.qd {
        cols.extend(qd.kinds.iter().map(|k| k.label().to_string()));
    }
    for obs in &cfg.observables {
        match obs {
            Observable::NPhoton => cols.push(names::N_PHOTON.into()),
            Observable::Exc => cols.extend((1..=cfg.layout.n_spins).map(names::exc)),
            Observable::ExcTotal => cols.push(names::EXC_TOTAL.into()),
            Observable::G2Zero => cols.push(names::G2_0.into()),
            Observable::MandelQ => cols.push(names::MANDEL_Q.into()),
            Observable::G2Tau => {
                cols.extend((0..cfg.tau.len()).map(|i| format!("{}{}", names::G2_TAU, tau_suffix(&cfg.tau, i))))
            }
            Observable::Bunching => {
                cols.extend((0..cfg.tau.len()).map(|i| format!("{}{}", names::BUNCHING, tau_suffix(&cfg.tau, i))))
            }
        }
    }
    cols
}

pub fn execute(cfg: &SimConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let layout = cfg.space_layout()?;
    let h = build_hamiltonian(&layout, &cfg.system)?;
    let channel = build_channel(&layout, &cfg.system.omega, &cfg.channel, &cfg.cavity)?;
    let gen = Generator::new(&h, &channel)?.with_layout(layout)?;
    let rho0 = initial_state(&layout, &SpinState::AllGround, &cfg.coherent_params())?;
    let opts = cfg.numerics.evolve_options();
    let obs = ObservableSet::new(&layout)?;
    let correlators = if cfg.observables.iter().any(|o| o.needs_tau()) {
        cfg.tau
            .iter()
            .map(|&tau| PhotonCorrelator::new(&gen, tau, cfg.grid.dt, &opts))
            .collect::<tcqd::Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let qd_angles = cfg
        .qd
        .as_ref()
        .map(|qd| AngleTuple::new(qd.theta.clone(), qd.phi.clone()))
        .transpose()?;
    let heatmap_index = cfg.heatmap.as_ref().and_then(|hm| cfg.sample_index(hm.time));

    let columns = column_names(cfg);
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.grid.n_samples()); columns.len()];
    let mut heatmap = None;
    let diagnostics = evolve_observed(&gen, &rho0, &cfg.grid, &opts, |index, t, rho| {
        let mut row = vec![t];
        let g2_tau = if correlators.is_empty() {
            Vec::new()
        } else {
            correlators
                .iter()
                .map(|c| obs.g2_tau(c, t, rho))
                .collect::<tcqd::Result<Vec<_>>>()?
        };
        if let (Some(qd), Some(angles)) = (&cfg.qd, &qd_angles) {
            let comps = SpinComponents::new(&reduce_to_spins(rho, &layout)?)?;
            for &kind in &qd.kinds {
                row.push(comps.evaluate(angles, kind)?);
            }
        }
        for obs_kind in &cfg.observables {
            match obs_kind {
                Observable::NPhoton => row.push(obs.photon_number(rho)?),
                Observable::Exc => {
                    for k in 1..=layout.n_spins() {
                        row.push(obs.spin_excitation(rho, k)?);
                    }
                }
                Observable::ExcTotal => row.push(obs.total_excitation(rho)?),
                Observable::G2Zero => row.push(obs.g2_zero(rho)?),
                Observable::MandelQ => row.push(obs.mandel_q(rho)?),
                Observable::G2Tau => row.extend(&g2_tau),
                Observable::Bunching => {
                    let g0 = obs.g2_zero(rho)?;
                    row.extend(g2_tau.iter().map(|g| g0 - g));
                }
            }
        }
        if let (Some(hm), Some(i)) = (&cfg.heatmap, heatmap_index) {
            if i == index {
                let spins = reduce_to_spins(rho, &layout)?;
                heatmap = Some(p_heatmap(
                    &spins,
                    &hm.theta_scalings,
                    &hm.phi_scalings,
                    (hm.n_theta, hm.n_phi),
                    opts.execution,
                )?);
            }
        }
        for (col, v) in data.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    })?;

    Ok(RunOutput {
        config: cfg.clone(),
        columns,
        data,
        heatmap,
        diagnostics,
        uses_heisenberg_picture: correlators.iter().any(|c| c.uses_heisenberg_picture()),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
