//! Baked figure presets.
//!
//! Every value printed in a figure caption is reproduced verbatim; values
//! the captions leave open are listed in each config's `choices`.

use std::f64::consts::{FRAC_PI_2, PI};

use tcqd::channels::{CavityLoss, ChannelFamily, SqueezeParams};
use tcqd::evolver::TimeGrid;
use tcqd::hilbert::SystemParams;
use tcqd::quasiprob::QdKind;

use crate::config::{HeatmapConfig, InitialConfig, LayoutConfig, NumericsConfig, Observable, QdConfig, SimConfig};

pub const N_SPINS: usize = 4;
pub const N_MAX: usize = 30;
pub const OMEGA: [f64; 4] = [1.11, 1.15, 1.15, 1.11];
pub const OMEGA_C: f64 = 1.15;
pub const G: [f64; 4] = [0.55, 0.52, 0.5, 0.55];
pub const THETA: [f64; 4] = [PI / 4.0, 3.0 * PI / 5.0, 2.0 * PI / 3.0, 3.0 * PI / 4.0];
pub const PHI: [f64; 4] = [3.0 * PI / 4.0, PI / 3.0, PI / 4.0, PI / 6.0];
pub const THETA_SCALINGS: [f64; 4] = [1.0 / 4.0, 3.0 / 5.0, 2.0 / 3.0, 3.0 / 4.0];
pub const PHI_SCALINGS: [f64; 4] = [3.0 / 4.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 6.0];
pub const MEAN_PHOTONS: f64 = 6.0;
pub const SQUEEZE_PHASE: f64 = PI / 4.0;
pub const PCENM_NU: [f64; 4] = [2.2, 2.4, 2.2, 2.4];
pub const PCENM_Q: f64 = 0.75;
pub const AD_GAMMA: [f64; 4] = [0.31, 0.32, 0.31, 0.32];
pub const SEMIMARKOV_S: f64 = 0.1;
pub const NMAD_Q_PRIME: f64 = 0.05;
pub const FIG6_KAPPA: f64 = 0.5;
pub const FIG6_B: f64 = 0.05;
pub const FIG7_KAPPA: f64 = 0.1;
pub const FIG7_TAU: f64 = 3.0;
pub const DEFAULT_KAPPA: f64 = 0.01;
pub const HEATMAP_TIME: f64 = 5.0;

/// One preset: one or more runs sharing a name.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub runs: Vec<SimConfig>,
}

pub const NAMES: [&str; 16] = [
    "fig1a",
    "fig1b",
    "fig1c",
    "fig1d",
    "fig2",
    "fig3",
    "fig3_limit",
    "fig4ad",
    "fig4sm",
    "fig4pure",
    "fig5a",
    "fig5b",
    "fig5c",
    "fig5d",
    "fig6",
    "fig7",
];

/// Round to 12 significant digits so products of decimal literals stay decimal.
fn decimal(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn scaled(factor: f64, offset: f64) -> Vec<f64> {
    G.iter().map(|g| decimal(offset + factor * g)).collect()
}

fn base(name: &str, channel: ChannelFamily, kappa: f64) -> SimConfig {
    SimConfig {
        name: name.into(),
        choices: Vec::new(),
        layout: LayoutConfig {
            n_spins: N_SPINS,
            n_max: N_MAX,
        },
        system: SystemParams {
            omega: OMEGA.to_vec(),
            omega_c: OMEGA_C,
            g: G.to_vec(),
        },
        channel,
        cavity: CavityLoss::zero_temperature(kappa),
        initial: InitialConfig {
            mean_photons: MEAN_PHOTONS,
            zeta: FRAC_PI_2,
            ..InitialConfig::default()
        },
        grid: TimeGrid::default(),
        observables: vec![
            Observable::NPhoton,
            Observable::Exc,
            Observable::ExcTotal,
            Observable::G2Zero,
            Observable::MandelQ,
        ],
        tau: Vec::new(),
        qd: None,
        heatmap: None,
        numerics: NumericsConfig::default(),
        out_dir: None,
    }
}

fn with_qd(mut c: SimConfig) -> SimConfig {
    c.qd = Some(QdConfig {
        kinds: QdKind::ALL.to_vec(),
        theta: THETA.to_vec(),
        phi: PHI.to_vec(),
    });
    c
}

fn choice(mut c: SimConfig, note: &str) -> SimConfig {
    c.choices.push(note.into());
    c
}

fn sgad(name: &str, r: f64, temperature: f64) -> SimConfig {
    let c = with_qd(base(
        name,
        ChannelFamily::Sgad {
            gamma: scaled(0.01, 0.0),
            squeeze: SqueezeParams {
                r,
                phi: SQUEEZE_PHASE,
                temperature,
            },
        },
        DEFAULT_KAPPA,
    ));
    if name == "fig1a" {
        c
    } else {
        choice(c, &format!("r = {r}, T = {temperature}: choice, not paper"))
    }
}

fn pcenm(name: &str, nu: Vec<f64>, limit: bool) -> SimConfig {
    base(
        name,
        ChannelFamily::Pcenm {
            nu,
            q: PCENM_Q,
            dephasing_limit: limit,
        },
        DEFAULT_KAPPA,
    )
}

fn gksl(name: &str, gamma: Vec<f64>, kappa: f64) -> SimConfig {
    base(
        name,
        ChannelFamily::GkslThermal {
            gamma,
            temperature: 0.0,
        },
        kappa,
    )
}

fn semimarkov(name: &str) -> SimConfig {
    base(
        name,
        ChannelFamily::SemiMarkov {
            gamma_tilde: AD_GAMMA.iter().map(|g| decimal(g / 2.0)).collect(),
            s: SEMIMARKOV_S,
        },
        DEFAULT_KAPPA,
    )
}

fn build(name: &str) -> Option<Preset> {
    let (description, runs) = match name {
        "fig1a" => ("QDs under SGAD, r = 0, T = 0", vec![sgad(name, 0.0, 0.0)]),
        "fig1b" => ("QDs under SGAD, r = 0.5, T = 0", vec![sgad(name, 0.5, 0.0)]),
        "fig1c" => ("QDs under SGAD, r = 0, T = 1", vec![sgad(name, 0.0, 1.0)]),
        "fig1d" => ("QDs under SGAD, r = 0.5, T = 1", vec![sgad(name, 0.5, 1.0)]),
        "fig2" => {
            let mut c = sgad(name, 0.0, 0.0);
            c.heatmap = Some(HeatmapConfig {
                time: HEATMAP_TIME,
                theta_scalings: THETA_SCALINGS.to_vec(),
                phi_scalings: PHI_SCALINGS.to_vec(),
                n_theta: 61,
                n_phi: 120,
            });
            let c = choice(c, "heatmap time t = 5 and 61 x 120 grid: choice, not paper");
            ("P heatmap under SGAD at a fixed time", vec![c])
        }
        "fig3" => (
            "QDs under the phase-covariant eternal non-Markovian channel",
            vec![choice(
                with_qd(pcenm(name, PCENM_NU.to_vec(), false)),
                "kappa = 0.01: choice, not paper",
            )],
        ),
        "fig3_limit" => (
            "Same, with the dephasing rate frozen at -nu/2",
            vec![choice(
                with_qd(pcenm(name, PCENM_NU.to_vec(), true)),
                "kappa = 0.01: choice, not paper",
            )],
        ),
        "fig4ad" => (
            "QDs under amplitude damping",
            vec![with_qd(gksl(name, AD_GAMMA.to_vec(), DEFAULT_KAPPA))],
        ),
        "fig4sm" => ("QDs under semi-Markov dephasing", vec![with_qd(semimarkov(name))]),
        "fig4pure" => (
            "QDs under the bare Hamiltonian",
            vec![with_qd(gksl(name, vec![0.0; N_SPINS], 0.0))],
        ),
        "fig5a" => (
            "Photon number and spin excitation, GKSL",
            vec![gksl(name, scaled(0.01, 0.0), DEFAULT_KAPPA)],
        ),
        "fig5b" => (
            "Photon number and spin excitation, PCEnM",
            vec![choice(
                pcenm(name, scaled(0.02, 0.0), false),
                "q = 0.75: choice, not paper",
            )],
        ),
        "fig5c" => (
            "Photon number and spin excitation, NMAD",
            vec![base(
                name,
                ChannelFamily::Nmad {
                    gamma_prime: scaled(0.5, 0.5),
                    q_prime: NMAD_Q_PRIME,
                },
                DEFAULT_KAPPA,
            )],
        ),
        "fig5d" => ("Photon number and spin excitation, semi-Markov", vec![semimarkov(name)]),
        "fig6" => {
            let ad = gksl("fig6_ad", scaled(0.1, 0.0), FIG6_KAPPA);
            let mut nmad = gksl("fig6_nmad", scaled(0.2, 0.0), 0.0);
            nmad.cavity = CavityLoss::Nmad {
                kappa_prime: FIG6_KAPPA / 2.0,
                b: FIG6_B,
            };
            let nmad = choice(
                nmad,
                "spin decay term read as gamma (2 s- rho s+ - {s+ s-, rho}), i.e. rate 2 gamma",
            );
            ("g2(0) under cavity amplitude damping and cavity NMAD", vec![ad, nmad])
        }
        "fig7" => {
            let mut c = gksl(name, scaled(0.01, 0.0), FIG7_KAPPA);
            c.observables.extend([Observable::G2Tau, Observable::Bunching]);
            c.tau = vec![FIG7_TAU];
            ("Mandel Q, g2(0), g2(tau = 3) and the bunching indicator", vec![c])
        }
        _ => return None,
    };
    Some(Preset {
        name: NAMES.iter().find(|n| **n == name)?,
        description,
        runs,
    })
}

pub fn get(name: &str) -> Option<Preset> {
    build(name)
}

pub fn all() -> Vec<Preset> {
    NAMES.iter().filter_map(|n| build(n)).collect()
}
