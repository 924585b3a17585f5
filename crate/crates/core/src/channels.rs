//! Noise channels as lists of jump operators with signed, time-dependent
//! rates.
//!
//! The three non-Markovian coth-form rates (amplitude damping of the spins,
//! semi-Markov dephasing, amplitude damping of the cavity) share one complex
//! kernel
//!
//! ```text
//! rate(t) = 2 Re[ a / ( z coth(d t z / 2) + 1 ) ],   z = sqrt(1 - c)
//! ```
//!
//! with a series branch for small `d t z / 2`. In the underdamped regime
//! (`c > 1`) the denominator has real zeros, which are poles of the rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{boson_ops, spin_site_op, SpaceLayout, SpinOp};
use crate::linalg::Operator;
use crate::{Error, Result, C64};

/// Which of the three phase-covariant rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcenmRate {
    Gain,
    Loss,
    Dephase,
}

/// A real rate function of time. Values may be negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFn {
    Constant { value: f64 },
    PcenmGain { nu: f64, q: f64 },
    PcenmLoss { nu: f64, q: f64 },
    PcenmDephase { nu: f64, q: f64 },
    Nmad { gamma_prime: f64, q_prime: f64 },
    SemiMarkov { gamma_tilde: f64, s: f64 },
    CavityNmad { kappa_prime: f64, b: f64 },
}

impl RateFn {
    pub fn constant(value: f64) -> Self {
        RateFn::Constant { value }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match *self {
            RateFn::Constant { value } => Ok(value),
            RateFn::PcenmGain { nu, q } => rate_pcenm(nu, q, PcenmRate::Gain, t),
            RateFn::PcenmLoss { nu, q } => rate_pcenm(nu, q, PcenmRate::Loss, t),
            RateFn::PcenmDephase { nu, q } => rate_pcenm(nu, q, PcenmRate::Dephase, t),
            RateFn::Nmad { gamma_prime, q_prime } => rate_nmad(gamma_prime, q_prime, t),
            RateFn::SemiMarkov { gamma_tilde, s } => rate_semimarkov(gamma_tilde, s, t),
            RateFn::CavityNmad { kappa_prime, b } => rate_cavity_nmad(kappa_prime, b, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self,
            RateFn::Constant { .. } | RateFn::PcenmGain { .. } | RateFn::PcenmLoss { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateFn::Constant { .. } => "constant",
            RateFn::PcenmGain { .. } => "pcenm_gain",
            RateFn::PcenmLoss { .. } => "pcenm_loss",
            RateFn::PcenmDephase { .. } => "pcenm_dephase",
            RateFn::Nmad { .. } => "nmad",
            RateFn::SemiMarkov { .. } => "semimarkov",
            RateFn::CavityNmad { .. } => "cavity_nmad",
        }
    }

    /// Poles of the rate in `[0, t_end]`, ascending.
    pub fn poles(&self, t_end: f64) -> Vec<f64> {
        match *self {
            RateFn::Nmad { gamma_prime, q_prime } => CothKernel::nmad(gamma_prime, q_prime).poles(t_end),
            RateFn::SemiMarkov { gamma_tilde, s } => CothKernel::semimarkov(gamma_tilde, s).poles(t_end),
            RateFn::CavityNmad { kappa_prime, b } => CothKernel::nmad(kappa_prime, b).poles(t_end),
            _ => Vec::new(),
        }
    }
}

/// Phase-covariant eternal non-Markovian rates: gain `ν(1+q)`, loss `ν(1-q)`,
/// and the time-dependent (negative) pure-dephasing rate.
pub fn rate_pcenm(nu: f64, q: f64, which: PcenmRate, t: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::param("nu", format!("must be positive (got {nu})")));
    }
    if !(q.abs() < 1.0) {
        return Err(Error::param("q", format!("|q| must be < 1 (got {q})")));
    }
    Ok(match which {
        PcenmRate::Gain => nu * (1.0 + q),
        PcenmRate::Loss => nu * (1.0 - q),
        PcenmRate::Dephase => {
            // sinh/cosh divided through by cosh so large times stay finite.
            let x = 2.0 * nu * t;
            let p = 1.0 - q * q;
            -nu * p * x.tanh() / (2.0 * ((1.0 + q * q) / x.cosh() + p))
        }
    })
}

/// `F(t) = e^{-q't/2} ( (q'/l) sinh(lt/2) + cosh(lt/2) )`,
/// `l = sqrt(q'^2 - 2 γ' q')`.
pub fn decoherence_f(gamma_prime: f64, q_prime: f64, t: f64) -> Result<f64> {
    let l = Complex64::new(q_prime * q_prime - 2.0 * gamma_prime * q_prime, 0.0).sqrt();
    let u = l * (t / 2.0);
    // (q'/l) sinh(lt/2) = (q' t / 2) sinh(u)/u
    let sinhc = if u.norm() < 1e-4 {
        let u2 = u * u;
        1.0 + u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sinh() / u
    };
    let f = (-q_prime * t / 2.0).exp() * (sinhc * (q_prime * t / 2.0) + u.cosh());
    let residue = f.im.abs();
    if residue > 1e-12 * f.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue {
            quantity: "decoherence function",
            residue,
            tol: 1e-12,
        });
    }
    Ok(f.re)
}

/// `γ'(t) = 2 Re[ γ' / ( sqrt(1 - 2γ'/q') coth(q' t sqrt(1 - 2γ'/q') / 2) + 1 ) ]`.
pub fn rate_nmad(gamma_prime: f64, q_prime: f64, t: f64) -> Result<f64> {
    check_coth_params("gamma_prime", gamma_prime, "q_prime", q_prime)?;
    CothKernel::nmad(gamma_prime, q_prime).eval(t, "nmad")
}

/// `γ̃(t) = 2γ̃ / ( s sqrt(1 - 8γ̃/s²) coth(s t sqrt(1 - 8γ̃/s²) / 2) + s )`.
pub fn rate_semimarkov(gamma_tilde: f64, s: f64, t: f64) -> Result<f64> {
    check_coth_params("gamma_tilde", gamma_tilde, "s", s)?;
    CothKernel::semimarkov(gamma_tilde, s).eval(t, "semimarkov")
}

/// Cavity counterpart of [`rate_nmad`] with `(κ', b)`.
pub fn rate_cavity_nmad(kappa_prime: f64, b: f64, t: f64) -> Result<f64> {
    check_coth_params("kappa_prime", kappa_prime, "b", b)?;
    CothKernel::nmad(kappa_prime, b).eval(t, "cavity_nmad")
}

fn check_coth_params(strength: &str, g: f64, width: &str, w: f64) -> Result<()> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(Error::param(
            strength,
            format!("must be finite and non-negative (got {g})"),
        ));
    }
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::param(width, format!("must be finite and positive (got {w})")));
    }
    Ok(())
}

/// `2 Re[a / (z coth(d t z / 2) + 1)]` with `z = sqrt(1 - c)`.
#[derive(Clone, Copy, Debug)]
struct CothKernel {
    a: f64,
    c: f64,
    d: f64,
}

impl CothKernel {
    fn nmad(gamma: f64, width: f64) -> Self {
        CothKernel {
            a: gamma,
            c: 2.0 * gamma / width,
            d: width,
        }
    }

    fn semimarkov(gamma_tilde: f64, s: f64) -> Self {
        CothKernel {
            a: gamma_tilde / s,
            c: 8.0 * gamma_tilde / (s * s),
            d: s,
        }
    }

    fn eval(&self, t: f64, name: &'static str) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::param("t", "rates are defined for t >= 0"));
        }
        if t == 0.0 || self.a == 0.0 {
            return Ok(0.0);
        }
        let z = Complex64::new(1.0 - self.c, 0.0).sqrt();
        let k = 0.5 * self.d * t;
        let u = z * k;
        // z coth(k z) = (1/k) u coth(u)
        let z_coth = if u.norm() < 1e-2 {
            let u2 = u * u;
            (1.0 + u2 / 3.0 - u2 * u2 / 45.0 + u2 * u2 * u2 * (2.0 / 945.0)) / k
        } else {
            z / u.tanh()
        };
        let denom = z_coth + 1.0;
        let value = 2.0 * (self.a / denom).re;
        if denom.norm() == 0.0 || !value.is_finite() {
            return Err(Error::RatePole {
                rate: name,
                t,
                pole_estimate: self.nearest_pole(t).unwrap_or(t),
            });
        }
        Ok(value)
    }

    /// Zeros of `w cot(d t w / 2) + 1`, `w = sqrt(c - 1)`, i.e.
    /// `d t w / 2 = π - atan(w) + nπ`.
    fn poles(&self, t_end: f64) -> Vec<f64> {
        if self.c <= 1.0 || self.a == 0.0 {
            return Vec::new();
        }
        let w = (self.c - 1.0).sqrt();
        let first = PI - w.atan();
        (0..)
            .map(|n| 2.0 * (first + n as f64 * PI) / (self.d * w))
            .take_while(|&t| t <= t_end)
            .collect()
    }

    fn nearest_pole(&self, t: f64) -> Option<f64> {
        self.poles(t + 1.0 + 4.0 * PI / self.d)
            .into_iter()
            .min_by(|x, y| (x - t).abs().total_cmp(&(y - t).abs()))
    }
}

/// Bath squeezing and temperature (ħ = k_B = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeParams {
    pub r: f64,
    pub phi: f64,
    pub temperature: f64,
}

/// `1 / (e^{ω/T} - 1)`, zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (omega / temperature).exp_m1()
    }
}

/// How a dissipator term acts on `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermForm {
    /// `L ρ L† - ½{L†L, ρ}`
    Lindblad,
    /// `L ρ L - ρ` with `L = L†`
    Dephasing,
}

#[derive(Clone, Debug)]
pub struct ChannelTerm {
    pub op: Operator,
    pub rate: RateFn,
    pub form: TermForm,
    pub label: String,
}

/// A dissipator: `Σ rate_i(t) D_i[L_i](ρ)`.
#[derive(Clone, Debug, Default)]
pub struct ChannelSpec {
    pub label: String,
    pub terms: Vec<ChannelTerm>,
}

impl ChannelSpec {
    pub fn empty(label: impl Into<String>) -> Self {
        ChannelSpec {
            label: label.into(),
            terms: Vec::new(),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.rate.is_constant())
    }

    /// Checks operator dimensions and the self-adjointness of dephasing terms.
    pub fn validate(&self, layout: &SpaceLayout) -> Result<()> {
        for term in &self.terms {
            if term.op.dim() != layout.dim() {
                return Err(Error::DimensionMismatch {
                    expected: layout.dim(),
                    found: term.op.dim(),
                });
            }
            if term.form == TermForm::Dephasing && !term.op.is_hermitian(1e-14) {
                return Err(Error::param(
                    term.label.clone(),
                    "dephasing-form terms need a self-adjoint operator",
                ));
            }
        }
        Ok(())
    }

    /// Poles of the time-dependent rates in `[0, t_end]`.
    pub fn poles(&self, t_end: f64) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .terms
            .iter()
            .flat_map(|t| t.rate.poles(t_end).into_iter().map(move |p| (t.label.clone(), p)))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }

    fn push(&mut self, label: String, op: Operator, rate: RateFn, form: TermForm) {
        self.terms.push(ChannelTerm { op, rate, form, label });
    }
}

/// Cavity loss model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CavityLoss {
    /// `κ(n_th+1) D[a] + κ n_th D[a†]`
    Constant { kappa: f64, n_th: f64 },
    /// `κ'(t) D[a]`
    Nmad { kappa_prime: f64, b: f64 },
}

impl CavityLoss {
    pub fn zero_temperature(kappa: f64) -> Self {
        CavityLoss::Constant { kappa, n_th: 0.0 }
    }
}

/// Spin-channel families, one per master equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelFamily {
    /// Thermal GKSL: `γ(N+1) D[σ⁻] + γN D[σ⁺]`, `N` from `ω_k` and `T`.
    GkslThermal { gamma: Vec<f64>, temperature: f64 },
    /// Squeezed generalized amplitude damping.
    Sgad { gamma: Vec<f64>, squeeze: SqueezeParams },
    /// Phase-covariant eternal non-Markovian; `dephasing_limit` freezes the
    /// dephasing rate at its `t → ∞` value `-ν/2`.
    Pcenm {
        nu: Vec<f64>,
        q: f64,
        dephasing_limit: bool,
    },
    /// Non-Markovian amplitude damping.
    Nmad { gamma_prime: Vec<f64>, q_prime: f64 },
    /// Semi-Markov dephasing.
    SemiMarkov { gamma_tilde: Vec<f64>, s: f64 },
}

impl ChannelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelFamily::GkslThermal { .. } => "gksl_thermal",
            ChannelFamily::Sgad { .. } => "sgad",
            ChannelFamily::Pcenm { .. } => "pcenm",
            ChannelFamily::Nmad { .. } => "nmad",
            ChannelFamily::SemiMarkov { .. } => "semimarkov",
        }
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::param(name, format!("expected {n} values, got {}", v.len())));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::param(name, format!("must be finite and non-negative (got {x})")));
    }
    Ok(())
}

fn add_cavity(spec: &mut ChannelSpec, layout: &SpaceLayout, cavity: &CavityLoss) -> Result<()> {
    let (a, ad) = boson_ops(layout);
    match *cavity {
        CavityLoss::Constant { kappa, n_th } => {
            check_nonneg("kappa", &[kappa])?;
            check_nonneg("n_th", &[n_th])?;
            if kappa * (n_th + 1.0) > 0.0 {
                spec.push(
                    "cavity_loss".into(),
                    a,
                    RateFn::constant(kappa * (n_th + 1.0)),
                    TermForm::Lindblad,
                );
            }
            if kappa * n_th > 0.0 {
                spec.push(
                    "cavity_gain".into(),
                    ad,
                    RateFn::constant(kappa * n_th),
                    TermForm::Lindblad,
                );
            }
        }
        CavityLoss::Nmad { kappa_prime, b } => {
            check_coth_params("kappa_prime", kappa_prime, "b", b)?;
            spec.push(
                "cavity_nmad".into(),
                a,
                RateFn::CavityNmad { kappa_prime, b },
                TermForm::Lindblad,
            );
        }
    }
    Ok(())
}

/// SGAD channel: per spin, `R_1 = sqrt(γ(N+1)) R` and `R_2 = sqrt(γN) R`
/// with `R = σ⁻ cosh r + e^{iΦ} σ⁺ sinh r`, unit rates, plus the cavity term.
pub fn build_sgad_channel(
    layout: &SpaceLayout,
    gammas: &[f64],
    squeeze: &SqueezeParams,
    omegas: &[f64],
    cavity: &CavityLoss,
) -> Result<ChannelSpec> {
    let n = layout.n_spins();
    check_len("gamma", gammas, n)?;
    check_len("omega", omegas, n)?;
    check_nonneg("gamma", gammas)?;
    check_nonneg("r", &[squeeze.r])?;
    check_nonneg("temperature", &[squeeze.temperature])?;
    let mut spec = ChannelSpec::empty("sgad");
    let (ch, sh) = (squeeze.r.cosh(), squeeze.r.sinh());
    for k in 1..=n {
        let sm = spin_site_op(layout, k, SpinOp::Minus)?;
        let sp = spin_site_op(layout, k, SpinOp::Plus)?;
        let r_op = sm
            .scale(C64::new(ch, 0.0))
            .add(&sp.scale(C64::from_polar(sh, squeeze.phi)));
        let n_th = bose_occupation(omegas[k - 1], squeeze.temperature);
        let g = gammas[k - 1];
        for (idx, weight) in [(1, g * (n_th + 1.0)), (2, g * n_th)] {
            if weight > 0.0 {
                spec.push(
                    format!("R{idx}_{k}"),
                    r_op.scale(C64::new(weight.sqrt(), 0.0)),
                    RateFn::constant(1.0),
                    TermForm::Lindblad,
                );
            }
        }
    }
    add_cavity(&mut spec, layout, cavity)?;
    Ok(spec)
}

/// Assemble the dissipator of `family` plus the cavity term.
pub fn build_channel(
    layout: &SpaceLayout,
    omegas: &[f64],
    family: &ChannelFamily,
    cavity: &CavityLoss,
) -> Result<ChannelSpec> {
    let n = layout.n_spins();
    let site = |k: usize, which| spin_site_op(layout, k, which);
    let mut spec = ChannelSpec::empty(family.name());
    match family {
        ChannelFamily::GkslThermal { gamma, temperature } => {
            check_len("gamma", gamma, n)?;
            check_len("omega", omegas, n)?;
            check_nonneg("gamma", gamma)?;
            check_nonneg("temperature", &[*temperature])?;
            for k in 1..=n {
                let n_th = bose_occupation(omegas[k - 1], *temperature);
                let g = gamma[k - 1];
                if g * (n_th + 1.0) > 0.0 {
                    spec.push(
                        format!("decay_{k}"),
                        site(k, SpinOp::Minus)?,
                        RateFn::constant(g * (n_th + 1.0)),
                        TermForm::Lindblad,
                    );
                }
                if g * n_th > 0.0 {
                    spec.push(
                        format!("absorb_{k}"),
                        site(k, SpinOp::Plus)?,
                        RateFn::constant(g * n_th),
                        TermForm::Lindblad,
                    );
                }
            }
        }
        ChannelFamily::Sgad { gamma, squeeze } => {
            return build_sgad_channel(layout, gamma, squeeze, omegas, cavity);
        }
        ChannelFamily::Pcenm { nu, q, dephasing_limit } => {
            check_len("nu", nu, n)?;
            for k in 1..=n {
                let nu_k = nu[k - 1];
                // Validates ν and q.
                rate_pcenm(nu_k, *q, PcenmRate::Gain, 0.0)?;
                let dephase = if *dephasing_limit {
                    RateFn::constant(-nu_k / 2.0)
                } else {
                    RateFn::PcenmDephase { nu: nu_k, q: *q }
                };
                spec.push(
                    format!("gain_{k}"),
                    site(k, SpinOp::Plus)?,
                    RateFn::PcenmGain { nu: nu_k, q: *q },
                    TermForm::Lindblad,
                );
                spec.push(
                    format!("loss_{k}"),
                    site(k, SpinOp::Minus)?,
                    RateFn::PcenmLoss { nu: nu_k, q: *q },
                    TermForm::Lindblad,
                );
                spec.push(
                    format!("dephase_{k}"),
                    site(k, SpinOp::Z)?,
                    dephase,
                    TermForm::Dephasing,
                );
            }
        }
        ChannelFamily::Nmad { gamma_prime, q_prime } => {
            check_len("gamma_prime", gamma_prime, n)?;
            for k in 1..=n {
                check_coth_params("gamma_prime", gamma_prime[k - 1], "q_prime", *q_prime)?;
                spec.push(
                    format!("nmad_{k}"),
                    site(k, SpinOp::Minus)?,
                    RateFn::Nmad {
                        gamma_prime: gamma_prime[k - 1],
                        q_prime: *q_prime,
                    },
                    TermForm::Lindblad,
                );
            }
        }
        ChannelFamily::SemiMarkov { gamma_tilde, s } => {
            check_len("gamma_tilde", gamma_tilde, n)?;
            for k in 1..=n {
                check_coth_params("gamma_tilde", gamma_tilde[k - 1], "s", *s)?;
                spec.push(
                    format!("semimarkov_{k}"),
                    site(k, SpinOp::Z)?,
                    RateFn::SemiMarkov {
                        gamma_tilde: gamma_tilde[k - 1],
                        s: *s,
                    },
                    TermForm::Dephasing,
                );
            }
        }
    }
    add_cavity(&mut spec, layout, cavity)?;
    Ok(spec)
}
