//! Fixed-step RK4 integration of `dρ/dt = -i[H, ρ] + Σ r_j(t) D_j(ρ)` and the
//! quantum-regression primitive for two-time photon correlators.
//!
//! The right-hand side is evaluated as
//!
//! ```text
//! K = -iH - ½ Σ r_j L_j†L_j,   dρ/dt = Kρ + (Kρ)† + Σ r_j L_j ρ L_j† + dephasing
//! ```
//!
//! which needs one sparse-dense product per evaluation. Jump operators with a
//! single entry per row (σ±, a, a†, squeezed combinations) are applied
//! elementwise, as are diagonal dephasing operators.
//!
//! The right-hand side assumes a Hermitian input; every matrix evolved here
//! (states, conditional matrices `aρa†`, Heisenberg-picture observables) is.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelSpec, TermForm};
use crate::hilbert::{boson_ops, SpaceLayout};
use crate::linalg::{hermiticity_error, DensityMatrix, Operator};
use crate::par::{self, Execution};
use crate::quasiprob::reduce_to_spins;
use crate::{Error, Result, C64};

const ROWS_PER_CHUNK: usize = 16;

/// Uniform time grid with snapshots every `sample_stride` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_stride: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            t_start: 0.0,
            t_end: 25.0,
            dt: 0.005,
            sample_stride: 10,
        }
    }
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64, sample_stride: usize) -> Result<Self> {
        let grid = TimeGrid {
            t_start,
            t_end,
            dt,
            sample_stride,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive (got {})", self.dt)));
        }
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::param(
                "t_end",
                format!("must exceed t_start ({} <= {})", self.t_end, self.t_start),
            ));
        }
        if self.sample_stride == 0 {
            return Err(Error::param("sample_stride", "must be at least 1"));
        }
        let steps = (self.t_end - self.t_start) / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::param("dt", "t_end - t_start must be a whole number of steps"));
        }
        if !self.n_steps().is_multiple_of(self.sample_stride) {
            return Err(Error::param(
                "sample_stride",
                format!("must divide the step count {}", self.n_steps()),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.sample_stride + 1
    }

    pub fn time_at(&self, step: usize) -> f64 {
        self.t_start + step as f64 * self.dt
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.n_samples())
            .map(|s| self.time_at(s * self.sample_stride))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Replace ρ by (ρ + ρ†)/2 after each step.
    pub hermitian_projection: bool,
    /// Abort when `|Tr ρ - Tr ρ₀| / max(|Tr ρ₀|, 1)` exceeds this.
    pub trace_tol: Option<f64>,
    /// Saturation scale for time-dependent rates; `None` means
    /// [`Generator::default_rate_cap`].
    pub rate_cap: Option<f64>,
    /// Abort when the final population of the top two Fock levels exceeds this.
    pub fock_tail_tol: Option<f64>,
    /// Record the minimum eigenvalue of the reduced spin state at samples.
    pub monitor_positivity: bool,
    pub execution: Execution,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            hermitian_projection: true,
            trace_tol: Some(1e-6),
            rate_cap: None,
            fock_tail_tol: Some(1e-6),
            monitor_positivity: true,
            execution: Execution::default(),
        }
    }
}

impl EvolveOptions {
    /// Options for evolving matrices that are not states.
    fn bare(&self) -> Self {
        EvolveOptions {
            trace_tol: None,
            fock_tail_tol: None,
            monitor_positivity: false,
            ..*self
        }
    }

    pub fn effective_rate_cap(&self, gen: &Generator, dt: f64) -> f64 {
        self.rate_cap.unwrap_or_else(|| gen.default_rate_cap(dt))
    }
}

/// Aggregated rate clamping for one dissipator term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateClamp {
    pub label: String,
    pub count: usize,
    pub first_t: f64,
    pub last_t: f64,
    pub max_abs_raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub dt: f64,
    pub max_trace_drift: f64,
    /// Largest `|ρ_ij - conj(ρ_ji)|` seen before projection.
    pub max_hermiticity_drift: f64,
    pub max_top_fock_population: f64,
    pub final_top_fock_population: f64,
    /// Minimum eigenvalue of the reduced spin state over samples.
    pub min_spin_eigenvalue: f64,
    /// Minimum diagonal element of the full state over samples.
    pub min_diagonal: f64,
    /// Samples where either positivity monitor went below `-1e-12`.
    pub negative_samples: usize,
    pub rate_cap: f64,
    pub rate_clamps: Vec<RateClamp>,
    /// `(term label, t)` for every rate pole inside the window.
    pub rate_poles: Vec<(String, f64)>,
}

impl Diagnostics {
    fn new(steps: usize, dt: f64, rate_cap: f64) -> Self {
        Diagnostics {
            steps,
            dt,
            max_trace_drift: 0.0,
            max_hermiticity_drift: 0.0,
            max_top_fock_population: 0.0,
            final_top_fock_population: 0.0,
            min_spin_eigenvalue: f64::INFINITY,
            min_diagonal: f64::INFINITY,
            negative_samples: 0,
            rate_cap,
            rate_clamps: Vec::new(),
            rate_poles: Vec::new(),
        }
    }
}

/// Sampled states of an integration, for small systems.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Diagnostics,
}

/// A jump operator with at most one entry per row: `L_{i, src(i)} = c_i`.
#[derive(Clone, Debug)]
struct SparseJump {
    by_row: Vec<Option<(usize, C64)>>,
    /// `conj(c_j)` by row, zero for empty rows.
    cc_re: Vec<f64>,
    cc_im: Vec<f64>,
    /// Runs `(j0, src(j0), len)` of occupied rows with consecutive sources.
    segments: Vec<(usize, usize, usize)>,
}

impl SparseJump {
    fn new(dim: usize, entries: &[(usize, usize, C64)]) -> Self {
        let mut by_row = vec![None; dim];
        let mut cc_re = vec![0.0; dim];
        let mut cc_im = vec![0.0; dim];
        let mut segments: Vec<(usize, usize, usize)> = Vec::new();
        for &(r, c, v) in entries {
            by_row[r] = Some((c, v));
            cc_re[r] = v.re;
            cc_im[r] = -v.im;
            match segments.last_mut() {
                Some((j0, p0, len)) if *j0 + *len == r && *p0 + *len == c => *len += 1,
                _ => segments.push((r, c, 1)),
            }
        }
        SparseJump {
            by_row,
            cc_re,
            cc_im,
            segments,
        }
    }
}

#[derive(Clone, Debug)]
enum JumpKind {
    Sparse(SparseJump),
    General(Operator),
}

/// Diagonal dephasing operator `z` as split planes.
#[derive(Clone, Debug)]
struct DiagDephasing {
    rate: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Jump {
    rate: usize,
    kind: JumpKind,
}

/// Precomputed master-equation generator for one Hamiltonian and channel.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    layout: Option<SpaceLayout>,
    hamiltonian: Operator,
    channel: ChannelSpec,
    dual: bool,
    k_indptr: Vec<usize>,
    k_indices: Vec<usize>,
    k_base: Vec<C64>,
    k_terms: Vec<(usize, Vec<(usize, C64)>)>,
    jumps: Vec<Jump>,
    diag_dephasing: Vec<DiagDephasing>,
    general_dephasing: Vec<(usize, Operator)>,
    time_independent: bool,
    /// Σ over time-dependent terms of a bound on the dissipator spectrum per unit rate.
    stiffness: f64,
}

impl Generator {
    pub fn new(hamiltonian: &Operator, channel: &ChannelSpec) -> Result<Self> {
        Self::build(hamiltonian, channel, false)
    }

    /// Attach the composite layout, enabling Fock-tail and positivity monitors.
    pub fn with_layout(mut self, layout: SpaceLayout) -> Result<Self> {
        if layout.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: layout.dim(),
            });
        }
        self.layout = Some(layout);
        Ok(self)
    }

    /// Heisenberg-picture generator: `i[H, B] + Σ r (L†BL - ½{L†L, B})`.
    pub fn adjoint(&self) -> Result<Self> {
        let mut g = Self::build(&self.hamiltonian, &self.channel, !self.dual)?;
        g.layout = self.layout;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Option<&SpaceLayout> {
        self.layout.as_ref()
    }

    pub fn channel(&self) -> &ChannelSpec {
        &self.channel
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    fn build(hamiltonian: &Operator, channel: &ChannelSpec, dual: bool) -> Result<Self> {
        let dim = hamiltonian.dim();
        for term in &channel.terms {
            if term.op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
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
        let h_sign = if dual { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };

        let mut stiffness = 0.0;
        let mut kt_ops = Vec::new();
        let mut jumps = Vec::new();
        let mut diag_dephasing = Vec::new();
        let mut general_dephasing = Vec::new();
        for (idx, term) in channel.terms.iter().enumerate() {
            if !term.rate.is_constant() {
                stiffness += match term.form {
                    TermForm::Lindblad => term.op.adjoint().matmul(&term.op).row_abs_bound(),
                    TermForm::Dephasing => 2.0 * term.op.matmul(&term.op).row_abs_bound(),
                };
            }
            match term.form {
                TermForm::Lindblad => {
                    kt_ops.push((idx, term.op.adjoint().matmul(&term.op)));
                    let op = if dual { term.op.adjoint() } else { term.op.clone() };
                    let kind = match op.single_entry_rows() {
                        Some(entries) => JumpKind::Sparse(SparseJump::new(dim, &entries)),
                        None => JumpKind::General(op),
                    };
                    jumps.push(Jump { rate: idx, kind });
                }
                TermForm::Dephasing => match term.op.as_diagonal() {
                    Some(z) => diag_dephasing.push(DiagDephasing {
                        rate: idx,
                        re: z.iter().map(|v| v.re).collect(),
                        im: z.iter().map(|v| v.im).collect(),
                    }),
                    None => general_dephasing.push((idx, term.op.clone())),
                },
            }
        }

        // Union sparsity pattern of H and every L†L.
        let mut cells: Vec<(usize, usize)> = hamiltonian.iter().map(|(r, c, _)| (r, c)).collect();
        for (_, op) in &kt_ops {
            cells.extend(op.iter().map(|(r, c, _)| (r, c)));
        }
        cells.sort_unstable();
        cells.dedup();
        let mut k_indptr = vec![0usize; dim + 1];
        for &(r, _) in &cells {
            k_indptr[r + 1] += 1;
        }
        for r in 0..dim {
            k_indptr[r + 1] += k_indptr[r];
        }
        let k_indices: Vec<usize> = cells.iter().map(|&(_, c)| c).collect();
        let slot = |r: usize, c: usize| -> usize {
            let row = &k_indices[k_indptr[r]..k_indptr[r + 1]];
            k_indptr[r] + row.binary_search(&c).expect("cell in union pattern")
        };
        let mut k_base = vec![C64::new(0.0, 0.0); cells.len()];
        for (r, c, v) in hamiltonian.iter() {
            k_base[slot(r, c)] += h_sign * v;
        }
        let k_terms = kt_ops
            .iter()
            .map(|(idx, op)| (*idx, op.iter().map(|(r, c, v)| (slot(r, c), v * -0.5)).collect()))
            .collect();

        Ok(Generator {
            dim,
            layout: None,
            hamiltonian: hamiltonian.clone(),
            channel: channel.clone(),
            dual,
            k_indptr,
            k_indices,
            k_base,
            k_terms,
            jumps,
            diag_dephasing,
            general_dephasing,
            time_independent: channel.is_time_independent(),
            stiffness,
        })
    }

    /// Saturation scale keeping `dt` times the dissipator spectrum inside
    /// the RK4 stability interval when every time-dependent rate saturates.
    pub fn default_rate_cap(&self, dt: f64) -> f64 {
        2.5 / (dt * self.stiffness.max(1.0))
    }

    /// Rates at `t`. Time-dependent rates pass through the smooth saturation
    /// `r / (1 + (r/cap)^4)^(1/4)`; samples with `|r| > cap` are recorded in `log`.
    fn rates_at(&self, t: f64, cap: f64, log: &mut [Option<RateClamp>], out: &mut [f64]) -> Result<()> {
        for (i, term) in self.channel.terms.iter().enumerate() {
            let raw = term.rate.eval(t)?;
            if !raw.is_finite() {
                return Err(Error::RatePole {
                    rate: term.rate.name(),
                    t,
                    pole_estimate: t,
                });
            }
            if term.rate.is_constant() {
                out[i] = raw;
                continue;
            }
            out[i] = raw / (1.0 + (raw / cap).powi(4)).sqrt().sqrt();
            if raw.abs() > cap {
                let entry = log[i].get_or_insert_with(|| RateClamp {
                    label: term.label.clone(),
                    count: 0,
                    first_t: t,
                    last_t: t,
                    max_abs_raw: 0.0,
                });
                entry.count += 1;
                entry.last_t = t;
                entry.max_abs_raw = entry.max_abs_raw.max(raw.abs());
            }
        }
        Ok(())
    }

    /// `out = L(ρ)` in split-row layout, with rates given.
    fn apply_with_rates(&self, rates: &[f64], rho: &SplitMatrix, sink: Sink<'_>, ws: &mut Workspace, exec: Execution) {
        let d = self.dim;
        let stride = 2 * d;
        ws.k_values.clone_from(&self.k_base);
        for (idx, contribs) in &self.k_terms {
            let r = rates[*idx];
            if r != 0.0 {
                for &(s, v) in contribs {
                    ws.k_values[s] += v * r;
                }
            }
        }

        // X = Kρ
        let (indptr, indices, kv) = (&self.k_indptr, &self.k_indices, &ws.k_values);
        let src = &rho.data;
        par::for_each_chunk(exec, &mut ws.x.data, ROWS_PER_CHUNK * stride, |chunk, x| {
            let row0 = chunk * ROWS_PER_CHUNK;
            for (local, x_row) in x.chunks_exact_mut(stride).enumerate() {
                x_row.fill(0.0);
                let (xr, xi) = x_row.split_at_mut(d);
                let r = row0 + local;
                for k in indptr[r]..indptr[r + 1] {
                    let c = indices[k];
                    let (sr, si) = src[c * stride..(c + 1) * stride].split_at(d);
                    kernels::caxpy(kv[k].re, kv[k].im, sr, si, xr, xi);
                }
            }
        });

        let general = self.general_terms(rates, rho);
        let x = &ws.x.data;
        let dephase_shift: f64 = -self.diag_dephasing.iter().map(|t| rates[t.rate]).sum::<f64>()
            - self.general_dephasing.iter().map(|(i, _)| rates[*i]).sum::<f64>();
        let has_dephasing = !self.diag_dephasing.is_empty() || !self.general_dephasing.is_empty();

        let ctx = BlockContext {
            gen: self,
            rates,
            src,
            x,
            general: general.as_ref(),
            dephase_shift,
            has_dephasing,
        };
        let chunk = ROWS_PER_CHUNK * stride;
        match sink {
            Sink::Store(out) => par::for_each_chunk(exec, out, chunk, |c, out| ctx.fill(c * ROWS_PER_CHUNK, out)),
            Sink::Rk4 { acc, w, next: None } => par::for_each_chunk(exec, acc, chunk, |c, acc| {
                let mut buf = vec![0.0; acc.len()];
                ctx.fill(c * ROWS_PER_CHUNK, &mut buf);
                kernels::axpy(w, &buf, acc);
            }),
            Sink::Rk4 {
                acc,
                w,
                next: Some((next, y, h)),
            } => par::for_each_chunk_pair(exec, acc, next, chunk, |c, acc, next| {
                let mut buf = vec![0.0; acc.len()];
                ctx.fill(c * ROWS_PER_CHUNK, &mut buf);
                kernels::axpy(w, &buf, acc);
                let start = c * chunk;
                kernels::axpy_into(h, &buf, &y[start..start + buf.len()], next);
            }),
        }
    }

    /// Σ r L (Lρ)† over jump and dephasing operators without row structure.
    fn general_terms(&self, rates: &[f64], rho: &SplitMatrix) -> Option<Array2<C64>> {
        let ops: Vec<(f64, &Operator)> = self
            .jumps
            .iter()
            .filter_map(|j| match &j.kind {
                JumpKind::General(op) => Some((rates[j.rate], op)),
                JumpKind::Sparse(_) => None,
            })
            .chain(self.general_dephasing.iter().map(|(i, op)| (rates[*i], op)))
            .filter(|(r, _)| *r != 0.0)
            .collect();
        if ops.is_empty() {
            return None;
        }
        let d = self.dim;
        let rho = rho.to_array();
        let mut acc = Array2::<C64>::zeros((d, d));
        for (r, op) in ops {
            let y = op.mul_dense(&rho).t().mapv(|v| v.conj());
            acc.scaled_add(C64::new(r, 0.0), &op.mul_dense(&y));
        }
        Some(acc)
    }

    /// Evaluate the generator at `t` without clamping.
    pub fn apply(&self, rho: &DensityMatrix, t: f64) -> Result<Array2<C64>> {
        generator_apply_inner(self, rho, t, f64::INFINITY)
    }
}

/// Destination of one generator evaluation.
enum Sink<'a> {
    /// `out = L(ρ)`
    Store(&'a mut [f64]),
    /// `acc += w L(ρ)` and, when given, `next = y + h L(ρ)`.
    Rk4 {
        acc: &'a mut [f64],
        w: f64,
        next: Option<(&'a mut [f64], &'a [f64], f64)>,
    },
}

/// Everything the second pass needs to produce a block of output rows.
struct BlockContext<'a> {
    gen: &'a Generator,
    rates: &'a [f64],
    src: &'a [f64],
    x: &'a [f64],
    general: Option<&'a Array2<C64>>,
    dephase_shift: f64,
    has_dephasing: bool,
}

impl BlockContext<'_> {
    /// Rows `row0..` of `X + X† + jumps + dephasing` into `out`.
    fn fill(&self, row0: usize, out: &mut [f64]) {
        let d = self.gen.dim;
        let stride = 2 * d;
        let (x, src, rates) = (self.x, self.src, self.rates);
        let rows = out.len() / stride;
        out.copy_from_slice(&x[row0 * stride..(row0 + rows) * stride]);
        for j in 0..d {
            let xr = &x[j * stride + row0..j * stride + row0 + rows];
            let xi = &x[j * stride + d + row0..j * stride + d + row0 + rows];
            for local in 0..rows {
                out[local * stride + j] += xr[local];
                out[local * stride + d + j] -= xi[local];
            }
        }
        let mut f_re = vec![0.0; d];
        let mut f_im = vec![0.0; d];
        let mut m_re = vec![0.0; d];
        let mut m_im = vec![0.0; d];
        for (local, out_row) in out.chunks_exact_mut(stride).enumerate() {
            let i = row0 + local;
            let (or, oi) = out_row.split_at_mut(d);
            let (rr, ri) = src[i * stride..(i + 1) * stride].split_at(d);
            if self.has_dephasing {
                f_re.fill(self.dephase_shift);
                f_im.fill(0.0);
                for t in &self.gen.diag_dephasing {
                    let r = rates[t.rate];
                    // a = r z_i, f += a conj(z_j)
                    let (ar, ai) = (r * t.re[i], r * t.im[i]);
                    kernels::caxpy_conj(ar, ai, &t.re, &t.im, &mut f_re, &mut f_im);
                }
                kernels::cmul_acc(&f_re, &f_im, rr, ri, or, oi);
            }
            for jump in &self.gen.jumps {
                let r = rates[jump.rate];
                if r == 0.0 {
                    continue;
                }
                let JumpKind::Sparse(sp) = &jump.kind else { continue };
                let Some((s, c)) = sp.by_row[i] else { continue };
                let (ar, ai) = (r * c.re, r * c.im);
                let (sr, si) = src[s * stride..(s + 1) * stride].split_at(d);
                for &(j0, p0, len) in &sp.segments {
                    let (mr, mi) = (&mut m_re[..len], &mut m_im[..len]);
                    kernels::cmul_into(
                        &sp.cc_re[j0..j0 + len],
                        &sp.cc_im[j0..j0 + len],
                        &sr[p0..p0 + len],
                        &si[p0..p0 + len],
                        mr,
                        mi,
                    );
                    kernels::caxpy(ar, ai, mr, mi, &mut or[j0..j0 + len], &mut oi[j0..j0 + len]);
                }
            }
            if let Some(g) = self.general {
                for j in 0..d {
                    or[j] += g[[i, j]].re;
                    oi[j] += g[[i, j]].im;
                }
            }
        }
    }
}

/// Complex vector kernels on split real/imaginary slices. With AVX2 and FMA
/// available at runtime the same loops are compiled for those features.
mod kernels {
    macro_rules! dispatch {
        ($name:ident, $body:ident, ($($arg:ident : $ty:ty),*)) => {
            #[inline]
            pub fn $name($($arg: $ty),*) {
                #[cfg(target_arch = "x86_64")]
                {
                    if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                        #[target_feature(enable = "avx2,fma")]
                        unsafe fn wide($($arg: $ty),*) {
                            $body($($arg),*)
                        }
                        // SAFETY: the required CPU features were detected above.
                        unsafe { wide($($arg),*) };
                        return;
                    }
                }
                $body($($arg),*)
            }
        };
    }

    /// `y += a x`
    #[inline(always)]
    fn caxpy_body(ar: f64, ai: f64, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
        let n = yr.len();
        let (xr, xi, yi) = (&xr[..n], &xi[..n], &mut yi[..n]);
        for j in 0..n {
            yr[j] += ar * xr[j] - ai * xi[j];
            yi[j] += ar * xi[j] + ai * xr[j];
        }
    }

    /// `y += a conj(x)`
    #[inline(always)]
    fn caxpy_conj_body(ar: f64, ai: f64, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
        let n = yr.len();
        let (xr, xi, yi) = (&xr[..n], &xi[..n], &mut yi[..n]);
        for j in 0..n {
            yr[j] += ar * xr[j] + ai * xi[j];
            yi[j] += ai * xr[j] - ar * xi[j];
        }
    }

    /// `y += f x` elementwise
    #[inline(always)]
    fn cmul_acc_body(fr: &[f64], fi: &[f64], xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
        let n = yr.len();
        let (fr, fi, xr, xi, yi) = (&fr[..n], &fi[..n], &xr[..n], &xi[..n], &mut yi[..n]);
        for j in 0..n {
            yr[j] += fr[j] * xr[j] - fi[j] * xi[j];
            yi[j] += fr[j] * xi[j] + fi[j] * xr[j];
        }
    }

    /// `y = f x` elementwise
    #[inline(always)]
    fn cmul_into_body(fr: &[f64], fi: &[f64], xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
        let n = yr.len();
        let (fr, fi, xr, xi, yi) = (&fr[..n], &fi[..n], &xr[..n], &xi[..n], &mut yi[..n]);
        for j in 0..n {
            yr[j] = fr[j] * xr[j] - fi[j] * xi[j];
            yi[j] = fr[j] * xi[j] + fi[j] * xr[j];
        }
    }

    /// `y += w x` for real `w`
    #[inline(always)]
    fn axpy_body(w: f64, x: &[f64], y: &mut [f64]) {
        let n = y.len();
        let x = &x[..n];
        for j in 0..n {
            y[j] += w * x[j];
        }
    }

    /// `z = y + w x` for real `w`
    #[inline(always)]
    fn axpy_into_body(w: f64, x: &[f64], y: &[f64], z: &mut [f64]) {
        let n = z.len();
        let (x, y) = (&x[..n], &y[..n]);
        for j in 0..n {
            z[j] = y[j] + w * x[j];
        }
    }

    dispatch!(caxpy, caxpy_body, (ar: f64, ai: f64, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]));
    dispatch!(caxpy_conj, caxpy_conj_body, (ar: f64, ai: f64, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]));
    dispatch!(cmul_acc, cmul_acc_body, (fr: &[f64], fi: &[f64], xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]));
    dispatch!(cmul_into, cmul_into_body, (fr: &[f64], fi: &[f64], xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]));
    dispatch!(axpy, axpy_body, (w: f64, x: &[f64], y: &mut [f64]));
    dispatch!(axpy_into, axpy_into_body, (w: f64, x: &[f64], y: &[f64], z: &mut [f64]));
}

/// Square complex matrix, row-major, each row stored as
/// `[re_0 .. re_{d-1}, im_0 .. im_{d-1}]`.
#[derive(Clone, Debug)]
struct SplitMatrix {
    d: usize,
    data: Vec<f64>,
}

impl SplitMatrix {
    fn zeros(d: usize) -> Self {
        SplitMatrix {
            d,
            data: vec![0.0; 2 * d * d],
        }
    }

    fn from_array(m: &Array2<C64>) -> Self {
        let d = m.nrows();
        let mut s = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                s.data[i * 2 * d + j] = m[[i, j]].re;
                s.data[i * 2 * d + d + j] = m[[i, j]].im;
            }
        }
        s
    }

    fn to_array(&self) -> Array2<C64> {
        let d = self.d;
        Array2::from_shape_fn((d, d), |(i, j)| {
            C64::new(self.data[i * 2 * d + j], self.data[i * 2 * d + d + j])
        })
    }

    fn trace(&self) -> C64 {
        let d = self.d;
        (0..d)
            .map(|i| C64::new(self.data[i * 2 * d + i], self.data[i * 2 * d + d + i]))
            .sum()
    }

    /// Make the matrix exactly Hermitian; returns the largest
    /// `|m_ij - conj(m_ji)|` before the update.
    fn hermitian_project(&mut self) -> f64 {
        const TILE: usize = 32;
        let d = self.d;
        let s = 2 * d;
        let m = &mut self.data;
        let mut worst = 0.0f64;
        for bi in (0..d).step_by(TILE) {
            for bj in (bi..d).step_by(TILE) {
                for i in bi..(bi + TILE).min(d) {
                    let j_start = if bi == bj { i } else { bj };
                    for j in j_start..(bj + TILE).min(d) {
                        if i == j {
                            worst = worst.max(2.0 * m[i * s + d + i].abs());
                            m[i * s + d + i] = 0.0;
                            continue;
                        }
                        let (ar, ai) = (m[i * s + j], m[i * s + d + j]);
                        let (br, bi_) = (m[j * s + i], -m[j * s + d + i]);
                        worst = worst.max((ar - br).hypot(ai - bi_));
                        let (mr, mi) = (0.5 * (ar + br), 0.5 * (ai + bi_));
                        m[i * s + j] = mr;
                        m[i * s + d + j] = mi;
                        m[j * s + i] = mr;
                        m[j * s + d + i] = -mi;
                    }
                }
            }
        }
        worst
    }

    fn hermiticity_error(&self) -> f64 {
        let mut copy = self.clone();
        copy.hermitian_project()
    }
}

struct Workspace {
    x: SplitMatrix,
    k_values: Vec<C64>,
}

impl Workspace {
    fn new(g: &Generator) -> Self {
        Workspace {
            x: SplitMatrix::zeros(g.dim),
            k_values: g.k_base.clone(),
        }
    }
}

fn generator_apply_inner(g: &Generator, rho: &DensityMatrix, t: f64, cap: f64) -> Result<Array2<C64>> {
    if rho.dim() != g.dim {
        return Err(Error::DimensionMismatch {
            expected: g.dim,
            found: rho.dim(),
        });
    }
    let mut rates = vec![0.0; g.channel.terms.len()];
    let mut log = vec![None; rates.len()];
    g.rates_at(t, cap, &mut log, &mut rates)?;
    let mut ws = Workspace::new(g);
    let src = SplitMatrix::from_array(rho.matrix());
    let mut out = SplitMatrix::zeros(g.dim);
    g.apply_with_rates(&rates, &src, Sink::Store(&mut out.data), &mut ws, Execution::default());
    let out = out.to_array();
    debug_assert!(
        rho.hermiticity_error() > 1e-12
            || hermiticity_error(&out) < 1e-9 * (1.0 + out.iter().map(|v| v.norm()).fold(0.0, f64::max)),
        "generator output lost Hermiticity"
    );
    Ok(out)
}

/// `dρ/dt` at time `t` for the master equation with Hamiltonian `h` and
/// dissipator `channel`.
pub fn generator_apply(h: &Operator, channel: &ChannelSpec, rho: &DensityMatrix, t: f64) -> Result<Array2<C64>> {
    Generator::new(h, channel)?.apply(rho, t)
}

/// Population of the top two Fock levels.
pub fn top_fock_population(layout: &SpaceLayout, rho: &Array2<C64>) -> f64 {
    let n_max = layout.n_max();
    (0..layout.spin_dim())
        .flat_map(|s| [n_max - 1, n_max].map(|n| layout.index(s, n)))
        .map(|i| rho[[i, i]].re)
        .sum()
}

/// Integrate from `rho0` over `grid`, calling `observe(sample_index, t, ρ)` at
/// every sample (including `t_start`).
pub fn evolve_observed<F>(
    gen: &Generator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
    mut observe: F,
) -> Result<Diagnostics>
where
    F: FnMut(usize, f64, &DensityMatrix) -> Result<()>,
{
    grid.validate()?;
    let d = gen.dim;
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    let cap = opts.effective_rate_cap(gen, grid.dt);
    let mut diag = Diagnostics::new(grid.n_steps(), grid.dt, cap);
    diag.rate_poles = gen
        .channel
        .poles(grid.t_end)
        .into_iter()
        .filter(|(_, t)| *t >= grid.t_start)
        .collect();

    let n_terms = gen.channel.terms.len();
    let mut rates = vec![0.0; n_terms];
    let mut log: Vec<Option<RateClamp>> = vec![None; n_terms];
    let mut ws = Workspace::new(gen);
    let mut y = SplitMatrix::from_array(rho0.matrix());
    let mut acc = SplitMatrix::zeros(d);
    let mut stage_in = SplitMatrix::zeros(d);
    let mut stage_out = SplitMatrix::zeros(d);
    let trace0 = y.trace();
    let trace_scale = trace0.norm().max(1.0);
    let exec = opts.execution;
    let dt = grid.dt;

    let mut sample = rho0.clone();
    monitor(gen, opts, &sample, &mut diag);
    observe(0, grid.t_start, &sample)?;

    for step in 0..grid.n_steps() {
        let t = grid.time_at(step);
        acc.data.copy_from_slice(&y.data);
        for (stage, (c_t, c_next, weight)) in [
            (0.0, 0.5, 1.0 / 6.0),
            (0.5, 0.5, 1.0 / 3.0),
            (0.5, 1.0, 1.0 / 3.0),
            (1.0, 0.0, 1.0 / 6.0),
        ]
        .into_iter()
        .enumerate()
        {
            gen.rates_at(t + c_t * dt, cap, &mut log, &mut rates)?;
            let input = if stage == 0 { &y } else { &stage_in };
            let next = (stage < 3).then_some((stage_out.data.as_mut_slice(), y.data.as_slice(), c_next * dt));
            let sink = Sink::Rk4 {
                acc: &mut acc.data,
                w: weight * dt,
                next,
            };
            gen.apply_with_rates(&rates, input, sink, &mut ws, exec);
            std::mem::swap(&mut stage_in, &mut stage_out);
        }
        std::mem::swap(&mut y, &mut acc);

        let t_next = grid.time_at(step + 1);
        if opts.hermitian_projection {
            let drift = y.hermitian_project();
            diag.max_hermiticity_drift = diag.max_hermiticity_drift.max(drift);
        }
        let tr = y.trace();
        if !tr.re.is_finite() || !tr.im.is_finite() {
            return Err(Error::NonFinite { t: t_next });
        }
        let drift = (tr - trace0).norm() / trace_scale;
        diag.max_trace_drift = diag.max_trace_drift.max(drift);
        if let Some(tol) = opts.trace_tol {
            if drift > tol {
                return Err(Error::TraceDrift { t: t_next, drift, tol });
            }
        }

        if (step + 1) % grid.sample_stride == 0 {
            if !opts.hermitian_projection {
                diag.max_hermiticity_drift = diag.max_hermiticity_drift.max(y.hermiticity_error());
            }
            sample = DensityMatrix::from_matrix(y.to_array())?;
            monitor(gen, opts, &sample, &mut diag);
            observe((step + 1) / grid.sample_stride, t_next, &sample)?;
        }
    }

    diag.rate_clamps = log.into_iter().flatten().collect();
    if let Some(layout) = gen.layout {
        let tail = top_fock_population(&layout, &y.to_array());
        diag.final_top_fock_population = tail;
        if let Some(tol) = opts.fock_tail_tol {
            if tail > tol {
                return Err(Error::FockTail { population: tail, tol });
            }
        }
    }
    Ok(diag)
}

fn monitor(gen: &Generator, opts: &EvolveOptions, state: &DensityMatrix, diag: &mut Diagnostics) {
    let Some(layout) = gen.layout else { return };
    if !opts.monitor_positivity {
        return;
    }
    let m = state.matrix();
    let min_diag = m.diag().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let min_eig = reduce_to_spins(state, &layout)
        .map(|r| r.eigenvalues()[0])
        .unwrap_or(f64::NAN);
    diag.min_diagonal = diag.min_diagonal.min(min_diag);
    diag.min_spin_eigenvalue = diag.min_spin_eigenvalue.min(min_eig);
    if min_diag < -1e-12 || min_eig < -1e-12 {
        diag.negative_samples += 1;
    }
    diag.max_top_fock_population = diag.max_top_fock_population.max(top_fock_population(&layout, m));
}

/// Integrate and keep every sampled state.
pub fn evolve_with(gen: &Generator, rho0: &DensityMatrix, grid: &TimeGrid, opts: &EvolveOptions) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(grid.n_samples());
    let mut states = Vec::with_capacity(grid.n_samples());
    let diagnostics = evolve_observed(gen, rho0, grid, opts, |_, t, rho| {
        times.push(t);
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times,
        states,
        diagnostics,
    })
}

/// Integrate with default options and keep every sampled state.
pub fn evolve(rho0: &DensityMatrix, h: &Operator, channel: &ChannelSpec, grid: &TimeGrid) -> Result<Trajectory> {
    evolve_with(&Generator::new(h, channel)?, rho0, grid, &EvolveOptions::default())
}

/// Evolve a matrix from `t0` for `duration` (a whole number of `dt` steps)
/// and return the final matrix.
fn propagate(
    gen: &Generator,
    m: DensityMatrix,
    t0: f64,
    duration: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<DensityMatrix> {
    if duration == 0.0 {
        return Ok(m);
    }
    let steps = (duration / dt).round() as usize;
    let grid = TimeGrid::new(t0, t0 + steps as f64 * dt, dt, steps.max(1))?;
    if (grid.t_end - t0 - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::param("tau", "must be a whole number of steps"));
    }
    let mut last = None;
    evolve_observed(gen, &m, &grid, opts, |i, _, rho| {
        if i == 1 {
            last = Some(rho.clone());
        }
        Ok(())
    })?;
    Ok(last.expect("one sample after the start"))
}

/// `a ρ a†` as a (non-normalized) matrix.
fn conditional(a: &Operator, rho: &DensityMatrix) -> DensityMatrix {
    let ar = a.mul_dense(rho.matrix());
    let m = a.mul_dense(&ar.t().mapv(|v| v.conj()));
    DensityMatrix::from_matrix(m).expect("square")
}

/// `⟨a†(t) a†(t+τ) a(t+τ) a(t)⟩` by quantum regression: evolve `rho0` to `t`,
/// form `a ρ(t) a†`, evolve it for `τ` under the same generator (rates at
/// absolute time), and take `Re Tr[a†a ·]`.
pub fn two_time_photon_correlator(
    gen: &Generator,
    rho0: &DensityMatrix,
    t: f64,
    tau: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<f64> {
    let layout = *gen
        .layout
        .as_ref()
        .ok_or_else(|| Error::param("layout", "generator needs a composite layout"))?;
    if tau < 0.0 {
        return Err(Error::param("tau", "must be non-negative"));
    }
    let rho_t = propagate(gen, rho0.clone(), 0.0, t, dt, opts)?;
    let (a, ad) = boson_ops(&layout);
    let m = conditional(&a, &rho_t);
    let evolved = propagate(gen, m, t, tau, dt, &opts.bare())?;
    Ok(evolved.expect(&ad.matmul(&a)).re)
}

/// Computes `⟨a†(t) a†(t+τ) a(t+τ) a(t)⟩` for a fixed `τ` at many `t`.
///
/// For time-independent generators the regression is done once in the
/// Heisenberg picture: `B = e^{L†τ}(a†a)` and the correlator is
/// `Tr[B a ρ(t) a†]`. Otherwise each call evolves `a ρ(t) a†` directly.
#[derive(Clone, Debug)]
pub struct PhotonCorrelator {
    gen: Generator,
    a: Operator,
    number: Operator,
    tau: f64,
    dt: f64,
    opts: EvolveOptions,
    heisenberg: Option<Array2<C64>>,
}

impl PhotonCorrelator {
    pub fn new(gen: &Generator, tau: f64, dt: f64, opts: &EvolveOptions) -> Result<Self> {
        let layout = *gen
            .layout
            .as_ref()
            .ok_or_else(|| Error::param("layout", "generator needs a composite layout"))?;
        if !(tau >= 0.0) {
            return Err(Error::param("tau", "must be non-negative"));
        }
        let (a, ad) = boson_ops(&layout);
        let number = ad.matmul(&a);
        let bare = opts.bare();
        let heisenberg = if gen.is_time_independent() {
            let dual = gen.adjoint()?;
            let b0 = DensityMatrix::from_matrix(number.to_dense())?;
            Some(propagate(&dual, b0, 0.0, tau, dt, &bare)?.into_matrix())
        } else {
            None
        };
        Ok(PhotonCorrelator {
            gen: gen.clone(),
            a,
            number,
            tau,
            dt,
            opts: bare,
            heisenberg,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Whether the Heisenberg-picture shortcut is in use.
    pub fn uses_heisenberg_picture(&self) -> bool {
        self.heisenberg.is_some()
    }

    pub fn numerator(&self, t: f64, rho_t: &DensityMatrix) -> Result<f64> {
        let m = conditional(&self.a, rho_t);
        match &self.heisenberg {
            Some(b) => {
                let mm = m.matrix();
                let d = mm.nrows();
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        acc += b[[i, j]] * mm[[j, i]];
                    }
                }
                Ok(acc.re)
            }
            None => {
                let evolved = propagate(&self.gen, m, t, self.tau, self.dt, &self.opts)?;
                Ok(evolved.expect(&self.number).re)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{ChannelSpec, ChannelTerm, RateFn, TermForm};
    use crate::hilbert::{pauli, SpinOp};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn qubit_channel(op: Operator, rate: f64, form: TermForm) -> ChannelSpec {
        ChannelSpec {
            label: "test".into(),
            terms: vec![ChannelTerm {
                op,
                rate: RateFn::constant(rate),
                form,
                label: "t".into(),
            }],
        }
    }

    #[test]
    fn grid_validation() {
        let g = TimeGrid::default();
        assert_eq!(g.n_steps(), 5000);
        assert_eq!(g.n_samples(), 501);
        assert_eq!(g.sample_times()[500], 25.0);
        assert!(TimeGrid::new(0.0, 1.0, 0.3, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.1, 3).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, -0.1, 1).is_err());
    }

    #[test]
    fn qubit_amplitude_damping_closed_form() {
        let gamma = 0.3;
        let ch = qubit_channel(pauli(SpinOp::Minus), gamma, TermForm::Lindblad);
        let rho0 =
            DensityMatrix::from_matrix(Array2::from_shape_vec((2, 2), vec![c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap())
                .unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 0.005, 20).unwrap();
        let traj = evolve(&rho0, &Operator::zeros(2), &ch, &grid).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = (-gamma * t).exp();
            assert!((s.matrix()[[0, 0]].re - exact).abs() / exact < 1e-6);
        }
    }

    #[test]
    fn qubit_dephasing_one_step() {
        let gamma = 0.3;
        let dt = 0.005;
        let ch = qubit_channel(pauli(SpinOp::Z), gamma, TermForm::Dephasing);
        let h = c(0.5);
        let rho0 = DensityMatrix::from_matrix(Array2::from_shape_vec((2, 2), vec![h, h, h, h]).unwrap()).unwrap();
        let grid = TimeGrid::new(0.0, dt, dt, 1).unwrap();
        let traj = evolve(&rho0, &Operator::zeros(2), &ch, &grid).unwrap();
        let m = traj.states[1].matrix();
        assert!((m[[0, 1]].re - 0.5 * (-2.0 * gamma * dt).exp()).abs() < 1e-13);
        assert_eq!(m[[0, 0]].re, 0.5);
        assert_eq!(m[[1, 1]].re, 0.5);
    }

    #[test]
    fn empty_channel_is_commutator() {
        let h = pauli(SpinOp::Z).scale(c(0.7));
        let up =
            DensityMatrix::from_matrix(Array2::from_shape_vec((2, 2), vec![c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap())
                .unwrap();
        let out = generator_apply(&h, &ChannelSpec::empty("none"), &up, 0.0).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn adjoint_generator_is_dual() {
        // Tr[B L(ρ)] = Tr[L†(B) ρ] for a non-trivial qubit channel.
        let h = pauli(SpinOp::Z)
            .scale(c(0.4))
            .add(&pauli(SpinOp::Plus).add(&pauli(SpinOp::Minus)).scale(c(0.3)));
        let mut ch = qubit_channel(pauli(SpinOp::Minus), 0.2, TermForm::Lindblad);
        ch.terms.push(ChannelTerm {
            op: pauli(SpinOp::Z),
            rate: RateFn::constant(-0.05),
            form: TermForm::Dephasing,
            label: "z".into(),
        });
        ch.terms.push(ChannelTerm {
            op: pauli(SpinOp::Plus).add(&pauli(SpinOp::Z).scale(c(0.5))),
            rate: RateFn::constant(0.1),
            form: TermForm::Lindblad,
            label: "mix".into(),
        });
        let g = Generator::new(&h, &ch).unwrap();
        let gd = g.adjoint().unwrap();
        let rho = DensityMatrix::from_matrix(
            Array2::from_shape_vec((2, 2), vec![c(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.3)]).unwrap(),
        )
        .unwrap();
        let b = DensityMatrix::from_matrix(
            Array2::from_shape_vec((2, 2), vec![c(0.2), C64::new(-0.4, 0.1), C64::new(-0.4, -0.1), c(1.3)]).unwrap(),
        )
        .unwrap();
        let lr = g.apply(&rho, 0.0).unwrap();
        let lb = gd.apply(&b, 0.0).unwrap();
        let lhs: C64 = b.matrix().dot(&lr).diag().sum();
        let rhs: C64 = lb.dot(rho.matrix()).diag().sum();
        assert!((lhs - rhs).norm() < 1e-14, "{lhs} vs {rhs}");
        let tr: C64 = lr.diag().sum();
        assert!(tr.norm() < 1e-15);
    }

    #[test]
    fn clamps_are_logged() {
        let ch = qubit_channel(pauli(SpinOp::Minus), 0.0, TermForm::Lindblad);
        let mut ch = ch;
        ch.terms[0].rate = RateFn::SemiMarkov {
            gamma_tilde: 0.155,
            s: 0.1,
        };
        ch.terms[0].form = TermForm::Dephasing;
        ch.terms[0].op = pauli(SpinOp::Z);
        let gen = Generator::new(&Operator::zeros(2), &ch).unwrap();
        let h = c(0.5);
        let rho0 = DensityMatrix::from_matrix(Array2::from_shape_vec((2, 2), vec![h, h, h, h]).unwrap()).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 0.005, 100).unwrap();
        let opts = EvolveOptions {
            rate_cap: Some(50.0),
            ..EvolveOptions::default()
        };
        let d = evolve_observed(&gen, &rho0, &grid, &opts, |_, _, _| Ok(())).unwrap();
        assert_eq!(d.rate_poles.len(), 1);
        assert_eq!(d.rate_clamps.len(), 1);
        let pole = d.rate_poles[0].1;
        assert!(d.rate_clamps[0].first_t < pole && d.rate_clamps[0].last_t > pole);
    }
}
