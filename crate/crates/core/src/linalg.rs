//! Sparse operators and density matrices.

use ndarray::{Array1, Array2};
use num_traits::Zero;

use crate::{Error, Result, C64};

/// A square complex matrix in compressed sparse row form.
///
/// Immutable once built; every constructor returns canonical storage (sorted
/// column indices, no duplicates, no explicit zeros).
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
    hermitian_hint: bool,
}

impl Operator {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        Operator {
            dim,
            indptr,
            indices,
            values,
            hermitian_hint: false,
        }
        .pruned()
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| !v.is_zero()) {
            return self;
        }
        let mut indptr = vec![0usize; self.dim + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if !self.values[k].is_zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Operator {
            dim: self.dim,
            indptr,
            indices,
            values,
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0)))).with_hermitian_hint(true)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty()).with_hermitian_hint(true)
    }

    pub fn diagonal_from(values: &[C64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Self::from_triplets(
            m.nrows(),
            m.indexed_iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|((r, c), &v)| (r, c, v)),
        )
    }

    pub fn with_hermitian_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries of `row` as `(col, value)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.indptr[row]..self.indptr[row + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.indptr[row]..self.indptr[row + 1];
        match self.indices[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::zero(),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for (r, c, v) in self.iter() {
            m[[r, c]] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
            .with_hermitian_hint(self.hermitian_hint)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.hermitian_hint = self.hermitian_hint && s.im == 0.0;
        out.pruned()
    }

    pub fn add(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        Self::from_triplets(self.dim, self.iter().chain(other.iter()))
            .with_hermitian_hint(self.hermitian_hint && other.hermitian_hint)
    }

    pub fn sub(&self, other: &Operator) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let mut t = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, t)
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Operator) -> Self {
        let d = other.dim;
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                t.push((r1 * d + r2, c1 * d + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.dim * d, t).with_hermitian_hint(self.hermitian_hint && other.hermitian_hint)
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_abs_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Diagonal entries, if the operator has no off-diagonal entries.
    pub fn as_diagonal(&self) -> Option<Vec<C64>> {
        if self.iter().any(|(r, c, _)| r != c) {
            return None;
        }
        Some((0..self.dim).map(|i| self.get(i, i)).collect())
    }

    /// For operators with at most one nonzero per row: `(row, col, value)`
    /// for every occupied row.
    pub fn single_entry_rows(&self) -> Option<Vec<(usize, usize, C64)>> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            let n = self.indptr[r + 1] - self.indptr[r];
            match n {
                0 => {}
                1 => {
                    let k = self.indptr[r];
                    out.push((r, self.indices[k], self.values[k]));
                }
                _ => return None,
            }
        }
        Some(out)
    }

    /// `self * m` for a dense row-major `dim x dim` slice `m`, accumulated
    /// into the rows `row_start..` covered by `out`.
    pub(crate) fn mul_dense_rows_into(&self, m: &[C64], row_start: usize, out: &mut [C64]) {
        let d = self.dim;
        for (local, out_row) in out.chunks_exact_mut(d).enumerate() {
            let r = row_start + local;
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.values[k];
                let src = &m[self.indices[k] * d..(self.indices[k] + 1) * d];
                for (o, s) in out_row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }

    pub fn mul_dense(&self, m: &Array2<C64>) -> Array2<C64> {
        assert_eq!(m.dim(), (self.dim, self.dim));
        let m = m.as_standard_layout();
        let mut out = Array2::zeros((self.dim, self.dim));
        self.mul_dense_rows_into(m.as_slice().unwrap(), 0, out.as_slice_mut().unwrap());
        out
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        assert_eq!(v.len(), self.dim);
        Array1::from_iter((0..self.dim).map(|r| self.row(r).map(|(c, a)| a * v[c]).sum::<C64>()))
    }

    /// `Tr[self * m]`.
    pub fn trace_with(&self, m: &Array2<C64>) -> C64 {
        assert_eq!(m.dim(), (self.dim, self.dim));
        self.iter().map(|(r, c, v)| v * m[[c, r]]).sum()
    }
}

/// A density matrix: Hermitian, unit-trace, dense.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    data: Array2<C64>,
}

impl DensityMatrix {
    /// Wrap a matrix without checks other than squareness.
    pub fn from_matrix(data: Array2<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        Ok(DensityMatrix {
            data: data.as_standard_layout().into_owned(),
        })
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn from_pure(psi: &Array1<C64>) -> Self {
        let norm2: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let n = psi.len();
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                data[[i, j]] = psi[i] * psi[j].conj() / norm2;
            }
        }
        DensityMatrix { data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            data[[i, i]] = C64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    /// `Tr[op * rho]`.
    pub fn expect(&self, op: &Operator) -> C64 {
        op.trace_with(&self.data)
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.data)
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            data: ndarray::linalg::kron(&self.data, &other.data),
        }
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            // Symmetrize so the solver sees an exactly Hermitian input.
            (self.data[[i, j]] + self.data[[j, i]].conj()) * 0.5
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    Array1::from_iter(a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}
