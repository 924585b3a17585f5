//! Reference computations shared by integration tests. Nothing here calls
//! the library routine it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use num_rational::Ratio;
use rand::Rng;
use tcqd::linalg::DensityMatrix;
use tcqd::C64;

type Q = Ratio<i128>;

fn fact(n: i32) -> i128 {
    assert!(n >= 0, "negative factorial argument");
    (1..=n as i128).product()
}

/// Clebsch-Gordan `<j1 m1 j2 m2 | j m>` from Racah's closed sum, with all
/// angular momenta given doubled.
pub fn cg_racah(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i32| {
        assert!(x % 2 == 0);
        x / 2
    };
    let under = Q::new(
        i128::from(tj + 1) * fact(h(tj + tj1 - tj2)) * fact(h(tj - tj1 + tj2)) * fact(h(tj1 + tj2 - tj)),
        fact(h(tj1 + tj2 + tj) + 1),
    ) * Q::from_integer(
        fact(h(tj + tm))
            * fact(h(tj - tm))
            * fact(h(tj1 - tm1))
            * fact(h(tj1 + tm1))
            * fact(h(tj2 - tm2))
            * fact(h(tj2 + tm2)),
    );
    let mut sum = Q::from_integer(0);
    for k in 0..=h(tj1 + tj2 + tj) {
        let args = [
            k,
            h(tj1 + tj2 - tj) - k,
            h(tj1 - tm1) - k,
            h(tj2 + tm2) - k,
            h(tj - tj2 + tm1) + k,
            h(tj - tj1 - tm2) + k,
        ];
        if args.iter().any(|&a| a < 0) {
            continue;
        }
        let den: i128 = args.iter().map(|&a| fact(a)).product();
        let term = Q::new(1, den);
        sum = if k % 2 == 0 { sum + term } else { sum - term };
    }
    let u = *under.numer() as f64 / *under.denom() as f64;
    u.sqrt() * (*sum.numer() as f64 / *sum.denom() as f64)
}

/// 3j symbol through `(j1 j2 j3; m1 m2 m3) = (-1)^(j1-j2-m3) / sqrt(2 j3 + 1) <j1 m1 j2 m2 | j3 -m3>`.
pub fn three_j_oracle(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    let phase_twice = tj1 - tj2 - tm3;
    if phase_twice % 2 != 0 {
        return 0.0;
    }
    let sign = if (phase_twice / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    sign / f64::from(tj3 + 1).sqrt() * cg_racah(tj1, tm1, tj2, tm2, tj3, -tm3)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize) -> Array2<C64> {
    Array2::from_shape_fn((dim, dim), |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> Array2<C64> {
    let g = random_matrix(rng, dim);
    (&g + &g.t().mapv(|v| v.conj())).mapv(|v| v * 0.5)
}

/// `G G† / Tr(G G†)` with a Ginibre `G`; full rank almost surely.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = random_matrix(rng, dim);
    let m = g.dot(&g.t().mapv(|v| v.conj()));
    let tr: C64 = m.diag().sum();
    DensityMatrix::from_matrix(m.mapv(|v| v / tr)).expect("valid density matrix")
}

pub fn to_na(m: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn vec_to_na(v: &Array1<C64>) -> DVector<C64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

/// `exp(-i H t)` from the Hermitian eigendecomposition of `H`.
pub fn unitary(h: &Array2<C64>, t: f64) -> DMatrix<C64> {
    let eig = nalgebra::linalg::SymmetricEigen::new(to_na(h));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// `|<a|b>|^2`.
pub fn overlap_sq(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.dotc(b).norm_sqr()
}

pub fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
