//! Angular-momentum algebra: Wigner 3j symbols, Clebsch-Gordan coefficients
//! and spherical harmonics.
//!
//! 3j symbols are evaluated with the Racah single-sum formula in exact
//! rational arithmetic and only converted to `f64` at the very end.
//! Spherical harmonics follow the Condon-Shortley phase convention.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result, C64};

/// A half-integer stored as twice its value, so `j = 3/2` is `HalfInt(3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Integer value, if this is an integer.
    pub const fn to_int(self) -> Option<i32> {
        if self.is_integer() {
            Some(self.0 / 2)
        } else {
            None
        }
    }

    /// Projections `j, j-1, ..., -j`, i.e. in basis-index order.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..=j.max(-1)).map(move |k| HalfInt(j - 2 * k))
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

fn check_pair(j: HalfInt, m: HalfInt) -> Result<()> {
    if j.0 < 0 || (j.0 + m.0) % 2 != 0 {
        return Err(Error::MalformedHalfInt {
            twice_j: j.0,
            twice_m: m.0,
        });
    }
    Ok(())
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    (2..=n as u64).fold(BigInt::one(), |acc, k| acc * k)
}

/// Half of an even doubled quantity.
fn half(twice: i32) -> i32 {
    debug_assert!(twice % 2 == 0);
    twice / 2
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Zero when the projections do not sum to zero, a projection exceeds its
/// angular momentum, or the triangle condition fails.
pub fn wigner_3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> Result<f64> {
    check_pair(j1, m1)?;
    check_pair(j2, m2)?;
    check_pair(j3, m3)?;

    let (tj1, tj2, tj3) = (j1.0, j2.0, j3.0);
    let (tm1, tm2, tm3) = (m1.0, m2.0, m3.0);
    if tm1 + tm2 + tm3 != 0 {
        return Ok(0.0);
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 {
        return Ok(0.0);
    }
    if (tj1 + tj2 + tj3) % 2 != 0 || tj3 < (tj1 - tj2).abs() || tj3 > tj1 + tj2 {
        return Ok(0.0);
    }

    // Triangle coefficient and projection factorials: value = phase * sqrt(radicand) * sum.
    let a = half(tj1 + tj2 - tj3);
    let b = half(tj1 - tj2 + tj3);
    let c = half(-tj1 + tj2 + tj3);
    let s = half(tj1 + tj2 + tj3);
    let mut radicand = BigRational::new(factorial(a) * factorial(b) * factorial(c), factorial(s + 1));
    for (tj, tm) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        radicand *= BigRational::from_integer(factorial(half(tj + tm)) * factorial(half(tj - tm)));
    }

    let k_min = 0.max(half(tj2 - tj3 - tm1)).max(half(tj1 - tj3 + tm2));
    let k_max = a.min(half(tj1 - tm1)).min(half(tj2 + tm2));
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(half(tj3 - tj2 + tm1) + k)
            * factorial(half(tj3 - tj1 - tm2) + k)
            * factorial(a - k)
            * factorial(half(tj1 - tm1) - k)
            * factorial(half(tj2 + tm2) - k);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(0.0);
    }

    let phase = if half(tj1 - tj2 - tm3).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let sign = if sum.is_negative() { -phase } else { phase };
    let magnitude_sq = radicand * &sum * &sum;
    let magnitude = magnitude_sq.to_f64().expect("3j magnitude is representable").sqrt();
    Ok(sign * magnitude)
}

/// Clebsch-Gordan coefficient `<j1 m1 j2 m2 | j m>`.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> Result<f64> {
    check_pair(j, m)?;
    let three_j = wigner_3j(j1, j2, j, m1, m2, -m)?;
    if three_j == 0.0 {
        return Ok(0.0);
    }
    let phase = if half(j1.0 - j2.0 + m.0).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(phase * f64::from(j.0 + 1).sqrt() * three_j)
}

/// Orthonormal spherical harmonic `Y_lm(theta, phi)`, Condon-Shortley phase.
pub fn spherical_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> Result<C64> {
    if m.unsigned_abs() > l {
        return Err(Error::IndexOutOfRange {
            what: "spherical harmonic order m",
            index: i64::from(m),
            allowed: format!("|m| <= {l}"),
        });
    }
    let am = m.unsigned_abs();
    let p = normalized_legendre(l, am, theta.cos(), theta.sin());
    let y = C64::from_polar(p, f64::from(am) * phi);
    if m < 0 {
        let conj = y.conj();
        Ok(if am.is_multiple_of(2) { conj } else { -conj })
    } else {
        Ok(y)
    }
}

/// `sqrt((2l+1)/4pi * (l-m)!/(l+m)!) P_l^m(x)` for `m >= 0`, including the
/// Condon-Shortley phase, by the standard stable three-term recurrence.
fn normalized_legendre(l: u32, m: u32, x: f64, sin_theta: f64) -> f64 {
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = f64::from(k);
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_theta;
    }
    if l == m {
        return pmm;
    }
    let mf = f64::from(m);
    let mut pm1 = (2.0 * mf + 3.0).sqrt() * x * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let lf = f64::from(ll);
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let p = a * (x * pm1 - b * pm2);
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}
