//! Bessel and Hankel functions of the first kind for real positive argument.
//!
//! `J_n` comes from Miller's downward recurrence normalized by
//! `J_0 + 2 Σ J_2k = 1`. For `x < ASYMPTOTIC_CROSSOVER` the Neumann series
//! `Y_0 = (2/π)(ln(x/2) + γ) J_0 - (4/π) Σ (-1)^k J_2k / k` and its
//! derivative give `Y_0`, `Y_1`; above the crossover the Hankel asymptotic
//! expansion is used for both parts. Higher `Y_n` follow by upward recurrence.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Argument above which the Hankel asymptotic expansion is used.
///
/// At 25 the smallest term of the expansion is far below `f64` epsilon, while
/// the Miller/Neumann route stays cheap (about 80 recurrence steps).
pub const ASYMPTOTIC_CROSSOVER: f64 = 25.0;

/// `J_0, J_1, Y_0, Y_1` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselJY01<T> {
    pub j0: T,
    pub j1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> BesselJY01<T> {
    pub fn h0(&self) -> Complex<T> {
        Complex::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex<T> {
        Complex::new(self.j1, self.y1)
    }
}

fn miller_start<T: Real>(top: T) -> usize {
    let t = top.to_f64_lossy().max(1.0);
    let m = (t + 15.0 * t.cbrt() + 20.0).ceil() as usize;
    m + (m & 1)
}

/// `J_0(x) ..= J_{n_max}(x)` by Miller's algorithm; `x > 0`.
///
/// The returned vector may be longer than `n_max + 1`; extra entries are
/// valid higher orders.
pub fn bessel_j_seq<T: Real>(n_max: usize, x: T) -> Vec<T> {
    let m = miller_start(x.max(T::from_usize_lossy(n_max)));
    let big = T::max_value().sqrt();
    let mut j = vec![T::zero(); m + 2];
    j[m] = T::min_positive_value().sqrt();
    let two_over_x = T::lit(2.0) / x;
    for n in (1..=m).rev() {
        let v = T::from_usize_lossy(n) * two_over_x * j[n] - j[n + 1];
        j[n - 1] = v;
        if v.abs() > big {
            let inv = T::one() / big;
            for e in j[n - 1..].iter_mut() {
                *e *= inv;
            }
        }
    }
    let mut norm = j[0];
    let mut k = 2;
    while k <= m {
        norm += T::lit(2.0) * j[k];
        k += 2;
    }
    let inv = T::one() / norm;
    j.truncate(m + 1);
    for e in j.iter_mut() {
        *e *= inv;
    }
    j
}

fn neumann_jy01<T: Real>(x: T) -> BesselJY01<T> {
    let j = bessel_j_seq(1, x);
    let two_pi = T::lit(2.0) / T::PI();
    let lg = (x * T::lit(0.5)).ln() + T::euler_gamma();
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 1 { -T::one() } else { T::one() };
        let kf = T::from_usize_lossy(k);
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        k += 1;
    }
    let y0 = two_pi * (lg * j[0] - T::lit(2.0) * s0);
    let y1 = two_pi * (lg * j[1] - j[0] / x + s1);
    BesselJY01 { j0: j[0], j1: j[1], y0, y1 }
}

/// Hankel asymptotic expansion of `H_nu^(1)(x)` for `nu ∈ {0, 1}`.
fn asymptotic_hankel<T: Real>(nu: u32, x: T) -> Complex<T> {
    let four_nu2 = T::from_usize_lossy(4 * (nu * nu) as usize);
    let inv_x = T::one() / x;
    let mut sum = Complex::new(T::one(), T::zero());
    let mut a = T::one();
    let mut ipow = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let mut xpow = T::one();
    let mut last = T::infinity();
    for k in 1..60usize {
        let odd = T::from_usize_lossy(2 * k - 1);
        a = a * (four_nu2 - odd * odd) / T::from_usize_lossy(8 * k);
        xpow *= inv_x;
        ipow = ipow * i;
        let term = ipow * (a * xpow);
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum = sum + term;
        last = mag;
        if mag <= T::epsilon() * T::lit(1e-2) {
            break;
        }
    }
    let omega = x - (T::from_usize_lossy(nu as usize) * T::lit(0.5) + T::lit(0.25)) * T::PI();
    let amp = (T::lit(2.0) / (T::PI() * x)).sqrt();
    let (s, c) = omega.sin_cos();
    sum * Complex::new(c, s) * amp
}

/// `J_0, J_1, Y_0, Y_1` at `x > 0` (no domain check).
pub fn bessel_jy01<T: Real>(x: T) -> BesselJY01<T> {
    if x < T::lit(ASYMPTOTIC_CROSSOVER) {
        neumann_jy01(x)
    } else {
        let h0 = asymptotic_hankel(0, x);
        let h1 = asymptotic_hankel(1, x);
        BesselJY01 { j0: h0.re, j1: h1.re, y0: h0.im, y1: h1.im }
    }
}

/// `(H_0^(1)(x), H_1^(1)(x))` for `x > 0` (no domain check).
#[inline]
pub fn hankel01<T: Real>(x: T) -> (Complex<T>, Complex<T>) {
    let b = bessel_jy01(x);
    (b.h0(), b.h1())
}

/// `H_n^(1)(x)` for `n ∈ {0, 1}`.
pub fn hankel1<T: Real>(n: u32, x: T) -> Result<Complex<T>> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("Hankel function needs x > 0, got {x}")));
    }
    let b = bessel_jy01(x);
    match n {
        0 => Ok(b.h0()),
        1 => Ok(b.h1()),
        _ => Err(Error::Domain(format!("hankel1 supports orders 0 and 1, got {n}; use hankel1_seq"))),
    }
}

/// `H_0^(1)(x) ..= H_{n_max}^(1)(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelSeq<T> {
    pub values: Vec<Complex<T>>,
    /// First order whose `Y_n` overflowed the upward recurrence. Entries from
    /// this order on are not usable.
    pub saturated_from: Option<usize>,
}

impl<T: Real> HankelSeq<T> {
    pub fn usable_len(&self) -> usize {
        self.saturated_from.unwrap_or(self.values.len())
    }
}

/// Hankel functions of orders `0..=n_max` at `x > 0`.
pub fn hankel1_seq<T: Real>(n_max: usize, x: T) -> Result<HankelSeq<T>> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("Hankel function needs x > 0, got {x}")));
    }
    let b = bessel_jy01(x);
    let j = bessel_j_seq(n_max, x);
    let big = T::max_value().sqrt();
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(b.h0());
    if n_max >= 1 {
        values.push(b.h1());
    }
    let mut saturated_from = None;
    let (mut ym1, mut y) = (b.y0, b.y1);
    let two_over_x = T::lit(2.0) / x;
    for n in 2..=n_max {
        if saturated_from.is_some() {
            values.push(Complex::new(j[n], T::neg_infinity()));
            continue;
        }
        let next = T::from_usize_lossy(n - 1) * two_over_x * y - ym1;
        if !(next.abs() < big) {
            saturated_from = Some(n);
            values.push(Complex::new(j[n], T::neg_infinity()));
            continue;
        }
        values.push(Complex::new(j[n], next));
        ym1 = y;
        y = next;
    }
    Ok(HankelSeq { values, saturated_from })
}
