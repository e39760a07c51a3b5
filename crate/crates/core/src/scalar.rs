use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used throughout the crate.
///
/// Everything numerical is written against this trait so the same code runs
/// in `f32` or `f64`. The accuracy targets quoted in the docs and tests are
/// for `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Euler–Mascheroni constant.
    #[inline]
    fn euler_gamma() -> Self {
        Self::lit(0.577_215_664_901_532_9)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(i theta)` without going through the generic complex exponential.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Minimal planar vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn scale(self, a: T) -> Self {
        Self::new(self.x * a, self.y * a)
    }

    /// Normalizes to unit length.
    #[inline]
    pub fn unit(self) -> Self {
        self.scale(T::one() / self.norm())
    }

    /// Rotation by -90 degrees; maps the counterclockwise tangent to the
    /// outward normal.
    #[inline]
    pub fn rot_cw(self) -> Self {
        Self::new(self.y, -self.x)
    }
}

impl<T: Real> std::ops::Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> std::ops::Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> std::ops::Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre three-term recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize_lossy(n);
    let (one, two) = (T::one(), T::lit(2.0));
    for i in 0..n.div_ceil(2) {
        let mut x = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::zero();
        for _ in 0..100 {
            let (mut p0, mut p1) = (one, x);
            for j in 2..=n {
                let jf = T::from_usize_lossy(j);
                let p2 = ((two * jf - one) * x * p1 - (jf - one) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { one } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - one);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = two / ((one - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(8);
        // exact up to degree 15
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((q - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_order_has_center_node() {
        let (x, w) = gauss_legendre::<f64>(5);
        assert!(x[2].abs() < 1e-15);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn normal_is_clockwise_rotation() {
        let t = Vec2::new(0.0_f64, 1.0);
        assert_eq!(t.rot_cw(), Vec2::new(1.0, -0.0));
    }
}
