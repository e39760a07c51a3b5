//! Smooth closed boundary curves and their arc-length parameterization.
//!
//! A [`ParametricCurve`] is a raw `2π`-periodic parameterization. Calling
//! [`ParametricCurve::arc_length_reparam`] produces a [`BoundaryCurve`] that
//! is parameterized by arc length `s ∈ [0, L)`, oriented counterclockwise,
//! and anchored so that the outward normal at `s = 0` is aligned with the
//! incidence direction (the shadow pole). [`ScatteringConfig`] then fixes the
//! wavenumber and the two shadow-boundary parameters `t1 < t2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{gauss_legendre, Real, Vec2};

/// Position and first two derivatives of a raw parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub pos: Vec2<T>,
    pub d1: Vec2<T>,
    pub d2: Vec2<T>,
}

type JetFn<T> = dyn Fn(T) -> Jet<T> + Send + Sync;

/// A user supplied `2π`-periodic parameterization.
#[derive(Clone)]
pub struct CustomShape<T>(pub Arc<JetFn<T>>);

impl<T> fmt::Debug for CustomShape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomShape(..)")
    }
}

#[derive(Debug, Clone)]
pub enum CurveKind<T> {
    Circle { radius: T },
    /// Semi-axes `a` along x and `b` along y.
    Ellipse { a: T, b: T },
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
    Kite,
    Custom(CustomShape<T>),
}

impl<T: Real> CurveKind<T> {
    fn jet(&self, t: T) -> Jet<T> {
        let (s, c) = t.sin_cos();
        match self {
            CurveKind::Circle { radius: r } => Jet {
                pos: Vec2::new(*r * c, *r * s),
                d1: Vec2::new(-*r * s, *r * c),
                d2: Vec2::new(-*r * c, -*r * s),
            },
            CurveKind::Ellipse { a, b } => Jet {
                pos: Vec2::new(*a * c, *b * s),
                d1: Vec2::new(-*a * s, *b * c),
                d2: Vec2::new(-*a * c, -*b * s),
            },
            CurveKind::Kite => {
                let (s2, c2) = (t + t).sin_cos();
                let (p65, p13, p26) = (T::lit(0.65), T::lit(1.3), T::lit(2.6));
                let y = T::lit(1.5);
                Jet {
                    pos: Vec2::new(c + p65 * c2 - p65, y * s),
                    d1: Vec2::new(-s - p13 * s2, y * c),
                    d2: Vec2::new(-c - p26 * c2, -y * s),
                }
            }
            CurveKind::Custom(f) => (f.0)(t),
        }
    }
}

/// A validated closed, counterclockwise, raw-parameterized curve.
#[derive(Debug, Clone)]
pub struct ParametricCurve<T> {
    kind: CurveKind<T>,
}

/// Builds and validates a raw curve.
pub fn make_curve<T: Real>(kind: CurveKind<T>) -> Result<ParametricCurve<T>> {
    match &kind {
        CurveKind::Circle { radius } if !(*radius > T::zero()) => {
            return Err(Error::InvalidParameter(format!("circle radius must be positive, got {radius}")));
        }
        CurveKind::Ellipse { a, b } if !(*a > T::zero() && *b > T::zero()) => {
            return Err(Error::InvalidParameter(format!(
                "ellipse semi-axes must be positive, got ({a}, {b})"
            )));
        }
        _ => {}
    }
    let curve = ParametricCurve { kind };
    curve.validate()?;
    Ok(curve)
}

impl<T: Real> ParametricCurve<T> {
    pub fn kind(&self) -> &CurveKind<T> {
        &self.kind
    }

    #[inline]
    pub fn jet(&self, t: T) -> Jet<T> {
        self.kind.jet(t)
    }

    /// Signed enclosed area by the trapezoid rule (spectrally accurate here).
    pub fn signed_area(&self) -> T {
        let n = 512;
        let h = T::TAU() / T::from_usize_lossy(n);
        let mut acc = T::zero();
        for i in 0..n {
            let j = self.jet(T::from_usize_lossy(i) * h);
            acc += j.pos.cross(j.d1);
        }
        acc * h * T::lit(0.5)
    }

    fn validate(&self) -> Result<()> {
        let j0 = self.jet(T::zero());
        let j1 = self.jet(T::TAU());
        let scale = T::one() + j0.pos.norm() + j0.d1.norm() + j0.d2.norm();
        let tol = T::lit(1e-12) * scale;
        let gap = (j0.pos - j1.pos).norm() + (j0.d1 - j1.d1).norm() + (j0.d2 - j1.d2).norm();
        if !(gap <= tol) {
            return Err(Error::InvalidParameter(format!("curve is not closed: mismatch {gap:e} at t = 2π")));
        }
        let area = self.signed_area();
        if !(area > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "curve must be counterclockwise (signed area {area})"
            )));
        }
        Ok(())
    }

    /// Outward unit normal at raw parameter `t`.
    pub fn normal(&self, t: T) -> Vec2<T> {
        self.jet(t).d1.unit().rot_cw()
    }

    /// Produces the arc-length parameterization anchored so that
    /// `alpha · ν(γ(0)) = 1`.
    pub fn arc_length_reparam(&self, alpha: Vec2<T>) -> Result<BoundaryCurve<T>> {
        let alpha_norm = alpha.norm();
        if !((alpha_norm - T::one()).abs() <= T::lit(1e-14) * T::lit(4.0)) {
            return Err(Error::InvalidParameter(format!("incidence direction must be a unit vector (|alpha| = {alpha_norm})")));
        }
        let table = ArcLengthTable::build(self);
        let anchor = self.anchor(alpha)?;
        let s0 = table.length_at(self, anchor);
        Ok(BoundaryCurve { raw: self.clone(), table, anchor, s0, alpha })
    }

    /// Raw parameter where the outward normal equals `alpha`.
    fn anchor(&self, alpha: Vec2<T>) -> Result<T> {
        let n = 4096;
        let h = T::TAU() / T::from_usize_lossy(n);
        let mut best = (0, T::neg_infinity());
        for i in 0..n {
            let v = alpha.dot(self.normal(T::from_usize_lossy(i) * h));
            if v > best.1 {
                best = (i, v);
            }
        }
        // alpha · x'(t) vanishes where the normal is parallel to alpha.
        let g = |t: T| alpha.dot(self.jet(t).d1);
        let dg = |t: T| alpha.dot(self.jet(t).d2);
        let tc = T::from_usize_lossy(best.0) * h;
        let (mut lo, mut hi) = (tc - h, tc + h);
        let (glo, ghi) = (g(lo), g(hi));
        if glo.signum() == ghi.signum() {
            return Err(Error::Consistency("anchor equation alpha·nu = 1 has no bracketed solution".into()));
        }
        let increasing = glo < ghi;
        let mut t = tc;
        for _ in 0..200 {
            let gt = g(t);
            if gt == T::zero() {
                break;
            }
            if (gt < T::zero()) == increasing {
                lo = t;
            } else {
                hi = t;
            }
            let d = dg(t);
            let mut next = t - gt / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = (lo + hi) * T::lit(0.5);
            }
            if (next - t).abs() <= T::epsilon() * T::lit(8.0) {
                t = next;
                break;
            }
            t = next;
        }
        let t = t.rem_euclid(T::TAU());
        let v = alpha.dot(self.normal(t));
        if !((v - T::one()).abs() <= T::lit(1e-10)) {
            return Err(Error::Consistency(format!("anchor refinement failed: alpha·nu = {v}")));
        }
        Ok(t)
    }
}

// `rem_euclid` for generic floats.
trait RemEuclid {
    fn rem_euclid(self, m: Self) -> Self;
}

impl<T: Real> RemEuclid for T {
    fn rem_euclid(self, m: T) -> T {
        let r = self % m;
        let r = if r < T::zero() { r + m } else { r };
        if r >= m {
            r - m
        } else {
            r
        }
    }
}

/// Reduces `x` into `[0, m)`.
pub fn wrap<T: Real>(x: T, m: T) -> T {
    x.rem_euclid(m)
}

const GL_ORDER: usize = 16;

/// Cumulative arc length on uniform raw-parameter panels, Gauss–Legendre
/// inside each panel.
#[derive(Debug, Clone)]
struct ArcLengthTable<T> {
    panel_width: T,
    cum: Vec<T>,
    gl_x: Vec<T>,
    gl_w: Vec<T>,
}

impl<T: Real> ArcLengthTable<T> {
    fn build(curve: &ParametricCurve<T>) -> Self {
        let (gl_x, gl_w) = gauss_legendre::<T>(GL_ORDER);
        let mut panels = 32;
        let mut prev: Option<Self> = None;
        loop {
            let panel_width = T::TAU() / T::from_usize_lossy(panels);
            let mut cum = Vec::with_capacity(panels + 1);
            cum.push(T::zero());
            let mut acc = T::zero();
            for p in 0..panels {
                let a = T::from_usize_lossy(p) * panel_width;
                acc += Self::gl(curve, &gl_x, &gl_w, a, a + panel_width);
                cum.push(acc);
            }
            let table = Self { panel_width, cum, gl_x: gl_x.clone(), gl_w: gl_w.clone() };
            if let Some(p) = &prev {
                let (l0, l1) = (p.total(), table.total());
                if (l1 - l0).abs() <= T::lit(1e-14) * l1 || panels >= 4096 {
                    return table;
                }
            }
            prev = Some(table);
            panels *= 2;
        }
    }

    fn gl(curve: &ParametricCurve<T>, x: &[T], w: &[T], a: T, b: T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut acc = T::zero();
        for (xi, wi) in x.iter().zip(w) {
            acc += *wi * curve.jet(mid + half * *xi).d1.norm();
        }
        acc * half
    }

    fn total(&self) -> T {
        *self.cum.last().unwrap()
    }

    fn panel_of(&self, t: T) -> usize {
        let p = (t / self.panel_width).floor().to_usize().unwrap_or(0);
        p.min(self.cum.len() - 2)
    }

    /// Arc length from raw parameter 0 to `t ∈ [0, 2π]`.
    fn length_at(&self, curve: &ParametricCurve<T>, t: T) -> T {
        let p = self.panel_of(t);
        let a = T::from_usize_lossy(p) * self.panel_width;
        self.cum[p] + Self::gl(curve, &self.gl_x, &self.gl_w, a, t)
    }

    /// Raw parameter at cumulative length `target ∈ [0, L)`.
    fn invert(&self, curve: &ParametricCurve<T>, target: T) -> T {
        let p = match self.cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => return T::from_usize_lossy(i) * self.panel_width,
            Err(i) => i.saturating_sub(1).min(self.cum.len() - 2),
        };
        let mut lo = T::from_usize_lossy(p) * self.panel_width;
        let mut hi = lo + self.panel_width;
        let (c0, c1) = (self.cum[p], self.cum[p + 1]);
        let mut t = lo + (target - c0) / (c1 - c0) * self.panel_width;
        for _ in 0..100 {
            let f = self.length_at(curve, t) - target;
            if f > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let mut next = t - f / curve.jet(t).d1.norm();
            if !(next >= lo && next <= hi) || !next.is_finite() {
                next = (lo + hi) * T::lit(0.5);
            }
            let step = (next - t).abs();
            t = next;
            if step <= T::epsilon() * T::lit(4.0) * (T::one() + t.abs()) {
                break;
            }
        }
        t
    }
}

/// Geometric data at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T> {
    pub pos: Vec2<T>,
    pub tangent: Vec2<T>,
    pub normal: Vec2<T>,
    pub curvature: T,
}

/// Arc-length parameterized boundary anchored at the shadow pole.
#[derive(Debug, Clone)]
pub struct BoundaryCurve<T> {
    raw: ParametricCurve<T>,
    table: ArcLengthTable<T>,
    anchor: T,
    s0: T,
    alpha: Vec2<T>,
}

impl<T: Real> BoundaryCurve<T> {
    /// Total length `L`.
    pub fn length(&self) -> T {
        self.table.total()
    }

    /// Raw parameter `t0` of the anchor point.
    pub fn anchor(&self) -> T {
        self.anchor
    }

    pub fn alpha(&self) -> Vec2<T> {
        self.alpha
    }

    pub fn raw(&self) -> &ParametricCurve<T> {
        &self.raw
    }

    /// Raw parameter corresponding to arc length `s` (any real `s`).
    pub fn raw_param(&self, s: T) -> T {
        let l = self.length();
        let target = wrap(self.s0 + s, l);
        self.table.invert(&self.raw, target)
    }

    /// Arc length in `[0, L)` of the raw parameter `t`.
    pub fn arc_length_of(&self, t: T) -> T {
        let t = wrap(t, T::TAU());
        wrap(self.table.length_at(&self.raw, t) - self.s0, self.length())
    }

    /// Position, unit tangent, outward normal, and curvature at arc length `s`.
    pub fn point(&self, s: T) -> CurvePoint<T> {
        let jet = self.raw.jet(self.raw_param(s));
        let speed = jet.d1.norm();
        let tangent = jet.d1.scale(T::one() / speed);
        CurvePoint {
            pos: jet.pos,
            tangent,
            normal: tangent.rot_cw(),
            curvature: jet.d1.cross(jet.d2) / (speed * speed * speed),
        }
    }

    pub fn position(&self, s: T) -> Vec2<T> {
        self.point(s).pos
    }

    pub fn normal(&self, s: T) -> Vec2<T> {
        self.point(s).normal
    }

    pub fn curvature(&self, s: T) -> T {
        self.point(s).curvature
    }

    /// `alpha · ν(γ(s))`.
    pub fn incidence_cosine(&self, s: T) -> T {
        self.alpha.dot(self.normal(s))
    }

    /// Samples `n` uniformly spaced arc-length nodes `s_j = j L / n`.
    pub fn sample(&self, n: usize) -> Vec<(T, CurvePoint<T>)> {
        let h = self.length() / T::from_usize_lossy(n);
        (0..n)
            .map(|j| {
                let s = T::from_usize_lossy(j) * h;
                (s, self.point(s))
            })
            .collect()
    }

    /// Arc-length parameters `0 < t1 < t2 < L` where `alpha · ν` vanishes.
    ///
    /// The illuminated region is `(t1, t2)` and the shadow region is
    /// `(t2, t1 + L)`. Fails when `alpha · ν` has other than two sign changes.
    pub fn shadow_boundaries(&self) -> Result<(T, T)> {
        let l = self.length();
        let n = 4000;
        let h = l / T::from_usize_lossy(n);
        let f = |s: T| self.incidence_cosine(s);
        let mut roots = Vec::new();
        let mut prev = f(T::zero());
        for i in 1..=n {
            let s = T::from_usize_lossy(i) * h;
            let cur = if i == n { f(T::zero()) } else { f(s) };
            if (prev > T::zero()) != (cur > T::zero()) {
                roots.push(bisect(f, s - h, s, T::lit(1e-13) * (T::one() + l)));
            }
            prev = cur;
        }
        if roots.len() != 2 {
            return Err(Error::AmbiguousShadowBoundary { roots: roots.iter().map(|r| r.to_f64_lossy()).collect() });
        }
        let (t1, t2) = (roots[0], roots[1]);
        if !(f((t1 + t2) * T::lit(0.5)) < T::zero()) {
            return Err(Error::Consistency("region between shadow boundaries is not illuminated".into()));
        }
        Ok((t1, t2))
    }
}

/// Bisection on a bracketing interval.
pub(crate) fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> T {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if (hi - lo) <= tol {
            return mid;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// Wavenumber, incidence direction and shadow boundaries for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringConfig<T> {
    pub k: T,
    pub alpha: Vec2<T>,
    pub t1: T,
    pub t2: T,
    pub length: T,
}

impl<T: Real> ScatteringConfig<T> {
    pub fn new(curve: &BoundaryCurve<T>, k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
        }
        let (t1, t2) = curve.shadow_boundaries()?;
        Ok(Self { k, alpha: curve.alpha(), t1, t2, length: curve.length() })
    }

    /// Same geometry at another wavenumber.
    pub fn with_wavenumber(&self, k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(Error::InvalidParameter(format!("wavenumber must be positive, got {k}")));
        }
        Ok(Self { k, ..*self })
    }

    /// Boundary wavelengths per period, `k L / 2π`.
    pub fn wavelengths(&self) -> T {
        self.k * self.length / T::TAU()
    }

    /// True when `s` lies in the shadow region `(t2, t1 + L)`.
    pub fn in_shadow(&self, s: T) -> bool {
        let s = wrap(s, self.length);
        s > self.t2 || s < self.t1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_circle() -> BoundaryCurve<f64> {
        make_curve(CurveKind::Circle { radius: 1.0 })
            .unwrap()
            .arc_length_reparam(Vec2::new(1.0, 0.0))
            .unwrap()
    }

    #[test]
    fn circle_raw_origin() {
        let c = make_curve(CurveKind::Circle { radius: 1.0 }).unwrap();
        let p = c.jet(0.0).pos;
        assert_eq!((p.x, p.y), (1.0, 0.0));
    }

    #[test]
    fn kite_raw_points() {
        let c = make_curve::<f64>(CurveKind::Kite).unwrap();
        let p = c.jet(0.0).pos;
        assert!((p.x - 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);
        let p = c.jet(PI).pos;
        assert!((p.x + 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_curve(CurveKind::Circle { radius: 0.0 }), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_curve(CurveKind::Ellipse { a: 2.0, b: -1.0 }), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rejects_clockwise_curve() {
        let cw = CustomShape(Arc::new(|t: f64| Jet {
            pos: Vec2::new(t.cos(), -t.sin()),
            d1: Vec2::new(-t.sin(), -t.cos()),
            d2: Vec2::new(-t.cos(), t.sin()),
        }));
        assert!(make_curve(CurveKind::Custom(cw)).is_err());
    }

    #[test]
    fn rejects_non_unit_alpha() {
        let c = make_curve(CurveKind::Circle { radius: 1.0 }).unwrap();
        assert!(c.arc_length_reparam(Vec2::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn circle_length_and_curvature() {
        let c = unit_circle();
        assert!((c.length() - 2.0 * PI).abs() < 1e-13);
        for i in 0..50 {
            let s = i as f64 * 0.13;
            assert!((c.curvature(s) - 1.0).abs() < 1e-10);
            let p = c.position(s);
            assert!((p.x - s.cos()).abs() < 1e-12 && (p.y - s.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_shadow_boundaries() {
        let (t1, t2) = unit_circle().shadow_boundaries().unwrap();
        assert!((t1 - PI / 2.0).abs() < 1e-11, "{t1}");
        assert!((t2 - 1.5 * PI).abs() < 1e-11, "{t2}");
    }

    #[test]
    fn anchor_aligns_normal() {
        let a = Vec2::new(3.0_f64, 1.0).unit();
        let c = make_curve(CurveKind::Ellipse { a: 2.0, b: 1.0 }).unwrap().arc_length_reparam(a).unwrap();
        assert!((c.incidence_cosine(0.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ambiguous_shadow_boundary_reported() {
        // A peanut with a deep waist has six sign changes for horizontal incidence.
        let peanut = CustomShape(Arc::new(|t: f64| {
            let r = |t: f64| 1.0 + 0.6 * (2.0 * t).cos();
            let dr = |t: f64| -1.2 * (2.0 * t).sin();
            let ddr = |t: f64| -2.4 * (2.0 * t).cos();
            let (s, c) = t.sin_cos();
            Jet {
                pos: Vec2::new(r(t) * c, r(t) * s),
                d1: Vec2::new(dr(t) * c - r(t) * s, dr(t) * s + r(t) * c),
                d2: Vec2::new(
                    ddr(t) * c - 2.0 * dr(t) * s - r(t) * c,
                    ddr(t) * s + 2.0 * dr(t) * c - r(t) * s,
                ),
            }
        }));
        let c = make_curve(CurveKind::Custom(peanut)).unwrap().arc_length_reparam(Vec2::new(1.0, 0.0)).unwrap();
        match c.shadow_boundaries() {
            Err(Error::AmbiguousShadowBoundary { roots }) => assert_eq!(roots.len(), 6),
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn config_rejects_nonpositive_k() {
        assert!(ScatteringConfig::new(&unit_circle(), 0.0).is_err());
    }

    #[test]
    fn shadow_membership() {
        let cfg = ScatteringConfig::new(&unit_circle(), 10.0).unwrap();
        assert!(cfg.in_shadow(0.1));
        assert!(!cfg.in_shadow(PI));
        assert!(cfg.in_shadow(2.0 * PI - 0.1));
    }
}
