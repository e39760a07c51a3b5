//! Region partitions of the boundary and the Galerkin spaces built on them.
//!
//! Two layouts are supported:
//!
//! * change of variables (`J = 6` or `8` intervals): the transition intervals
//!   carry the map `φ(s) = t ± varphi(s) k^{ψ(s)}` with affine `varphi` and
//!   `ψ` rising linearly from `−1/3` at the shadow boundary to `0`;
//! * frequency adapted (`4m` intervals): each transition region is cut into
//!   `m − 1` pieces with endpoints `t ± c k^{−1/3+ε_j}`.
//!
//! Every interval carries polynomials (or trigonometric polynomials) in a
//! local coordinate, multiplied by the incident phase `exp(ik α·γ)` and by a
//! window from a partition of unity.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bisect, wrap, BoundaryCurve, ScatteringConfig};
use crate::scalar::{cis, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    It1,
    It2,
    St1,
    St2,
    Sb1,
    Sb2,
    Il,
    Ds,
}

impl RegionTag {
    pub fn name(self) -> &'static str {
        match self {
            RegionTag::It1 => "IT1",
            RegionTag::It2 => "IT2",
            RegionTag::St1 => "ST1",
            RegionTag::St2 => "ST2",
            RegionTag::Sb1 => "SB1",
            RegionTag::Sb2 => "SB2",
            RegionTag::Il => "IL",
            RegionTag::Ds => "DS",
        }
    }

    pub fn is_transition(self) -> bool {
        matches!(self, RegionTag::It1 | RegionTag::It2 | RegionTag::St1 | RegionTag::St2)
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Partition parameters in arc-length units. Primed values (`*p`) only
/// matter for the change-of-variables layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovParams<T> {
    pub xi1: T,
    pub xi2: T,
    pub xi1p: T,
    pub xi2p: T,
    pub zeta1: T,
    pub zeta2: T,
    pub zeta1p: T,
    pub zeta2p: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Xi1,
    Xi2,
    Xi1p,
    Xi2p,
    Zeta1,
    Zeta2,
    Zeta1p,
    Zeta2p,
}

impl Param {
    pub const ALL: [Param; 8] =
        [Param::Xi1, Param::Xi2, Param::Xi1p, Param::Xi2p, Param::Zeta1, Param::Zeta2, Param::Zeta1p, Param::Zeta2p];

    pub fn name(self) -> &'static str {
        match self {
            Param::Xi1 => "xi1",
            Param::Xi2 => "xi2",
            Param::Xi1p => "xi1p",
            Param::Xi2p => "xi2p",
            Param::Zeta1 => "zeta1",
            Param::Zeta2 => "zeta2",
            Param::Zeta1p => "zeta1p",
            Param::Zeta2p => "zeta2p",
        }
    }
}

impl<T: Real> CovParams<T> {
    pub fn get(&self, p: Param) -> T {
        match p {
            Param::Xi1 => self.xi1,
            Param::Xi2 => self.xi2,
            Param::Xi1p => self.xi1p,
            Param::Xi2p => self.xi2p,
            Param::Zeta1 => self.zeta1,
            Param::Zeta2 => self.zeta2,
            Param::Zeta1p => self.zeta1p,
            Param::Zeta2p => self.zeta2p,
        }
    }

    pub fn set(&mut self, p: Param, v: T) {
        match p {
            Param::Xi1 => self.xi1 = v,
            Param::Xi2 => self.xi2 = v,
            Param::Xi1p => self.xi1p = v,
            Param::Xi2p => self.xi2p = v,
            Param::Zeta1 => self.zeta1 = v,
            Param::Zeta2 => self.zeta2 = v,
            Param::Zeta1p => self.zeta1p = v,
            Param::Zeta2p => self.zeta2p = v,
        }
    }

    /// Untuned starting values.
    ///
    /// The illuminated transition intervals end where the normal is most
    /// opposed to the incidence (`α·ν = −1` on convex bodies) and the shadow
    /// transition intervals end at the shadow pole `s = 0`; for `J = 8` the
    /// primed values are halved to open up `IL` and `DS`. Unprimed values
    /// start at the midpoint, `ξ1 = ξ1′/2` and so on.
    pub fn initial(curve: &BoundaryCurve<T>, config: &ScatteringConfig<T>, j: usize) -> Result<Self> {
        check_layout(j)?;
        let (t1, t2, l) = (config.t1, config.t2, config.length);
        let s_star = illuminated_pole(curve, t1, t2);
        let mut p = Self {
            xi1p: s_star - t1,
            xi2p: t2 - s_star,
            zeta1p: t1,
            zeta2p: l - t2,
            xi1: T::zero(),
            xi2: T::zero(),
            zeta1: T::zero(),
            zeta2: T::zero(),
        };
        if j == 8 {
            let half = T::lit(0.5);
            p.xi1p *= half;
            p.xi2p *= half;
            p.zeta1p *= half;
            p.zeta2p *= half;
        }
        p.xi1 = p.xi1p * T::lit(0.5);
        p.xi2 = p.xi2p * T::lit(0.5);
        p.zeta1 = p.zeta1p * T::lit(0.5);
        p.zeta2 = p.zeta2p * T::lit(0.5);
        Ok(p)
    }

    pub fn cast<U: Real>(&self) -> CovParams<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        CovParams {
            xi1: c(self.xi1),
            xi2: c(self.xi2),
            xi1p: c(self.xi1p),
            xi2p: c(self.xi2p),
            zeta1: c(self.zeta1),
            zeta2: c(self.zeta2),
            zeta1p: c(self.zeta1p),
            zeta2p: c(self.zeta2p),
        }
    }
}

/// Arc length in `(t1, t2)` minimizing `α·ν`.
fn illuminated_pole<T: Real>(curve: &BoundaryCurve<T>, t1: T, t2: T) -> T {
    let f = |s: T| curve.incidence_cosine(s);
    let n = 2000;
    let h = (t2 - t1) / T::from_usize_lossy(n);
    let mut best = (T::one(), t1 + h);
    for i in 1..n {
        let s = t1 + T::from_usize_lossy(i) * h;
        let v = f(s);
        if v < best.0 {
            best = (v, s);
        }
    }
    // α·ν is stationary where the tangent is orthogonal to α
    let g = |s: T| curve.alpha().dot(curve.point(s).tangent);
    let (lo, hi) = (best.1 - h, best.1 + h);
    if (g(lo) > T::zero()) == (g(hi) > T::zero()) {
        return best.1;
    }
    bisect(g, lo, hi, T::lit(1e-14) * (T::one() + hi.abs()))
}

fn check_layout(j: usize) -> Result<()> {
    if j == 6 || j == 8 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("change-of-variables layout needs J = 6 or 8, got {j}")))
    }
}

/// `ε_j = (1/3)(2m − 2j + 1)/(2m + 1)`, `j = 1..=m`.
pub fn default_eps_schedule<T: Real>(m: usize) -> Vec<T> {
    let mf = T::from_usize_lossy(m);
    (1..=m)
        .map(|j| {
            let jf = T::from_usize_lossy(j);
            (T::lit(2.0) * mf - T::lit(2.0) * jf + T::one()) / (T::lit(3.0) * (T::lit(2.0) * mf + T::one()))
        })
        .collect()
}

/// `φ` on one transition interval.
///
/// Writing `u ∈ [0, 1]` for the normalized distance from the endpoint next
/// to the shadow boundary (`near`) towards the other one (`far`),
/// `φ = t + σ δ(u)` with `δ(u) = (c_near + (c_far − c_near) u) k^{−(1−u)/3}`
/// and `σ = sign(far − near)`. Outside `[a, b]` the map is continued by its
/// tangent lines, which keeps it invertible for window overlaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeOfVariables<T> {
    t: T,
    near: T,
    far: T,
    c_near: T,
    c_far: T,
    k: T,
}

impl<T: Real> ChangeOfVariables<T> {
    fn new(t: T, near: T, far: T, c_near: T, c_far: T, k: T) -> Self {
        Self { t, near, far, c_near, c_far, k }
    }

    pub fn a(&self) -> T {
        self.near.min(self.far)
    }

    pub fn b(&self) -> T {
        self.near.max(self.far)
    }

    /// Endpoint adjacent to the shadow boundary.
    pub fn near(&self) -> T {
        self.near
    }

    pub fn anchor(&self) -> T {
        self.t
    }

    fn sigma(&self) -> T {
        if self.far > self.near {
            T::one()
        } else {
            -T::one()
        }
    }

    fn span(&self) -> T {
        (self.far - self.near).abs()
    }

    fn u_of(&self, s: T) -> T {
        (s - self.near) / (self.far - self.near)
    }

    fn varphi_u(&self, u: T) -> T {
        self.c_near + (self.c_far - self.c_near) * u
    }

    fn delta(&self, u: T) -> T {
        self.varphi_u(u) * self.k.powf(-(T::one() - u) / T::lit(3.0))
    }

    fn delta_prime(&self, u: T) -> T {
        let lk = self.k.ln() / T::lit(3.0);
        self.k.powf(-(T::one() - u) / T::lit(3.0)) * ((self.c_far - self.c_near) + self.varphi_u(u) * lk)
    }

    fn check(&self, s: T) -> Result<()> {
        let tol = T::lit(1e-14) * (T::one() + s.abs());
        if s < self.a() - tol || s > self.b() + tol || !s.is_finite() {
            return Err(Error::Domain(format!("{s} outside the transition interval [{}, {}]", self.a(), self.b())));
        }
        Ok(())
    }

    /// `φ(s)` for `s ∈ [a, b]`.
    pub fn forward(&self, s: T) -> Result<T> {
        self.check(s)?;
        Ok(self.forward_extended(s))
    }

    /// `φ(s)` with tangent-line continuation outside `[a, b]`.
    pub fn forward_extended(&self, s: T) -> T {
        let u = self.u_of(s);
        if u < T::zero() {
            self.near + self.derivative_u(T::zero()) * (s - self.near)
        } else if u > T::one() {
            self.far + self.derivative_u(T::one()) * (s - self.far)
        } else {
            self.t + self.sigma() * self.delta(u)
        }
    }

    fn derivative_u(&self, u: T) -> T {
        self.delta_prime(u) / self.span()
    }

    /// `φ′(s)`; positive everywhere.
    pub fn derivative(&self, s: T) -> T {
        let u = self.u_of(s).max(T::zero()).min(T::one());
        self.derivative_u(u)
    }

    /// Exponent `ψ(s)`: `−1/3` at the shadow-boundary end, `0` at the other.
    pub fn psi(&self, s: T) -> Result<T> {
        self.check(s)?;
        let u = self.u_of(s).max(T::zero()).min(T::one());
        Ok(-(T::one() - u) / T::lit(3.0))
    }

    /// Affine factor `varphi(s)`.
    pub fn varphi(&self, s: T) -> Result<T> {
        self.check(s)?;
        Ok(self.varphi_u(self.u_of(s).max(T::zero()).min(T::one())))
    }

    /// `φ⁻¹(y)` for `y ∈ [a, b]`.
    pub fn inverse(&self, y: T) -> Result<T> {
        self.check(y)?;
        Ok(self.inverse_extended(y))
    }

    /// Inverse of [`forward_extended`](Self::forward_extended).
    pub fn inverse_extended(&self, y: T) -> T {
        if y == self.near {
            return self.near;
        }
        if y == self.far {
            return self.far;
        }
        let d = self.sigma() * (y - self.t);
        let d0 = self.delta(T::zero());
        let d1 = self.delta(T::one());
        if !(d > d0) {
            return self.near + (y - self.near) / self.derivative_u(T::zero());
        }
        if !(d < d1) {
            return self.far + (y - self.far) / self.derivative_u(T::one());
        }
        // Newton on g(u) = ln δ(u) − ln d, concave and increasing.
        let target = d.ln();
        let lk = self.k.ln() / T::lit(3.0);
        let slope = self.c_far - self.c_near;
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut u = (target - d0.ln()) / (d1.ln() - d0.ln());
        for _ in 0..100 {
            let vp = self.varphi_u(u);
            let g = vp.ln() - (T::one() - u) * lk - target;
            if g > T::zero() {
                hi = u;
            } else {
                lo = u;
            }
            let gp = slope / vp + lk;
            let mut next = u - g / gp;
            if !(next > lo && next < hi) {
                next = (lo + hi) * T::lit(0.5);
            }
            let step = (next - u).abs();
            u = next;
            if step <= T::lit(4.0) * T::epsilon() {
                break;
            }
        }
        self.near + u * (self.far - self.near)
    }
}

/// Which construction produced a partition.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionMode<T> {
    Cov { j: usize },
    FreqAdapted { eps: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval<T> {
    pub tag: RegionTag,
    /// Sub-interval index `j` of a frequency-adapted transition region.
    pub level: Option<usize>,
    pub a: T,
    pub b: T,
    pub cov: Option<ChangeOfVariables<T>>,
}

impl<T: Real> Interval<T> {
    pub fn width(&self) -> T {
        self.b - self.a
    }

    /// Representative of `s` (mod `length`) in `[a, a + length)`.
    pub fn unroll(&self, s: T, length: T) -> T {
        self.a + wrap(s - self.a, length)
    }

    /// Half-open membership `[a, b)` modulo `length`.
    pub fn contains(&self, s: T, length: T) -> bool {
        wrap(s - self.a, length) < self.width()
    }

    pub fn label(&self) -> String {
        match self.level {
            Some(j) => format!("{}^{}", self.tag.name(), j),
            None => self.tag.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition<T> {
    pub intervals: Vec<Interval<T>>,
    pub params: CovParams<T>,
    pub mode: PartitionMode<T>,
    pub k: T,
    pub length: T,
    pub t1: T,
    pub t2: T,
    order: Vec<usize>,
}

impl<T: Real> RegionPartition<T> {
    fn assemble(
        intervals: Vec<Interval<T>>,
        params: CovParams<T>,
        mode: PartitionMode<T>,
        config: &ScatteringConfig<T>,
    ) -> Result<Self> {
        let length = config.length;
        for iv in &intervals {
            if !(iv.width() > T::zero()) {
                return Err(Error::InfeasiblePartition(format!(
                    "interval {} = [{}, {}] is empty",
                    iv.label(),
                    iv.a,
                    iv.b
                )));
            }
        }
        let a0 = intervals[0].a;
        let mut order: Vec<usize> = (0..intervals.len()).collect();
        order.sort_by(|&i, &j| {
            let (x, y) = (wrap(intervals[i].a - a0, length), wrap(intervals[j].a - a0, length));
            x.partial_cmp(&y).unwrap()
        });
        let tol = T::lit(1e-12) * length;
        let mut total = T::zero();
        for (n, &i) in order.iter().enumerate() {
            let next = &intervals[order[(n + 1) % order.len()]];
            let gap = wrap(next.a - intervals[i].b + length * T::lit(0.5), length) - length * T::lit(0.5);
            if gap.abs() > tol {
                return Err(Error::InfeasiblePartition(format!(
                    "intervals {} and {} do not meet (gap {gap})",
                    intervals[i].label(),
                    next.label()
                )));
            }
            total += intervals[i].width();
        }
        if (total - length).abs() > tol * T::from_usize_lossy(intervals.len()) {
            return Err(Error::InfeasiblePartition(format!("intervals cover {total}, boundary length {length}")));
        }
        Ok(Self { intervals, params, mode, k: config.k, length, t1: config.t1, t2: config.t2, order })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Interval indices in order of increasing arc length (cyclically).
    pub fn cyclic_order(&self) -> &[usize] {
        &self.order
    }

    /// Index of the interval containing `s`.
    pub fn find(&self, s: T) -> usize {
        let s = wrap(s, self.length);
        if let Some(i) = self.intervals.iter().position(|iv| iv.contains(s, self.length)) {
            return i;
        }
        // s fell into a rounding-level gap between two intervals
        let dist = |iv: &Interval<T>| {
            let d = wrap(s - iv.a, self.length);
            d.min(self.length - d)
        };
        (0..self.len()).min_by(|&i, &j| dist(&self.intervals[i]).partial_cmp(&dist(&self.intervals[j])).unwrap()).unwrap()
    }

    pub fn indices_of(&self, tags: &[RegionTag]) -> Vec<usize> {
        (0..self.len()).filter(|&i| tags.contains(&self.intervals[i].tag)).collect()
    }

    pub fn by_tag(&self, tag: RegionTag) -> Option<&Interval<T>> {
        self.intervals.iter().find(|iv| iv.tag == tag && iv.level.is_none())
    }

    pub fn narrowest(&self) -> T {
        self.intervals.iter().map(|iv| iv.width()).fold(T::infinity(), T::min)
    }
}

/// The `J = 6` or `J = 8` change-of-variables partition.
///
/// Intervals are returned in the order `IT1, IT2, ST1, ST2, SB1, SB2`
/// followed by `IL, DS` when `J = 8`. For `J = 6` the equalities
/// `t1 + ξ1′ = t2 − ξ2′` and `t2 + ζ2′ = L + t1 − ζ1′` are required (up to
/// `1e−12 L`) and `ξ2′`, `ζ2′` are snapped to them.
pub fn build_cov_partition<T: Real>(
    config: &ScatteringConfig<T>,
    params: &CovParams<T>,
    j: usize,
) -> Result<RegionPartition<T>> {
    check_layout(j)?;
    if !(config.k > T::one()) {
        return Err(Error::InvalidParameter(format!("change of variables needs k > 1, got {}", config.k)));
    }
    for p in Param::ALL {
        if !(params.get(p) > T::zero()) || !params.get(p).is_finite() {
            return Err(Error::InvalidParameter(format!("{} must be positive, got {}", p.name(), params.get(p))));
        }
    }
    let (t1, t2, l, k) = (config.t1, config.t2, config.length, config.k);
    let tol = T::lit(1e-12) * l;
    let mut p = *params;
    let chain = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InfeasiblePartition(format!("{what} violated")))
        }
    };
    chain(p.xi1 <= p.xi1p, "t1 + ξ1 ≤ t1 + ξ1′")?;
    chain(p.xi2 <= p.xi2p, "t2 − ξ2′ ≤ t2 − ξ2")?;
    chain(p.zeta2 <= p.zeta2p, "t2 + ζ2 ≤ t2 + ζ2′")?;
    chain(p.zeta1 <= p.zeta1p, "L + t1 − ζ1′ ≤ L + t1 − ζ1")?;
    let gap_a = (t2 - p.xi2p) - (t1 + p.xi1p);
    let gap_b = (l + t1 - p.zeta1p) - (t2 + p.zeta2p);
    chain(gap_a >= -tol, "(A) t1 + ξ1′ ≤ t2 − ξ2′")?;
    chain(gap_b >= -tol, "(B) t2 + ζ2′ ≤ L + t1 − ζ1′")?;
    if j == 6 {
        chain(gap_a.abs() <= tol, "(A) equality t1 + ξ1′ = t2 − ξ2′ required for J = 6;")?;
        chain(gap_b.abs() <= tol, "(B) equality t2 + ζ2′ = L + t1 − ζ1′ required for J = 6;")?;
        p.xi2p = t2 - t1 - p.xi1p;
        p.zeta2p = l + t1 - t2 - p.zeta1p;
    } else {
        chain(gap_a > tol, "(A) strict inequality t1 + ξ1′ < t2 − ξ2′ required for J = 8;")?;
        chain(gap_b > tol, "(B) strict inequality t2 + ζ2′ < L + t1 − ζ1′ required for J = 8;")?;
    }
    let kc = k.powf(-T::one() / T::lit(3.0));
    let it1 = (t1 + p.xi1 * kc, t1 + p.xi1p);
    let it2 = (t2 - p.xi2p, t2 - p.xi2 * kc);
    let st1 = (t1 - p.zeta1p, t1 - p.zeta1 * kc);
    let st2 = (t2 + p.zeta2 * kc, t2 + p.zeta2p);
    let sb1 = (st1.1, it1.0);
    let sb2 = (it2.1, st2.0);
    let mk = |tag, (a, b): (T, T), cov| Interval { tag, level: None, a, b, cov };
    let mut intervals = vec![
        mk(RegionTag::It1, it1, Some(ChangeOfVariables::new(t1, it1.0, it1.1, p.xi1, p.xi1p, k))),
        mk(RegionTag::It2, it2, Some(ChangeOfVariables::new(t2, it2.1, it2.0, p.xi2, p.xi2p, k))),
        mk(RegionTag::St1, st1, Some(ChangeOfVariables::new(t1, st1.1, st1.0, p.zeta1, p.zeta1p, k))),
        mk(RegionTag::St2, st2, Some(ChangeOfVariables::new(t2, st2.0, st2.1, p.zeta2, p.zeta2p, k))),
        mk(RegionTag::Sb1, sb1, None),
        mk(RegionTag::Sb2, sb2, None),
    ];
    if j == 8 {
        intervals.push(mk(RegionTag::Il, (it1.1, it2.0), None));
        intervals.push(mk(RegionTag::Ds, (st2.1, l + st1.0), None));
    }
    RegionPartition::assemble(intervals, p, PartitionMode::Cov { j }, config)
}

/// The `4m`-interval frequency-adapted partition for the schedule
/// `ε_1 > … > ε_m ≥ 0` (see [`default_eps_schedule`]). Only the unprimed
/// parameters are used.
pub fn build_freq_adapted_partition<T: Real>(
    config: &ScatteringConfig<T>,
    params: &CovParams<T>,
    eps: &[T],
) -> Result<RegionPartition<T>> {
    let m = eps.len();
    if m == 0 {
        return Err(Error::InvalidParameter("frequency-adapted partition needs m ≥ 1".into()));
    }
    let third = T::one() / T::lit(3.0);
    if !(eps[0] < third) || !(eps[m - 1] >= T::zero()) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(format!(
            "ε schedule must satisfy 0 ≤ ε_m < … < ε_1 < 1/3, got {:?}",
            eps.iter().map(|e| e.to_f64_lossy()).collect::<Vec<_>>()
        )));
    }
    let p = *params;
    for v in [p.xi1, p.xi2, p.zeta1, p.zeta2] {
        if !(v > T::zero()) {
            return Err(Error::InvalidParameter("ξ1, ξ2, ζ1, ζ2 must be positive".into()));
        }
    }
    let (t1, t2, l, k) = (config.t1, config.t2, config.length, config.k);
    let e: Vec<T> = eps.iter().map(|&x| k.powf(-third + x)).collect();
    let mut intervals = Vec::with_capacity(4 * m);
    let mk = |tag, level, a, b| Interval { tag, level, a, b, cov: None };
    for j in 0..m - 1 {
        intervals.push(mk(RegionTag::It1, Some(j + 1), t1 + p.xi1 * e[j + 1], t1 + p.xi1 * e[j]));
    }
    for j in 0..m - 1 {
        intervals.push(mk(RegionTag::It2, Some(j + 1), t2 - p.xi2 * e[j], t2 - p.xi2 * e[j + 1]));
    }
    for j in 0..m - 1 {
        intervals.push(mk(RegionTag::St1, Some(j + 1), t1 - p.zeta1 * e[j], t1 - p.zeta1 * e[j + 1]));
    }
    for j in 0..m - 1 {
        intervals.push(mk(RegionTag::St2, Some(j + 1), t2 + p.zeta2 * e[j + 1], t2 + p.zeta2 * e[j]));
    }
    let em = e[m - 1];
    intervals.push(mk(RegionTag::Sb1, None, t1 - p.zeta1 * em, t1 + p.xi1 * em));
    intervals.push(mk(RegionTag::Sb2, None, t2 - p.xi2 * em, t2 + p.zeta2 * em));
    let il = (t1 + p.xi1 * e[0], t2 - p.xi2 * e[0]);
    let ds = (t2 + p.zeta2 * e[0], l + t1 - p.zeta1 * e[0]);
    if !(il.1 > il.0) {
        return Err(Error::InfeasiblePartition("t1 + ξ1 k^(−1/3+ε1) < t2 − ξ2 k^(−1/3+ε1) violated".into()));
    }
    if !(ds.1 > ds.0) {
        return Err(Error::InfeasiblePartition("t2 + ζ2 k^(−1/3+ε1) < L + t1 − ζ1 k^(−1/3+ε1) violated".into()));
    }
    intervals.push(mk(RegionTag::Il, None, il.0, il.1));
    intervals.push(mk(RegionTag::Ds, None, ds.0, ds.1));
    RegionPartition::assemble(intervals, p, PartitionMode::FreqAdapted { eps: eps.to_vec() }, config)
}

/// Shape of the smooth windows: blend width `min(w/4, overlap · k^{−1/3})`
/// at each breakpoint (`w` the narrower neighbour) and steepness `β` of the
/// step `S(x) = f(x)/(f(x) + f(1 − x))`, `f(x) = exp(−β/x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PouShape<T> {
    pub overlap: T,
    pub steepness: T,
}

impl<T: Real> Default for PouShape<T> {
    fn default() -> Self {
        Self { overlap: T::lit(0.25), steepness: T::one() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window<T> {
    /// Characteristic functions of the half-open intervals.
    Indicator,
    Smooth(PouShape<T>),
}

impl<T: Real> Default for Window<T> {
    fn default() -> Self {
        Window::Smooth(PouShape::default())
    }
}

/// Smooth step from 0 at `x ≤ 0` to 1 at `x ≥ 1`.
pub fn smooth_step<T: Real>(x: T, steepness: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let f = |y: T| (-steepness / y).exp();
    let (a, b) = (f(x), f(T::one() - x));
    a / (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Breakpoint<T> {
    at: T,
    width: T,
    left: usize,
    right: usize,
}

/// Windows `w_j` with `Σ_j w_j = 1`, each supported in its interval
/// extended by half the blend width at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity<T> {
    breakpoints: Vec<Breakpoint<T>>,
    /// Blend widths at the start and end of each interval.
    ends: Vec<(T, T)>,
    steepness: T,
    length: T,
    indicator: bool,
}

impl<T: Real> PartitionOfUnity<T> {
    pub fn new(partition: &RegionPartition<T>, window: Window<T>) -> Result<Self> {
        match window {
            Window::Indicator => Self::with_widths(partition, &vec![T::zero(); partition.len()], T::one(), true),
            Window::Smooth(shape) => {
                if !(shape.overlap > T::zero() && shape.steepness > T::zero()) {
                    return Err(Error::InvalidParameter("window overlap and steepness must be positive".into()));
                }
                let order = partition.cyclic_order();
                let kc = partition.k.powf(-T::one() / T::lit(3.0));
                let n = order.len();
                let widths: Vec<T> = (0..n)
                    .map(|i| {
                        let (l, r) = (&partition.intervals[order[i]], &partition.intervals[order[(i + 1) % n]]);
                        (T::lit(0.25) * l.width().min(r.width())).min(shape.overlap * kc)
                    })
                    .collect();
                Self::with_widths(partition, &widths, shape.steepness, false)
            }
        }
    }

    /// Windows with explicit blend widths, one per breakpoint in cyclic
    /// order (the breakpoint after `cyclic_order()[i]`).
    pub fn with_widths(partition: &RegionPartition<T>, widths: &[T], steepness: T, indicator: bool) -> Result<Self> {
        let order = partition.cyclic_order();
        let n = order.len();
        if widths.len() != n {
            return Err(Error::InvalidParameter(format!("need {n} blend widths, got {}", widths.len())));
        }
        let mut ends = vec![(T::zero(), T::zero()); n];
        let mut breakpoints = Vec::with_capacity(n);
        for i in 0..n {
            let (l, r) = (order[i], order[(i + 1) % n]);
            let w = widths[i];
            let narrow = partition.intervals[l].width().min(partition.intervals[r].width());
            if !indicator && !(w > T::zero() && w <= narrow) {
                return Err(Error::InvalidParameter(format!(
                    "blend width {w} must be positive and at most the neighbouring interval width {narrow}"
                )));
            }
            ends[l].1 = w;
            ends[r].0 = w;
            breakpoints.push(Breakpoint { at: wrap(partition.intervals[r].a, partition.length), width: w, left: l, right: r });
        }
        for (i, (wl, wr)) in ends.iter().enumerate() {
            if !indicator && (*wl + *wr) * T::lit(0.5) > partition.intervals[i].width() {
                return Err(Error::InvalidParameter(format!(
                    "blends overlap inside interval {}",
                    partition.intervals[i].label()
                )));
            }
        }
        Ok(Self { breakpoints, ends, steepness, length: partition.length, indicator })
    }

    pub fn is_indicator(&self) -> bool {
        self.indicator
    }

    /// Blend widths at the start and the end of interval `j`.
    pub fn blend_widths(&self, j: usize) -> (T, T) {
        self.ends[j]
    }

    pub fn min_blend_width(&self) -> T {
        self.breakpoints.iter().map(|b| b.width).fold(T::infinity(), T::min)
    }

    /// Nonzero weights at `s` as `(interval, weight)`; at most two entries.
    pub fn weights_sparse(&self, partition: &RegionPartition<T>, s: T) -> ([(usize, T); 2], usize) {
        let s = wrap(s, self.length);
        if !self.indicator {
            let half_l = self.length * T::lit(0.5);
            for bp in &self.breakpoints {
                let d = wrap(s - bp.at + half_l, self.length) - half_l;
                let h = bp.width * T::lit(0.5);
                if d > -h && d < h {
                    let z = (d + h) / bp.width;
                    let up = smooth_step(z, self.steepness);
                    return ([(bp.left, T::one() - up), (bp.right, up)], 2);
                }
            }
        }
        ([(partition.find(s), T::one()), (0, T::zero())], 1)
    }

    /// Weight vector over all intervals at `s`.
    pub fn weights(&self, partition: &RegionPartition<T>, s: T) -> Vec<T> {
        let mut w = vec![T::zero(); partition.len()];
        let (entries, n) = self.weights_sparse(partition, s);
        for &(j, v) in &entries[..n] {
            w[j] += v;
        }
        w
    }

    pub fn weight(&self, partition: &RegionPartition<T>, j: usize, s: T) -> T {
        let (entries, n) = self.weights_sparse(partition, s);
        entries[..n].iter().filter(|(i, _)| *i == j).map(|(_, v)| *v).fold(T::zero(), |a, b| a + b)
    }

    /// Support `[lo, hi]` of window `j` in unrolled coordinates.
    pub fn support(&self, partition: &RegionPartition<T>, j: usize) -> (T, T) {
        let iv = &partition.intervals[j];
        let (wl, wr) = self.ends[j];
        (iv.a - wl * T::lit(0.5), iv.b + wr * T::lit(0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Algebraic,
    Trigonometric,
}

/// Polynomial basis on algebraic intervals. Both span the same space;
/// Legendre polynomials are better conditioned at high degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyBasis {
    #[default]
    Monomial,
    Legendre,
}

/// Frequency of the `idx`-th trigonometric basis function: `0, −1, 1, −2, 2, …`,
/// so that a degree-`d` space is a prefix of any higher even degree.
pub fn trig_frequency(idx: usize) -> i64 {
    let m = idx.div_ceil(2) as i64;
    if idx % 2 == 1 {
        -m
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LocalChart<T> {
    /// Local coordinate range `[lo, hi]` over the window support, in the
    /// (unmapped) variable `v = φ⁻¹(s)` or `v = s`.
    lo: T,
    hi: T,
    support: (T, T),
}

/// `⊕_j w_j exp(ik α·γ) V_j` with `V_j` polynomials (or trigonometric
/// polynomials) in the local coordinate of interval `j`, composed with `φ⁻¹`
/// on change-of-variables transition intervals.
#[derive(Debug, Clone)]
pub struct GalerkinSpace<T> {
    pub partition: RegionPartition<T>,
    pub family: Family,
    pub degrees: Vec<usize>,
    pub pou: PartitionOfUnity<T>,
    pub poly: PolyBasis,
    alpha: crate::Vec2<T>,
    offsets: Vec<usize>,
    charts: Vec<LocalChart<T>>,
}

impl<T: Real> GalerkinSpace<T> {
    /// `degrees` has one entry per interval, or a single entry used for all.
    pub fn new(
        partition: RegionPartition<T>,
        family: Family,
        degrees: &[usize],
        window: Window<T>,
        alpha: crate::Vec2<T>,
    ) -> Result<Self> {
        let n = partition.len();
        let degrees: Vec<usize> = match degrees.len() {
            1 => vec![degrees[0]; n],
            len if len == n => degrees.to_vec(),
            len => {
                return Err(Error::InvalidParameter(format!("{len} degrees given for {n} intervals")));
            }
        };
        if family == Family::Trigonometric && degrees.iter().any(|d| d % 2 != 0) {
            return Err(Error::InvalidParameter("trigonometric spaces need even degrees".into()));
        }
        let pou = PartitionOfUnity::new(&partition, window)?;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degrees {
            offsets.push(offsets.last().unwrap() + d + 1);
        }
        let charts = (0..n)
            .map(|j| {
                let support = pou.support(&partition, j);
                let iv = &partition.intervals[j];
                let (lo, hi) = match (family, &iv.cov) {
                    (Family::Algebraic, _) => (iv.a, iv.b),
                    (Family::Trigonometric, Some(c)) => (c.inverse_extended(support.0), c.inverse_extended(support.1)),
                    (Family::Trigonometric, None) => support,
                };
                LocalChart { lo, hi, support }
            })
            .collect();
        Ok(Self { partition, family, degrees, pou, poly: PolyBasis::default(), alpha, offsets, charts })
    }

    pub fn with_poly_basis(mut self, poly: PolyBasis) -> Self {
        self.poly = poly;
        self
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn alpha(&self) -> crate::Vec2<T> {
        self.alpha
    }

    pub fn k(&self) -> T {
        self.partition.k
    }

    /// Whether interval `j` uses the change of variables.
    pub fn is_mapped(&self, j: usize) -> bool {
        self.partition.intervals[j].cov.is_some()
    }

    /// Support `[lo, hi]` (unrolled) of the basis functions of interval `j`.
    pub fn support(&self, j: usize) -> (T, T) {
        self.charts[j].support
    }

    /// Whether `s` lies in the support of interval `j`'s window; returns the
    /// unrolled coordinate.
    pub fn in_support(&self, j: usize, s: T) -> Option<T> {
        let (lo, hi) = self.charts[j].support;
        let su = lo + wrap(s - lo, self.partition.length);
        if self.pou.is_indicator() {
            (su < hi).then_some(su)
        } else {
            (su > lo && su < hi).then_some(su)
        }
    }

    /// Local coordinate: `ρ ∈ [−1, 1]` over `[a, b]` (algebraic) or
    /// `ρ ∈ [0, 2π]` over the window support (trigonometric), applied to
    /// `φ⁻¹(s)` on mapped intervals.
    pub fn local_coordinate(&self, j: usize, s_unrolled: T) -> T {
        let iv = &self.partition.intervals[j];
        let v = match &iv.cov {
            Some(c) => c.inverse_extended(s_unrolled),
            None => s_unrolled,
        };
        let ch = &self.charts[j];
        match self.family {
            Family::Algebraic => T::lit(2.0) * (v - ch.lo) / (ch.hi - ch.lo) - T::one(),
            Family::Trigonometric => T::TAU() * (v - ch.lo) / (ch.hi - ch.lo),
        }
    }

    /// Unweighted local basis values (no phase, no window) at unrolled `s`.
    pub fn local_values(&self, j: usize, s_unrolled: T, out: &mut [Complex<T>]) {
        let d = self.degrees[j];
        let x = self.local_coordinate(j, s_unrolled);
        match self.family {
            Family::Algebraic => match self.poly {
                PolyBasis::Monomial => {
                    let mut p = T::one();
                    for o in out.iter_mut().take(d + 1) {
                        *o = Complex::new(p, T::zero());
                        p *= x;
                    }
                }
                PolyBasis::Legendre => {
                    let (mut p0, mut p1) = (T::one(), x);
                    for (r, o) in out.iter_mut().take(d + 1).enumerate() {
                        if r == 0 {
                            *o = Complex::new(p0, T::zero());
                        } else {
                            *o = Complex::new(p1, T::zero());
                            let rf = T::from_usize_lossy(r);
                            let p2 = ((T::lit(2.0) * rf + T::one()) * x * p1 - rf * p0) / (rf + T::one());
                            p0 = p1;
                            p1 = p2;
                        }
                    }
                }
            },
            Family::Trigonometric => {
                for (idx, o) in out.iter_mut().take(d + 1).enumerate() {
                    *o = cis(T::from_i64(trig_frequency(idx)).unwrap() * x);
                }
            }
        }
    }

    /// Basis function `r` of interval `j` at arc length `s`, including the
    /// window and the phase `exp(ik α·γ(s))`; zero outside the support.
    pub fn basis_eval(&self, curve: &BoundaryCurve<T>, j: usize, r: usize, s: T) -> Complex<T> {
        assert!(r <= self.degrees[j], "basis index {r} exceeds degree {}", self.degrees[j]);
        let Some(su) = self.in_support(j, s) else {
            return Complex::new(T::zero(), T::zero());
        };
        let w = self.pou.weight(&self.partition, j, s);
        if w == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let mut vals = vec![Complex::new(T::zero(), T::zero()); self.degrees[j] + 1];
        self.local_values(j, su, &mut vals);
        let phase = cis(self.k() * self.alpha.dot(curve.position(s)));
        vals[r] * phase * w
    }

    /// Global indices of the basis functions spanning the sub-space with
    /// per-interval degrees `sub` (each `≤` the space's own).
    pub fn sub_indices(&self, sub: &[usize]) -> Result<Vec<usize>> {
        let n = self.partition.len();
        let sub: Vec<usize> = match sub.len() {
            1 => vec![sub[0]; n],
            len if len == n => sub.to_vec(),
            len => return Err(Error::InvalidParameter(format!("{len} degrees given for {n} intervals"))),
        };
        let mut idx = Vec::new();
        for (j, &d) in sub.iter().enumerate() {
            if d > self.degrees[j] || (self.family == Family::Trigonometric && d % 2 != 0) {
                return Err(Error::InvalidParameter(format!(
                    "sub-degree {d} not admissible on interval {} of degree {}",
                    self.partition.intervals[j].label(),
                    self.degrees[j]
                )));
            }
            idx.extend(self.offsets[j]..=self.offsets[j] + d);
        }
        Ok(idx)
    }

    /// The same space with lower per-interval degrees.
    pub fn with_degrees(&self, sub: &[usize]) -> Result<Self> {
        self.sub_indices(sub)?;
        let n = self.partition.len();
        let degrees: Vec<usize> = if sub.len() == 1 { vec![sub[0]; n] } else { sub.to_vec() };
        let mut offsets = vec![0];
        for d in &degrees {
            offsets.push(offsets.last().unwrap() + d + 1);
        }
        Ok(Self { degrees, offsets, ..self.clone() })
    }
}

/// Layout of a space family.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout<T> {
    Cov { j: usize },
    FreqAdapted { eps: Vec<T> },
}

/// Everything needed to build a space at any wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTemplate<T> {
    pub family: Family,
    pub layout: Layout<T>,
    pub degrees: Vec<usize>,
    pub window: Window<T>,
    pub poly: PolyBasis,
}

impl<T: Real> SpaceTemplate<T> {
    pub fn partition(&self, config: &ScatteringConfig<T>, params: &CovParams<T>) -> Result<RegionPartition<T>> {
        match &self.layout {
            Layout::Cov { j } => build_cov_partition(config, params, *j),
            Layout::FreqAdapted { eps } => build_freq_adapted_partition(config, params, eps),
        }
    }

    pub fn build(&self, config: &ScatteringConfig<T>, params: &CovParams<T>) -> Result<GalerkinSpace<T>> {
        let partition = self.partition(config, params)?;
        Ok(GalerkinSpace::new(partition, self.family, &self.degrees, self.window, config.alpha)?.with_poly_basis(self.poly))
    }

    pub fn n_intervals(&self) -> usize {
        match &self.layout {
            Layout::Cov { j } => *j,
            Layout::FreqAdapted { eps } => 4 * eps.len(),
        }
    }

    /// `Σ (d_j + 1)` for the template's degrees.
    pub fn dim(&self) -> usize {
        let n = self.n_intervals();
        if self.degrees.len() == 1 {
            n * (self.degrees[0] + 1)
        } else {
            self.degrees.iter().map(|d| d + 1).sum()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Cov,
    Freq,
}

/// On-disk description of a partition and its windows.
///
/// ```toml
/// layout = "cov"
/// j = 6
///
/// [params]
/// xi1 = 0.785
/// ...
///
/// [pou]
/// overlap = 0.25
/// steepness = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub layout: LayoutKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<usize>>,
    pub params: CovParams<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pou: Option<PouShape<f64>>,
}

impl PartitionFile {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        f.layout_spec::<f64>()?;
        Ok(f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Layout described by the file.
    pub fn layout_spec<T: Real>(&self) -> Result<Layout<T>> {
        match self.layout {
            LayoutKind::Cov => {
                let j = self.j.unwrap_or(6);
                check_layout(j)?;
                Ok(Layout::Cov { j })
            }
            LayoutKind::Freq => match (&self.eps, self.m) {
                (Some(e), _) => Ok(Layout::FreqAdapted { eps: e.iter().map(|&x| T::lit(x)).collect() }),
                (None, Some(m)) if m >= 1 => Ok(Layout::FreqAdapted { eps: default_eps_schedule(m) }),
                _ => Err(Error::Config("layout \"freq\" needs `m` or `eps`".into())),
            },
        }
    }
}
