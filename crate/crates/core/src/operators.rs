//! Combined field integral operator `½I + D − ikS`, its logarithmic
//! splitting, the Nyström reference solver, and the exact circle series.
//!
//! Kernels are written in the arc-length variable. With `τ = 2πs/L`, every
//! kernel of `D − ikS` splits as
//!
//! ```text
//! K(s, t) = A(s, t) + B(s, t) ln(4 sin²((s − t)π/L))
//! ```
//!
//! with `A`, `B` smooth and periodic, which is what the trigonometric
//! quadrature weights of [`kress_log_weights`] integrate exactly.

use std::io::{self, Write};

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{wrap, BoundaryCurve, CurvePoint, ScatteringConfig};
use crate::linalg::{vec_norm2, CMatrix, Lu};
use crate::scalar::{cis, Real};
use crate::specfun::{bessel_jy01, hankel1_seq};

/// Anything that can report the surface current at an arc-length position.
pub trait DensityField<T: Real> {
    fn density(&self, s: T) -> Complex<T>;
}

/// Right-hand side `∂ν u_inc − ik u_inc = ik(α·ν − 1) exp(ik α·x)`.
pub fn incident_rhs_at<T: Real>(config: &ScatteringConfig<T>, p: &CurvePoint<T>) -> Complex<T> {
    let k = config.k;
    let phase = cis(k * config.alpha.dot(p.pos));
    phase * Complex::new(T::zero(), k * (config.alpha.dot(p.normal) - T::one()))
}

pub fn incident_rhs<T: Real>(config: &ScatteringConfig<T>, curve: &BoundaryCurve<T>, s: T) -> Complex<T> {
    incident_rhs_at(config, &curve.point(s))
}

/// Smooth and logarithmic parts of the `D − ikS` kernel at one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSplit<T> {
    pub smooth: Complex<T>,
    pub log: Complex<T>,
}

impl<T: Real> KernelSplit<T> {
    /// `A + B ln(4 sin²((s − t)π/L))`; infinite on the diagonal.
    pub fn reconstruct(&self, s: T, t: T, length: T) -> Complex<T> {
        let half = (s - t) * T::PI() / length;
        let lg = (T::lit(4.0) * half.sin().powi(2)).ln();
        self.smooth + self.log * lg
    }
}

/// Kernel parts of `D` and `S` separately; [`cfie_kernel_split`] combines them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSplit<T> {
    pub d: KernelSplit<T>,
    pub s: KernelSplit<T>,
}

impl<T: Real> OperatorSplit<T> {
    pub fn combined(&self, k: T) -> KernelSplit<T> {
        let mik = Complex::new(T::zero(), -k);
        KernelSplit { smooth: self.d.smooth + mik * self.s.smooth, log: self.d.log + mik * self.s.log }
    }
}

/// Splits the `D` and `S` kernels at boundary points `x = γ(s)`, `y = γ(t)`.
///
/// `D` is the normal derivative at `x` of the single layer, with kernel
/// `(ik/4) H_1(kr) ν(x)·(y − x)/r`; `S` has kernel `(i/4) H_0(kr)`.
pub fn operator_split<T: Real>(
    k: T,
    length: T,
    s: T,
    x: &CurvePoint<T>,
    t: T,
    y: &CurvePoint<T>,
) -> OperatorSplit<T> {
    let four_pi = T::lit(4.0) * T::PI();
    let diff = wrap(s - t, length);
    let is_diag = diff == T::zero() || diff == length;
    if is_diag {
        let d = KernelSplit { smooth: Complex::new(-x.curvature / four_pi, T::zero()), log: Complex::zero() };
        let re = -(T::euler_gamma() + (k * length / four_pi).ln()) / (T::lit(2.0) * T::PI());
        let s_part = KernelSplit {
            smooth: Complex::new(re, T::lit(0.25)),
            log: Complex::new(-T::one() / four_pi, T::zero()),
        };
        return OperatorSplit { d, s: s_part };
    }
    let dx = x.pos - y.pos;
    let r = dx.norm();
    let b = bessel_jy01(k * r);
    let (h0, h1) = (b.h0(), b.h1());
    let c = x.normal.dot(dx) / r;
    let lg = {
        let half = diff * T::PI() / length;
        (T::lit(4.0) * half.sin().powi(2)).ln()
    };
    let quarter = T::lit(0.25);
    // D: -(ik/4) H1 c
    let d_full = Complex::new(T::zero(), -k * quarter) * h1 * c;
    let d_log = Complex::new(k / four_pi * b.j1 * c, T::zero());
    // S: (i/4) H0
    let s_full = Complex::new(T::zero(), quarter) * h0;
    let s_log = Complex::new(-b.j0 / four_pi, T::zero());
    OperatorSplit {
        d: KernelSplit { smooth: d_full - d_log * lg, log: d_log },
        s: KernelSplit { smooth: s_full - s_log * lg, log: s_log },
    }
}

/// Split of the `D − ikS` kernel at arc-length pair `(s, t)`.
pub fn cfie_kernel_split<T: Real>(config: &ScatteringConfig<T>, curve: &BoundaryCurve<T>, s: T, t: T) -> KernelSplit<T> {
    let (x, y) = (curve.point(s), curve.point(t));
    operator_split(config.k, curve.length(), s, &x, t, &y).combined(config.k)
}

/// Trigonometric weights `R_j`, `j = 0..N`, for
/// `∫₀^{2π} ln(4 sin²((t_i − τ)/2)) g(τ) dτ ≈ Σ_j R_{|i−j|} g(t_j)`.
pub fn kress_log_weights<T: Real>(n_nodes: usize) -> Result<Vec<T>> {
    if n_nodes % 2 != 0 || n_nodes < 4 {
        return Err(Error::InvalidParameter(format!("log-quadrature node count must be even and ≥ 4, got {n_nodes}")));
    }
    let n = n_nodes / 2;
    let nf = T::from_usize_lossy(n);
    let cos_table: Vec<T> =
        (0..n_nodes).map(|i| (T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(n_nodes)).cos()).collect();
    let inv_m: Vec<T> = (1..n).map(|m| T::one() / T::from_usize_lossy(m)).collect();
    let w: Vec<T> = (0..n_nodes)
        .into_par_iter()
        .map(|j| {
            let mut acc = T::zero();
            for (m, im) in (1..n).zip(&inv_m) {
                acc += *im * cos_table[(m * j) % n_nodes];
            }
            let alt = if j % 2 == 0 { T::one() } else { -T::one() };
            -(T::TAU() / nf) * acc - T::PI() / (nf * nf) * alt
        })
        .collect();
    Ok(w)
}

/// Uniform arc-length nodes with cached geometry.
#[derive(Debug, Clone)]
pub struct BoundaryGrid<T> {
    pub s: Vec<T>,
    pub points: Vec<CurvePoint<T>>,
    pub length: T,
}

impl<T: Real> BoundaryGrid<T> {
    pub fn new(curve: &BoundaryCurve<T>, n: usize) -> Self {
        let (s, points) = curve.sample(n).into_iter().unzip();
        Self { s, points, length: curve.length() }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn spacing(&self) -> T {
        self.length / T::from_usize_lossy(self.len())
    }
}

/// Row `p` of the Nyström matrix of `D − ikS` on `grid`; `weights` from
/// [`kress_log_weights`] for the same node count.
pub fn nystrom_row<T: Real>(k: T, grid: &BoundaryGrid<T>, weights: &[T], p: usize, row: &mut [Complex<T>]) {
    let n = grid.len();
    let length = grid.length;
    let h = grid.spacing();
    let log_scale = length / T::TAU();
    let mik = Complex::new(T::zero(), -k);
    let (pts, ss) = (&grid.points, &grid.s);
    for q in 0..n {
        let sp = operator_split(k, length, ss[p], &pts[p], ss[q], &pts[q]);
        let a = sp.d.smooth + mik * sp.s.smooth;
        let b = sp.d.log + mik * sp.s.log;
        row[q] = a * h + b * (weights[(p + n - q) % n] * log_scale);
    }
}

/// Dense Nyström discretization `W` of `D − ikS` on a uniform grid, so that
/// `(D − ikS)g (s_p) ≈ Σ_q W[p, q] g(s_q)` for smooth periodic `g`.
#[derive(Debug, Clone)]
pub struct NystromOperator<T> {
    pub grid: BoundaryGrid<T>,
    pub matrix: CMatrix<T>,
    pub k: T,
}

impl<T: Real> NystromOperator<T> {
    pub fn assemble(config: &ScatteringConfig<T>, curve: &BoundaryCurve<T>, n: usize) -> Result<Self> {
        let weights = kress_log_weights::<T>(n)?;
        let grid = BoundaryGrid::new(curve, n);
        Ok(Self::from_grid(config.k, grid, &weights))
    }

    /// Assembles on an existing grid with precomputed log weights.
    pub fn from_grid(k: T, grid: BoundaryGrid<T>, weights: &[T]) -> Self {
        let n = grid.len();
        let mut matrix = CMatrix::zeros(n, n);
        let rows: Vec<Vec<Complex<T>>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut row = vec![Complex::zero(); n];
                nystrom_row(k, &grid, weights, p, &mut row);
                row
            })
            .collect();
        for (p, row) in rows.into_iter().enumerate() {
            matrix.row_mut(p).copy_from_slice(&row);
        }
        Self { grid, matrix, k }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `W · B` for a matrix of column vectors sampled on the grid.
    pub fn apply(&self, b: &CMatrix<T>) -> CMatrix<T> {
        self.matrix.matmul(b)
    }
}

/// Surface current sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct DensityGrid<T> {
    pub s: Vec<T>,
    pub values: Vec<Complex<T>>,
    pub k: T,
    pub length: T,
    /// Condition estimate of the dense system that produced the values.
    pub condition: T,
    interp: TrigInterpolant<T>,
}

impl<T: Real> DensityGrid<T> {
    pub fn new(s: Vec<T>, values: Vec<Complex<T>>, k: T, length: T, condition: T) -> Result<Self> {
        if values.len() % 2 != 0 || values.len() < 2 || s.len() != values.len() {
            return Err(Error::InvalidParameter("density grid needs an even number of nodes".into()));
        }
        let interp = TrigInterpolant::new(&values, length);
        Ok(Self { s, values, k, length, condition, interp })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with header `s,re_eta,im_eta` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "s,re_eta,im_eta")?;
        for (s, v) in self.s.iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", s, v.re, v.im)?;
        }
        Ok(())
    }
}

impl<T: Real> DensityField<T> for DensityGrid<T> {
    fn density(&self, s: T) -> Complex<T> {
        self.interp.eval(s)
    }
}

/// Trigonometric interpolant of uniformly sampled periodic data.
#[derive(Debug, Clone)]
pub struct TrigInterpolant<T> {
    coeffs: Vec<Complex<T>>,
    length: T,
}

impl<T: Real> TrigInterpolant<T> {
    /// Samples at `s_j = j L / N`, `N` even.
    pub fn new(values: &[Complex<T>], length: T) -> Self {
        let n = values.len();
        let nf = T::from_usize_lossy(n);
        let table: Vec<Complex<T>> =
            (0..n).map(|j| cis(-T::TAU() * T::from_usize_lossy(j) / nf)).collect();
        // coefficient index m ↦ mode m for m ≤ N/2, m − N above.
        let coeffs: Vec<Complex<T>> = (0..n)
            .into_par_iter()
            .map(|m| {
                let mut acc = Complex::zero();
                for (j, v) in values.iter().enumerate() {
                    acc += *v * table[(j * m) % n];
                }
                acc / nf
            })
            .collect();
        Self { coeffs, length }
    }

    pub fn eval(&self, s: T) -> Complex<T> {
        let n = self.coeffs.len();
        let tau = T::TAU() * s / self.length;
        let half = n / 2;
        let mut acc = self.coeffs[0];
        let step = cis(tau);
        let mut e = step;
        for m in 1..half {
            acc += self.coeffs[m] * e + self.coeffs[n - m] * e.conj();
            e = e * step;
        }
        // Nyquist mode as a cosine keeps real data real.
        acc + self.coeffs[half] * (T::from_usize_lossy(half) * tau).cos()
    }
}

/// Solves the CFIE on `n` uniform nodes with the Nyström method.
pub fn nystrom_solve<T: Real>(config: &ScatteringConfig<T>, curve: &BoundaryCurve<T>, n: usize) -> Result<DensityGrid<T>> {
    let op = NystromOperator::assemble(config, curve, n)?;
    nystrom_solve_with(config, &op)
}

/// Nyström solve reusing an assembled operator.
pub fn nystrom_solve_with<T: Real>(config: &ScatteringConfig<T>, op: &NystromOperator<T>) -> Result<DensityGrid<T>> {
    let n = op.len();
    let mut a = op.matrix.clone();
    for i in 0..n {
        a[(i, i)] += Complex::new(T::lit(0.5), T::zero());
    }
    let rhs: Vec<Complex<T>> = op.grid.points.iter().map(|p| incident_rhs_at(config, p)).collect();
    let lu = Lu::factor(a).map_err(|e| match e {
        Error::Singular { pivot } => Error::Singular { pivot },
        other => other,
    })?;
    let condition = lu.condition_estimate();
    if !(condition < T::lit(1e14)) {
        return Err(Error::IllConditioned { condition: condition.to_f64_lossy() });
    }
    let eta = lu.solve(&rhs);
    DensityGrid::new(op.grid.s.clone(), eta, config.k, op.grid.length, condition)
}

/// Node count for a target density in points per wavelength, rounded up to
/// an even number.
pub fn nodes_for_ppw<T: Real>(config: &ScatteringConfig<T>, ppw: T) -> usize {
    let n = (config.wavelengths() * ppw).ceil().to_usize().unwrap_or(4).max(4);
    n + (n & 1)
}

/// Exact surface current on a sound-soft circle of radius `a`:
///
/// `η(θ) = −(2i/(πa)) Σ_n iⁿ e^{in(θ−θ_α)} / H_n(ka)`.
#[derive(Debug, Clone)]
pub struct CircleSeries<T> {
    radius: T,
    theta_alpha: T,
    /// `iⁿ / H_n(ka)` for `n = 0..n_terms`.
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> CircleSeries<T> {
    pub fn new(k: T, radius: T, alpha: crate::Vec2<T>, n_terms: usize) -> Result<Self> {
        if !(k > T::zero() && radius > T::zero()) {
            return Err(Error::InvalidParameter("circle series needs k > 0 and a > 0".into()));
        }
        let h = hankel1_seq(n_terms, k * radius)?;
        if let Some(order) = h.saturated_from {
            return Err(Error::Truncation { order, requested: n_terms });
        }
        let i = Complex::new(T::zero(), T::one());
        let mut ipow = Complex::new(T::one(), T::zero());
        let mut coeffs = Vec::with_capacity(n_terms + 1);
        for hn in &h.values {
            coeffs.push(ipow / *hn);
            ipow = ipow * i;
        }
        Ok(Self { radius, theta_alpha: alpha.y.atan2(alpha.x), coeffs })
    }

    /// Series with the default truncation `ceil(ka) + 40`.
    pub fn with_default_terms(k: T, radius: T, alpha: crate::Vec2<T>) -> Result<Self> {
        let n = (k * radius).ceil().to_usize().unwrap_or(0) + 40;
        Self::new(k, radius, alpha, n)
    }

    /// Density at polar angle `theta`.
    pub fn at_angle(&self, theta: T) -> Complex<T> {
        let psi = theta - self.theta_alpha;
        let mut acc = self.coeffs[0];
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += *c * (T::lit(2.0) * (T::from_usize_lossy(n) * psi).cos());
        }
        acc * Complex::new(T::zero(), -T::lit(2.0) / (T::PI() * self.radius))
    }
}

/// Density on an arc-length parameterized circle anchored at the shadow pole:
/// `θ = θ_α + s / a`.
impl<T: Real> DensityField<T> for CircleSeries<T> {
    fn density(&self, s: T) -> Complex<T> {
        self.at_angle(self.theta_alpha + s / self.radius)
    }
}

pub fn circle_series_density<T: Real>(k: T, radius: T, alpha: crate::Vec2<T>, theta: T, n_terms: usize) -> Result<Complex<T>> {
    Ok(CircleSeries::new(k, radius, alpha, n_terms)?.at_angle(theta))
}

/// Relative ℓ² distance between grid values and a field sampled at the nodes.
pub fn grid_discrepancy<T: Real, F: DensityField<T>>(grid: &DensityGrid<T>, reference: &F) -> T {
    let diff: Vec<Complex<T>> = grid.s.iter().zip(&grid.values).map(|(s, v)| *v - reference.density(*s)).collect();
    let refv: Vec<Complex<T>> = grid.s.iter().map(|s| reference.density(*s)).collect();
    vec_norm2(&diff) / vec_norm2(&refv)
}
