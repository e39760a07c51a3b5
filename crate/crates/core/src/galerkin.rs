//! Galerkin systems `M c = F` with `M[i][j] = ⟨b_i, (½I + D − ikS) b_j⟩` and
//! `F[i] = ⟨b_i, f_k⟩`, their solution, and relative error norms.
//!
//! All integrals use one uniform arc-length grid: the inner (operator)
//! integrals use the log-split Nyström rule and the outer integrals the
//! trapezoidal rule on the same nodes. With smooth windows every integrand
//! is smooth and periodic, so both rules converge spectrally; and because
//! the same nodes are used throughout, the discrete system is exactly the
//! Galerkin projection of the Nyström system onto the sampled basis.

use std::io::{self, Write};

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, CurveKind, ScatteringConfig};
use crate::hfspaces::GalerkinSpace;
use crate::linalg::{vec_norm2, CMatrix, Lu};
use crate::operators::{
    incident_rhs_at, kress_log_weights, nodes_for_ppw, nystrom_row, nystrom_solve, BoundaryGrid, CircleSeries,
    DensityField, DensityGrid, NystromOperator,
};
use crate::scalar::{cis, Real, Vec2};

/// Quadrature density below which assembly refuses to run.
pub const MIN_PPW: f64 = 6.0;

/// Condition estimate above which a solution is flagged.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings<T> {
    /// Grid points per wavelength.
    pub ppw: T,
    /// Lower bound on grid points across the narrowest window blend.
    pub min_nodes_per_blend: usize,
    pub min_nodes: usize,
}

impl<T: Real> Default for QuadratureSettings<T> {
    fn default() -> Self {
        Self { ppw: T::lit(12.0), min_nodes_per_blend: 24, min_nodes: 64 }
    }
}

impl<T: Real> QuadratureSettings<T> {
    pub fn with_ppw(ppw: T) -> Self {
        Self { ppw, ..Self::default() }
    }

    /// Grid size for `config`, refined so that the blends of `space` (if
    /// given) get at least `min_nodes_per_blend` nodes.
    pub fn nodes(&self, config: &ScatteringConfig<T>, space: Option<&GalerkinSpace<T>>) -> Result<usize> {
        if !(self.ppw >= T::lit(MIN_PPW)) {
            return Err(Error::Resolution { ppw: self.ppw.to_f64_lossy(), min: MIN_PPW });
        }
        let mut n = nodes_for_ppw(config, self.ppw).max(self.min_nodes);
        if let Some(sp) = space {
            if !sp.pou.is_indicator() {
                let w = sp.pou.min_blend_width();
                let need = (config.length / w * T::from_usize_lossy(self.min_nodes_per_blend)).ceil();
                n = n.max(need.to_usize().unwrap_or(usize::MAX));
            }
        }
        Ok(n + (n & 1))
    }
}

/// Shared state for assembling many spaces at one wavenumber: the grid, its
/// log-quadrature weights, incident data and optionally the dense Nyström
/// matrix.
#[derive(Debug, Clone)]
pub struct GalerkinAssembler<T> {
    pub config: ScatteringConfig<T>,
    curve: BoundaryCurve<T>,
    grid: BoundaryGrid<T>,
    weights: Vec<T>,
    rhs: Vec<Complex<T>>,
    dense: Option<CMatrix<T>>,
}

impl<T: Real> GalerkinAssembler<T> {
    pub fn new(
        config: &ScatteringConfig<T>,
        curve: &BoundaryCurve<T>,
        settings: &QuadratureSettings<T>,
        space_hint: Option<&GalerkinSpace<T>>,
    ) -> Result<Self> {
        let n = settings.nodes(config, space_hint)?;
        Self::with_nodes(config, curve, n)
    }

    pub fn with_nodes(config: &ScatteringConfig<T>, curve: &BoundaryCurve<T>, n: usize) -> Result<Self> {
        let weights = kress_log_weights::<T>(n)?;
        let grid = BoundaryGrid::new(curve, n);
        let rhs = grid.points.iter().map(|p| incident_rhs_at(config, p)).collect();
        Ok(Self { config: *config, curve: curve.clone(), grid, weights, rhs, dense: None })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &BoundaryGrid<T> {
        &self.grid
    }

    pub fn curve(&self) -> &BoundaryCurve<T> {
        &self.curve
    }

    pub fn ppw(&self) -> T {
        T::from_usize_lossy(self.nodes()) / self.config.wavelengths()
    }

    /// Stores the dense Nyström matrix so repeated assemblies skip kernel
    /// evaluation (`16 N²` bytes).
    pub fn cache_operator(&mut self) {
        if self.dense.is_none() {
            let op = NystromOperator::from_grid(self.config.k, self.grid.clone(), &self.weights);
            self.dense = Some(op.matrix);
        }
    }

    pub fn is_cached(&self) -> bool {
        self.dense.is_some()
    }

    /// Basis functions sampled on the grid, `N × dim`.
    pub fn sample(&self, space: &GalerkinSpace<T>) -> CMatrix<T> {
        let n = self.nodes();
        let mut b = CMatrix::zeros(n, space.dim());
        let k = self.config.k;
        let alpha = space.alpha();
        let mut vals = vec![Complex::zero(); space.degrees.iter().max().unwrap() + 1];
        for q in 0..n {
            let s = self.grid.s[q];
            let phase = cis(k * alpha.dot(self.grid.points[q].pos));
            let (entries, cnt) = space.pou.weights_sparse(&space.partition, s);
            for &(j, w) in &entries[..cnt] {
                if w == T::zero() {
                    continue;
                }
                let su = space.in_support(j, s).unwrap_or_else(|| space.partition.intervals[j].unroll(s, self.grid.length));
                let d = space.degrees[j];
                space.local_values(j, su, &mut vals);
                let off = space.offset(j);
                let row = b.row_mut(q);
                for r in 0..=d {
                    row[off + r] = vals[r] * phase * w;
                }
            }
        }
        b
    }

    /// `W · B` exploiting that each interval's columns vanish off its support.
    fn apply_operator(&self, space: &GalerkinSpace<T>, b: &CMatrix<T>) -> CMatrix<T> {
        let n = self.nodes();
        let dim = space.dim();
        let blocks: Vec<(usize, usize, Vec<usize>)> = (0..space.partition.len())
            .map(|j| {
                let off = space.offset(j);
                let width = space.degrees[j] + 1;
                let nz = (0..n).filter(|&q| b.row(q)[off..off + width].iter().any(|v| !v.is_zero())).collect();
                (off, width, nz)
            })
            .collect();
        let rows: Vec<Vec<Complex<T>>> = (0..n)
            .into_par_iter()
            .map_init(
                || vec![Complex::zero(); if self.dense.is_some() { 0 } else { n }],
                |buf, p| {
                    let wrow: &[Complex<T>] = match &self.dense {
                        Some(m) => m.row(p),
                        None => {
                            nystrom_row(self.config.k, &self.grid, &self.weights, p, buf);
                            buf
                        }
                    };
                    let mut out = vec![Complex::zero(); dim];
                    for (off, width, nz) in &blocks {
                        let acc = &mut out[*off..*off + *width];
                        for &q in nz {
                            let w = wrow[q];
                            for (a, v) in acc.iter_mut().zip(&b.row(q)[*off..*off + *width]) {
                                *a += w * *v;
                            }
                        }
                    }
                    out
                },
            )
            .collect();
        CMatrix::from_rows(n, dim, rows.into_iter().flatten().collect())
    }

    pub fn assemble(&self, space: &GalerkinSpace<T>) -> Result<GalerkinSystem<T>> {
        if !(self.ppw() >= T::lit(MIN_PPW)) {
            return Err(Error::Resolution { ppw: self.ppw().to_f64_lossy(), min: MIN_PPW });
        }
        let h = self.grid.spacing();
        let b = self.sample(space);
        let wb = self.apply_operator(space, &b);
        let mut identity = b.adjoint_mul(&b);
        identity.scale(h * T::lit(0.5));
        let mut operator = b.adjoint_mul(&wb);
        operator.scale(h);
        let f = CMatrix::from_rows(self.nodes(), 1, self.rhs.clone());
        let rhs: Vec<Complex<T>> = b.adjoint_mul(&f).as_slice().iter().map(|v| *v * h).collect();
        Ok(GalerkinSystem { identity, operator, rhs, space: space.clone(), curve: self.curve.clone() })
    }
}

/// One-shot assembly.
pub fn assemble<T: Real>(
    space: &GalerkinSpace<T>,
    config: &ScatteringConfig<T>,
    curve: &BoundaryCurve<T>,
    settings: &QuadratureSettings<T>,
) -> Result<GalerkinSystem<T>> {
    GalerkinAssembler::new(config, curve, settings, Some(space))?.assemble(space)
}

/// `M = identity + operator` with the `½I` and `D − ikS` parts kept apart.
#[derive(Debug, Clone)]
pub struct GalerkinSystem<T> {
    pub identity: CMatrix<T>,
    pub operator: CMatrix<T>,
    pub rhs: Vec<Complex<T>>,
    pub space: GalerkinSpace<T>,
    curve: BoundaryCurve<T>,
}

impl<T: Real> GalerkinSystem<T> {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn matrix(&self) -> CMatrix<T> {
        let mut m = self.operator.clone();
        for i in 0..m.rows() {
            for (a, b) in m.row_mut(i).iter_mut().zip(self.identity.row(i)) {
                *a += *b;
            }
        }
        m
    }

    /// The system of the nested sub-space with per-interval degrees `sub`.
    pub fn restrict(&self, sub: &[usize]) -> Result<Self> {
        let idx = self.space.sub_indices(sub)?;
        Ok(Self {
            identity: self.identity.select(&idx, &idx),
            operator: self.operator.select(&idx, &idx),
            rhs: idx.iter().map(|&i| self.rhs[i]).collect(),
            space: self.space.with_degrees(sub)?,
            curve: self.curve.clone(),
        })
    }

    /// `i, j, re, im` for every matrix entry, then `i, rhs, re, im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = self.matrix();
        writeln!(w, "i,j,re,im")?;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m[(i, j)];
                writeln!(w, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
            }
        }
        for (i, v) in self.rhs.iter().enumerate() {
            writeln!(w, "{i},rhs,{:.16e},{:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Result of a dense solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve<T> {
    pub x: Vec<Complex<T>>,
    /// `‖Mx − F‖ / ‖F‖`.
    pub residual: T,
    pub condition: T,
}

impl<T: Real> LinearSolve<T> {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= T::lit(CONDITION_WARNING))
    }
}

/// LU solve with one step of iterative refinement when the residual exceeds
/// `1e−10`.
pub fn solve_dense<T: Real>(m: &CMatrix<T>, f: &[Complex<T>]) -> Result<LinearSolve<T>> {
    let lu = Lu::factor(m.clone())?;
    let mut x = lu.solve(f);
    let fnorm = vec_norm2(f);
    let resid = |x: &[Complex<T>]| -> Vec<Complex<T>> { m.mul_vec(x).iter().zip(f).map(|(a, b)| *a - *b).collect() };
    let mut r = resid(&x);
    let scale = if fnorm > T::zero() { fnorm } else { T::one() };
    if vec_norm2(&r) / scale > T::lit(1e-10) {
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= *di;
        }
        r = resid(&x);
    }
    let residual = vec_norm2(&r) / scale;
    Ok(LinearSolve { x, residual, condition: lu.condition_estimate() })
}

/// Solves the Galerkin system.
pub fn solve<T: Real>(system: &GalerkinSystem<T>) -> Result<DensitySolution<T>> {
    let ls = solve_dense(&system.matrix(), &system.rhs)?;
    Ok(DensitySolution {
        space: system.space.clone(),
        curve: system.curve.clone(),
        coeffs: ls.x.clone(),
        residual: ls.residual,
        condition: ls.condition,
    })
}

/// `η̂ = Σ c_i b_i`.
#[derive(Debug, Clone)]
pub struct DensitySolution<T> {
    pub space: GalerkinSpace<T>,
    curve: BoundaryCurve<T>,
    pub coeffs: Vec<Complex<T>>,
    pub residual: T,
    pub condition: T,
}

impl<T: Real> DensitySolution<T> {
    /// An expansion with given coefficients (no solve attached).
    pub fn from_coefficients(space: GalerkinSpace<T>, curve: BoundaryCurve<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::InvalidParameter(format!("{} coefficients for a space of dimension {}", coeffs.len(), space.dim())));
        }
        Ok(Self { space, curve, coeffs, residual: T::zero(), condition: T::one() })
    }

    /// Condition estimate above [`CONDITION_WARNING`].
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= T::lit(CONDITION_WARNING))
    }

    /// `η̂(s)` given the boundary point `pos = γ(s)`.
    pub fn eval_at(&self, s: T, pos: Vec2<T>) -> Complex<T> {
        let sp = &self.space;
        let (entries, cnt) = sp.pou.weights_sparse(&sp.partition, s);
        let mut vals = vec![Complex::zero(); sp.degrees.iter().max().unwrap() + 1];
        let mut acc: Complex<T> = Complex::zero();
        for &(j, w) in &entries[..cnt] {
            if w == T::zero() {
                continue;
            }
            let su = sp.in_support(j, s).unwrap_or_else(|| sp.partition.intervals[j].unroll(s, sp.partition.length));
            sp.local_values(j, su, &mut vals);
            let off = sp.offset(j);
            let mut local: Complex<T> = Complex::zero();
            for r in 0..=sp.degrees[j] {
                local += self.coeffs[off + r] * vals[r];
            }
            acc += local * w;
        }
        acc * cis(sp.k() * sp.alpha().dot(pos))
    }

    pub fn write_coefficients<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,interval,r,re,im")?;
        let sp = &self.space;
        for j in 0..sp.partition.len() {
            for r in 0..=sp.degrees[j] {
                let i = sp.offset(j) + r;
                let c = self.coeffs[i];
                writeln!(w, "{i},{},{r},{:.16e},{:.16e}", sp.partition.intervals[j].label(), c.re, c.im)?;
            }
        }
        Ok(())
    }
}

impl<T: Real> DensityField<T> for DensitySolution<T> {
    fn density(&self, s: T) -> Complex<T> {
        self.eval_at(s, self.curve.position(s))
    }
}

/// Exact or Nyström reference density.
#[derive(Debug, Clone)]
pub enum Reference<T> {
    Series(CircleSeries<T>),
    Nystrom(DensityGrid<T>),
}

impl<T: Real> Reference<T> {
    /// Circle series for circles, otherwise a Nyström solve at `ppw` points
    /// per wavelength (at least 256 nodes).
    pub fn for_curve(curve: &BoundaryCurve<T>, config: &ScatteringConfig<T>, ppw: T) -> Result<Self> {
        if let CurveKind::Circle { radius } = curve.raw().kind() {
            return Ok(Reference::Series(CircleSeries::with_default_terms(config.k, *radius, config.alpha)?));
        }
        Self::nystrom(curve, config, ppw)
    }

    pub fn nystrom(curve: &BoundaryCurve<T>, config: &ScatteringConfig<T>, ppw: T) -> Result<Self> {
        let n = nodes_for_ppw(config, ppw).max(256);
        Ok(Reference::Nystrom(nystrom_solve(config, curve, n)?))
    }

    pub fn describe(&self) -> String {
        match self {
            Reference::Series(_) => "circle series".to_string(),
            Reference::Nystrom(g) => format!("Nyström, {} nodes", g.len()),
        }
    }
}

impl<T: Real> DensityField<T> for Reference<T> {
    fn density(&self, s: T) -> Complex<T> {
        match self {
            Reference::Series(c) => c.density(s),
            Reference::Nystrom(g) => g.density(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Whole,
    /// `s ∈ (t2, t1 + L)`.
    Shadow,
}

/// Uniform fine grid with cached reference values for repeated error
/// measurements.
#[derive(Debug, Clone)]
pub struct ErrorGrid<T> {
    pub s: Vec<T>,
    pub pos: Vec<Vec2<T>>,
    pub reference: Vec<Complex<T>>,
    config: ScatteringConfig<T>,
}

/// Minimum density of the error grid.
pub const ERROR_GRID_PPW: f64 = 20.0;

impl<T: Real> ErrorGrid<T> {
    pub fn new<F: DensityField<T> + Sync>(curve: &BoundaryCurve<T>, config: &ScatteringConfig<T>, reference: &F) -> Self {
        let n = nodes_for_ppw(config, T::lit(ERROR_GRID_PPW)).max(1024);
        Self::with_nodes(curve, config, reference, n)
    }

    pub fn with_nodes<F: DensityField<T> + Sync>(
        curve: &BoundaryCurve<T>,
        config: &ScatteringConfig<T>,
        reference: &F,
        n: usize,
    ) -> Self {
        let (s, pts): (Vec<T>, Vec<_>) = curve.sample(n).into_iter().unzip();
        let pos = pts.iter().map(|p| p.pos).collect();
        let reference = s.par_iter().map(|&x| reference.density(x)).collect();
        Self { s, pos, reference, config: *config }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn sample(&self, sol: &DensitySolution<T>) -> Vec<Complex<T>> {
        self.s.par_iter().zip(&self.pos).map(|(&s, &p)| sol.eval_at(s, p)).collect()
    }

    pub fn sample_field<F: DensityField<T> + Sync>(&self, f: &F) -> Vec<Complex<T>> {
        self.s.par_iter().map(|&s| f.density(s)).collect()
    }

    /// `‖η̂ − η‖ / ‖η‖` over the nodes selected by `mask`.
    pub fn relative_error_masked(&self, approx: &[Complex<T>], mask: impl Fn(T) -> bool, what: &str) -> Result<T> {
        let (mut num, mut den) = (T::zero(), T::zero());
        for ((&s, a), r) in self.s.iter().zip(approx).zip(&self.reference) {
            if mask(s) {
                num += (*a - *r).norm_sqr();
                den += r.norm_sqr();
            }
        }
        if !(den > T::zero()) {
            return Err(Error::DegenerateReference(what.to_string()));
        }
        Ok((num / den).sqrt())
    }

    pub fn relative_error(&self, approx: &[Complex<T>], region: Region) -> Result<T> {
        match region {
            Region::Whole => self.relative_error_masked(approx, |_| true, "whole boundary"),
            Region::Shadow => self.relative_error_masked(approx, |s| self.config.in_shadow(s), "shadow"),
        }
    }

    pub fn error_of(&self, sol: &DensitySolution<T>, region: Region) -> Result<T> {
        self.relative_error(&self.sample(sol), region)
    }
}

/// Relative L² error of `approx` against `reference` over `region`, on a
/// uniform grid of at least 20 points per wavelength.
pub fn relative_l2_error<T, A, R>(
    approx: &A,
    reference: &R,
    curve: &BoundaryCurve<T>,
    config: &ScatteringConfig<T>,
    region: Region,
) -> Result<T>
where
    T: Real,
    A: DensityField<T> + Sync,
    R: DensityField<T> + Sync,
{
    let grid = ErrorGrid::new(curve, config, reference);
    grid.relative_error(&grid.sample_field(approx), region)
}

/// One cell of a degree sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T> {
    pub k: T,
    pub degree: usize,
    pub dof: usize,
    pub global_err: T,
    pub shadow_err: T,
    /// Solve time plus this cell's share of the assembly.
    pub wall_seconds: f64,
}

/// Errors for each uniform degree in `degrees`: the system is assembled once
/// at the largest degree and restricted, which is exact because the bases
/// are nested.
pub fn degree_sweep<T: Real>(
    space: &GalerkinSpace<T>,
    assembler: &GalerkinAssembler<T>,
    grid: &ErrorGrid<T>,
    degrees: &[usize],
) -> Result<Vec<SweepRow<T>>> {
    let Some(&dmax) = degrees.iter().max() else { return Ok(Vec::new()) };
    let n = space.partition.len();
    let start = std::time::Instant::now();
    let full = assembler.assemble(&space.with_degrees(&vec![dmax; n])?)?;
    let share = start.elapsed().as_secs_f64() / degrees.len() as f64;
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .into_iter()
        .map(|d| {
            let t = std::time::Instant::now();
            let sol = solve(&full.restrict(&vec![d; n])?)?;
            let vals = grid.sample(&sol);
            Ok(SweepRow {
                k: assembler.config.k,
                degree: d,
                dof: sol.coeffs.len(),
                global_err: grid.relative_error(&vals, Region::Whole)?,
                shadow_err: grid.relative_error(&vals, Region::Shadow)?,
                wall_seconds: share + t.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_curve;
    use crate::hfspaces::{build_cov_partition, CovParams, Family, Window};

    fn circle_setup(k: f64) -> (BoundaryCurve<f64>, ScatteringConfig<f64>) {
        let c = make_curve(CurveKind::Circle { radius: 1.0 }).unwrap().arc_length_reparam(Vec2::new(1.0, 0.0)).unwrap();
        let cfg = ScatteringConfig::new(&c, k).unwrap();
        (c, cfg)
    }

    fn space(cfg: &ScatteringConfig<f64>, c: &BoundaryCurve<f64>, d: usize, window: Window<f64>) -> GalerkinSpace<f64> {
        let p = CovParams::initial(c, cfg, 6).unwrap();
        let part = build_cov_partition(cfg, &p, 6).unwrap();
        GalerkinSpace::new(part, Family::Algebraic, &[d], window, cfg.alpha).unwrap()
    }

    #[test]
    fn identity_system_solves_to_unit_vector() {
        let m = CMatrix::<f64>::identity(4);
        let mut f = vec![Complex::zero(); 4];
        f[0] = Complex::new(1.0, 0.0);
        let ls = solve_dense(&m, &f).unwrap();
        assert_eq!(ls.x, f);
        assert!(ls.residual <= 1e-15);
    }

    #[test]
    fn scaling_invariance() {
        let (c, cfg) = circle_setup(5.0);
        let sp = space(&cfg, &c, 3, Window::default());
        let sys = assemble(&sp, &cfg, &c, &QuadratureSettings::default()).unwrap();
        let m = sys.matrix();
        let a = solve_dense(&m, &sys.rhs).unwrap();
        let mut m10 = m.clone();
        m10.scale(10.0);
        let f10: Vec<_> = sys.rhs.iter().map(|v| *v * 10.0).collect();
        let b = solve_dense(&m10, &f10).unwrap();
        assert!(vec_norm2(&a.x.iter().zip(&b.x).map(|(x, y)| x - y).collect::<Vec<_>>()) <= 1e-9 * vec_norm2(&a.x));
        assert!(a.residual <= 1e-10);
    }

    #[test]
    fn refuses_under_resolved_quadrature() {
        let (c, cfg) = circle_setup(20.0);
        let sp = space(&cfg, &c, 2, Window::default());
        let err = assemble(&sp, &cfg, &c, &QuadratureSettings::with_ppw(5.0)).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn identity_part_disjoint_and_diagonal() {
        let (c, cfg) = circle_setup(5.0);
        let sp = space(&cfg, &c, 0, Window::Indicator);
        let asm = GalerkinAssembler::new(&cfg, &c, &QuadratureSettings::default(), Some(&sp)).unwrap();
        let sys = asm.assemble(&sp).unwrap();
        // IT1 (0) and IT2 (1) do not touch in the J = 6 layout? They do; IT1 and ST2 (3) do not.
        assert_eq!(sys.identity[(0, 3)], Complex::zero());
        let h = asm.grid().spacing();
        for j in 0..6 {
            let w = sp.partition.intervals[j].width();
            assert!((sys.identity[(j, j)].re - 0.5 * w).abs() <= 0.5 * h + 1e-14, "j={j}");
            assert!(sys.identity[(j, j)].im.abs() < 1e-15);
        }
    }

    #[test]
    fn relative_error_trivial_cases() {
        let (c, cfg) = circle_setup(10.0);
        let series = CircleSeries::with_default_terms(10.0, 1.0, cfg.alpha).unwrap();
        let grid = ErrorGrid::new(&c, &cfg, &series);
        let same = grid.reference.clone();
        let twice: Vec<_> = same.iter().map(|v| *v * 2.0).collect();
        let zero = vec![Complex::zero(); grid.len()];
        for region in [Region::Whole, Region::Shadow] {
            assert_eq!(grid.relative_error(&same, region).unwrap(), 0.0);
            assert!((grid.relative_error(&twice, region).unwrap() - 1.0).abs() < 1e-14);
            assert!((grid.relative_error(&zero, region).unwrap() - 1.0).abs() < 1e-14);
        }
        let blank = ErrorGrid { reference: zero.clone(), ..grid.clone() };
        assert!(matches!(blank.relative_error(&zero, Region::Whole), Err(Error::DegenerateReference(_))));
    }

    #[test]
    fn restriction_matches_direct_assembly() {
        let (c, cfg) = circle_setup(8.0);
        let big = space(&cfg, &c, 4, Window::default());
        let small = big.with_degrees(&[2]).unwrap();
        let asm = GalerkinAssembler::new(&cfg, &c, &QuadratureSettings::default(), Some(&big)).unwrap();
        let a = asm.assemble(&big).unwrap().restrict(&[2]).unwrap();
        let b = asm.assemble(&small).unwrap();
        let (ma, mb) = (a.matrix(), b.matrix());
        for i in 0..ma.rows() {
            for j in 0..ma.cols() {
                assert!((ma[(i, j)] - mb[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn solution_evaluation_matches_basis_sum() {
        let (c, cfg) = circle_setup(6.0);
        let sp = space(&cfg, &c, 3, Window::default());
        let sys = assemble(&sp, &cfg, &c, &QuadratureSettings::default()).unwrap();
        let sol = solve(&sys).unwrap();
        for s in [0.05, 1.0, 1.6, 3.0, 4.7, 6.2] {
            let mut direct: Complex<f64> = Complex::zero();
            for j in 0..sp.partition.len() {
                for r in 0..=sp.degrees[j] {
                    direct += sol.coeffs[sp.offset(j) + r] * sp.basis_eval(&c, j, r, s);
                }
            }
            assert!((direct - sol.density(s)).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }
}
