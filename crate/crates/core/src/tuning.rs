//! Coordinate-descent tuning of the partition parameters at a small
//! wavenumber.
//!
//! Each parameter is swept in fixed increments while the error on its own
//! neighbourhood (relative L², against a reference) keeps decreasing; a move
//! is accepted only if the global error does not increase either, so the
//! global objective is monotone over the history. Rounds repeat with halved
//! increments until the global error stabilises.

use std::io::{self, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::galerkin::{solve, ErrorGrid, GalerkinAssembler, QuadratureSettings};
use crate::geometry::{BoundaryCurve, ScatteringConfig};
use crate::hfspaces::{
    CovParams, GalerkinSpace, Layout, Param, PouShape, RegionPartition, RegionTag, SpaceTemplate, Window,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningSettings<T> {
    pub max_rounds: usize,
    /// Stop once the relative change of the global error over a round is
    /// below this.
    pub stabilization: T,
    /// First-round increment as a fraction of each parameter's range.
    pub initial_fraction: T,
    /// Maximum accepted moves per parameter per round.
    pub max_moves: usize,
    /// Also sweep the window overlap and steepness.
    pub tune_window: bool,
    pub quadrature: QuadratureSettings<T>,
}

impl<T: Real> Default for TuningSettings<T> {
    fn default() -> Self {
        Self {
            max_rounds: 6,
            stabilization: T::lit(0.02),
            initial_fraction: T::lit(0.1),
            max_moves: 8,
            tune_window: false,
            quadrature: QuadratureSettings::default(),
        }
    }
}

/// A tunable quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    Param(Param),
    Overlap,
    Steepness,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::Param(p) => p.name(),
            Knob::Overlap => "overlap",
            Knob::Steepness => "steepness",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow<T> {
    /// 0 for the initial state.
    pub round: usize,
    pub param: String,
    pub value: T,
    pub local_err: T,
    pub global_err: T,
}

/// Parameters, increments and objective history.
#[derive(Debug, Clone)]
pub struct TuningState<T> {
    pub params: CovParams<T>,
    pub window: Window<T>,
    /// Current increment per knob (arc-length units for parameters).
    pub steps: Vec<(Knob, T)>,
    pub history: Vec<HistoryRow<T>>,
    pub rounds: usize,
    pub global_err: T,
    /// Candidates rejected because the partition was infeasible or the
    /// solve failed.
    pub rejected: usize,
}

impl<T: Real> TuningState<T> {
    pub fn initial_error(&self) -> T {
        self.history.first().map(|r| r.global_err).unwrap_or(self.global_err)
    }

    pub fn write_history<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "round,param_name,value,local_err,global_err")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e}",
                r.round,
                r.param,
                r.value.to_f64_lossy(),
                r.local_err.to_f64_lossy(),
                r.global_err.to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Sweep order for a layout: each knob with the regions its local error is
/// measured on.
pub fn schedule<T>(layout: &Layout<T>) -> Vec<(Param, Vec<RegionTag>)> {
    use RegionTag::*;
    let mut out = vec![(Param::Xi1, vec![It1, Sb1]), (Param::Xi2, vec![It2, Sb2])];
    let lit = vec![Il, It1, It2, Sb1, Sb2];
    let shadow = vec![Ds, St1, St2, Sb1, Sb2];
    match layout {
        Layout::Cov { j: 6 } => out.push((Param::Xi1p, lit)),
        Layout::Cov { .. } => {
            out.push((Param::Xi1p, lit.clone()));
            out.push((Param::Xi2p, lit));
        }
        Layout::FreqAdapted { .. } => {}
    }
    out.push((Param::Zeta1, vec![St1, Sb1]));
    out.push((Param::Zeta2, vec![St2, Sb2]));
    match layout {
        Layout::Cov { j: 6 } => out.push((Param::Zeta1p, shadow)),
        Layout::Cov { .. } => {
            out.push((Param::Zeta1p, shadow.clone()));
            out.push((Param::Zeta2p, shadow));
        }
        Layout::FreqAdapted { .. } => {}
    }
    out
}

struct Evaluation<T> {
    params: CovParams<T>,
    window: Window<T>,
    partition: RegionPartition<T>,
    values: Vec<Complex<T>>,
    global: T,
}

struct Tuner<'a, T> {
    config: &'a ScatteringConfig<T>,
    curve: &'a BoundaryCurve<T>,
    template: &'a SpaceTemplate<T>,
    grid: &'a ErrorGrid<T>,
    settings: &'a TuningSettings<T>,
    assembler: Option<GalerkinAssembler<T>>,
}

impl<T: Real> Tuner<'_, T> {
    fn space(&self, params: &CovParams<T>, window: Window<T>) -> Result<GalerkinSpace<T>> {
        SpaceTemplate { window, ..self.template.clone() }.build(self.config, params)
    }

    fn evaluate(&mut self, params: CovParams<T>, window: Window<T>) -> Result<Evaluation<T>> {
        let space = self.space(&params, window)?;
        let need = self.settings.quadrature.nodes(self.config, Some(&space))?;
        if self.assembler.as_ref().map_or(true, |a| a.nodes() < need) {
            let mut a = GalerkinAssembler::with_nodes(self.config, self.curve, need)?;
            a.cache_operator();
            self.assembler = Some(a);
        }
        let sol = solve(&self.assembler.as_ref().unwrap().assemble(&space)?)?;
        let values = self.grid.sample(&sol);
        let global = self.grid.relative_error(&values, crate::galerkin::Region::Whole)?;
        if !global.is_finite() {
            return Err(Error::Consistency(format!("non-finite objective at {params:?}")));
        }
        Ok(Evaluation { params, window, partition: space.partition, values, global })
    }

    /// Errors of `a` and `b` on the union of their `tags` regions.
    fn local_pair(&self, a: &Evaluation<T>, b: &Evaluation<T>, tags: &[RegionTag]) -> Result<(T, T)> {
        if tags.is_empty() {
            return Ok((a.global, b.global));
        }
        let inside = |p: &RegionPartition<T>, s: T| tags.contains(&p.intervals[p.find(s)].tag);
        let mask = |s: T| inside(&a.partition, s) || inside(&b.partition, s);
        Ok((
            self.grid.relative_error_masked(&a.values, mask, "tuning region")?,
            self.grid.relative_error_masked(&b.values, mask, "tuning region")?,
        ))
    }
}

/// Knobs never go below this fraction of their range (a vanishing `ξ` or
/// `ζ` would collapse a change of variables onto the shadow boundary).
const MIN_FRACTION: f64 = 0.01;

fn with_knob<T: Real>(
    layout: &Layout<T>,
    config: &ScatteringConfig<T>,
    params: &CovParams<T>,
    window: Window<T>,
    knob: Knob,
    value: T,
) -> Option<(CovParams<T>, Window<T>)> {
    if !(value >= knob_range(config, params, knob) * T::lit(MIN_FRACTION)) {
        return None;
    }
    let mut p = *params;
    let mut w = window;
    match knob {
        Knob::Param(q) => {
            p.set(q, value);
            // J = 6 keeps the equalities (A), (B): moving ξ1′ moves the split point.
            if let Layout::Cov { j: 6 } = layout {
                match q {
                    Param::Xi1p => p.xi2p = config.t2 - config.t1 - value,
                    Param::Zeta1p => p.zeta2p = config.length + config.t1 - config.t2 - value,
                    _ => {}
                }
            }
        }
        Knob::Overlap | Knob::Steepness => {
            let Window::Smooth(mut shape) = window else { return None };
            if knob == Knob::Overlap {
                shape.overlap = value;
            } else {
                shape.steepness = value;
            }
            w = Window::Smooth(shape);
        }
    }
    Some((p, w))
}

fn knob_value<T: Real>(params: &CovParams<T>, window: &Window<T>, knob: Knob) -> T {
    match (knob, window) {
        (Knob::Param(q), _) => params.get(q),
        (Knob::Overlap, Window::Smooth(s)) => s.overlap,
        (Knob::Steepness, Window::Smooth(s)) => s.steepness,
        _ => T::nan(),
    }
}

/// Range a knob is swept over; the first increment is a fraction of it.
fn knob_range<T: Real>(config: &ScatteringConfig<T>, params: &CovParams<T>, knob: Knob) -> T {
    let lit = config.t2 - config.t1;
    let dark = config.length - lit;
    match knob {
        Knob::Param(Param::Xi1) => params.xi1p,
        Knob::Param(Param::Xi2) => params.xi2p,
        Knob::Param(Param::Zeta1) => params.zeta1p,
        Knob::Param(Param::Zeta2) => params.zeta2p,
        Knob::Param(Param::Xi1p | Param::Xi2p) => lit,
        Knob::Param(Param::Zeta1p | Param::Zeta2p) => dark,
        Knob::Overlap | Knob::Steepness => T::one(),
    }
}

/// Runs the tuning schedule from `initial` and returns the final state.
///
/// `grid` carries the reference density at `config.k`. For `J = 6` the
/// split points `t1 + ξ1′` and `t2 + ζ2′` are the swept primed quantities.
pub fn tune_parameters<T: Real>(
    config: &ScatteringConfig<T>,
    curve: &BoundaryCurve<T>,
    template: &SpaceTemplate<T>,
    initial: &CovParams<T>,
    grid: &ErrorGrid<T>,
    settings: &TuningSettings<T>,
) -> Result<TuningState<T>> {
    if settings.max_rounds == 0 {
        return Err(Error::InvalidParameter("tuning needs at least one round".into()));
    }
    let mut tuner = Tuner { config, curve, template, grid, settings, assembler: None };
    let mut current = tuner.evaluate(*initial, template.window)?;

    let mut sweeps: Vec<(Knob, Vec<RegionTag>)> =
        schedule(&template.layout).into_iter().map(|(p, tags)| (Knob::Param(p), tags)).collect();
    if settings.tune_window && matches!(template.window, Window::Smooth(_)) {
        sweeps.push((Knob::Overlap, vec![]));
        sweeps.push((Knob::Steepness, vec![]));
    }
    let mut state = TuningState {
        params: current.params,
        window: current.window,
        steps: sweeps
            .iter()
            .map(|(k, _)| (*k, knob_range(config, initial, *k) * settings.initial_fraction))
            .collect(),
        history: vec![HistoryRow {
            round: 0,
            param: "initial".into(),
            value: T::zero(),
            local_err: current.global,
            global_err: current.global,
        }],
        rounds: 0,
        global_err: current.global,
        rejected: 0,
    };

    for round in 1..=settings.max_rounds {
        let start = current.global;
        for (idx, (knob, tags)) in sweeps.iter().enumerate() {
            let step = state.steps[idx].1;
            for dir in [T::one(), -T::one()] {
                let mut moved = false;
                for _ in 0..settings.max_moves {
                    let value = knob_value(&current.params, &current.window, *knob) + dir * step;
                    let Some((p, w)) = with_knob(&template.layout, config, &current.params, current.window, *knob, value)
                    else {
                        break;
                    };
                    let cand = match tuner.evaluate(p, w) {
                        Ok(c) => c,
                        Err(_) => {
                            state.rejected += 1;
                            break;
                        }
                    };
                    let (cur_local, cand_local) = tuner.local_pair(&current, &cand, tags)?;
                    if cand_local < cur_local && cand.global <= current.global {
                        state.history.push(HistoryRow {
                            round,
                            param: knob.name().into(),
                            value,
                            local_err: cand_local,
                            global_err: cand.global,
                        });
                        current = cand;
                        moved = true;
                    } else {
                        break;
                    }
                }
                if moved {
                    break;
                }
            }
        }
        state.rounds = round;
        for s in &mut state.steps {
            s.1 *= T::lit(0.5);
        }
        let change = (start - current.global).abs() / start;
        if change < settings.stabilization {
            break;
        }
    }
    state.params = current.params;
    state.window = current.window;
    state.global_err = current.global;
    Ok(state)
}

/// The window shape recorded in a partition file, if any.
pub fn window_shape<T: Real>(window: &Window<T>) -> Option<PouShape<f64>> {
    match window {
        Window::Smooth(s) => Some(PouShape { overlap: s.overlap.to_f64_lossy(), steepness: s.steepness.to_f64_lossy() }),
        Window::Indicator => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_curve, CurveKind};
    use crate::hfspaces::{build_cov_partition, Family, PolyBasis};
    use crate::operators::CircleSeries;
    use crate::Vec2;

    #[test]
    fn schedule_matches_layout() {
        let six: Vec<_> = schedule::<f64>(&Layout::Cov { j: 6 }).into_iter().map(|(p, _)| p.name()).collect();
        assert_eq!(six, ["xi1", "xi2", "xi1p", "zeta1", "zeta2", "zeta1p"]);
        assert_eq!(schedule::<f64>(&Layout::Cov { j: 8 }).len(), 8);
        assert_eq!(schedule::<f64>(&Layout::FreqAdapted { eps: vec![0.1] }).len(), 4);
    }

    #[test]
    fn split_point_moves_keep_equalities() {
        let c = make_curve(CurveKind::Circle { radius: 1.0 }).unwrap().arc_length_reparam(Vec2::new(1.0, 0.0)).unwrap();
        let cfg = ScatteringConfig::new(&c, 20.0).unwrap();
        let p = CovParams::initial(&c, &cfg, 6).unwrap();
        let layout = Layout::Cov { j: 6 };
        let (q, _) = with_knob(&layout, &cfg, &p, Window::default(), Knob::Param(Param::Xi1p), p.xi1p + 0.1).unwrap();
        assert!(build_cov_partition(&cfg, &q, 6).is_ok());
        let (q, _) = with_knob(&layout, &cfg, &p, Window::default(), Knob::Param(Param::Zeta1p), p.zeta1p - 0.1).unwrap();
        assert!(build_cov_partition(&cfg, &q, 6).is_ok());
        assert!(with_knob(&layout, &cfg, &p, Window::default(), Knob::Param(Param::Xi1), -0.1).is_none());
    }

    #[test]
    fn short_run_is_monotone() {
        let c = make_curve(CurveKind::Circle { radius: 1.0 }).unwrap().arc_length_reparam(Vec2::new(1.0, 0.0)).unwrap();
        let cfg = ScatteringConfig::new(&c, 10.0).unwrap();
        let series = CircleSeries::with_default_terms(10.0, 1.0, cfg.alpha).unwrap();
        let grid = ErrorGrid::new(&c, &cfg, &series);
        let tpl = SpaceTemplate {
            family: Family::Algebraic,
            layout: Layout::Cov { j: 6 },
            degrees: vec![3],
            window: Window::default(),
            poly: PolyBasis::Monomial,
        };
        let p = CovParams::initial(&c, &cfg, 6).unwrap();
        let settings = TuningSettings { max_rounds: 2, max_moves: 2, ..TuningSettings::default() };
        let st = tune_parameters(&cfg, &c, &tpl, &p, &grid, &settings).unwrap();
        assert!(st.rounds >= 1);
        for w in st.history.windows(2) {
            assert!(w[1].global_err <= w[0].global_err);
        }
        assert!(st.global_err <= st.initial_error());
        assert!(build_cov_partition(&cfg, &st.params, 6).is_ok());
    }
}
