//! Experiment configuration: a TOML file with one section per stage,
//! overridable from the command line.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hfbem::geometry::{make_curve, BoundaryCurve, CurveKind};
use hfbem::hfspaces::{default_eps_schedule, Family, Layout, PolyBasis, PouShape, SpaceTemplate, Window};
use hfbem::Vec2;

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub galerkin: GalerkinSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Ellipse,
    Kite,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub shape: Shape,
    /// Circle radius.
    pub radius: Option<f64>,
    /// Ellipse semi-axes along x and y.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Incidence direction; normalized on load.
    pub alpha: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum FamilyKey {
    #[serde(rename = "alg-cov")]
    AlgCov,
    #[serde(rename = "trig-cov")]
    TrigCov,
    #[serde(rename = "alg-freq")]
    AlgFreq,
    #[serde(rename = "trig-freq")]
    TrigFreq,
}

impl std::str::FromStr for FamilyKey {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "alg-cov" => Ok(FamilyKey::AlgCov),
            "trig-cov" => Ok(FamilyKey::TrigCov),
            "alg-freq" => Ok(FamilyKey::AlgFreq),
            "trig-freq" => Ok(FamilyKey::TrigFreq),
            _ => bad(format!("unknown family `{s}` (expected alg-cov, trig-cov, alg-freq or trig-freq)")),
        }
    }
}

impl FamilyKey {
    pub fn family(self) -> Family {
        match self {
            FamilyKey::AlgCov | FamilyKey::AlgFreq => Family::Algebraic,
            FamilyKey::TrigCov | FamilyKey::TrigFreq => Family::Trigonometric,
        }
    }

    pub fn is_cov(self) -> bool {
        matches!(self, FamilyKey::AlgCov | FamilyKey::TrigCov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKey {
    Smooth,
    Indicator,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    pub family: FamilyKey,
    /// Number of change-of-variables intervals (6 or 8).
    pub j: usize,
    /// Levels of the frequency-adapted layout (`4m` intervals).
    pub m: usize,
    /// Solve: one degree for all intervals or one per interval.
    /// Sweep: the uniform degrees to run.
    pub degrees: Vec<usize>,
    pub window: WindowKey,
    pub overlap: Option<f64>,
    pub steepness: Option<f64>,
    pub basis: PolyBasis,
    /// Partition parameter file (as written by `tune`).
    pub params: Option<PathBuf>,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self {
            family: FamilyKey::AlgCov,
            j: 6,
            m: 2,
            degrees: vec![8],
            window: WindowKey::Smooth,
            overlap: None,
            steepness: None,
            basis: PolyBasis::Monomial,
            params: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalerkinSection {
    pub k: Vec<f64>,
    pub ppw: f64,
    /// Reference Nyström density (non-circular shapes).
    pub reference_ppw: f64,
}

impl Default for GalerkinSection {
    fn default() -> Self {
        Self { k: vec![50.0], ppw: 12.0, reference_ppw: 20.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    /// Tuning wavenumber; defaults to the first `galerkin.k`.
    pub k: Option<f64>,
    /// Degree used while tuning; defaults to the largest `space.degrees`.
    pub degree: Option<usize>,
    pub rounds: usize,
    pub stabilization: f64,
    pub step_fraction: f64,
    pub max_moves: usize,
    pub window: bool,
    pub history: Option<PathBuf>,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            k: None,
            degree: None,
            rounds: 6,
            stabilization: 0.02,
            step_fraction: 0.1,
            max_moves: 8,
            window: false,
            history: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub ppw: Option<u32>,
    pub family: Option<FamilyKey>,
    pub k: Option<Vec<f64>>,
    pub degrees: Option<Vec<usize>>,
    pub params: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))
    }

    /// Reads `path`; relative paths inside the file are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.space.params);
        fix(&mut cfg.tuning.history);
        fix(&mut cfg.output.path);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.output.path = Some(v.clone());
        }
        if let Some(v) = o.ppw {
            self.galerkin.ppw = v as f64;
        }
        if let Some(v) = o.family {
            self.space.family = v;
        }
        if let Some(v) = &o.k {
            self.galerkin.k = v.clone();
        }
        if let Some(v) = &o.degrees {
            self.space.degrees = v.clone();
        }
        if let Some(v) = &o.params {
            self.space.params = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.galerkin;
        if g.k.is_empty() {
            return bad("galerkin.k: at least one wavenumber is required");
        }
        if let Some(k) = g.k.iter().find(|k| !(**k > 0.0)) {
            return bad(format!("galerkin.k: wavenumbers must be positive, got {k}"));
        }
        if !(g.ppw >= 6.0) {
            return bad(format!("galerkin.ppw: at least 6 points per wavelength are required, got {}", g.ppw));
        }
        if !(g.reference_ppw >= 10.0) {
            return bad(format!("galerkin.reference_ppw: at least 10 required, got {}", g.reference_ppw));
        }
        let s = &self.space;
        if s.degrees.is_empty() {
            return bad("space.degrees: at least one degree is required");
        }
        if s.family.family() == Family::Trigonometric && s.degrees.iter().any(|d| d % 2 == 1) {
            return bad(format!("space.degrees: trigonometric degrees must be even, got {:?}", s.degrees));
        }
        if s.family.is_cov() && s.j != 6 && s.j != 8 {
            return bad(format!("space.j: must be 6 or 8, got {}", s.j));
        }
        if !s.family.is_cov() && s.m == 0 {
            return bad("space.m: must be at least 1");
        }
        for (name, v) in [("space.overlap", s.overlap), ("space.steepness", s.steepness)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return bad(format!("{name}: must be positive, got {v}"));
                }
            }
        }
        let [x, y] = self.geometry.alpha;
        if !(x.hypot(y) > 0.0) {
            return bad("geometry.alpha: must be a nonzero vector");
        }
        Ok(())
    }

    pub fn alpha(&self) -> Vec2<f64> {
        let [x, y] = self.geometry.alpha;
        let n = x.hypot(y);
        Vec2::new(x / n, y / n)
    }

    pub fn curve(&self) -> Result<BoundaryCurve<f64>, ConfigError> {
        let g = &self.geometry;
        let kind = match g.shape {
            Shape::Circle => CurveKind::Circle { radius: g.radius.unwrap_or(1.0) },
            Shape::Ellipse => match (g.a, g.b) {
                (Some(a), Some(b)) => CurveKind::Ellipse { a, b },
                _ => return bad("geometry: ellipse needs `a` and `b`"),
            },
            Shape::Kite => CurveKind::Kite,
        };
        make_curve(kind)
            .and_then(|c| c.arc_length_reparam(self.alpha()))
            .map_err(|e| ConfigError(format!("geometry: {e}")))
    }

    pub fn window(&self) -> Window<f64> {
        match self.space.window {
            WindowKey::Indicator => Window::Indicator,
            WindowKey::Smooth => {
                let d = PouShape::default();
                Window::Smooth(PouShape {
                    overlap: self.space.overlap.unwrap_or(d.overlap),
                    steepness: self.space.steepness.unwrap_or(d.steepness),
                })
            }
        }
    }

    pub fn layout(&self) -> Layout<f64> {
        if self.space.family.is_cov() {
            Layout::Cov { j: self.space.j }
        } else {
            Layout::FreqAdapted { eps: default_eps_schedule(self.space.m) }
        }
    }

    pub fn template(&self, degrees: Vec<usize>) -> SpaceTemplate<f64> {
        SpaceTemplate {
            family: self.space.family.family(),
            layout: self.layout(),
            degrees,
            window: self.window(),
            poly: self.space.basis,
        }
    }
}
