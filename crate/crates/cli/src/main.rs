//! `hfbem`: solves, degree sweeps and parameter tuning for the
//! high-frequency Galerkin solvers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 anything else (I/O).

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use hfbem::galerkin::{
    degree_sweep, solve, ErrorGrid, GalerkinAssembler, QuadratureSettings, Reference, Region, SweepRow,
};
use hfbem::geometry::{BoundaryCurve, ScatteringConfig};
use hfbem::hfspaces::{CovParams, Layout, LayoutKind, PartitionFile, SpaceTemplate, Window};
use hfbem::tuning::{tune_parameters, window_shape, TuningSettings};

use config::{ConfigError, ExperimentConfig, FamilyKey, Overrides};

#[derive(Parser)]
#[command(name = "hfbem", version, about = "High-frequency Galerkin BEM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the density next to the reference.
    Solve(Common),
    /// Errors over a grid of wavenumbers and uniform degrees.
    Sweep(Common),
    /// Tune the partition parameters and write them to a file.
    Tune(Common),
    /// Print shadow boundaries and the partition for the configuration.
    GeometryInfo(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ppw: Option<u32>,
    #[arg(long, value_parser = parse_family)]
    family: Option<FamilyKey>,
    /// Comma-separated wavenumbers.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Comma-separated degrees.
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long)]
    params: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<FamilyKey, String> {
    s.parse().map_err(|e: ConfigError| e.0)
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            out: self.out.clone(),
            ppw: self.ppw,
            family: self.family,
            k: self.k.clone(),
            degrees: self.degrees.clone(),
            params: self.params.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything derived from the configuration at one wavenumber.
struct Setup {
    curve: BoundaryCurve<f64>,
    config: ScatteringConfig<f64>,
    params: CovParams<f64>,
    window: Window<f64>,
}

fn setup(cfg: &ExperimentConfig, k: f64) -> Result<Setup> {
    let curve = cfg.curve()?;
    let config = ScatteringConfig::new(&curve, k).context("shadow boundaries")?;
    let mut window = cfg.window();
    let params = match &cfg.space.params {
        Some(path) => {
            let file = PartitionFile::load(path).map_err(|e| ConfigError(e.to_string()))?;
            let want = if cfg.space.family.is_cov() { LayoutKind::Cov } else { LayoutKind::Freq };
            if file.layout != want {
                return Err(ConfigError(format!(
                    "{}: partition file layout {:?} does not match family {:?}",
                    path.display(),
                    file.layout,
                    cfg.space.family
                ))
                .into());
            }
            if let (Some(shape), Window::Smooth(_)) = (file.pou, window) {
                window = Window::Smooth(shape);
            }
            file.params
        }
        None => CovParams::initial(&curve, &config, initial_j(&cfg.layout()))?,
    };
    Ok(Setup { curve, config, params, window })
}

fn initial_j(layout: &Layout<f64>) -> usize {
    match layout {
        Layout::Cov { j } => *j,
        Layout::FreqAdapted { .. } => 6,
    }
}

fn reference_grid(s: &Setup, cfg: &ExperimentConfig) -> Result<(ErrorGrid<f64>, String)> {
    let r = Reference::for_curve(&s.curve, &s.config, cfg.galerkin.reference_ppw)?;
    Ok((ErrorGrid::new(&s.curve, &s.config, &r), r.describe()))
}

fn quadrature(cfg: &ExperimentConfig) -> QuadratureSettings<f64> {
    QuadratureSettings::with_ppw(cfg.galerkin.ppw)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_solve(cfg: &ExperimentConfig) -> Result<()> {
    let k = cfg.galerkin.k[0];
    let s = setup(cfg, k)?;
    let template = SpaceTemplate { window: s.window, ..cfg.template(cfg.space.degrees.clone()) };
    let space = template.build(&s.config, &s.params)?;
    let asm = GalerkinAssembler::new(&s.config, &s.curve, &quadrature(cfg), Some(&space))?;
    let sol = solve(&asm.assemble(&space)?)?;
    let (grid, what) = reference_grid(&s, cfg)?;
    let approx = grid.sample(&sol);
    let global = grid.relative_error(&approx, Region::Whole)?;
    let shadow = grid.relative_error(&approx, Region::Shadow)?;

    let mut w = csv::Writer::from_writer(output(&cfg.output.path)?);
    w.write_record(["s", "re_eta", "im_eta", "re_ref", "im_ref"])?;
    for ((s, a), r) in grid.s.iter().zip(&approx).zip(&grid.reference) {
        w.write_record([num(*s), num(a.re), num(a.im), num(r.re), num(r.im)])?;
    }
    w.flush()?;
    drop(w);

    let mut info: Box<dyn Write> =
        if cfg.output.path.is_some() { Box::new(io::stdout().lock()) } else { Box::new(io::stderr().lock()) };
    writeln!(info, "global_relerr,shadow_relerr")?;
    writeln!(info, "{},{}", num(global), num(shadow))?;
    eprintln!(
        "k = {k}, dof = {}, nodes = {}, condition ≈ {:.2e}, residual = {:.2e}, reference: {what}",
        sol.coeffs.len(),
        asm.nodes(),
        sol.condition,
        sol.residual
    );
    if sol.ill_conditioned() {
        eprintln!("warning: ill-conditioned Galerkin matrix (condition estimate {:.2e})", sol.condition);
    }
    Ok(())
}

fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow<f64>>> {
    let mut rows = Vec::new();
    let mut ks = cfg.galerkin.k.clone();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let dmax = *cfg.space.degrees.iter().max().unwrap();
    for k in ks {
        let s = setup(cfg, k)?;
        let template = SpaceTemplate { window: s.window, ..cfg.template(vec![dmax]) };
        let space = template.build(&s.config, &s.params)?;
        let asm = GalerkinAssembler::new(&s.config, &s.curve, &quadrature(cfg), Some(&space))?;
        let (grid, _) = reference_grid(&s, cfg)?;
        rows.extend(degree_sweep(&space, &asm, &grid, &cfg.space.degrees)?);
        eprintln!("k = {k}: done ({} nodes)", asm.nodes());
    }
    Ok(rows)
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let rows = sweep_rows(cfg)?;
    let mut w = csv::Writer::from_writer(output(&cfg.output.path)?);
    w.write_record(["k", "d", "dof", "global_relerr", "shadow_relerr", "wall_seconds"])?;
    for r in &rows {
        w.write_record([
            num(r.k),
            r.degree.to_string(),
            r.dof.to_string(),
            num(r.global_err),
            num(r.shadow_err),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn history_path(cfg: &ExperimentConfig, out: &Path) -> PathBuf {
    cfg.tuning.history.clone().unwrap_or_else(|| out.with_extension("history.csv"))
}

fn cmd_tune(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.output.path.clone().unwrap_or_else(|| PathBuf::from("tuned.toml"));
    let k = cfg.tuning.k.unwrap_or(cfg.galerkin.k[0]);
    let degree = cfg.tuning.degree.unwrap_or(*cfg.space.degrees.iter().max().unwrap());
    if cfg.space.family.family() == hfbem::hfspaces::Family::Trigonometric && degree % 2 == 1 {
        return Err(ConfigError(format!("tuning.degree: trigonometric degrees must be even, got {degree}")).into());
    }
    let s = setup(cfg, k)?;
    let template = SpaceTemplate { window: s.window, ..cfg.template(vec![degree]) };
    let (grid, what) = reference_grid(&s, cfg)?;
    let settings = TuningSettings {
        max_rounds: cfg.tuning.rounds,
        stabilization: cfg.tuning.stabilization,
        initial_fraction: cfg.tuning.step_fraction,
        max_moves: cfg.tuning.max_moves,
        tune_window: cfg.tuning.window,
        quadrature: quadrature(cfg),
    };
    let start = Instant::now();
    let state = tune_parameters(&s.config, &s.curve, &template, &s.params, &grid, &settings)?;

    let file = PartitionFile {
        layout: if cfg.space.family.is_cov() { LayoutKind::Cov } else { LayoutKind::Freq },
        j: cfg.space.family.is_cov().then_some(cfg.space.j),
        m: (!cfg.space.family.is_cov()).then_some(cfg.space.m),
        eps: None,
        wavenumber: Some(k),
        degrees: Some(vec![degree]),
        params: state.params,
        pou: window_shape(&state.window),
    };
    file.save(&out)?;
    let hist = history_path(cfg, &out);
    state.write_history(BufWriter::new(File::create(&hist).with_context(|| format!("creating {}", hist.display()))?))?;
    println!(
        "tuned at k = {k}, d = {degree} in {} rounds ({:.1} s, reference: {what}): global error {:.4e} -> {:.4e}",
        state.rounds,
        start.elapsed().as_secs_f64(),
        state.initial_error(),
        state.global_err
    );
    println!("parameters: {}", out.display());
    println!("history: {}", hist.display());
    Ok(())
}

fn cmd_geometry_info(cfg: &ExperimentConfig) -> Result<()> {
    let k = cfg.galerkin.k[0];
    let s = setup(cfg, k)?;
    let c = &s.config;
    let mut w = io::stdout().lock();
    writeln!(w, "length = {:.12}", c.length)?;
    writeln!(w, "alpha = ({:.12}, {:.12})", c.alpha.x, c.alpha.y)?;
    writeln!(w, "t1 = {:.12}", c.t1)?;
    writeln!(w, "t2 = {:.12}", c.t2)?;
    writeln!(w, "wavelengths = {:.3} at k = {k}", c.wavelengths())?;
    let p = &s.params;
    writeln!(
        w,
        "params: xi1 = {:.6}, xi2 = {:.6}, xi1p = {:.6}, xi2p = {:.6}, zeta1 = {:.6}, zeta2 = {:.6}, zeta1p = {:.6}, zeta2p = {:.6}",
        p.xi1, p.xi2, p.xi1p, p.xi2p, p.zeta1, p.zeta2, p.zeta1p, p.zeta2p
    )?;
    let template = SpaceTemplate { window: s.window, ..cfg.template(cfg.space.degrees.clone()) };
    let part = template.partition(c, &s.params)?;
    writeln!(w, "interval,a,b,width,mapped")?;
    for &i in part.cyclic_order() {
        let iv = &part.intervals[i];
        writeln!(w, "{},{:.12},{:.12},{:.12},{}", iv.label(), iv.a, iv.b, iv.width(), iv.cov.is_some())?;
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<hfbem::Error>() {
        Some(hfbem::Error::Config(_) | hfbem::Error::InvalidParameter(_)) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&ExperimentConfig) -> Result<()>) = match &cli.command {
        Command::Solve(c) => (c, cmd_solve),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Tune(c) => (c, cmd_tune),
        Command::GeometryInfo(c) => (c, cmd_geometry_info),
    };
    let result = common.load().map_err(anyhow::Error::from).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
