//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
//! summary; with `HFBEM_ACCEPTANCE_STRICT=1` any failure also fails the run.
//! Tuned parameters are computed once (circle, k = 50, d = 12) and shared by
//! the criteria that need them.

use std::process::ExitCode;
use std::time::Instant;

use hfbem::galerkin::{degree_sweep, ErrorGrid, GalerkinAssembler, QuadratureSettings, Reference, SweepRow};
use hfbem::geometry::{make_curve, BoundaryCurve, CurveKind, ScatteringConfig};
use hfbem::hfspaces::{
    build_cov_partition, default_eps_schedule, CovParams, Family, GalerkinSpace, Layout, PolyBasis, SpaceTemplate, Window,
};
use hfbem::operators::{grid_discrepancy, nystrom_solve, CircleSeries};
use hfbem::specfun::{hankel1, hankel1_seq};
use hfbem::tuning::{tune_parameters, TuningSettings, TuningState};
use hfbem::{Complex64, Vec2};

const TUNE_K: f64 = 50.0;
const TOP_D: usize = 12;

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, what: &str, detail: String) {
        if !pass {
            self.failed.push(n);
        }
        println!("criterion {n:>2} [{}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn circle() -> BoundaryCurve<f64> {
    make_curve(CurveKind::Circle { radius: 1.0 }).unwrap().arc_length_reparam(Vec2::new(1.0, 0.0)).unwrap()
}

fn kite() -> BoundaryCurve<f64> {
    make_curve(CurveKind::Kite).unwrap().arc_length_reparam(Vec2::new(4.0, 1.0).unit()).unwrap()
}

fn ellipse() -> BoundaryCurve<f64> {
    make_curve(CurveKind::Ellipse { a: 2.0, b: 1.0 }).unwrap().arc_length_reparam(Vec2::new(3.0, 1.0).unit()).unwrap()
}

fn template(family: Family, layout: Layout<f64>) -> SpaceTemplate<f64> {
    SpaceTemplate { family, layout, degrees: vec![TOP_D], window: Window::default(), poly: PolyBasis::Monomial }
}

fn alg_cov() -> SpaceTemplate<f64> {
    template(Family::Algebraic, Layout::Cov { j: 6 })
}

fn alg_freq() -> SpaceTemplate<f64> {
    template(Family::Algebraic, Layout::FreqAdapted { eps: default_eps_schedule(2) })
}

fn reference_grid(curve: &BoundaryCurve<f64>, cfg: &ScatteringConfig<f64>) -> ErrorGrid<f64> {
    let r = Reference::for_curve(curve, cfg, 24.0).unwrap();
    ErrorGrid::new(curve, cfg, &r)
}

struct Tuned {
    template: SpaceTemplate<f64>,
    params: CovParams<f64>,
    window: Window<f64>,
    state: Option<TuningState<f64>>,
}

impl Tuned {
    fn run(curve: &BoundaryCurve<f64>, k: f64, template: SpaceTemplate<f64>, initial: Option<CovParams<f64>>) -> Self {
        let cfg = ScatteringConfig::new(curve, k).unwrap();
        let p0 = initial.unwrap_or_else(|| CovParams::initial(curve, &cfg, 6).unwrap());
        let grid = reference_grid(curve, &cfg);
        let state = tune_parameters(&cfg, curve, &template, &p0, &grid, &TuningSettings::default()).unwrap();
        Self { template, params: state.params, window: state.window, state: Some(state) }
    }

    fn untuned(curve: &BoundaryCurve<f64>, k: f64, template: SpaceTemplate<f64>) -> Self {
        let cfg = ScatteringConfig::new(curve, k).unwrap();
        let params = CovParams::initial(curve, &cfg, 6).unwrap();
        Self { window: template.window, template, params, state: None }
    }

    fn state(&self) -> &TuningState<f64> {
        self.state.as_ref().unwrap()
    }

    fn space(&self, cfg: &ScatteringConfig<f64>, d: usize) -> GalerkinSpace<f64> {
        SpaceTemplate { degrees: vec![d], window: self.window, ..self.template.clone() }
            .build(cfg, &self.params)
            .unwrap()
    }

    /// Error rows at `k` for uniform degrees `ds` (one assembly at the largest).
    fn sweep(&self, curve: &BoundaryCurve<f64>, k: f64, ds: &[usize]) -> Vec<SweepRow<f64>> {
        let cfg = ScatteringConfig::new(curve, k).unwrap();
        let space = self.space(&cfg, *ds.iter().max().unwrap());
        let mut asm = GalerkinAssembler::new(&cfg, curve, &QuadratureSettings::default(), Some(&space)).unwrap();
        asm.cache_operator();
        degree_sweep(&space, &asm, &reference_grid(curve, &cfg), ds).unwrap()
    }

    fn monotone(&self) -> bool {
        self.state().history.windows(2).all(|w| w[1].global_err <= w[0].global_err)
    }
}

fn hankel_oracle(report: &mut Report) {
    let path = format!("{}/tests/data/hankel01.csv", env!("CARGO_MANIFEST_DIR"));
    let mut worst = 0.0f64;
    let mut count = 0;
    for line in std::fs::read_to_string(path).unwrap().lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[0] > 500.0 {
            continue;
        }
        for (n, re, im) in [(0, v[1], v[2]), (1, v[3], v[4])] {
            let exact = Complex64::new(re, im);
            worst = worst.max((hankel1(n, v[0]).unwrap() - exact).norm() / exact.norm());
            count += 1;
        }
    }
    let mut wr = 0.0f64;
    for x in [0.5, 7.3, 60.0, 250.0] {
        let seq = hankel1_seq(61, x).unwrap();
        let w = 2.0 / (std::f64::consts::PI * x);
        for n in 0..=60 {
            let (a, b) = (seq.values[n], seq.values[n + 1]);
            wr = wr.max(((b.re * a.im - a.re * b.im) - w).abs() / w);
        }
    }
    report.line(
        1,
        worst <= 1e-12 && wr <= 1e-11,
        "Hankel oracle",
        format!("max rel. error {worst:.2e} over {count} values (≤ 1e-12), Wronskian residual {wr:.2e} to order 60 (≤ 1e-11)"),
    );
}

fn nystrom_vs_series(report: &mut Report) {
    let c = circle();
    let err = |k: f64, n: usize| {
        let cfg = ScatteringConfig::new(&c, k).unwrap();
        let exact = CircleSeries::with_default_terms(k, 1.0, cfg.alpha).unwrap();
        grid_discrepancy(&nystrom_solve(&cfg, &c, n).unwrap(), &exact)
    };
    let (e5, e50) = (err(5.0, 64), err(50.0, 600));
    report.line(
        2,
        e5 <= 1e-10 && e50 <= 1e-6,
        "Nyström vs series",
        format!("k = 5, N = 64: {e5:.2e} (≤ 1e-10); k = 50, N = 600: {e50:.2e} (≤ 1e-6)"),
    );
}

fn diffeomorphisms(report: &mut Report, tuned: &CovParams<f64>) {
    let mut worst_end = 0.0f64;
    let mut worst_trip = 0.0f64;
    let mut worst_psi = 0.0f64;
    let mut monotone = true;
    let mut checked = 0;
    let circ = circle();
    let cases: Vec<(&str, BoundaryCurve<f64>, usize, bool)> = vec![
        ("circle", circ.clone(), 6, true),
        ("circle", circ, 8, false),
        ("ellipse", ellipse(), 6, false),
        ("kite", kite(), 6, false),
    ];
    for (_, curve, j, use_tuned) in &cases {
        for k in [1e2, 1e3, 1e4] {
            let cfg = ScatteringConfig::new(curve, k).unwrap();
            let p = if *use_tuned { *tuned } else { CovParams::initial(curve, &cfg, *j).unwrap() };
            let part = build_cov_partition(&cfg, &p, *j).unwrap();
            for iv in part.intervals.iter().filter(|iv| iv.cov.is_some()) {
                let cov = iv.cov.unwrap();
                worst_end = worst_end.max((cov.forward(iv.a).unwrap() - iv.a).abs());
                worst_end = worst_end.max((cov.forward(iv.b).unwrap() - iv.b).abs());
                let far = if cov.near() == iv.a { iv.b } else { iv.a };
                worst_psi = worst_psi.max((cov.psi(cov.near()).unwrap() + 1.0 / 3.0).abs());
                worst_psi = worst_psi.max(cov.psi(far).unwrap().abs());
                let mut prev = f64::NEG_INFINITY;
                for i in 0..=1000 {
                    let s = if i == 1000 { iv.b } else { iv.a + iv.width() * i as f64 / 1000.0 };
                    let y = cov.forward(s).unwrap();
                    monotone &= y > prev;
                    prev = y;
                    worst_trip = worst_trip.max((cov.inverse(y).unwrap() - s).abs());
                }
                checked += 1;
            }
        }
    }
    report.line(
        3,
        worst_end <= 1e-12 && monotone && worst_trip <= 1e-10 && worst_psi == 0.0,
        "change-of-variables maps",
        format!(
            "{checked} maps: endpoints {worst_end:.1e} (≤ 1e-12), strictly increasing: {monotone}, round trip {worst_trip:.1e} (≤ 1e-10), ψ endpoint deviation {worst_psi:.1e} (exact)"
        ),
    );
}

fn partition_of_unity(report: &mut Report, configs: &[(&str, BoundaryCurve<f64>, f64, &Tuned)]) {
    let mut worst = 0.0f64;
    for (_, curve, k, tuned) in configs {
        let cfg = ScatteringConfig::new(curve, *k).unwrap();
        let space = tuned.space(&cfg, 2);
        for i in 0..10_000 {
            let s = cfg.length * i as f64 / 1e4;
            let w = space.pou.weights(&space.partition, s);
            let neg = w.iter().cloned().fold(0.0f64, f64::min);
            worst = worst.max((w.iter().sum::<f64>() - 1.0).abs()).max(-neg);
        }
    }
    let names: Vec<_> = configs.iter().map(|c| c.0).collect();
    report.line(
        4,
        worst <= 1e-14,
        "partition of unity",
        format!("max |Σw − 1| = {worst:.1e} on 10⁴ points (≤ 1e-14) for {}", names.join(", ")),
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut report = Report { failed: vec![] };
    let c = circle();

    hankel_oracle(&mut report);
    nystrom_vs_series(&mut report);

    let cov50 = Tuned::run(&c, TUNE_K, alg_cov(), None);
    eprintln!(
        "[{:.0} s] circle alg-cov tuned at k = {TUNE_K}, d = {TOP_D}: {:.3e} -> {:.3e}",
        start.elapsed().as_secs_f64(),
        cov50.state().initial_error(),
        cov50.state().global_err
    );
    diffeomorphisms(&mut report, &cov50.params);

    // 5: convergence in d at k = 100
    let ds: Vec<usize> = (2..=TOP_D).step_by(2).collect();
    let rows100 = cov50.sweep(&c, 100.0, &ds);
    let errs: Vec<f64> = rows100.iter().map(|r| r.global_err).collect();
    let ratio = errs[0] / errs[errs.len() - 1];
    let mono = errs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    report.line(
        5,
        ratio >= 100.0 && mono,
        "convergence in d (circle, k = 100)",
        format!(
            "d = 2: {:.3e}, d = {TOP_D}: {:.3e}, ratio {ratio:.1} (≥ 100), non-increasing: {mono}; errors {}",
            errs[0],
            errs[errs.len() - 1],
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    );

    // 6: frequency robustness at d = 8
    let mut at8 = vec![];
    for k in [50.0, 100.0, 200.0, 400.0] {
        at8.push((k, cov50.sweep(&c, k, &[8])[0].global_err));
        eprintln!("[{:.0} s] d = 8, k = {k}: {:.3e}", start.elapsed().as_secs_f64(), at8.last().unwrap().1);
    }
    let growth = at8.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0f64, f64::max);
    report.line(
        6,
        growth < 3.0,
        "frequency robustness (circle, d = 8)",
        format!(
            "errors {} ; max growth per doubling {growth:.2} (< 3)",
            at8.iter().map(|(k, e)| format!("k={k}: {e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    );

    // 7, 8: change of variables vs frequency-adapted layout at k = 100
    let freq50 = Tuned::run(&c, TUNE_K, alg_freq(), None);
    let freq100 = freq50.sweep(&c, 100.0, &ds);
    let mut gate = true;
    let mut gap = true;
    let mut cells = vec![];
    for (a, b) in rows100.iter().zip(&freq100) {
        gate &= a.shadow_err <= 2.0 * b.shadow_err;
        if a.degree >= 8 {
            gap &= a.shadow_err * 10.0 <= b.shadow_err;
        }
        cells.push(format!("d={}: {:.2e} vs {:.2e}", a.degree, a.shadow_err, b.shadow_err));
    }
    // informational: the frequency-adapted layout with untuned parameters
    let base = Tuned::untuned(&c, TUNE_K, alg_freq()).sweep(&c, 100.0, &ds);
    let base_gate = rows100.iter().zip(&base).all(|(a, b)| a.shadow_err <= 2.0 * b.shadow_err);
    report.line(
        7,
        gate,
        "shadow accuracy, change of variables vs frequency-adapted, both tuned (k = 100)",
        format!(
            "{} ; ≤ 2× everywhere: {gate}; 10× gap for d ≥ 8 (informational): {}; against untuned frequency-adapted (informational): ≤ 2× {base_gate}, d = {TOP_D} {:.2e}",
            cells.join(", "),
            if gap { "met" } else { "not met" },
            base.last().unwrap().shadow_err
        ),
    );
    let dof_ok = rows100.iter().zip(&freq100).all(|(a, b)| {
        a.degree == b.degree && a.dof == 6 * (a.degree + 1) && b.dof == 8 * (b.degree + 1) && 4 * a.dof == 3 * b.dof
    });
    report.line(
        8,
        dof_ok,
        "degrees of freedom",
        format!(
            "{} ; 25% reduction: {dof_ok}",
            rows100.iter().zip(&freq100).map(|(a, b)| format!("d={}: {}/{}", a.degree, a.dof, b.dof)).collect::<Vec<_>>().join(", ")
        ),
    );
    eprintln!("[{:.0} s] frequency-adapted comparison done", start.elapsed().as_secs_f64());

    // 9: kite
    let kc = kite();
    let kite_alg = Tuned::run(&kc, 50.0, alg_cov(), None);
    let kite_trig = Tuned::run(&kc, 50.0, template(Family::Trigonometric, Layout::Cov { j: 6 }), None);
    let ea = kite_alg.sweep(&kc, 50.0, &[TOP_D])[0].global_err;
    let et = kite_trig.sweep(&kc, 50.0, &[TOP_D])[0].global_err;
    report.line(
        9,
        ea <= 1e-2 && et <= 1e-2 && et <= 2.0 * ea,
        "kite (k = 50, α = (4,1)/√17)",
        format!("d = {TOP_D}: algebraic {ea:.3e}, trigonometric {et:.3e} (both ≤ 1e-2, trigonometric ≤ 2× algebraic)"),
    );
    eprintln!("[{:.0} s] kite done", start.elapsed().as_secs_f64());

    // 10: tuning audit
    let cov400 = Tuned::run(&c, 400.0, alg_cov(), Some(cov50.params));
    let reused = cov50.sweep(&c, 400.0, &[TOP_D])[0].global_err;
    let retuned = cov400.state().global_err;
    let all_mono = [&cov50, &freq50, &kite_alg, &kite_trig, &cov400].iter().all(|t| t.monotone());
    report.line(
        10,
        all_mono && reused <= 10.0 * retuned,
        "tuning audit",
        format!(
            "histories non-increasing: {all_mono}; k = 400, d = {TOP_D}: tuned at {TUNE_K} {reused:.3e}, re-tuned {retuned:.3e}, ratio {:.2} (≤ 10)",
            reused / retuned
        ),
    );

    partition_of_unity(
        &mut report,
        &[
            ("circle alg-cov k=50", c.clone(), 50.0, &cov50),
            ("circle alg-cov k=400", c.clone(), 400.0, &cov400),
            ("circle alg-freq k=100", c.clone(), 100.0, &freq50),
            ("kite alg-cov k=50", kc.clone(), 50.0, &kite_alg),
            ("kite trig-cov k=50", kc, 50.0, &kite_trig),
        ],
    );

    report.failed.sort();
    println!(
        "{} of 10 criteria passed ({:.0} s){}",
        10 - report.failed.len(),
        start.elapsed().as_secs_f64(),
        if report.failed.is_empty() { String::new() } else { format!("; failed: {:?}", report.failed) }
    );
    let strict = std::env::var("HFBEM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !report.failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
