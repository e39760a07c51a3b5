use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CIRCLE: &str = r#"
[geometry]
shape = "circle"
radius = 1.0
alpha = [1.0, 0.0]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfbem")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn rows(file: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(file).unwrap().records().map(Result::unwrap).collect()
}

fn column(file: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(file).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn solve_writes_density_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{CIRCLE}\n[space]\ndegrees = [8]\n[galerkin]\nk = [50.0]\n"));
    let out = path(dir.path(), "eta.csv");
    let res = ok(&["solve", "--config", &cfg, "--out", &out]);

    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["s", "re_eta", "im_eta", "re_ref", "im_ref"]);
    assert!(r.records().count() >= 1024);

    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("global_relerr,shadow_relerr"));
    let errs: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(errs[0] > 0.0 && errs[0] < 1e-2, "{errs:?}");
    assert!(errs[1] > 0.0 && errs[1] < 1.0, "{errs:?}");
}

#[test]
fn zero_degree_solves() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", CIRCLE);
    let out = path(dir.path(), "eta.csv");
    let res = ok(&["solve", "--config", &cfg, "--out", &out, "--degrees", "0", "--k", "30"]);
    let text = String::from_utf8(res.stdout).unwrap();
    let global: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(global.is_finite() && global <= 1.0 + 1e-12);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "[geometry]\nshape = \"circle\"\nradius = 1.0\n");
    let res = run(&["solve", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("alpha"));

    let cfg = write(dir.path(), "d.toml", &format!("{CIRCLE}\n[galerkin]\nk = [50.0]\nppw = 4.0\n"));
    let res = run(&["solve", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("ppw"));

    let cfg = write(dir.path(), "e.toml", &format!("{CIRCLE}\n[space]\nfamily = \"trig-cov\"\ndegrees = [3]\n"));
    assert_eq!(run(&["solve", "--config", &cfg]).status.code(), Some(2));

    let cfg = write(dir.path(), "f.toml", &format!("{CIRCLE}\n[space]\ncolour = 3\n"));
    let res = run(&["solve", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("colour") && msg.contains("line"), "{msg}");
}

#[test]
fn sweep_table_and_dof_reduction() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{CIRCLE}\n[space]\ndegrees = [2, 4, 6, 8, 10, 12]\n[galerkin]\nk = [100.0, 50.0]\n"));
    let cov = path(dir.path(), "cov.csv");
    ok(&["sweep", "--config", &cfg, "--out", &cov]);
    let table = rows(&cov);
    assert_eq!(table.len(), 12);
    assert_eq!(&table[0][0].parse::<f64>().unwrap(), &50.0);
    for r in &table {
        let d: usize = r[1].parse().unwrap();
        assert_eq!(r[2].parse::<usize>().unwrap(), 6 * (d + 1));
    }
    let err = column(&cov, "global_relerr");
    for k in 0..2 {
        for w in err[6 * k..6 * k + 6].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{err:?}");
        }
    }

    let freq = path(dir.path(), "freq.csv");
    ok(&["sweep", "--config", &cfg, "--out", &freq, "--family", "alg-freq", "--k", "50"]);
    let (a, b) = (column(&cov, "dof"), column(&freq, "dof"));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(*y, x / 6.0 * 8.0);
        assert_eq!(1.0 - x / y, 0.25);
    }
}

#[test]
fn sweep_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{CIRCLE}\n[space]\ndegrees = [2, 6]\n[galerkin]\nk = [20.0, 30.0]\n"));
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    ok(&["sweep", "--config", &cfg, "--out", &a]);
    ok(&["sweep", "--config", &cfg, "--out", &b]);
    let strip = |f: &str| -> Vec<Vec<String>> {
        rows(f).iter().map(|r| r.iter().take(5).map(str::to_string).collect()).collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn tune_history_round_trip_and_reuse() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{CIRCLE}\n[space]\ndegrees = [6]\n[galerkin]\nk = [50.0]\n[tuning]\nrounds = 2\n"),
    );
    let tuned = path(dir.path(), "tuned.toml");
    ok(&["tune", "--config", &cfg, "--out", &tuned]);

    let hist = path(dir.path(), "tuned.history.csv");
    let mut r = csv::Reader::from_path(&hist).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["round", "param_name", "value", "local_err", "global_err"]);
    let g = column(&hist, "global_err");
    assert!(g.len() >= 2);
    for w in g.windows(2) {
        assert!(w[1] <= w[0], "{g:?}");
    }

    // the tuned file loads and reproduces the tuned error at the same k
    let eta = path(dir.path(), "eta.csv");
    let res = ok(&["solve", "--config", &cfg, "--params", &tuned, "--out", &eta]);
    let global: f64 =
        String::from_utf8(res.stdout).unwrap().lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    let last = *g.last().unwrap();
    assert!((global - last).abs() <= 1e-6 * last, "{global} vs {last}");

    let res = ok(&["solve", "--config", &cfg, "--params", &tuned, "--out", &eta, "--k", "400", "--degrees", "8"]);
    let global: f64 =
        String::from_utf8(res.stdout).unwrap().lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(global < 1e-2, "{global}");
}

#[test]
fn geometry_info_reports_shadow_boundaries() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", CIRCLE);
    let res = ok(&["geometry-info", "--config", &cfg]);
    let text = String::from_utf8(res.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    let pi = std::f64::consts::PI;
    assert!((value("length") - 2.0 * pi).abs() < 1e-10);
    assert!((value("t1") - pi / 2.0).abs() < 1e-10);
    assert!((value("t2") - 1.5 * pi).abs() < 1e-10);
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 4);
}
