use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn shipped(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    fs::read_to_string(p).unwrap()
}

fn write_cfg(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn thinpen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinpen")).args(args).output().unwrap()
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    thinpen(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forced_non_convergence_exits_one() {
    let dir = TempDir::new().unwrap();
    let text = shipped("C.cfg").replace("[output]", "[solver]\nmax_iters = 1\n\n[output]");
    let cfg = write_cfg(&dir, "c.cfg", &text);
    let out = dir.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("solve_report.txt")).unwrap();
    assert!(report.contains("converged = false"));
    assert!(out.join("field.csv").exists());
}

#[test]
fn center_off_gamma_exits_two() {
    let dir = TempDir::new().unwrap();
    let text = shipped("C.cfg").replace("[output]", "[analysis]\ncenters = 0, 0.5\n\n[output]");
    let cfg = write_cfg(&dir, "c.cfg", &text);
    let o = run("functionals", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("flat boundary"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");

    let cfg = write_cfg(&dir, "typo.cfg", &shipped("C.cfg").replace("k_plus", "kplus"));
    let o = run("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`k_plus`"), "{}", stderr(&o));

    let cfg = write_cfg(&dir, "neg.cfg", &shipped("C.cfg").replace("k_plus = 1", "k_plus = -1"));
    let o = run("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k_plus"));

    let o = run("solve", &dir.path().join("missing.cfg"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_cfg(&dir, "ok.cfg", &shipped("C.cfg"));
    let o = run("solve", &cfg, &out, &["--h", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`h`"));

    assert_eq!(thinpen(&["solve"]).status.code(), Some(2));
    assert_eq!(thinpen(&["frobnicate", "--config", "x"]).status.code(), Some(2));
}

#[test]
fn solve_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", &shipped("D.cfg"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run("solve", &cfg, out, &["--h", "0.05"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["field.csv", "solve_report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let field = fs::read_to_string(a.join("field.csv")).unwrap();
    assert_eq!(field.lines().next(), Some("i1,i2,x1,x2,u"));
    assert_eq!(field.lines().count(), 1 + 41 * 21);
    let report = fs::read_to_string(a.join("solve_report.txt")).unwrap();
    assert!(report.contains("g_offset = "));
}

#[test]
fn singular_instance_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", &shipped("D.cfg"));
    let out = dir.path().join("out");
    for sub in ["functionals", "blowup", "freeboundary"] {
        let o = run(sub, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
    }
    let prof = fs::read_to_string(out.join("profile_0.csv")).unwrap();
    assert_eq!(prof.lines().next(), Some("r,H,D,P,phi,N,Ntilde,W"));
    let blow = fs::read_to_string(out.join("blowup.csv")).unwrap();
    let first: Vec<&str> = blow.lines().nth(1).unwrap().split(',').collect();
    let residual: f64 = first[2].parse().unwrap();
    assert!(residual <= 0.05, "{residual}");
    assert_eq!(first[4], "2");
    let pts = fs::read_to_string(out.join("points.csv")).unwrap();
    assert!(pts.contains("SINGULAR_CANDIDATE"));
}

#[test]
fn csv_floats_carry_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "b.cfg", &shipped("B.cfg"));
    let out = dir.path().join("out");
    let o = run("functionals", &cfg, &out, &["--h", "0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let prof = fs::read_to_string(out.join("profile_0.csv")).unwrap();
    for cell in prof.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{cell}");
    }
}

#[test]
fn verify_passes_and_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", &shipped("D.cfg"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run("verify", &cfg, out, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["audit_report.csv", "audit_summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("audit_report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("config_id,kind,pass,violation,fitted_C,notes"));
    assert_eq!(csv.lines().count(), 1 + 4 * 13);
}
