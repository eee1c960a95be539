use std::path::Path;
use std::process::{Command, Output};

fn szdet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szdet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# small run\nnu = 0.2\nM = 32\nt_end = 0.05\nrecord_stride = 5\ninit.kind = random\nseed = 11\n",
    )
    .unwrap();
    let a = szdet(&["simulate", "--config", "run.cfg", "--out", "a.csv"], dir.path());
    let b = szdet(&["simulate", "--config", "run.cfg", "--out", "b.csv"], dir.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    let x = std::fs::read(dir.path().join("a.csv")).unwrap();
    let y = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# szdet "));
    assert!(text.contains("# config_sha256 "));
    assert!(text.contains("# seed 11\n"));
    assert!(text.contains("\nt,energy,enstrophy,grad_linf,f_vprime\n"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "nuu = 0.1\n").unwrap();
    let o = szdet(&["simulate", "--config", "bad.cfg", "--out", "x.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nuu"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn malformed_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "nu = 0.1\nthis line has no equals\n").unwrap();
    let o = szdet(&["simulate", "--config", "bad.cfg", "--out", "x.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn unknown_pipeline_and_bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&szdet(&["pipeline", "no-such"], dir.path())), 2);
    assert_eq!(code(&szdet(&["sz-convergence", "--dim", "4", "--field", "smooth", "--out", "x"], dir.path())), 2);
}

#[test]
fn sz_convergence_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = szdet(
        &["sz-convergence", "--dim", "2", "--field", "smooth", "--levels", "3", "--out", "s.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "level,h,N,l2_error,running_slope");
    assert_eq!(body.len(), 4);
}

#[test]
fn quick_pipeline_passes_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = szdet(&["pipeline", "thresholds-sweep", "--out-dir", "out"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    assert!(dir.path().join("out/thresholds.csv").exists());
}

#[test]
fn gronwall_demo_reads_its_own_output_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = szdet(&["gronwall-demo", "--case", "exp", "--out", "g.csv"], dir.path());
    assert_eq!(code(&o), 0);
    // the demo table has t, alpha, beta columns, so it can be fed back
    let o = szdet(&["gronwall-demo", "--input", "g.csv", "--window", "10", "--out", "h.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
