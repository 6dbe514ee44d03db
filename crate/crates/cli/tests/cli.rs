use std::path::Path;
use std::process::Command;

use relhartree_cli::profile::load_profile;
use relhartree_cli::run;

const SMALL: &[&str] = &["--grid-n", "1024", "--grid-radius", "40"];

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("relhartree").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn with_small<'a>(args: &[&'a str], dir: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(SMALL);
    v.extend_from_slice(&["--out", dir, "--no-cache"]);
    v
}

#[test]
fn groundstate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, err) = run_args(&with_small(&["groundstate", "--kind", "energy", "--c", "inf"], d));
    assert_eq!(code, 0, "{out}{err}");
    let path = dir.path().join("groundstate-energy-cinf.prof");
    let rec = load_profile(&path).unwrap();
    let gs = rec.to_ground_state(1e-10).unwrap();
    assert!(gs.converged, "residual {}", gs.residual_l2);
    assert!((gs.profile.l2_norm() - 1.0).abs() < 1e-10);
    assert!((gs.level - rec.meta.level).abs() < 1e-12 * gs.level.abs());

    // warm start from the stored limit state at finite c
    let init = path.to_str().unwrap();
    let out_file = dir.path().join("c50.prof");
    let args = with_small(&["groundstate", "--c", "50", "--initial", init, "--output", out_file.to_str().unwrap()], d);
    let (code, out, err) = run_args(&args);
    assert_eq!(code, 0, "{out}{err}");
    assert!(load_profile(&out_file).unwrap().meta.level < rec.meta.level);
}

#[test]
fn verify_fast_passes() {
    let (code, out, err) = run_args(&["verify", "--suite", "fast"]);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}

#[test]
fn sweep_writes_reports_with_expected_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = with_small(&["sweep", "--kind", "energy", "--order", "1", "--c-range", "10:160:2", "--sobolev", "1"], d);
    let (code, out, err) = run_args(&args);
    assert_eq!(code, 0, "{out}{err}");
    for f in ["sweep-energy.csv", "sweep-energy-fits.csv", "sweep-energy.json", "sweep-energy.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fits = std::fs::read_to_string(dir.path().join("sweep-energy-fits.csv")).unwrap();
    let mut rows = fits.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "slope").unwrap();
    let r0 = rows.find(|r| r.starts_with("R0_H1,")).unwrap();
    let slope: f64 = r0.split(',').nth(col).unwrap().parse().unwrap();
    assert!((slope + 2.0).abs() < 0.1, "{slope}");
}

#[test]
fn failed_rate_expectation_exits_with_check_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    // the second correction is below round-off in H² on this grid
    let args = with_small(&["sweep", "--order", "2", "--c-range", "10:160:2", "--sobolev", "2", "--formats", "csv"], d);
    let (code, out, err) = run_args(&args);
    assert_eq!(code, 1, "{out}{err}");
    assert!(err.contains("error [check]"));
    assert!(out.contains("FAIL slope of R_2"));
    assert!(dir.path().join("sweep-energy.csv").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "kind = action\ngrid_n = 512\ngrid_radius = 30\norder = 1\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["expand", "--config", cfg.to_str().unwrap(), "--order", "2", "--out", d, "--no-cache"];
    let (code, out, err) = run_args(&args);
    assert_eq!(code, 0, "{out}{err}");
    let series = dir.path().join("series-action");
    assert!(series.join("f2.prof").exists());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(series.join("series.json")).unwrap()).unwrap();
    assert_eq!(meta["order"], 2);
    assert_eq!(meta["grid_n"], 512);
}

#[test]
fn error_categories_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();

    let (code, _, err) = run_args(&["frobnicate"]);
    assert_eq!(code, 2, "{err}");

    let (code, _, err) = run_args(&["groundstate", "--grid-n", "many"]);
    assert_eq!(code, 2);
    assert!(err.contains("grid_n"), "{err}");

    let (code, _, err) = run_args(&["sweep", "--c-values", "40,20"]);
    assert_eq!(code, 2);
    assert!(err.contains("increasing"), "{err}");

    let (code, _, err) = run_args(&["verify", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(code, 3, "{err}");

    // energy ground states do not exist for small c
    let (code, _, err) = run_args(&with_small(&["groundstate", "--c", "1"], d));
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("error [compute]"));
}

#[test]
fn bad_initial_profiles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, _) = run_args(&with_small(&["groundstate"], d));
    assert_eq!(code, 0);
    let good = dir.path().join("groundstate-energy-cinf.prof");

    let args = ["groundstate", "--grid-n", "512", "--initial", good.to_str().unwrap(), "--out", d];
    let (code, _, err) = run_args(&args);
    assert_eq!(code, 3);
    assert!(err.contains("grid mismatch"), "{err}");

    let bad = dir.path().join("bad.prof");
    let text = std::fs::read_to_string(&good).unwrap().replacen("e-2\n", "e-3\n", 1);
    std::fs::write(&bad, text).unwrap();
    let (code, _, err) = run_args(&with_small(&["groundstate", "--initial", bad.to_str().unwrap()], d));
    assert_eq!(code, 3);
    assert!(err.contains("hash mismatch"), "{err}");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relhartree"))
}

#[test]
fn binary_uses_the_cache_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache-here");
    let out_dir = dir.path().join("out");
    let mut args = vec!["expand", "--order", "1", "--out", out_dir.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let status = |cmd: &mut Command| cmd.args(&args).env("RELHARTREE_CACHE_DIR", &cache).output().unwrap();
    let first = status(&mut binary());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).contains("fresh base"));
    let cached: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let second = status(&mut binary());
    assert!(String::from_utf8_lossy(&second.stdout).contains("cached base"));
    assert!(!Path::new(&out_dir.join("cache")).exists());
}

#[test]
fn binary_exit_codes() {
    let out = binary().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = binary().arg("nope").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = binary().args(["verify", "--suite", "slow"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("suite"));
}
