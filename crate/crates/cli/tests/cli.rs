use std::path::Path;
use std::process::{Command, Output};

fn gsync(args: &[&str], out: &Path, config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gsync"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(text) = config {
        let path = out.join("input.toml");
        std::fs::create_dir_all(out).unwrap();
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const CAT_ESN: &str = r#"
system.kind = "cat_map"
observation.kind = "sine_sum"
statemap.kind = "esn"
statemap.a = [[0.3, 0.0], [0.0, 0.3]]
statemap.c = [[0.5], [-0.25]]
region.1.lo = [-1.0, -1.0]
region.1.hi = [1.0, 1.0]
run.washout = 100
run.record = 400
"#;

#[test]
fn simulate_defaults_and_single_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsync(&["simulate"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(text.lines().any(|l| l == "t,u,v,w,obs"));
    assert!(text.starts_with("# tool: gsync"));
    assert_eq!(data_rows(&dir.path().join("trajectory.csv")).len(), 4001);
    assert!(dir.path().join("resolved_config.toml").is_file());

    let one = dir.path().join("one");
    let out = gsync(&["simulate"], &one, Some("run.steps = 1"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(data_rows(&one.join("trajectory.csv")).len(), 2);
}

#[test]
fn printed_sign_trajectory_differs_in_extent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(gsync(&["simulate"], &a, None).status.code(), Some(0));
    let out = gsync(&["simulate"], &b, Some("system.sign = \"as_printed\"\nrun.steps = 300"));
    // The printed sign makes u grow exponentially; either the run stops on a
    // non-finite value or the extent leaves the butterfly's box.
    match out.status.code() {
        Some(3) => {}
        Some(0) => {
            let max_u = data_rows(&b.join("trajectory.csv"))
                .iter()
                .map(|r| r[1].parse::<f64>().unwrap().abs())
                .fold(0.0, f64::max);
            assert!(max_u > 100.0, "max |u| = {max_u}");
        }
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsync(&["certify", "--require", "diff"], &dir.path().join("cat"), Some(CAT_ESN));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = data_rows(&dir.path().join("cat/certificates.csv"));
    assert_eq!(rows.len(), 1);

    let delay = r#"
system.kind = "torus_rotation"
system.angles = [0.3819660112501051]
statemap.kind = "linear_delay"
statemap.q = 1
region.1.lo = [-1.0, -1.0, -1.0]
region.1.hi = [1.0, 1.0, 1.0]
run.washout = 0
run.record = 200
"#;
    let out = gsync(&["certify"], &dir.path().join("delay"), Some(delay));
    assert_eq!(out.status.code(), Some(4));
    let report = std::fs::read_to_string(dir.path().join("delay/certificate_report.txt")).unwrap();
    assert!(report.contains("esp_ok: false"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsync(&["synchronize"], &dir.path().join("a"), Some("[region]\n"));
    assert_eq!(out.status.code(), Some(2));
    let out = gsync(&["simulate"], &dir.path().join("b"), Some("run.wahsout = 1"));
    assert_eq!(out.status.code(), Some(2));
    let out = gsync(&["simulate"], &dir.path().join("c"), Some("system.initial = [0.0, 1.0]"));
    assert_eq!(out.status.code(), Some(2));
    let missing = Command::new(env!("CARGO_BIN_EXE_gsync"))
        .args(["simulate", "--config", "/nonexistent/gsync.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn synchronize_both_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "region.1.center = [1.0, 1.0, 1.0]\nregion.1.half_width = 0.1\nregion.2.center = [-1.0, 1.0, 1.0]\nregion.2.half_width = 0.1";
    let out = gsync(&["synchronize", "--method", "both"], dir.path(), Some(cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for row in data_rows(&dir.path().join("agreement.csv")) {
        let sup: f64 = row[6].parse().unwrap();
        assert!(sup <= 1e-8, "{row:?}");
    }
    let v1 = data_rows(&dir.path().join("gs_V1_drive.csv"));
    let v2 = data_rows(&dir.path().join("gs_V2_drive.csv"));
    assert_eq!(v1.len(), 2000);
    let col = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    assert!(v1.iter().all(|r| (4..7).all(|i| (0.9..=1.1).contains(&col(r, i)))));
    assert!(v2.iter().all(|r| (-1.1..=-0.9).contains(&col(r, 4)) && (0.9..=1.1).contains(&col(r, 5))));
}

#[test]
fn diagnose_constant_map_has_zero_distances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
system.kind = "torus_rotation"
system.angles = [0.3819660112501051]
statemap.kind = "esn"
statemap.a = [[0.0, 0.0], [0.0, 0.0]]
statemap.c = [[0.0], [0.0]]
statemap.zeta = [0.25, -0.5]
statemap.squashing = "identity"
region.1.lo = [-1.0, -1.0]
region.1.hi = [1.0, 1.0]
run.washout = 10
run.record = 500
run.forgetting_trials = 5
"#;
    let out = gsync(&["diagnose"], dir.path(), Some(cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data_rows(&dir.path().join("esp.csv")).iter().all(|r| r[1] == "0"));
    assert!(data_rows(&dir.path().join("forgetting.csv")).iter().all(|r| r[1] == "0"));
}

#[test]
fn diagnose_torus_delay_reports_smooth_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
system.kind = "torus_rotation"
system.angles = [0.6180339887498949]
system.initial = [0.1]
observation.kind = "sine_sum"
statemap.kind = "linear_delay"
statemap.q = 3
region.1.lo = [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0]
region.1.hi = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
run.washout = 10
run.record = 3000
run.forgetting_suffixes = [5]
run.forgetting_trials = 3
"#;
    let out = gsync(&["diagnose"], dir.path(), Some(cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let row = &data_rows(&dir.path().join("holder.csv"))[0];
    let gamma: f64 = row[0].parse().unwrap();
    assert!((0.9..=1.1).contains(&gamma), "gamma = {gamma}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(gsync(&["diagnose", "--seed", "7"], d, Some(CAT_ESN)).status.code(), Some(0));
    }
    for f in ["esp.csv", "forgetting.csv", "slopes.csv", "holder.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(gsync(&["synchronize"], &a, Some(CAT_ESN)).status.code(), Some(0));
    let b = dir.path().join("b");
    let out = Command::new(env!("CARGO_BIN_EXE_gsync"))
        .args(["synchronize", "--config"])
        .arg(a.join("resolved_config.toml"))
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("gs_V1_drive.csv")).unwrap(),
        std::fs::read(b.join("gs_V1_drive.csv")).unwrap()
    );
}

#[test]
fn matrices_from_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path()).unwrap();
    std::fs::write(dir.path().join("a.csv"), "0.3,0\n0,0.3\n").unwrap();
    let cfg = CAT_ESN.replace("statemap.a = [[0.3, 0.0], [0.0, 0.3]]", "statemap.a_csv = \"a.csv\"");
    let out = gsync(&["certify", "--require", "diff"], dir.path(), Some(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
