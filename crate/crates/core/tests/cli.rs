use std::path::Path;
use std::process::{Command, Output};

fn rcm(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rcm"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn gen_env_writes_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let cfg = write_config(tmp.path(), "env.txt", "law = pareto_mixture(8,8)\nradius = 4\n");
    let o = rcm(&["gen-env", "--out", out.to_str().unwrap(), "--seed", "5"], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(out.join("environment.txt")).unwrap();
    let echo = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("seed = 5") && echo.contains("command = gen-env"), "{echo}");

    let again = rcm(&["gen-env", "--out", out.to_str().unwrap(), "--seed", "5"], Some(&cfg));
    assert_eq!(code(&again), 2);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));

    let forced = rcm(&["gen-env", "--out", out.to_str().unwrap(), "--seed", "5", "--force"], Some(&cfg));
    assert_eq!(code(&forced), 0);
    assert_eq!(std::fs::read(out.join("environment.txt")).unwrap(), first);
}

#[test]
fn configuration_errors_exit_with_two_and_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let cfg = write_config(tmp.path(), "bad.txt", "# comment\nn = 16\ntrials = many\n");
    let o = rcm(&["verify", "oscillation", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("trials"), "{err}");

    let unknown = write_config(tmp.path(), "unknown.txt", "radius = 3\nflavour = mild\n");
    let o = rcm(&["gen-env", "--out", out.to_str().unwrap()], Some(&unknown));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let clash = write_config(tmp.path(), "clash.txt", "command = heat\n");
    assert_eq!(code(&rcm(&["walk", "--out", out.to_str().unwrap()], Some(&clash))), 2);
    assert_eq!(code(&rcm(&["verify", "no_such_experiment", "--out", out.to_str().unwrap()], None)), 2);
    assert_eq!(code(&rcm(&["frobnicate"], None)), 2);
    assert_eq!(code(&rcm(&["gen-env"], None)), 2);
}

#[test]
fn runtime_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("heat");
    let cfg = write_config(tmp.path(), "heat.txt", "law = file(/nonexistent/environment.txt)\nradius = 5\n");
    let o = rcm(&["heat", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn heat_and_walk_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let heat = tmp.path().join("heat");
    let cfg = write_config(tmp.path(), "heat.txt", "law = constant(1)\ndim = 1\nsource = 0\ntimes = 1\n");
    let o = rcm(&["heat", "--out", heat.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(heat.join("kernel.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("1") && l.split(',').nth(1) == Some("0")).unwrap();
    let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((value - 0.308_508_3).abs() < 1e-7);

    let walk = tmp.path().join("walk");
    let cfg = write_config(tmp.path(), "walk.txt", "law = constant(1)\nhorizon = 3\npaths = 4\n");
    let o = rcm(&["walk", "--out", walk.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(walk.join("paths.csv")).unwrap().lines().count() > 4);
}

#[test]
fn verify_and_report_share_the_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good");
    let cfg = write_config(tmp.path(), "good.txt", "mode = elliptic\nn = 16\ntrials = 2\n");
    let o = rcm(&["verify", "oscillation", "--out", good.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "trials.csv", "config.txt"] {
        assert!(good.join(f).exists(), "{f}");
    }
    let r = rcm(&["report", good.to_str().unwrap()], None);
    assert_eq!(code(&r), 0);
    assert!(String::from_utf8_lossy(&r.stdout).contains("pass"));

    // A vanishing free constant makes the Harnack floor the median itself.
    let bad = tmp.path().join("bad");
    let cfg = write_config(tmp.path(), "bad.txt", "law = pareto_mixture(8,8)\nn = 4\ntrials = 3\nc_free = 1e-9\n");
    let o = rcm(&["verify", "elliptic_harnack", "--out", bad.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(code(&rcm(&["report", bad.to_str().unwrap()], None)), 1);
    assert_eq!(code(&rcm(&["report", tmp.path().join("missing").to_str().unwrap()], None)), 3);
}
