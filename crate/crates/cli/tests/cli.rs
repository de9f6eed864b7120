use std::path::Path;
use std::process::{Command, Output};

fn rtga(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtga"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn rtga")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = rtga(dir, args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn small_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "run.toml",
        "[experiment]\nmode = \"sysid\"\nruns = 3\nsamples = 1500\n\n[algorithm]\nnames = [\"rtga\", \"proposed\"]\n",
    );
    ok(dir.path(), &["sysid", "--config", &cfg, "--out", "a/out.csv"]);
    ok(dir.path(), &["sysid", "--config", &cfg, "--out", "b/out.csv"]);
    for f in ["out.csv", "out.summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &["sysid", "--runs", "2", "--seed", "9", "--case", "2", "--algo", "gdtls,rtga"],
    );
    assert!(out.contains("case = 2"), "{out}");
    assert!(out.contains("runs = 2, seed = 9"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("sysid.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "iteration,gdtls,rtga");
    assert_eq!(csv.lines().count(), 8001);
}

#[test]
fn every_problem_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "bad.toml",
        "[experiment]\nmode = \"sysid\"\ncase = 9\nruns = 0\ntail_fraction = 2.0\n\n[censoring]\np_ce = 1.5\n",
    );
    let o = rtga(dir.path(), &["sysid", "--config", &cfg]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["case", "runs", "tail_fraction", "1.5"] {
        assert!(err.contains(needle), "missing {needle}: {err}");
    }
    assert!(!dir.path().join("sysid.csv").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "typo.toml", "[experiment]\nmode = \"sysid\"\nrunz = 3\n");
    let o = rtga(dir.path(), &["sysid", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("runz"));
}

#[test]
fn missing_asset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "aec.toml",
        "[experiment]\nmode = \"aec\"\nruns = 1\n\n[aec]\nfar_end = \"nowhere.wav\"\n",
    );
    let o = rtga(dir.path(), &["aec", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.wav"));
}

#[test]
fn tracking_and_aec_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["tracking", "--runs", "1", "--algo", "proposed", "--window", "100"]);
    assert!(out.contains("[proposed"), "{out}");
    assert!(dir.path().join("tracking.csv").exists());

    let cfg = small_config(
        dir.path(),
        "aec.toml",
        "[experiment]\nmode = \"aec\"\nruns = 1\nsamples = 1500\n\n[algorithm]\nnames = [\"gdtls\"]\n",
    );
    let out = ok(dir.path(), &["aec", "--config", &cfg, "--out", "echo.csv"]);
    assert!(out.contains("final_erle_db"), "{out}");
    assert!(out.contains("synthetic far-end"), "{out}");
    let erle = std::fs::read_to_string(dir.path().join("echo.erle.csv")).unwrap();
    assert_eq!(erle.lines().next().unwrap(), "iteration,gdtls");
}

#[test]
fn theory_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "theory.toml",
        "[experiment]\nmode = \"theory\"\nruns = 2\nsamples = 3000\norder = 4\n",
    );
    ok(dir.path(), &["theory", "--config", &cfg]);
    let t = std::fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    assert!(t.starts_with("setting,alpha,theory_msd_db,simulated_msd_db,gap_db\n"));

    let cfg = small_config(
        dir.path(),
        "sweep.toml",
        "[experiment]\nmode = \"sweep\"\nsamples = 500\n\n[algorithm]\nnames = [\"rtga\", \"gdtls\"]\n\n[sweep]\nkind = \"cost_surface\"\npoints = 5\n",
    );
    ok(dir.path(), &["sweep", "--config", &cfg]);
    let s = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(s.lines().next().unwrap(), "w1,w2,rtga,gdtls");
    assert_eq!(s.lines().count(), 26);
}
