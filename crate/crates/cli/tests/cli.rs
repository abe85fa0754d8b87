use std::path::Path;
use std::process::{Command, Output};

use percsim_cli::config::{ExperimentConfig, Overrides};
use percsim_cli::{run, Command as Sub};

const POISSON: &str = "[process]\nfamily = \"poisson\"\nintensity = 1.154701\n";

fn percsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percsim"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn unknown_keys_are_rejected_with_their_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &format!("seed = 1\nwindow = 10.0\nr_grd = [0.5]\n{POISSON}"),
    );
    let out = percsim(&["percolate", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("r_grd"));

    let nested = write(
        dir.path(),
        "nested.toml",
        "[process]\nfamily = \"poisson\"\nintensity = 1.0\nrate = 2.0\n",
    );
    let out = percsim(&["generate", "--config", &nested, "--window", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate"));
}

#[test]
fn sidecar_reproduces_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        &format!("reps = 4\nwindow = 10.0\nr_grid = {{ start = 0.4, stop = 0.6, step = 0.1 }}\n{POISSON}"),
    );
    let first = dir.path().join("a.csv").display().to_string();
    assert!(
        percsim(&["sweep-r", "--config", &cfg, "--seed", "9", "--out", &first])
            .status
            .success()
    );
    let sidecar = format!("{first}.config.toml");
    let second = dir.path().join("b.csv").display().to_string();
    assert!(
        percsim(&["sweep-r", "--config", &sidecar, "--out", &second])
            .status
            .success()
    );
    let (a, b) = (
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap(),
    );
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().skip(1).all(|l| l.contains(",9,")));
}

#[test]
fn seed_changes_output_and_hash_ignores_out() {
    let mut cfg = ExperimentConfig::parse(&format!(
        "reps = 3\nwindow = 8.0\nr_grid = [0.5]\n{POISSON}"
    ))
    .unwrap();
    let base = run(Sub::SweepR, cfg.clone()).unwrap();
    cfg.apply(&Overrides {
        out: Some("elsewhere.csv".into()),
        threads: Some(2),
        ..Default::default()
    });
    let moved = run(Sub::SweepR, cfg.clone()).unwrap();
    assert_eq!(base.csv, moved.csv);
    cfg.apply(&Overrides {
        seed: Some(2),
        ..Default::default()
    });
    assert_ne!(base.csv, run(Sub::SweepR, cfg).unwrap().csv);
}

#[test]
fn bounds_prints_bracket_and_table() {
    let out = percsim(&["bounds", "--lambda", "1.154701"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.164509"), "{text}");
    assert!(text.contains("1.835869"), "{text}");
    assert!(text.contains("config_hash"));
}

#[test]
fn figure2_curves_increase_in_r() {
    let cfg = ExperimentConfig::parse(
        "reps = 5\nwindow = 12.0\nr_grid = [0.3, 0.5, 0.7, 0.9]\n[figure]\nns = [1, 5]\n",
    )
    .unwrap();
    let art = run(Sub::Figure2, cfg).unwrap();
    let rows: Vec<Vec<String>> = art
        .csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 3 * 4);
    for curve in rows.chunks(4) {
        let frac: Vec<f64> = curve.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(frac.windows(2).all(|w| w[0] <= w[1]), "{frac:?}");
    }
    assert_eq!(rows.last().unwrap()[0], "poisson");
}
