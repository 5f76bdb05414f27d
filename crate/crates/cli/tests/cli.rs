use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lgreen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgreen")).args(args).output().expect("binary runs")
}

fn write_model(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn model(dir: &Path, n: usize, omega: f64, gamma1: f64) -> PathBuf {
    let json = format!(
        r#"{{"N": {n}, "omega": {omega:?}, "gamma1": {gamma1:?}, "gamma2": 1000.0, "Gamma1": 2000.0, "Gamma2": 98000.0}}"#
    );
    write_model(dir, &format!("n{n}_{omega}_{gamma1}.json"), &json)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows as floats, skipping the provenance and header lines.
fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(2).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn sweep_is_symmetric_in_detuning() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 50, 10.0, 0.01);
    let text = stdout(&lgreen(&["sweep", "--model", m.to_str().unwrap(), "--zeta-span=-3e5:3e5:41"]));
    assert!(text.starts_with("# provenance: command=sweep method=analytic config_sha256="));
    assert_eq!(text.lines().nth(1), Some("zeta_rad_s,iz_norm,iz2_norm,sz"));
    let r = rows(&text);
    assert_eq!(r.len(), 41);
    for i in 0..41 {
        for c in 1..4 {
            let (a, b) = (r[i][c], r[40 - i][c]);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "row {i} col {c}: {a} {b}");
        }
    }
}

#[test]
fn reduced_and_full_methods_agree_on_the_ensemble_size_they_share() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 1, 10.0, 0.01);
    let span = "--zeta-span=-1e5:1e5:5";
    let full = rows(&stdout(&lgreen(&["sweep", "--model", m.to_str().unwrap(), "--method", "full", span])));
    let reduced = rows(&stdout(&lgreen(&["sweep", "--model", m.to_str().unwrap(), "--method", "reduced", span])));
    for (f, r) in full.iter().zip(&reduced) {
        for c in 1..4 {
            assert!((f[c] - r[c]).abs() < 1e-9, "{f:?} {r:?}");
        }
    }
}

#[test]
fn undriven_ensemble_stays_unpolarized() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 20, 0.0, 0.01);
    for (method, tol) in [("analytic", 0.0), ("reduced", 1e-12)] {
        let r = rows(&stdout(&lgreen(&["sweep", "--model", m.to_str().unwrap(), "--method", method, "--zeta-span=-1e5:1e5:3"])));
        for row in r {
            assert!(row[1].abs() <= tol, "{method}: {row:?}");
        }
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 30, 10.0, 0.01);
    let out: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("run{i}.csv"));
            let o = lgreen(&["sweep", "--model", m.to_str().unwrap(), "--out", path.to_str().unwrap()]);
            assert!(o.status.success());
            std::fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(out[0], out[1]);
}

#[test]
fn malformed_configuration_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.csv");
    for (name, json) in [
        ("truncated.json", r#"{"N": 3, "omega": 1.0"#),
        ("unknown.json", r#"{"N": 3, "omega": 1.0, "gamma1": 1, "gamma2": 1, "Gamma1": 1, "Gamma2": 1, "extra": 1}"#),
        ("negative.json", r#"{"N": 3, "omega": 1.0, "gamma1": -1, "gamma2": 1, "Gamma1": 1, "Gamma2": 1}"#),
    ] {
        let m = write_model(dir.path(), name, json);
        let o = lgreen(&["sweep", "--model", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!out.exists(), "{name}");
    }
}

#[test]
fn size_limits_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let big = model(dir.path(), 21, 10.0, 0.01);
    assert_eq!(lgreen(&["poles", "--model", big.to_str().unwrap(), "--method", "pencil"]).status.code(), Some(2));
    let seven = model(dir.path(), 7, 10.0, 0.01);
    let o = lgreen(&["sweep", "--model", seven.to_str().unwrap(), "--method", "full", "--zeta-span=0:1:2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_spin_has_two_conjugate_pairs() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 1, 10.0, 0.01);
    let text = stdout(&lgreen(&["poles", "--model", m.to_str().unwrap()]));
    assert_eq!(text.lines().nth(1), Some("re_zeta_rad_s,im_zeta_rad_s,pair_index"));
    let r = rows(&text);
    assert_eq!(r.len(), 4);
    for pair in r.chunks(2) {
        assert_eq!(pair[0][0], pair[1][0]);
        assert_eq!(pair[0][1], -pair[1][1]);
    }
}

#[test]
fn pencil_finds_the_closed_form_poles_at_large_relaxation_ratio() {
    let dir = TempDir::new().unwrap();
    let m = model(dir.path(), 10, 0.1, 1e-6);
    let exact = rows(&stdout(&lgreen(&["poles", "--model", m.to_str().unwrap()])));
    let pencil = rows(&stdout(&lgreen(&["poles", "--model", m.to_str().unwrap(), "--method", "pencil"])));
    assert!(!pencil.is_empty());
    for p in &pencil {
        let nearest = exact
            .iter()
            .map(|e| ((p[0] - e[0]).hypot(p[1] - e[1])) / e[0].hypot(e[1]))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1e-6, "{p:?}: {nearest}");
    }
}

#[test]
fn relaxation_panel_has_its_columns() {
    let text = stdout(&lgreen(&["figure", "--id", "1d", "--n", "100", "--gamma-span", "1e2:1e6:5:log"]));
    assert!(text.contains("command=figure-1d method=recurrence"));
    assert_eq!(text.lines().nth(1), Some("gamma,sz,iz_norm"));
    assert_eq!(rows(&text).len(), 5);
}

#[test]
fn concentration_panel_has_a_column_pair_per_size() {
    let text = stdout(&lgreen(&["figure", "--id", "1c", "--n", "100,1000", "--xi-span", "1e-2:10:7:log"]));
    assert_eq!(
        text.lines().nth(1),
        Some("xi,total_polarization_n100,iz_norm_n100,total_polarization_n1000,iz_norm_n1000")
    );
    let r = rows(&text);
    assert_eq!(r.len(), 7);
    assert!(r.iter().all(|row| row.len() == 5 && row.iter().all(|x| x.is_finite())));
}

#[test]
fn green_verification_passes_for_two_spins() {
    let o = lgreen(&["verify", "--suite", "green", "--n", "2"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["n"], 2);
}
