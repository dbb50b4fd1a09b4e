use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn holoscope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoscope"))
        .current_dir(dir)
        .env("HOLOSCOPE_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z2.map"), "num = [0, 0, 1]\n").unwrap();
    fs::write(dir.path().join("z4.map"), "num = [0, 0, 0, 0, 1]\n").unwrap();
    fs::write(dir.path().join("cheb.map"), "num = [[-2, 0], 0, [1, 0]]\nden = [1]\n").unwrap();
    dir
}

#[test]
fn green_of_square_map_at_two() {
    let dir = workspace();
    let o = holoscope(dir.path(), &["green", "--map", "z2.map", "--z", "2,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0.693147");
}

#[test]
fn green_accepts_negative_coordinates() {
    let dir = workspace();
    let o = holoscope(dir.path(), &["green", "--map", "cheb.map", "--z", "-3,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // G(-3) = log((3 + sqrt 5) / 2) for z^2 - 2
    let expected = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let got: f64 = stdout(&o).trim().parse().unwrap();
    assert!((got - expected).abs() < 1e-6);
}

#[test]
fn correspond_report_for_square_and_fourth_power() {
    let dir = workspace();
    let o = holoscope(
        dir.path(),
        &[
            "correspond", "--map1", "z2.map", "--map2", "z4.map", "--p1", "1,0", "--p2", "1,0", "--amax", "4", "--bmax", "4",
            "--out", "report.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let relations = report["relations"].as_array().unwrap();
    let primary = relations
        .iter()
        .find(|r| r["a"] == 2 && r["b"] == 1 && r["ell"] == 1)
        .expect("relation (2,1,1)");
    assert_eq!(primary["primitive"], true);
    assert_eq!(primary["degree_check"], true);
    let curves = report["curves"].as_array().unwrap();
    let parabola = curves.iter().find(|c| c["curve"] == "y - x^2").expect("curve y - x^2");
    assert!(parabola["fit_residual"].as_f64().unwrap() < 1e-8);
    assert!(parabola["invariance_residual"].as_f64().unwrap() < 1e-8);
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn malformed_map_names_the_key() {
    let dir = workspace();
    fs::write(dir.path().join("bad.map"), "num = [0, \"one\", 1]\n").unwrap();
    let o = holoscope(dir.path(), &["green", "--map", "bad.map", "--z", "2,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`num`"), "{}", stderr(&o));

    fs::write(dir.path().join("typo.map"), "numer = [0, 0, 1]\n").unwrap();
    let o = holoscope(dir.path(), &["green", "--map", "typo.map", "--z", "2,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`num`"), "{}", stderr(&o));
}

#[test]
fn missing_input_and_bad_config_are_config_errors() {
    let dir = workspace();
    let o = holoscope(dir.path(), &["green", "--map", "absent.map", "--z", "2,0"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("run.toml"), "workflow = \"periodic\"\nmap = \"z2.map\"\n").unwrap();
    let o = holoscope(dir.path(), &["run", "run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("period"), "{}", stderr(&o));
}

#[test]
fn numeric_precondition_exits_three() {
    let dir = workspace();
    // walk started inside the filled Julia set
    let o = holoscope(
        dir.path(),
        &["harmonic", "--map", "z2.map", "--start", "0.5,0", "--n-walks", "10", "--out", "w.csv"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("w.csv").exists());
}

#[test]
fn config_file_run_matches_subcommand() {
    let dir = workspace();
    fs::write(
        dir.path().join("run.toml"),
        "workflow = \"mmem\"\nmap = \"z2.map\"\nn_points = 2000\nseed = 11\nout = \"a/mu.csv\"\n",
    )
    .unwrap();
    let o = holoscope(dir.path(), &["run", "run.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = holoscope(
        dir.path(),
        &["mmem", "--map", "z2.map", "--n-points", "2000", "--seed", "11", "--out", "b/mu.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let a = fs::read(dir.path().join("a/mu.csv")).unwrap();
    let b = fs::read(dir.path().join("b/mu.csv")).unwrap();
    assert_eq!(a, b);
    let sidecar: Value = serde_json::from_slice(&fs::read(dir.path().join("a/mu.csv.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 11);
    assert_eq!(sidecar["provenance"], "inverse-iteration");
    let manifest: Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/mu.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["parameter_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn manifest_hash_tracks_parameters() {
    let dir = workspace();
    let hash = |seed: &str, out: &str| -> String {
        let o = holoscope(dir.path(), &["mmem", "--map", "z2.map", "--n-points", "500", "--seed", seed, "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        let m: Value = serde_json::from_slice(&fs::read(dir.path().join(format!("{out}.manifest.json"))).unwrap()).unwrap();
        m["parameter_hash"].as_str().unwrap().to_owned()
    };
    let h1 = hash("1", "m.csv");
    let h2 = hash("1", "m.csv");
    let h3 = hash("2", "m.csv");
    assert_eq!(h1, h2);
    assert_ne!(h1, h3);
    // editing a referenced map file changes the hash too
    fs::write(dir.path().join("z2.map"), "num = [0, 0, 1.0]\nden = [1]\n").unwrap();
    assert_ne!(hash("1", "m.csv"), h1);
}

#[test]
fn blaschke_spectrum_csv() {
    let dir = workspace();
    fs::write(dir.path().join("zeros.toml"), "zeros = [[0, 0], [0, 0], [0, 0]]\n").unwrap();
    let o = holoscope(dir.path(), &["blaschke", "--zeros", "zeros.toml", "--nmax", "6", "--out", "spectrum.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("monomial-conjugate"), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("period,angle,exponent"));
    // fixed points of z^3 on the circle of primitive period <= 6: 3^6 - 1 minus non-primitive repeats
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().filter(|r| 6.0 % r[0] == 0.0).count(), 728);
    assert!(rows.iter().all(|r| (r[2] - 3f64.ln()).abs() < 1e-9));
}

#[test]
fn render_writes_ppm() {
    let dir = workspace();
    let o = holoscope(
        dir.path(),
        &["render", "--map", "z2.map", "--window=-2,2,-2,2", "--width", "20", "--height", "10", "--out", "z2.ppm"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(dir.path().join("z2.ppm")).unwrap();
    assert!(bytes.starts_with(b"P6\n20 10\n255\n"));
    assert_eq!(bytes.len(), b"P6\n20 10\n255\n".len() + 20 * 10 * 3);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = workspace();
    let o = Command::new(env!("CARGO_BIN_EXE_holoscope"))
        .current_dir(dir.path())
        .env("HOLOSCOPE_THREADS", "zero")
        .args(["green", "--map", "z2.map", "--z", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
