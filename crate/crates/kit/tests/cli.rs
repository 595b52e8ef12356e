use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pile_kit::experiments::{FittedModel, CONVECTION_SPEC, POISSON_SPEC};
use pile_kit::output::{read_json, read_matrix, Manifest};
use pile_kit::spec::ProblemSpec;
use pile_core::operators::{identity, laplacian};
use pile_core::points::PointSet;

const SMALL: &str = "\
# sine bump on the unit square
domain 0 1 0 1
op laplacian
forcing -2*pi^2*sin(pi*x1)*sin(pi*x2)
bc x1- dirichlet = 0
bc x1+ dirichlet = 0
bc x2- dirichlet = 0
bc x2+ dirichlet = 0
truth sin(pi*x1)*sin(pi*x2)
kernel rbf h=0.3
temps gamma=0.0001 rho=0.0001 eta=1
quad m=8 boundary=6
obs layout=grid noise=0.01 seed=1
";

fn pile_kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pile-kit")).args(args).output().expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = pile_kit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn shipped_specs_round_trip() {
    for (text, params) in [(POISSON_SPEC, vec![]), (CONVECTION_SPEC, vec![("beta", 30.0)])] {
        let spec = ProblemSpec::parse_with(text, &params).unwrap();
        let again = ProblemSpec::parse(&spec.to_string()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.to_string(), again.to_string());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_spec(dir.path(), "bad.spec", "domain 0 1\nop (2) sin(\n");
    let out = pile_kit(&["score", "--spec", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = pile_kit(&["convection", "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--beta"));

    let missing = dir.path().join("absent.spec");
    assert_eq!(pile_kit(&["fit", "--spec", s(&missing)]).status.code(), Some(1));

    let spec = write_spec(dir.path(), "small.spec", SMALL);
    let out = pile_kit(&["sweep", "--spec", s(&spec), "--grid", "width=1,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_hash_tracks_the_spec_text() {
    let dir = tempfile::tempdir().unwrap();
    let spec_a = write_spec(dir.path(), "a.spec", SMALL);
    let spec_b = write_spec(dir.path(), "b.spec", &SMALL.replace("h=0.3", "h=0.35"));
    let hash = |spec: &Path, out: &str| {
        let out = dir.path().join(out);
        run_ok(&["score", "--spec", s(spec), "--out", s(&out)]);
        read_json::<Manifest>(&out.join("manifest.json")).unwrap().spec_sha256
    };
    let a1 = hash(&spec_a, "a1");
    let a2 = hash(&spec_a, "a2");
    let b = hash(&spec_b, "b");
    assert_eq!(a1, a2);
    assert_ne!(a1, b);
}

#[test]
fn saved_model_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "small.spec", SMALL);
    let out = dir.path().join("fit");
    run_ok(&["fit", "--spec", s(&spec), "--out", s(&out)]);

    let problem = ProblemSpec::parse(SMALL).unwrap();
    let model: FittedModel = read_json(&out.join("model.json")).unwrap();
    let gram = read_matrix(&out.join("gram.bin")).unwrap();
    assert_eq!(&gram, model.gram().unwrap().joint());

    let probes: Vec<[f64; 2]> = (0..100).map(|i| [(i as f64 * 0.618).fract(), (i as f64 * 0.414).fract()]).collect();
    let points = PointSet::from_points(2, &probes).unwrap();
    let values = model.predict(&identity(2), &points).unwrap();
    let reloaded: FittedModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
    assert_eq!(reloaded.predict(&identity(2), &points).unwrap(), values);
    assert_eq!(reloaded.predict(&laplacian(2), &points).unwrap(), model.predict(&laplacian(2), &points).unwrap());
    let truth = problem.truth.unwrap();
    for (p, v) in probes.iter().zip(&values) {
        assert!((v - truth.eval(p)).abs() < 0.05, "{p:?}: {v}");
    }

    let csv: String = std::iter::once("x1,x2".to_string())
        .chain(probes.iter().map(|p| format!("{},{}", p[0], p[1])))
        .collect::<Vec<_>>()
        .join("\n");
    let pts = write_spec(dir.path(), "points.csv", &csv);
    let pred = dir.path().join("pred.csv");
    run_ok(&["predict", "--model", s(&out.join("model.json")), "--points", s(&pts), "--out", s(&pred)]);
    let written: Vec<f64> = fs::read_to_string(&pred)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(written, values);
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "small.spec", SMALL);
    for name in ["one", "two"] {
        let out = dir.path().join(name);
        run_ok(&["sweep", "--spec", s(&spec), "--grid", "h=log:-1:0:4", "--grid", "rho=1e-6,1e-4", "--out", s(&out)]);
        run_ok(&["fit", "--spec", s(&spec), "--out", s(&out.join("fit"))]);
        run_ok(&["poisson", "--replicates", "2", "--out", s(&out.join("poisson"))]);
    }
    for sub in ["", "fit", "poisson"] {
        let one = read_dir_bytes(&dir.path().join("one").join(sub));
        let two = read_dir_bytes(&dir.path().join("two").join(sub));
        assert_eq!(one.len(), two.len());
        for ((na, a), (nb, b)) in one.iter().zip(&two) {
            assert_eq!(na, nb);
            assert!(a == b, "{sub}/{na} differs");
        }
    }
    let manifest: Manifest = read_json(&dir.path().join("one/poisson/manifest.json")).unwrap();
    assert_eq!(manifest.seeds, vec![0, 1]);
    assert!(manifest.files.contains(&"sweep_h.csv".to_string()));
}

#[test]
fn data_file_replaces_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "small.spec", SMALL);
    let mut csv = String::from("y,x2,x1\n");
    for i in 0..6 {
        for j in 0..6 {
            let (x, y) = ((i as f64 + 0.5) / 6.0, (j as f64 + 0.5) / 6.0);
            let f = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
            csv.push_str(&format!("{f},{y},{x}\n"));
        }
    }
    csv.push_str("NaN,0.5,0.5\n");
    let data = write_spec(dir.path(), "obs.csv", &csv);
    let out = dir.path().join("fit");
    let result = pile_kit(&["fit", "--spec", s(&spec), "--data", s(&data), "--out", s(&out)]);
    assert!(result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("dropped 1"));
    let model: FittedModel = read_json(&out.join("model.json")).unwrap();
    assert_eq!(model.observations.len(), 36);
}

#[test]
fn datafree_aligns_with_the_characteristic_direction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("df");
    // Without the initial-condition segment only the transport residual shapes the landscape.
    let interior_only: String = CONVECTION_SPEC.lines().filter(|l| !l.starts_with("bc ")).map(|l| format!("{l}\n")).collect();
    let spec = write_spec(dir.path(), "convection.spec", &interior_only);
    let result = pile_kit(&[
        "datafree", "--spec", s(&spec), "--beta", "0.5", "--grid", "theta=lin:-1.5:1.5:13", "--grid", "s=0.5,1", "--out", s(&out),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.starts_with("theta* = 0.5, s* = 0.5"), "{stdout}");
    let rows = fs::read_to_string(out.join("landscape.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 13 * 2);
}
