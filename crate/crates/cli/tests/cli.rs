use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gtomo::formats::{read_json, DeviceJson, MatrixJson, ReconstructionJson, UnitaryJson};
use gtomo::{is_symplectic, ModeCount, SymplecticMatrix, Transmissivity};

fn gtomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtomo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_device(path: &Path, s: SymplecticMatrix, eta: f64) {
    let d = gtomo::DeviceModel::new(s, Transmissivity::new(eta).unwrap(), None).unwrap();
    fs::write(path, serde_json::to_string(&DeviceJson::from_device(&d)).unwrap()).unwrap();
}

fn dir_entries(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().count()
}

#[test]
fn generate_is_deterministic_and_symplectic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = gtomo(&["generate", "--kind", "symplectic", "--modes", "3", "--seed", "7", "--out", path_str(p)]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let doc: MatrixJson = read_json(&a).unwrap();
    assert_eq!(doc.n_modes, 3);
    assert!(is_symplectic(&doc.to_matrix().unwrap(), 1e-9).unwrap());
}

#[test]
fn generate_single_mode_unitary_has_unit_modulus() {
    let o = gtomo(&["generate", "--kind", "unitary", "--modes", "1", "--seed", "1"]);
    assert!(o.status.success());
    let doc: UnitaryJson = serde_json::from_str(&stdout(&o)).unwrap();
    let u = doc.to_complex().unwrap();
    assert_eq!(u.shape(), (1, 1));
    assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn generate_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    for args in [
        vec!["generate", "--kind", "symplectic", "--modes", "0"],
        vec!["generate", "--kind", "orthogonal", "--modes", "2"],
        vec!["generate", "--kind", "symplectic", "--modes", "2", "--r-max", "-1"],
    ] {
        let mut args = args;
        args.extend(["--out", path_str(&out)]);
        assert_eq!(gtomo(&args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(dir_entries(dir.path()), 0);
    let missing = dir.path().join("no/such/dir.json");
    let o = gtomo(&["generate", "--kind", "unitary", "--modes", "2", "--out", path_str(&missing)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reconstruct_identity_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("id.json");
    write_device(&dev, SymplecticMatrix::identity(ModeCount::new(2).unwrap()), 1.0);
    let out = dir.path().join("r.json");
    let o = gtomo(&["reconstruct", "--device", path_str(&dev), "--shots", "inf", "--out", path_str(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("F=0.000000e0"), "{}", stdout(&o));
    let rec: ReconstructionJson = read_json(&out).unwrap();
    assert_eq!(rec.shots, 0);
    assert_eq!(rec.eta_hat, 1.0);
    assert_eq!(rec.frobenius_vs_truth, Some(0.0));
}

#[test]
fn reconstruct_loss_flag_sets_transmissivity() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("d.json");
    let o = gtomo(&["generate", "--kind", "symplectic", "--modes", "3", "--seed", "2", "--out", path_str(&dev)]);
    assert!(o.status.success());
    let o = gtomo(&["reconstruct", "--device", path_str(&dev), "--loss", "0.5", "--seed", "4"]);
    assert!(o.status.success());
    let line = stdout(&o);
    let eta: f64 = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("eta_hat="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((eta - 0.5).abs() < 0.02, "{line}");
}

#[test]
fn reconstruct_is_reproducible_and_accepts_unitaries() {
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("u.json");
    assert!(gtomo(&["generate", "--kind", "unitary", "--modes", "2", "--seed", "5", "--out", path_str(&dev)])
        .status
        .success());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gtomo(&["reconstruct", "--device", path_str(&dev), "--scheme", "homodyne", "--seed", "9", "--out", path_str(&out)]);
        assert!(o.status.success());
        fs::read(out).unwrap()
    };
    assert_eq!(run("r1.json"), run("r2.json"));
}

#[test]
fn reconstruct_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let out = dir.path().join("r.json");
    let o = gtomo(&["reconstruct", "--device", path_str(&bad), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert!(!out.exists());

    let dev = dir.path().join("d.json");
    write_device(&dev, SymplecticMatrix::identity(ModeCount::new(1).unwrap()), 1.0);
    for extra in [["--shots", "0"], ["--loss", "1.0"], ["--amplitude", "-1"], ["--scheme", "photon"]] {
        let mut args = vec!["reconstruct", "--device", path_str(&dev), "--out", path_str(&out)];
        args.extend(extra);
        assert_eq!(gtomo(&args).status.code(), Some(1), "{extra:?}");
    }
    assert!(!out.exists());
}

#[test]
fn reconstruct_numerical_failure_exits_two() {
    // a single weak heterodyne shot usually leaves det(S̃) with the wrong sign
    let dir = tempfile::tempdir().unwrap();
    let dev = dir.path().join("d.json");
    write_device(&dev, SymplecticMatrix::identity(ModeCount::new(2).unwrap()), 1.0);
    let codes: Vec<i32> = (0..20)
        .map(|seed| {
            let seed = seed.to_string();
            gtomo(&["reconstruct", "--device", path_str(&dev), "--amplitude", "0.01", "--shots", "1", "--seed", &seed])
                .status
                .code()
                .unwrap()
        })
        .collect();
    assert!(codes.iter().all(|&c| c == 0 || c == 2));
    assert!(codes.contains(&2));
}

#[test]
fn experiment_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gtomo(&["experiment", "mode-scaling", "--modes", "2,4", "--reps", "4", "--seed", "3", "--out", path_str(&out)]);
        assert!(o.status.success());
        out
    };
    let a = run("a.csv");
    let b = run("b.csv");
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "experiment_id,n_modes,scheme,eta,amplitude,shots,trials,repetitions,f_mean,f_stderr,seed,dropped,probes");
    // 2 mode counts × 2 schemes × 2 losses
    assert_eq!(lines.len(), 1 + 8);
    let meta: serde_json::Value = read_json(&a.with_extension("meta.json")).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["experiment"], "mode-scaling");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["invocation"][0], "experiment");
}

#[test]
fn experiment_grid_follows_flags() {
    let o = gtomo(&["experiment", "unitary-scaling", "--modes", "2", "--schemes", "heterodyne", "--losses", "0", "--reps", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = gtomo(&["experiment", "intensity", "--amplitudes", "10,100", "--trials", "1", "--reps", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = gtomo(&["experiment", "phase-error", "--phi-max", "0", "--trials", "1", "--reps", "3"]);
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert_eq!(row.split(',').nth(8), Some("0.0"), "{row}");
}

#[test]
fn experiment_usage_errors_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = path_str(&out);
    for args in [
        vec!["experiment", "mode-scaling", "--reps", "0", "--out", o],
        vec!["experiment", "spectral-study", "--out", o],
        vec!["experiment", "intensity", "--modes", "2,3", "--out", o],
        vec!["experiment", "phase-error", "--phi-max", "1.0", "--out", o],
        vec!["experiment", "mode-scaling", "--losses", "1.5", "--out", o],
    ] {
        assert_eq!(gtomo(&args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(dir_entries(dir.path()), 0);
}

#[test]
fn detect_verdicts() {
    let o = gtomo(&["detect", "--gamma", "0", "--amplitudes", "1,2", "--shots", "inf"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().last(), Some("gaussian"));

    let o = gtomo(&["detect", "--gamma", "0.1", "--amplitudes", "1,2", "--shots", "inf"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("ratios: 0.42426 0.84853"), "{text}");
    assert_eq!(text.lines().last(), Some("non-gaussian"));

    let o = gtomo(&["detect", "--gamma", "0", "--amplitudes", "1,2", "--shots", "200", "--seed", "11"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().last(), Some("gaussian"));
}

#[test]
fn detect_needs_two_amplitudes() {
    let o = gtomo(&["detect", "--gamma", "0.1", "--amplitudes", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(gtomo(&["--help"]).status.code(), Some(0));
    assert_eq!(gtomo(&["--version"]).status.code(), Some(0));
    assert_eq!(gtomo(&[]).status.code(), Some(1));
    assert_eq!(gtomo(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gtomo(&["generate", "--kind", "symplectic"]).status.code(), Some(1));
}
