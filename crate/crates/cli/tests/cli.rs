use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hdivflow::diagnostics::{read_vtk, RunRecord, Spectrum};
use hdivflow::solver::checkpoint::read_checkpoint;

fn hdivflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdivflow"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HDIVFLOW_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn lattice_at_time_zero_has_quarter_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdivflow(&["run", "--set", "case=lattice", "--set", "T=0", "--set", "mesh=8", "--out", "out", "--quiet"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let text = fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    let rows = RunRecord::read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    // K = 1/2 mean(sin^2 sin^2 + cos^2 cos^2) = 1/4.
    assert!((rows[0].kinetic_energy - 0.25).abs() < 1e-5, "{:?}", rows[0]);
    assert!(dir.path().join("out/summary.txt").exists());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdivflow(&["run", "--set", "case=lattice", "--set", "foo=1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
    assert_eq!(code(&hdivflow(&["run", "--set", "case=nothing"], dir.path())), 2);
    assert_eq!(code(&hdivflow(&["run"], dir.path())), 2);
    assert_eq!(code(&hdivflow(&["run", "--set", "case=lattice", "--set", "dt=-1"], dir.path())), 2);
}

#[test]
fn missing_files_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdivflow(&["run", "--set", "case=lattice", "--set", "mesh=missing.msh"], dir.path());
    assert_eq!(code(&o), 3);
    assert_eq!(code(&hdivflow(&["run", "--config", "missing.cfg"], dir.path())), 3);
    assert_eq!(code(&hdivflow(&["spectrum", "--checkpoint", "missing.chk"], dir.path())), 3);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "# lattice smoke run\ncase = lattice\nmesh = 4\nT = 1\n").unwrap();
    let o = hdivflow(&["info", "--config", "c.cfg", "--set", "T=0.5"], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("T = 0.5") && out.contains("mesh = structured:4"), "{out}");
}

#[test]
fn runs_are_deterministic_and_reparseable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "run",
            "--set",
            "case=lattice",
            "--set",
            "mesh=4",
            "--set",
            "dt=0.02",
            "--set",
            "T=0.06",
            "--set",
            "spectrum_times=0.04",
            "--set",
            "spectrum_grid=16",
            "--set",
            "snapshot_times=0,0.06",
            "--out",
            out,
            "--quiet",
        ]
    };
    for out in ["a", "b"] {
        let o = hdivflow(&args(out), dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<String> =
        fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        ["checkpoint.chk", "series.csv", "snapshot_000.vtk", "snapshot_001.vtk", "spectrum_t0.0400.csv", "summary.txt"]
    );
    for name in names.iter().filter(|n| *n != "summary.txt") {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }

    let read = |name: &str| fs::read_to_string(dir.path().join("a").join(name)).unwrap();
    let rows = RunRecord::read_csv(read("series.csv").as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1].kinetic_energy <= w[0].kinetic_energy));
    let (header, snaps) = read_checkpoint(read("checkpoint.chk").as_bytes()).unwrap();
    assert_eq!((header.case.as_str(), header.degree), ("lattice", 2));
    assert_eq!(snaps.len(), 2);
    let vtk = read_vtk(read("snapshot_001.vtk").as_bytes()).unwrap();
    assert!((vtk.t - 0.06).abs() < 1e-12);
    assert!(!Spectrum::bins_from_csv(&read("spectrum_t0.0400.csv")).unwrap().is_empty());
}

#[test]
fn spectrum_of_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdivflow(&["run", "--set", "case=lattice", "--set", "mesh=6", "--set", "T=0", "--out", "lat", "--quiet"], dir.path());
    assert_eq!(code(&o), 0);
    let o = hdivflow(
        &["spectrum", "--checkpoint", "lat/checkpoint.chk", "--grid", "32", "--set", "kappa_range=1,1", "--out", "lat"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    // A fit over one shell has no slope.
    assert!(out.contains("slope[1,1] = undefined"), "{out}");
    let defect: f64 = out.lines().find_map(|l| l.strip_prefix("parseval_defect = ")).expect("Parseval line").parse().unwrap();
    assert!(defect < 1e-10);
    assert!(dir.path().join("lat/spectrum_t0.0000.csv").exists());

    let o = hdivflow(
        &["run", "--set", "case=kelvin_helmholtz", "--set", "mesh=4", "--set", "k=1", "--set", "T=0", "--out", "kh", "--quiet"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = hdivflow(&["spectrum", "--checkpoint", "kh/checkpoint.chk"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("periodic"));
}

#[test]
fn convergence_exit_reflects_the_order_check() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "convergence",
        "--set",
        "case=manufactured_stokes",
        "--set",
        "meshes=2,4",
        "--set",
        "order_tolerance=1",
        "--out",
        "c",
        "--quiet",
    ];
    let o = hdivflow(&base, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("c/convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let mut strict = base.to_vec();
    strict.extend(["--set", "expected_order=10"]);
    assert_eq!(code(&hdivflow(&strict, dir.path())), 5);

    let mut single = base.to_vec();
    single.extend(["--set", "meshes=4"]);
    assert_eq!(code(&hdivflow(&single, dir.path())), 2);
}

#[test]
fn projection_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdivflow(&["project", "--set", "case=lattice", "--set", "mesh=4", "--out", "p"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("projection: K ="));
    let (_, snaps) = read_checkpoint(fs::read_to_string(dir.path().join("p/projection.chk")).unwrap().as_bytes()).unwrap();
    assert_eq!(snaps.len(), 1);
}
