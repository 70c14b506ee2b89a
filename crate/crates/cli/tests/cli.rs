use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn cosym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosym"))
        .args(args)
        .env_remove("COSYM_EXAMPLES_DIR")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    scenarios_dir().join(name).display().to_string()
}

fn shipped() -> Vec<String> {
    let mut files: Vec<String> = fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| p.display().to_string())
        .collect();
    files.sort();
    files
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

/// Column of a CSV file by header name.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let index = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader
        .records()
        .map(|r| r.unwrap()[index].parse().unwrap())
        .collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn every_shipped_scenario_validates_and_simulates() {
    let files = shipped();
    assert!(files.len() >= 8);
    let mut args = vec!["validate"];
    args.extend(files.iter().map(String::as_str));
    let out = cosym(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for line in stdout(&out).lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["valid"], true);
    }

    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().display().to_string();
    let mut args = vec!["simulate", "--jobs", "4", "--out", &out_dir];
    args.extend(files.iter().map(String::as_str));
    let out = cosym(&args);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    for f in &files {
        let stem = Path::new(f).file_stem().unwrap().to_string_lossy().into_owned();
        let report: toml::Table = fs::read_to_string(dir.path().join(format!("{stem}.report.toml")))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(report["passed"].as_bool(), Some(true), "{stem}");
    }
}

#[test]
fn damped_oscillator_entropy_column_is_monotone() {
    let dir = TempDir::new().unwrap();
    let out = cosym(&["simulate", "--out", &dir.path().display().to_string(), &scenario("damped-oscillator.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let csv = dir.path().join("damped-oscillator.csv");
    let s = column(&csv, "S");
    assert_eq!(s.len(), 10_001);
    assert!(s.windows(2).all(|w| w[1] >= w[0]));
    let h = column(&csv, "H");
    assert!(h.iter().all(|v| (v - h[0]).abs() <= 1e-7));
    let header = fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,q,p,S,H,"));
    let rest: Vec<&str> = header.split(',').skip(5).collect();
    let mut sorted = rest.clone();
    sorted.sort();
    assert_eq!(rest, sorted);
}

#[test]
fn ports_closed_open_system_matches_closed_system() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = cosym(&[
        "simulate",
        "--out",
        &out_dir,
        &scenario("simple-reference.toml"),
        &scenario("open-ports-closed.toml"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["q", "p", "S"] {
        let a = column(&dir.path().join("simple-reference.csv"), name);
        let b = column(&dir.path().join("open-ports-closed.csv"), name);
        assert_eq!(a.len(), b.len());
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8, "{name}: {gap}");
    }
}

#[test]
fn non_simple_report_shows_matter_conservation() {
    let dir = TempDir::new().unwrap();
    let out = cosym(&["simulate", "--out", &dir.path().display().to_string(), &scenario("fourier-two-compartment.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let report: toml::Table = fs::read_to_string(dir.path().join("fourier-two-compartment.report.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let invariants = report["invariants"].as_table().unwrap();
    assert_eq!(invariants["matter_conservation"]["passed"].as_bool(), Some(true));
    assert_eq!(invariants["gauge"]["passed"].as_bool(), Some(true));
}

#[test]
fn hamiltonian_depending_on_displacement_is_rejected() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(scenarios_dir().join("mass-transfer.toml"))
        .unwrap()
        .replace("N2^2/(2*c2)\"", "N2^2/(2*c2) + W1\"");
    let path = write(dir.path(), "bad.toml", &text);
    let out = cosym(&["validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(record["valid"], false);
    let message = record["diagnostics"][0]["message"].as_str().unwrap();
    assert!(message.contains("independent of `W1`"), "{message}");
}

#[test]
fn both_flux_orientations_are_rejected() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(scenarios_dir().join("mass-transfer.toml")).unwrap().replace(
        "matter = [{ from = 1, to = 2, expr = \"k*(N1 - N2/c2)\" }]",
        "matter = [{ from = 1, to = 2, expr = \"k\" }, { from = 2, to = 1, expr = \"-k\" }]",
    );
    let path = write(dir.path(), "bad.toml", &text);
    let out = cosym(&["validate", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("only one orientation"));
    // simulate refuses the same file with the same code
    let out = cosym(&["simulate", "--out", &dir.path().display().to_string(), &path]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_files_are_invalid() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "broken.toml", "[system\nclass = 1");
    assert_eq!(cosym(&["validate", &path]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml").display().to_string();
    assert_eq!(cosym(&["validate", &missing]).status.code(), Some(2));
}

#[test]
fn legendre_check_gaps() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().display().to_string();
    for (file, bound) in [("lagrangian-quadratic.toml", 1e-8), ("lagrangian-cosh.toml", 1e-6)] {
        let out = cosym(&["legendre-check", "--out", &out_dir, &scenario(file)]);
        assert_eq!(out.status.code(), Some(0), "{file}");
        let stem = file.trim_end_matches(".toml");
        let report: toml::Table = fs::read_to_string(dir.path().join(format!("{stem}.legendre.toml")))
            .unwrap()
            .parse()
            .unwrap();
        let gap = report["trajectory_gap"].as_float().unwrap();
        assert!(gap <= bound, "{file}: {gap}");
        assert!(report["transport_residual"].as_float().unwrap() <= 1e-8);
    }
    // a tolerance below the achieved gap fails the check
    let out = cosym(&["legendre-check", "--tolerance", "1e-16", "--out", &out_dir, &scenario("lagrangian-cosh.toml")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn quartic_kinetic_term_exits_singular() {
    let dir = TempDir::new().unwrap();
    let path = write(
        dir.path(),
        "quartic.toml",
        r#"
[system]
class = "simple-closed"
n = 1
lagrangian = "qdot^4 - q^2/2 - S"
[initial]
state = { q = 0.3, qdot = 0.0, S = 0.0 }
"#,
    );
    let out = cosym(&["legendre-check", "--out", &dir.path().display().to_string(), &path]);
    assert_eq!(out.status.code(), Some(4));
    // the file is statically valid
    assert_eq!(cosym(&["validate", &path]).status.code(), Some(0));
}

#[test]
fn degeneracy_halts_with_partial_output() {
    let dir = TempDir::new().unwrap();
    let path = write(
        dir.path(),
        "cold.toml",
        r#"
name = "cold"
[system]
class = "simple-closed"
n = 1
hamiltonian = "p^2/2 + q*S"
[initial]
state = { q = 0.5, p = 0.0, S = 1.0 }
[integrator]
dt = 0.125
t_end = 3.0
"#,
    );
    let out = cosym(&["simulate", "--out", &dir.path().display().to_string(), &path]);
    assert_eq!(out.status.code(), Some(3));
    let t = column(&dir.path().join("cold.csv"), "t");
    assert!(!t.is_empty() && *t.last().unwrap() <= 1.0);
    let report = fs::read_to_string(dir.path().join("cold.report.toml")).unwrap();
    assert!(report.contains("halted"));
}

#[test]
fn outputs_are_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(scenarios_dir().join("contact-friction.toml"))
        .unwrap()
        .replace("S = -1.0 }", "S = -1.0 }\nperturbation = 0.05")
        .replace("t_end = 5.0", "t_end = 1.0");
    let path = write(dir.path(), "jitter.toml", &text);
    let run = |seed: &str, sub: &str, jobs: &str| {
        let out = dir.path().join(sub);
        let o = cosym(&["simulate", "--seed", seed, "--jobs", jobs, "--out", &out.display().to_string(), &path]);
        assert_eq!(o.status.code(), Some(0));
        (
            fs::read(out.join("contact-friction.csv")).unwrap(),
            fs::read(out.join("contact-friction.report.toml")).unwrap(),
        )
    };
    let a = run("7", "a", "1");
    let b = run("7", "b", "3");
    let c = run("8", "c", "1");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn examples_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    fs::copy(scenarios_dir().join("damped-oscillator.toml"), dir.path().join("only-one.toml")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cosym"))
        .arg("list-examples")
        .env("COSYM_EXAMPLES_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("only-one.toml"));
    assert!(!text.contains("mass-transfer"));

    // bare names resolve against the same directory
    let out = Command::new(env!("CARGO_BIN_EXE_cosym"))
        .args(["validate", "only-one"])
        .env("COSYM_EXAMPLES_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let out = cosym(&["list-examples"]);
    assert!(stdout(&out).contains("fourier-two-compartment.toml"));
}
