//! Command-line front end: validate, simulate and cross-check scenario files.

pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cosym_core::dynamics::{check_invariants, integrate, EvolutionSystem, IntegrationError, IntegrationFailure, IntegratorConfig, Trajectory};
use cosym_core::Error;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use config::{Diagnostic, Model, Prepared, Scenario};
use report::{LegendreReport, SimulationReport};

/// Environment variable naming the directory of example scenarios.
pub const EXAMPLES_ENV: &str = "COSYM_EXAMPLES_DIR";

/// Pointwise bound reported for the transport identity in `legendre-check`.
pub const TRANSPORT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "cosym", version, about = "Simulate thermodynamic systems on partially cosymplectic manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check scenario files without integrating them; prints one JSON line per file.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrate scenarios, write a CSV time series and a TOML invariant report for each.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare a Lagrangian scenario with its Legendre-transformed Hamiltonian counterpart.
    LegendreCheck {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Largest allowed gap between the two trajectories (default: the
        /// scenario's `[legendre] tolerance`, 1e-6 unless set).
        #[arg(long)]
        tolerance: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List the shipped example scenarios.
    ListExamples,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for initial-state perturbations and sampled states.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of scenario files processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Process outcome, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    /// The run completed but a check did not pass.
    Failed = 1,
    InvalidConfig = 2,
    IntegrationFailure = 3,
    SingularLegendre = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Failed => "fail",
            Status::InvalidConfig => "invalid-config",
            Status::IntegrationFailure => "integration-failure",
            Status::SingularLegendre => "singular-legendre",
        }
    }

    fn of_error(error: &Error) -> Status {
        match error {
            Error::SingularLegendre { .. } | Error::NewtonDivergence { .. } => Status::SingularLegendre,
            _ => Status::IntegrationFailure,
        }
    }

    fn of_integration(error: &IntegrationError) -> Status {
        match error {
            IntegrationError::Field { error, .. } => Status::of_error(error),
            IntegrationError::InvalidConfig(_) => Status::InvalidConfig,
            _ => Status::IntegrationFailure,
        }
    }
}

/// What one scenario produced: its status and the text for each stream.
#[derive(Debug, Default)]
struct JobOutput {
    status: Option<Status>,
    stdout: String,
    stderr: String,
}

impl JobOutput {
    fn status(&self) -> Status {
        self.status.unwrap_or(Status::Pass)
    }
}

/// The directory `list-examples` reads and bare scenario names resolve against.
pub fn examples_dir() -> PathBuf {
    match std::env::var_os(EXAMPLES_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios"),
    }
}

/// A path as given, or an example scenario of that name.
fn resolve(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let dir = examples_dir();
    let direct = dir.join(path);
    if direct.exists() {
        return direct;
    }
    let with_ext = dir.join(path).with_extension("toml");
    if with_ext.exists() {
        return with_ext;
    }
    path.to_path_buf()
}

pub fn run(cli: Cli) -> ExitCode {
    let status = match cli.command {
        Command::Validate { scenarios, run } => fan_out(&scenarios, &run, |p| validate(p, &run)),
        Command::Simulate { scenarios, run } => fan_out(&scenarios, &run, |p| simulate(p, &run)),
        Command::LegendreCheck {
            scenarios,
            tolerance,
            run,
        } => {
            if let Some(t) = tolerance.filter(|t| !(t.is_finite() && *t > 0.0)) {
                eprintln!("--tolerance must be positive, got {t}");
                return ExitCode::from(Status::InvalidConfig.code());
            }
            fan_out(&scenarios, &run, |p| legendre_check(p, tolerance, &run))
        }
        Command::ListExamples => list_examples(),
    };
    ExitCode::from(status.code())
}

fn fan_out<F>(paths: &[PathBuf], run: &RunArgs, job: F) -> Status
where
    F: Fn(&Path) -> JobOutput + Sync,
{
    let work = || paths.par_iter().map(|p| job(&resolve(p))).collect::<Vec<_>>();
    let outputs = match rayon::ThreadPoolBuilder::new().num_threads(run.jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return Status::IntegrationFailure;
        }
    };
    let mut worst = Status::Pass;
    for out in outputs {
        print!("{}", out.stdout);
        eprint!("{}", out.stderr);
        worst = worst.max(out.status());
    }
    worst
}

#[derive(Serialize)]
struct ValidationRecord<'a> {
    file: String,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    diagnostics: Vec<Diagnostic>,
}

fn load_and_prepare(path: &Path, seed: u64) -> Result<(Scenario, Prepared), Vec<Diagnostic>> {
    let scenario = Scenario::load(path)?;
    let prepared = scenario.prepare(seed)?;
    Ok((scenario, prepared))
}

fn diagnostics_json(path: &Path, diagnostics: Vec<Diagnostic>) -> String {
    let record = ValidationRecord {
        file: path.display().to_string(),
        valid: false,
        scenario: None,
        class: None,
        dimension: None,
        diagnostics,
    };
    serde_json::to_string(&record).expect("diagnostics serialize") + "\n"
}

fn validate(path: &Path, run: &RunArgs) -> JobOutput {
    let mut out = JobOutput::default();
    match load_and_prepare(path, run.seed) {
        Ok((_, prepared)) => {
            let record = ValidationRecord {
                file: path.display().to_string(),
                valid: true,
                scenario: Some(prepared.name.clone()),
                class: Some(prepared.model.class().name()),
                dimension: Some(prepared.model.chart().dim()),
                diagnostics: Vec::new(),
            };
            out.stdout = serde_json::to_string(&record).expect("record serializes") + "\n";
        }
        Err(diagnostics) => {
            out.stdout = diagnostics_json(path, diagnostics);
            out.status = Some(Status::InvalidConfig);
        }
    }
    out
}

fn system_of(model: &Model) -> &dyn EvolutionSystem {
    match model {
        Model::Hamiltonian(s) => s,
        Model::Lagrangian(l) => l.as_ref(),
    }
}

fn write_file(path: &Path, write: impl FnOnce(fs::File) -> Result<(), String>) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let file = fs::File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    write(file).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn simulate(path: &Path, run: &RunArgs) -> JobOutput {
    let mut out = JobOutput::default();
    let (scenario, prepared) = match load_and_prepare(path, run.seed) {
        Ok(x) => x,
        Err(diagnostics) => {
            out.stderr = diagnostics_json(path, diagnostics);
            out.status = Some(Status::InvalidConfig);
            return out;
        }
    };
    let sys = system_of(&prepared.model);
    let (traj, failure) = match integrate(sys, &prepared.initial, &prepared.integrator) {
        Ok(t) => (t, None),
        Err(IntegrationFailure { error, partial }) => (partial, Some(error)),
    };
    let invariants = check_invariants(&traj, sys, &prepared.tolerances);
    let status = match (&failure, &traj.halt) {
        (Some(e), _) => Status::of_integration(e),
        (None, Some(_)) => Status::IntegrationFailure,
        (None, None) if invariants.passed() => Status::Pass,
        (None, None) => Status::Failed,
    };
    let mut summary = SimulationReport {
        scenario: prepared.name.clone(),
        class: prepared.model.class().name().to_string(),
        model: match prepared.model {
            Model::Hamiltonian(_) => "hamiltonian".into(),
            Model::Lagrangian(_) => "lagrangian".into(),
        },
        status: status.label().into(),
        passed: status == Status::Pass,
        scheme: prepared.integrator.scheme.to_string(),
        steps: traj.len(),
        t_final: traj.times.last().copied().unwrap_or(0.0),
        halted: traj.halt.as_ref().map(|h| format!("t = {}: {}", h.time, h.reason)),
        error: failure.as_ref().map(|e| e.to_string()),
        failures: Vec::new(),
        evaluation_errors: Vec::new(),
        info: Default::default(),
        invariants: Default::default(),
    };
    summary.fill_invariants(&invariants);

    let csv_name = scenario.config.output.csv.clone().unwrap_or(format!("{}.csv", prepared.name));
    let report_name = scenario
        .config
        .output
        .report
        .clone()
        .unwrap_or(format!("{}.report.toml", prepared.name));
    let csv_path = run.out.join(csv_name);
    let report_path = run.out.join(report_name);
    let written = write_file(&csv_path, |f| {
        report::write_csv(f, &traj, prepared.model.energy_label()).map_err(|e| e.to_string())
    })
    .and_then(|_| {
        write_file(&report_path, |mut f| {
            use std::io::Write;
            f.write_all(report::to_toml(&summary).as_bytes()).map_err(|e| e.to_string())
        })
    });
    if let Err(e) = written {
        out.stderr = format!("{}: {e}\n", prepared.name);
        out.status = Some(Status::IntegrationFailure);
        return out;
    }
    out.stdout = format!(
        "{}: {} ({} steps, t = {}) -> {}, {}\n",
        prepared.name,
        status.label(),
        traj.len(),
        summary.t_final,
        csv_path.display(),
        report_path.display()
    );
    if let Some(e) = &summary.error {
        out.stderr = format!("{}: {e}\n", prepared.name);
    } else if let Some(h) = &summary.halted {
        out.stderr = format!("{}: halted at {h}\n", prepared.name);
    } else if !invariants.passed() {
        out.stderr = format!("{}: failed invariants: {}\n", prepared.name, invariants.failures.join(", "));
    }
    out.status = Some(status);
    out
}

/// Largest `|Leg(v_i) - y_i|` over the common time grid, with its time.
fn trajectory_gap(
    lag: &cosym_core::legendre::LagrangianSystem,
    lt: &Trajectory,
    ht: &Trajectory,
) -> Result<(f64, f64), Error> {
    let mut gap = (0.0, 0.0);
    for ((v, y), t) in lt.states.iter().zip(&ht.states).zip(&lt.times) {
        let d = (lag.legendre_forward(v)? - y).amax();
        if d > gap.0 || d.is_nan() {
            gap = (if d.is_nan() { f64::INFINITY } else { d }, *t);
        }
    }
    if lt.len() != ht.len() {
        gap.0 = f64::INFINITY;
    }
    Ok(gap)
}

fn legendre_check(path: &Path, tolerance: Option<f64>, run: &RunArgs) -> JobOutput {
    let mut out = JobOutput::default();
    let (scenario, prepared) = match load_and_prepare(path, run.seed) {
        Ok(x) => x,
        Err(diagnostics) => {
            out.stderr = diagnostics_json(path, diagnostics);
            out.status = Some(Status::InvalidConfig);
            return out;
        }
    };
    let Model::Lagrangian(lag) = &prepared.model else {
        out.stderr = diagnostics_json(
            path,
            vec![Diagnostic {
                code: "model",
                message: "legendre-check needs a scenario with a `lagrangian`".into(),
            }],
        );
        out.status = Some(Status::InvalidConfig);
        return out;
    };
    let section = &scenario.config.legendre;
    let tolerance = tolerance.unwrap_or(section.tolerance);
    let cfg = IntegratorConfig::rk4(prepared.integrator.dt, prepared.integrator.t_end);
    let mut summary = LegendreReport {
        scenario: prepared.name.clone(),
        class: lag.class().name().into(),
        status: String::new(),
        passed: false,
        tolerance,
        trajectory_gap: None,
        gap_time: None,
        transport_residual: None,
        samples: section.samples,
        skipped_samples: 0,
        seed: run.seed,
        dt: cfg.dt,
        t_end: cfg.t_end,
        steps: 0,
        error: None,
    };

    let outcome = (|| -> Result<Status, (Status, String)> {
        let fail = |e: &Error| (Status::of_error(e), e.to_string());
        let ham = lag.hamiltonian_system().map_err(|e| fail(&e))?;
        let y0 = lag.legendre_forward(&prepared.initial).map_err(|e| fail(&e))?;

        let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
        let mut transport: f64 = 0.0;
        for _ in 0..section.samples {
            let v: DVector<f64> = prepared
                .initial
                .map(|x| x + rng.random_range(-section.radius..=section.radius));
            let residual = (|| -> Result<f64, Error> {
                let pushed = lag.jacobian(&v)? * lag.lagrangian_evolution_field(&v)?;
                let eh = ham.evolution_field(&lag.legendre_forward(&v)?)?;
                Ok((pushed - eh).amax())
            })();
            match residual {
                Ok(r) => transport = transport.max(r),
                Err(e) if e.is_degeneracy() => summary.skipped_samples += 1,
                Err(e) => return Err(fail(&e)),
            }
        }
        summary.transport_residual = Some(transport);

        let run_side = |sys: &dyn EvolutionSystem, x0: &DVector<f64>| -> Result<Trajectory, (Status, String)> {
            let traj = integrate(sys, x0, &cfg).map_err(|f| (Status::of_integration(&f.error), f.error.to_string()))?;
            match &traj.halt {
                Some(h) => Err((Status::IntegrationFailure, format!("halted at t = {}: {}", h.time, h.reason))),
                None => Ok(traj),
            }
        };
        let lt = run_side(lag.as_ref(), &prepared.initial)?;
        let ht = run_side(&ham, &y0)?;
        summary.steps = lt.len();
        let (gap, at) = trajectory_gap(lag, &lt, &ht).map_err(|e| fail(&e))?;
        summary.trajectory_gap = Some(gap);
        summary.gap_time = Some(at);
        Ok(if gap <= tolerance { Status::Pass } else { Status::Failed })
    })();

    let status = match outcome {
        Ok(s) => s,
        Err((s, message)) => {
            summary.error = Some(message);
            s
        }
    };
    summary.status = status.label().into();
    summary.passed = status == Status::Pass;
    let text = report::to_toml(&summary);
    let report_path = run.out.join(format!("{}.legendre.toml", prepared.name));
    if let Err(e) = write_file(&report_path, |mut f| {
        use std::io::Write;
        f.write_all(text.as_bytes()).map_err(|e| e.to_string())
    }) {
        out.stderr = format!("{}: {e}\n", prepared.name);
        out.status = Some(Status::IntegrationFailure);
        return out;
    }
    out.stdout = format!("# {}\n{text}\n", report_path.display());
    if let Some(e) = &summary.error {
        out.stderr = format!("{}: {e}\n", prepared.name);
    }
    out.status = Some(status);
    out
}

fn list_examples() -> Status {
    let dir = examples_dir();
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("cannot read example directory {}: {e}", dir.display());
            return Status::InvalidConfig;
        }
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    println!("# {}", dir.display());
    for p in paths {
        let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        match Scenario::load(&p) {
            Ok(s) => {
                let kind = if s.config.system.lagrangian.is_some() { "lagrangian" } else { "hamiltonian" };
                println!(
                    "{file:<32} {:<14} {kind:<12} {}",
                    s.config.system.class, s.config.description
                );
            }
            Err(d) => println!("{file:<32} (unreadable: {})", d[0].message),
        }
    }
    Status::Pass
}
