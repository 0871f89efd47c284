use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pnav_core::exec::Exec;
use pnav_core::report::{compare_policies, RunReport};
use pnav_core::sim::{write_csv, Calibration, Policy, RunOptions, RunOutput, ScenarioSpec};
use pnav_core::Error;

/// Power-aware navigation: calibration, scenario runs and policy comparison.
#[derive(Parser)]
#[command(name = "pnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the motor plant, motor network, embedded model and latency
    /// profile, and write them to a directory.
    Calibrate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run one scenario and write the metrics CSV plus a JSON summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides `run.policy` from the scenario file.
        #[arg(long)]
        policy: Option<Policy>,
        /// Overrides `run.seed` from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV; the summary goes next to it as `<stem>.summary.json`
        /// and coordinator decisions as `<stem>.decisions.jsonl`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "calib")]
        calib_dir: PathBuf,
    },
    /// Run several policies on the same scenario and seed and write a report.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated or repeated; defaults to all four.
        #[arg(long = "policy", value_delimiter = ',')]
        policies: Vec<Policy>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "calib")]
        calib_dir: PathBuf,
    },
}

/// Failure split by exit status: 2 for bad input or configuration, 1 when a
/// run itself fails.
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }

    fn from_run(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::UnsupportedFov(_) => Failure::config(e),
            _ => Failure::runtime(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate { out, seed } => calibrate(&out, seed),
        Command::Run {
            scenario,
            policy,
            seed,
            out,
            calib_dir,
        } => run(&scenario, policy, seed, &out, &calib_dir),
        Command::Compare {
            scenario,
            policies,
            seed,
            out,
            calib_dir,
        } => compare(&scenario, &policies, seed, &out, &calib_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn calibrate(out: &Path, seed: u64) -> Result<(), Failure> {
    let (calib, report) = Calibration::build(seed, Exec::default()).map_err(Failure::runtime)?;
    calib.write(out).map_err(Failure::runtime)?;
    println!("embedded model anchor residuals:");
    for r in &report.anchor_residuals {
        println!(
            "  gpu {:>5} MHz  anchor {:>6.2} W  predicted {:>6.2} W  residual {:+.2e} W",
            r.f_gpu,
            r.anchor_watts,
            r.predicted_watts,
            r.residual()
        );
    }
    println!(
        "motor model held-out R^2 {:.4}, relative RMSE {:.2}%",
        report.holdout_r2,
        100.0 * report.holdout_relative_rmse
    );
    for p in Calibration::paths(out) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn load_inputs(scenario: &Path, seed: Option<u64>, calib_dir: &Path) -> Result<(ScenarioSpec, Calibration), Failure> {
    let mut spec = ScenarioSpec::load(scenario).map_err(Failure::config)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let calib = Calibration::load(calib_dir).map_err(Failure::config)?;
    Ok((spec, calib))
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(Failure::runtime)?;
    writeln!(f)
        .and_then(|_| f.flush())
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn write_run(out: &Path, run: &RunOutput) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::runtime(format!("{}: {e}", out.display()));
    let mut csv = create(out)?;
    write_csv(&mut csv, &run.metrics)
        .and_then(|_| csv.flush())
        .map_err(io)?;
    write_json(&sibling(out, "summary.json"), &run.summary)?;
    let path = sibling(out, "decisions.jsonl");
    let mut f = create(&path)?;
    for d in &run.decisions {
        serde_json::to_writer(&mut f, d).map_err(Failure::runtime)?;
        writeln!(f).map_err(io)?;
    }
    f.flush().map_err(io)
}

fn run(
    scenario: &Path,
    policy: Option<Policy>,
    seed: Option<u64>,
    out: &Path,
    calib_dir: &Path,
) -> Result<(), Failure> {
    let (mut spec, calib) = load_inputs(scenario, seed, calib_dir)?;
    if let Some(policy) = policy {
        spec.policy = policy;
    }
    let run = pnav_core::sim::run_scenario(&spec, &calib).map_err(Failure::from_run)?;
    write_run(out, &run)?;
    let s = &run.summary;
    println!(
        "{} seed {}: {} goals in {:.2} s, energy {:.1} J, mean power {:.2} W, mean position error {:.4} m, collisions {}",
        s.policy,
        s.seed,
        s.finish_times.len(),
        s.total_time,
        s.total_energy,
        s.mean_power,
        s.mean_position_error,
        s.collisions
    );
    Ok(())
}

fn compare(
    scenario: &Path,
    policies: &[Policy],
    seed: Option<u64>,
    out: &Path,
    calib_dir: &Path,
) -> Result<(), Failure> {
    let policies = if policies.is_empty() {
        Policy::ALL.to_vec()
    } else {
        policies.to_vec()
    };
    if policies.len() < 2 {
        return Err(Failure::config("compare needs at least two policies"));
    }
    let (spec, calib) = load_inputs(scenario, seed, calib_dir)?;
    let runs = compare_policies(&spec, &calib, &policies, Exec::Sequential, RunOptions::default())
        .map_err(Failure::from_run)?;
    let report = RunReport::from_summaries(runs.into_iter().map(|r| r.summary).collect()).map_err(Failure::config)?;
    write_json(out, &report)?;

    println!(
        "{:<11} {:>11} {:>9} {:>11} {:>11} {:>9}",
        "policy", "energy J", "power W", "finish s", "pos err m", "min t_c s"
    );
    for s in &report.summaries {
        let tc = s.t_c.min.map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:<11} {:>11.1} {:>9.2} {:>11.2} {:>11.4} {:>9}",
            s.policy, s.total_energy, s.mean_power, s.mean_finish_time, s.mean_position_error, tc
        );
    }
    for r in &report.reductions {
        println!(
            "{} vs {}: energy -{:.1}%, power -{:.1}%",
            report.reference, r.baseline, r.energy_pct, r.power_pct
        );
    }
    Ok(())
}
