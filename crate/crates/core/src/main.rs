use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eslqr::config::{ConfigError, RunConfig};
use eslqr::error_state::{compute_error, linearize, ErrorControl};
use eslqr::output;
use eslqr::riccati::lqr_gain;
use eslqr::trajectory::Trajectory;
use eslqr::verify;

const EXIT_CONFIG: u8 = 1;
const EXIT_SIM: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "eslqr", version, about = "Error-state LQR quadrotor tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write log.csv, summary.txt and SVG plots.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical self-check suites.
    Verify,
    /// Print A, B, K, P and the Riccati residual at the initial error.
    PrintGain { config: PathBuf },
}

/// Writes to stdout, ignoring a closed pipe (e.g. `eslqr verify | head`).
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn scenario_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn load(path: &Path) -> Result<(RunConfig, eslqr::sweep::Scenario), ConfigError> {
    let cfg = RunConfig::load(path)?;
    let scenario = cfg.scenario(scenario_name(path))?;
    Ok((cfg, scenario))
}

fn write(path: &Path, contents: &str) -> Result<(), u8> {
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_SIM
    })
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(), u8> {
    let (cfg, scenario) = load(config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let dir = out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        EXIT_SIM
    })?;

    let (log, failure) = match scenario.simulate() {
        Ok(log) => (log, None),
        Err(f) => (f.log, Some(f.error)),
    };
    if cfg.output.csv {
        write(
            &dir.join("log.csv"),
            &output::csv_string(&log, scenario.sim.outer_divisor),
        )?;
    }
    if let Some(e) = failure {
        eprintln!(
            "error: simulation aborted: {e}; partial log has {} rows",
            log.rows.len()
        );
        return Err(EXIT_SIM);
    }
    let metrics = scenario.metrics(&log).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_SIM
    })?;
    let summary = output::summary_string(
        &scenario.name,
        &log,
        &metrics,
        scenario.settle_threshold,
        scenario.window_start,
    );
    if cfg.output.summary {
        write(&dir.join("summary.txt"), &summary)?;
    }
    if cfg.output.svg {
        write(&dir.join("traj_xy.svg"), &output::trajectory_xy_svg(&log))?;
        write(&dir.join("error_norm.svg"), &output::error_norm_svg(&log))?;
    }
    if log.saturation_count() > 0 {
        log::warn!("thrust clamp active on {} rows", log.saturation_count());
    }
    emit(&summary);
    emit(&format!("\noutputs written to {}\n", dir.display()));
    Ok(())
}

fn verify_all() -> Result<(), u8> {
    let reports = verify::run_all();
    for r in &reports {
        emit(&r.to_string());
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        emit(&format!("all {} suites passed\n", reports.len()));
        Ok(())
    } else {
        emit(&format!("{failed} of {} suites failed\n", reports.len()));
        Err(EXIT_VERIFY)
    }
}

fn print_gain(config: &Path) -> Result<(), u8> {
    let (_, sc) = load(config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let sample = sc.trajectory.sample(0.0, &sc.params).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_SIM
    })?;
    let dx = compute_error(&sc.sim.initial.kinematic(), &sample.nominal);
    let sys = linearize(
        &dx,
        &ErrorControl::zero(),
        &sample.nominal.q.to_rotation_matrix(),
        sample.u_nominal.c,
        &sc.params,
    );
    let sol = lqr_gain(&sys, &sc.weights, sc.sim.regularization).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_SIM
    })?;
    let mut text = format!("initial error dx = {:?}\n", dx.to_vector().as_slice());
    text += &format!("A ={}B ={}K ={}P ={}", sys.a, sys.b, sol.k, sol.p);
    text += &format!("relative residual = {:.3e}\n", sol.residual);
    text += &format!("spectral abscissa (regularized A) = {:.6e}\n", sol.spectral_abscissa_a);
    text += &format!("closed-loop spectral abscissa = {:.6e}\n", sol.closed_loop_abscissa);
    emit(&text);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Verify => verify_all(),
        Command::PrintGain { config } => print_gain(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
