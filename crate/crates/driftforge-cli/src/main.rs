//! driftforge: simulate ergodic diffusions, estimate their drift, and bench
//! the estimators.
//!
//! Exit codes: 0 success, 2 config or argument error, 3 runtime pipeline
//! error.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftforge::bench::{
    delta_n, gamma_failure_rate, oracle_report, ExperimentConfig, RiskReport,
};
use driftforge::error::Error;
use driftforge::{regression_data, simulate_path, ScaleSetup};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "driftforge",
    version,
    about = "Sequential kernel drift estimation for scalar ergodic diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (flat TOML with typed keys).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write it as (time, value) CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the adaptive estimator on one simulated path.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a Monte Carlo suite and write a risk report.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Which suite to run.
        #[arg(long, value_parser = ["improve", "oracle", "gamma"])]
        suite: String,
        /// Override the config's replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Optional two-column plot-data file for the suite's headline curve.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common } => run_simulate(&common),
        Command::Estimate { common } => run_estimate(&common),
        Command::Bench {
            common,
            suite,
            reps,
            plot,
        } => run_bench(&common, &suite, reps, plot.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// DRIFTFORGE_THREADS caps the rayon worker count.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("DRIFTFORGE_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

/// 2 for config/argument problems, 3 for runtime pipeline failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

struct LoadedConfig {
    config: ExperimentConfig,
    digest: String,
}

fn load_config(path: &Path, seed: Option<u64>, reps: Option<usize>) -> Result<LoadedConfig, Error> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let digest = manifest::sha256_hex(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
    let mut config = ExperimentConfig::from_toml_str(&text)?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(reps) = reps {
        config.reps = reps;
        config.validate()?;
    }
    Ok(LoadedConfig { config, digest })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes)
        .map_err(|e| Error::Internal(format!("cannot write {}: {e}", path.display())))
}

fn run_simulate(common: &CommonArgs) -> Result<(), Error> {
    let loaded = load_config(&common.config, common.seed, None)?;
    let cfg = &loaded.config;
    let mut manifest = RunManifest::start(&loaded.digest);
    let drift = cfg.drift_spec()?;
    let horizon = cfg.horizons()?[0];
    let path = simulate_path(&drift, cfg.y0, horizon, cfg.dt, cfg.base_seed)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf)
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_file(&common.out, &buf)?;
    manifest.record_output(&common.out);
    manifest.finish_to_sidecar(&common.out)?;
    Ok(())
}

fn run_estimate(common: &CommonArgs) -> Result<(), Error> {
    let loaded = load_config(&common.config, common.seed, None)?;
    let cfg = &loaded.config;
    let mut manifest = RunManifest::start(&loaded.digest);
    let horizon = cfg.horizons()?[0];
    let scale = ScaleSetup::build(cfg, horizon)?;
    let path = simulate_path(
        &scale.drift,
        cfg.y0,
        scale.schedule.horizon,
        cfg.dt,
        cfg.base_seed,
    )?;
    let obs = regression_data(&path, &scale.grid, &scale.schedule, None)?;
    let (estimate, selection) = driftforge::adaptive_estimate(
        &obs,
        &scale.basis,
        &scale.shrink_cfg,
        &scale.family,
        scale.rho,
    )?;

    // Estimate CSV: grid point, fitted value, selected index, warning flag
    // set when the stopping event failed and the estimate is identically 0.
    let mut buf = Vec::new();
    {
        use std::io::Write;
        let warn = u8::from(!obs.gamma);
        writeln!(&mut buf, "k,x_k,s_star,beta_hat,t_hat,gamma_warning")
            .map_err(|e| Error::Internal(e.to_string()))?;
        for k in 0..scale.grid.n {
            writeln!(
                &mut buf,
                "{},{},{},{},{},{}",
                k + 1,
                driftforge::csvio::fmt_float(scale.grid.points[k]),
                driftforge::csvio::fmt_float(estimate.values[k]),
                selection.alpha_hat.0,
                selection.alpha_hat.1,
                warn
            )
            .map_err(|e| Error::Internal(e.to_string()))?;
        }
    }
    write_file(&common.out, &buf)?;
    manifest.record_output(&common.out);

    // Selection sidecar: cost audit across the family.
    let sidecar = sidecar_path(&common.out, "selection.csv");
    let mut audit = Vec::new();
    selection
        .write_csv(&scale.family, &mut audit)
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_file(&sidecar, &audit)?;
    manifest.record_output(&sidecar);
    manifest.finish_to_sidecar(&common.out)?;
    Ok(())
}

fn run_bench(
    common: &CommonArgs,
    suite: &str,
    reps: Option<usize>,
    plot: Option<&Path>,
) -> Result<(), Error> {
    let loaded = load_config(&common.config, common.seed, reps)?;
    let cfg = &loaded.config;
    let mut manifest = RunManifest::start(&loaded.digest);

    let (report, plot_points): (RiskReport, Vec<(f64, f64)>) = match suite {
        "improve" => {
            let (summary, report) = delta_n(cfg, None)?;
            let points = vec![(report.rows[0].horizon, summary.delta_hat)];
            (report, points)
        }
        "oracle" => {
            let (summaries, report) = oracle_report(cfg)?;
            let points = summaries
                .iter()
                .map(|s| (s.n as f64, s.residual))
                .collect();
            (report, points)
        }
        "gamma" => {
            let (rates, report) = gamma_failure_rate(cfg)?;
            let points = rates.iter().map(|r| (r.horizon, r.rate)).collect();
            (report, points)
        }
        other => {
            return Err(Error::InvalidArgument(format!("unknown suite '{other}'")));
        }
    };

    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_file(&common.out, &buf)?;
    manifest.record_output(&common.out);

    if !report.truth_spectra.is_empty() {
        let sidecar = sidecar_path(&common.out, "truth_spectrum.csv");
        let mut spectra = Vec::new();
        report
            .write_truth_spectra_csv(&mut spectra)
            .map_err(|e| Error::Internal(e.to_string()))?;
        write_file(&sidecar, &spectra)?;
        manifest.record_output(&sidecar);
    }

    if let Some(plot_path) = plot {
        use std::io::Write;
        let mut buf = Vec::new();
        writeln!(&mut buf, "x,y").map_err(|e| Error::Internal(e.to_string()))?;
        for (x, y) in plot_points {
            writeln!(
                &mut buf,
                "{},{}",
                driftforge::csvio::fmt_float(x),
                driftforge::csvio::fmt_float(y)
            )
            .map_err(|e| Error::Internal(e.to_string()))?;
        }
        write_file(plot_path, &buf)?;
        manifest.record_output(plot_path);
    }

    manifest.finish_to_sidecar(&common.out)?;
    Ok(())
}

fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    out.with_file_name(name)
}
