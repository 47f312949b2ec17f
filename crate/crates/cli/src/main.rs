use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use superres2d::bounds::{run_bounds, BoundsConfig};
use superres2d::certificate::{build_certificate, modulus_grid_csv, verify_certificate};
use superres2d::experiment::{phase_transition, random_model, recover, sample_signs, sample_support, trial_rng, ExperimentConfig};
use superres2d::kernel::KernelSpec;
use superres2d::measurement::{forward, SourceModel};

const EXIT_CERTIFICATION: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "superres2d", version, about = "2-D point-source super-resolution experiments")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Coarser grids, looser tolerances, fewer trials.
    #[arg(long, global = true)]
    fast: bool,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the kernel bounds and write the figure data.
    Bounds {
        #[arg(long)]
        f_c: Option<usize>,
    },
    /// Build and verify a dual certificate.
    Certificate {
        #[arg(long)]
        f_c: Option<usize>,
        /// Support and signs from a model file instead of a random draw.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of sources of a random instance.
        #[arg(long)]
        r: Option<usize>,
        /// Separation of a random instance, units of λ_c.
        #[arg(long)]
        separation: Option<f64>,
        /// Points per axis of the written |Q| grid.
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Solve the SDP, localize the peaks and score them.
    Recover {
        #[arg(long)]
        f_c: Option<usize>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of sources of a random instance.
        #[arg(long)]
        r: Option<usize>,
        /// Separation of a random instance, units of λ_c.
        #[arg(long)]
        separation: Option<f64>,
    },
    /// Success rate over source count and separation.
    PhaseTransition {
        #[arg(long)]
        f_c: Option<usize>,
    },
    /// Kernel and its normalized derivatives on a uniform grid.
    KernelDump {
        #[arg(long)]
        f_c: Option<usize>,
        /// Right end of the grid in units of λ_c.
        #[arg(long, default_value_t = 10.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_bounds(cli: &Cli, config: &ExperimentConfig, f_c: Option<usize>) -> Result<u8> {
    let f_c = f_c.or(config.f_c).unwrap_or(2000);
    let spec = KernelSpec::new(f_c)?;
    let bc = if cli.fast { BoundsConfig::fast() } else { BoundsConfig::full() };
    let run = run_bounds(&spec, &bc)?;
    run.write_to(&cli.out)?;
    let r = &run.report;
    println!("f_c = {f_c}, eps = {}", bc.eps);
    for c in &r.constants {
        println!(
            "{:<16} {:>12.6} target {:>10} {}",
            c.name,
            c.value,
            c.target,
            if c.within_slack { "ok" } else { "OFF" }
        );
    }
    println!(
        "near certified: {}, far band: {}, mid band: {} (max {:.4})",
        r.near.certified, r.far.far_certified, r.far.mid_band_certified, r.far.mid_band_max
    );
    println!("certified: {}", r.certified);
    Ok(if r.certified { 0 } else { EXIT_CERTIFICATION })
}

fn cmd_certificate(cli: &Cli, config: &ExperimentConfig, f_c: Option<usize>, model: Option<&Path>, grid: usize) -> Result<u8> {
    let f_c = f_c.or(config.f_c).unwrap_or(20);
    let spec = KernelSpec::new(f_c)?;
    let (support, signs) = match model {
        Some(p) => {
            let m = SourceModel::read_json(p).with_context(|| format!("reading {}", p.display()))?;
            let signs: Vec<Complex64> = m.amplitudes().iter().map(|d| d / d.norm()).collect();
            (m.locations(), signs)
        }
        None => {
            let mut rng = trial_rng(config.seed, 0, 0);
            let support = sample_support(&mut rng, config.r, config.separation / f_c as f64)
                .context("no support with the requested separation found")?;
            let signs = sample_signs(&mut rng, config.r);
            (support, signs)
        }
    };
    fs::create_dir_all(&cli.out)?;
    let cert = match build_certificate(&spec, &support, &signs) {
        Ok(c) => c,
        Err(e) => {
            let failure = format!("{{\n  \"certified\": false,\n  \"error\": {}\n}}\n", serde_json::to_string(&e.to_string())?);
            write(&cli.out, "certificate_report.json", failure)?;
            eprintln!("certificate construction failed: {e}");
            return Ok(EXIT_CERTIFICATION);
        }
    };
    let step = spec.lambda_c() / if cli.fast { 20.0 } else { 50.0 };
    let report = verify_certificate(&cert, step)?;
    write(&cli.out, "certificate.json", cert.to_json()?)?;
    write(&cli.out, "certificate_report.json", serde_json::to_string_pretty(&report)?)?;
    write(&cli.out, "q_modulus.csv", modulus_grid_csv(&cert, grid)?)?;
    println!(
        "r = {}, max off-support |Q| = {:.6}, Hessian ok = {}, certified = {}",
        cert.r(),
        report.max_offsupport_modulus,
        report.hessian_ok,
        report.certified
    );
    Ok(if report.certified { 0 } else { EXIT_CERTIFICATION })
}

fn cmd_recover(cli: &Cli, config: &ExperimentConfig, f_c: Option<usize>, model: Option<&Path>) -> Result<u8> {
    let f_c = f_c.or(config.f_c).unwrap_or(8);
    let truth = match model {
        Some(p) => SourceModel::read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let mut rng = trial_rng(config.seed, 0, 0);
            random_model(&mut rng, f_c, config.r, config.separation, config.amplitude_model)?
                .context("no support with the requested separation found")?
        }
    };
    let mut solver = config.solver;
    if cli.fast {
        solver.tol = solver.tol.max(1e-5);
    }
    let out = recover(&truth, f_c, &solver, &config.peaks, config.match_radius)?;
    fs::create_dir_all(&cli.out)?;
    write(&cli.out, "model.json", truth.to_json()?)?;
    write(&cli.out, "measurements.csv", forward(&truth, f_c)?.to_csv())?;
    out.solution.write_to(&cli.out)?;
    write(&cli.out, "peaks.json", serde_json::to_string_pretty(&out.support)?)?;
    let mut score = String::from("{\n  \"score\": ");
    score.push_str(&serde_json::to_string(&out.score)?);
    let _ = write!(score, ",\n  \"duality\": {}\n}}\n", serde_json::to_string(&out.duality)?);
    write(&cli.out, "score.json", score)?;
    println!(
        "objective {:.6} (TV {:.6}), {} peaks, matched = {}, success = {}, converged = {}",
        out.solution.objective,
        truth.tv_norm(),
        out.support.peaks.len(),
        out.score.matched,
        out.score.success,
        out.solution.converged
    );
    Ok(if out.solution.converged { 0 } else { EXIT_NON_CONVERGENCE })
}

fn cmd_phase_transition(cli: &Cli, config: &ExperimentConfig, f_c: Option<usize>) -> Result<u8> {
    let f_c = f_c.or(config.f_c).unwrap_or(4);
    let mut config = config.clone();
    if cli.fast {
        config.trials = config.trials.min(3);
        config.solver.tol = config.solver.tol.max(1e-5);
    }
    let pt = phase_transition(&config, f_c)?;
    pt.write_to(&cli.out)?;
    print!("{}", pt.rates_csv());
    match pt.midpoint {
        Some(m) => println!("transition midpoint ≈ {m:.3} λ_c"),
        None => println!("no transition found"),
    }
    Ok(if pt.non_converged == 0 { 0 } else { EXIT_NON_CONVERGENCE })
}

fn cmd_kernel_dump(cli: &Cli, config: &ExperimentConfig, f_c: Option<usize>, tau_max: f64, samples: usize) -> Result<u8> {
    anyhow::ensure!(tau_max > 0.0 && samples >= 2, "need tau_max > 0 and at least two samples");
    let f_c = f_c.or(config.f_c).unwrap_or(2000);
    let spec = KernelSpec::new(f_c)?;
    let f = f_c as f64;
    let mut csv = String::from("tau_over_lambda_c,k,k1_over_fc,k2_over_fc2,k3_over_fc3\n");
    for i in 0..samples {
        let tau = tau_max * i as f64 / (samples - 1) as f64;
        let d = spec.derivatives(tau / f);
        let _ = writeln!(csv, "{tau},{},{},{},{}", d[0], d[1] / f, d[2] / (f * f), d[3] / (f * f * f));
    }
    fs::create_dir_all(&cli.out)?;
    write(&cli.out, "kernel_dump.csv", csv)?;
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    let mut config = load_config(cli)?;
    if let Command::Certificate { r, separation, .. } | Command::Recover { r, separation, .. } = &cli.command {
        if let Some(r) = r {
            config.r = *r;
        }
        if let Some(s) = separation {
            config.separation = *s;
        }
        config.validate()?;
    }
    match &cli.command {
        Command::Bounds { f_c } => cmd_bounds(cli, &config, *f_c),
        Command::Certificate { f_c, model, grid, .. } => cmd_certificate(cli, &config, *f_c, model.as_deref(), *grid),
        Command::Recover { f_c, model, .. } => cmd_recover(cli, &config, *f_c, model.as_deref()),
        Command::PhaseTransition { f_c } => cmd_phase_transition(cli, &config, *f_c),
        Command::KernelDump { f_c, tau_max, samples } => cmd_kernel_dump(cli, &config, *f_c, *tau_max, *samples),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
