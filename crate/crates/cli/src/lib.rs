//! Command-line front end for `nsopt-core` experiments.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! check (certificate validation, adversary verification, AGD bound)
//! fails.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use nsopt_core::adversary::{run_resisting_experiment, ResistingSolver};
use nsopt_core::certify::{validate_certificate, GoldsteinCertificate};
use nsopt_core::harness::{
    canonical_json, run_agd_experiment, run_experiment, run_scaling, scaling_csv,
    write_experiment, AgdExperiment, ExperimentConfig,
};
use nsopt_core::RngStream;

#[derive(Debug, Parser)]
#[command(name = "nsopt", version, about = "Find (delta, epsilon)-stationary points of nonsmooth functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the trials of an experiment and write per-trial reports.
    Solve(RunArgs),
    /// Sweep an experiment over epsilon and delta grids.
    Scaling {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.2")]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
        deltas: Vec<f64>,
    },
    /// Run a solver against the resisting oracle and check the witnesses.
    Adversary {
        #[arg(long, default_value = "ingd")]
        solver: String,
        #[arg(long)]
        budget: u64,
        #[arg(long)]
        delta: f64,
        /// Initial suboptimality bound.
        #[arg(long = "Delta")]
        gap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for `adversary.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inexact accelerated gradient descent on a quadratic.
    Agd {
        /// AGD experiment (JSON); defaults to the diag(0.25, 1) testbed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gradient noise variance C (testbed only).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a serialized Goldstein certificate.
    Certify {
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
}

enum Outcome {
    Ok,
    CheckFailed,
}

fn write_json(dir: &Path, name: &str, json: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), json)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.load()?;
            let out = run_experiment(&cfg, args.jobs)?;
            write_experiment(&cfg, &out, &args.out)?;
            let e = &out.estimate;
            println!(
                "trials={} successes={} median_calls={} p90_calls={} t_star={}",
                e.trials,
                e.successes,
                e.median_calls,
                e.p90_calls,
                e.t_star.map_or("none".to_string(), |t| t.to_string())
            );
            Ok(Outcome::Ok)
        }
        Command::Scaling {
            run,
            epsilons,
            deltas,
        } => {
            let cfg = run.load()?;
            let rows = run_scaling(&cfg, &epsilons, &deltas, run.jobs)?;
            let csv = scaling_csv(&rows)?;
            fs::create_dir_all(&run.out)?;
            fs::write(run.out.join("scaling.csv"), &csv)?;
            print!("{csv}");
            Ok(Outcome::Ok)
        }
        Command::Adversary {
            solver,
            budget,
            delta,
            gap,
            seed,
            out,
        } => {
            let solver: ResistingSolver = solver.parse()?;
            let mut rng = RngStream::new(seed, 0);
            let report = run_resisting_experiment(solver, budget, delta, gap, &mut rng)?;
            let json = canonical_json(&report)?;
            if let Some(dir) = out {
                write_json(&dir, "adversary.json", &json)?;
            }
            println!(
                "calls={} final_point={} consistent={} defeated={}",
                report.oracle_calls, report.final_point, report.consistent, report.defeated
            );
            Ok(if report.consistent && report.defeated {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
        Command::Agd {
            config,
            noise,
            steps,
            trials,
            seed,
            out,
        } => {
            let mut exp = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", p.display()))?
                }
                None => AgdExperiment::testbed(noise, steps, 1),
            };
            if let Some(t) = trials {
                exp.trials = t;
            }
            if let Some(s) = seed {
                exp.base_seed = s;
            }
            let summary = run_agd_experiment(&exp)?;
            if let Some(dir) = out {
                write_json(&dir, "agd.json", &canonical_json(&summary)?)?;
            }
            let last = summary.mean_phi.len() - 1;
            println!(
                "mu={} L={} phi0={:.6e} phi_final={:.6e} bound_final={:.6e} within_bound={}",
                summary.mu,
                summary.l,
                summary.phi0,
                summary.mean_phi[last],
                summary.bound[last],
                summary.within_bound
            );
            Ok(if summary.within_bound {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
        Command::Certify { cert, epsilon } => {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                bail!("--epsilon must be positive");
            }
            let text =
                fs::read_to_string(&cert).with_context(|| format!("reading {}", cert.display()))?;
            let c = GoldsteinCertificate::from_json(&text)?;
            let check = validate_certificate(&c, epsilon);
            match &check.violation {
                None => println!("valid: combined norm {}", check.combined_norm),
                Some(v) => println!("invalid: {v}"),
            }
            Ok(if check.valid {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
    }
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::CheckFailed) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
