use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scale_bayes::config::ExperimentConfig;
use scale_bayes::error::{HarnessError, Result};
use scale_bayes::experiment::{quantile_label, run_experiment, run_galerkin, run_prior_mass, Study};
use scale_bayes::output::{create_dir, emit_outputs, galerkin_csv, prior_mass_csv, prior_mass_json, write_file};
use scale_bayes_core::model::{Observation, ObservationMeta};
use scale_bayes_core::posterior::{contraction_radii, posterior_mean_error};
use scale_bayes_core::rates::{auxiliary_sequences, theoretical_exponent, PriorKind, RateQuery};
use scale_bayes_core::rng::derive_key;
use serde_json::json;

/// Posterior contraction-rate experiments for linear inverse problems.
#[derive(Parser)]
#[command(name = "scale-bayes", version)]
struct Cli {
    /// Worker threads (default: $SCALE_BAYES_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rate study and write results.csv, summary.json and rateplot.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 4 unless the fitted slope is within tolerance.
        #[arg(long)]
        check: bool,
    },
    /// Noiseless Galerkin reconstruction errors over `galerkin.levels`.
    Galerkin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate one observation and write it as CSV with a JSON sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior summary for an exported observation.
    Posterior {
        #[arg(long)]
        config: PathBuf,
        /// Observation CSV; its sidecar is the same path with a `.json` extension.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value = "post.json")]
        out: PathBuf,
    },
    /// Theoretical contraction exponent and auxiliary sequences.
    Rates {
        #[arg(long, value_parser = parse_prior)]
        prior: PriorKind,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
    /// Monte-Carlo prior mass of small balls around the truth (or zero).
    PriorMass {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_prior(s: &str) -> std::result::Result<PriorKind, String> {
    match s {
        "series" => Ok(PriorKind::Series),
        "gaussian" => Ok(PriorKind::Gaussian),
        "mixture" => Ok(PriorKind::Mixture),
        other => Err(format!("unknown prior `{other}` (series, gaussian, mixture)")),
    }
}

fn to_json_string(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Returns `Ok(false)` when `--check` fails.
fn run(cli: Cli) -> Result<bool> {
    scale_bayes::init_threads(cli.threads)?;
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            check,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let res = run_experiment(&cfg)?;
            emit_outputs(&res, &dir)?;
            for note in &res.notes {
                eprintln!("note: {note}");
            }
            match res.primary_slope() {
                Some(fit) => println!(
                    "slope {:.4} ± {:.4}, expected {:.4}, tolerance {}: {}",
                    fit.slope,
                    fit.stderr,
                    -res.exponent,
                    cfg.tolerance,
                    if res.pass == Some(true) { "pass" } else { "fail" }
                ),
                None => println!("no slope: the n grid has fewer than three points"),
            }
            println!("wrote {}", dir.display());
            Ok(!check || res.pass == Some(true))
        }
        Command::Galerkin { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_galerkin(&cfg)?;
            create_dir(&out)?;
            write_file(&out.join("errors.csv"), &galerkin_csv(&report))?;
            let summary = serde_json::to_value(&report).expect("report serializes");
            write_file(&out.join("galerkin.json"), &to_json_string(&summary))?;
            print!(
                "{}",
                to_json_string(&json!({"fit": report.fit, "expected_slope": report.expected_slope}))
            );
            Ok(true)
        }
        Command::Simulate {
            config,
            n,
            replicate,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let study = Study::new(&cfg)?;
            let obs = study.observe(n, replicate)?;
            write_file(&out, &obs.to_csv())?;
            let meta = serde_json::to_value(obs.meta()).expect("meta serializes");
            write_file(&out.with_extension("json"), &to_json_string(&meta))?;
            Ok(true)
        }
        Command::Posterior { config, obs, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let sidecar = obs.with_extension("json");
            let meta: ObservationMeta = serde_json::from_str(&read(&sidecar)?)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", sidecar.display())))?;
            let observation = Observation::from_csv(&read(&obs)?, &meta)?;
            let study = Study::new(&cfg)?;
            let seed = derive_key(meta.seed, &[meta.replicate]);
            let post = study.posterior(&observation, seed)?;
            let levels = [0.5, 0.9, 0.95];
            let radii = contraction_radii(&post, &study.f0, &levels, seed)?;
            let radii: serde_json::Map<String, serde_json::Value> = levels
                .iter()
                .zip(&radii)
                .map(|(&q, &r)| (quantile_label(q), json!(r)))
                .collect();
            let summary = json!({
                "kind": post.kind,
                "n": meta.n,
                "j_obs": meta.j_obs,
                "means": post.means,
                "variances": post.variances,
                "tau_weights": post.tau_weights,
                "radii": radii,
                "rmse": posterior_mean_error(&post, &study.f0),
                "diagnostics": post.diagnostics,
            });
            write_file(&out, &to_json_string(&summary))?;
            Ok(true)
        }
        Command::Rates {
            prior,
            alpha,
            beta,
            gamma,
            d,
        } => {
            let q = RateQuery {
                prior,
                alpha,
                beta,
                gamma,
                d,
            };
            let exponent = theoretical_exponent(&q).map_err(|e| HarnessError::Config(e.to_string()))?;
            let aux = auxiliary_sequences(&q).map_err(|e| HarnessError::Config(e.to_string()))?;
            print!(
                "{}",
                to_json_string(&json!({"query": q, "exponent": exponent, "auxiliary": aux}))
            );
            Ok(true)
        }
        Command::PriorMass { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_prior_mass(&cfg)?;
            create_dir(&out)?;
            write_file(&out.join("prior_mass.csv"), &prior_mass_csv(&report))?;
            let summary = prior_mass_json(&report);
            write_file(&out.join("prior_mass.json"), &to_json_string(&summary))?;
            print!("{}", to_json_string(&summary));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed: fitted slope outside tolerance");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
