use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hdclt::bounds::{self, BoundInputs};
use hdclt::distributions::DistributionSpec;
use hdclt::harness::{self, ExperimentConfig, ExperimentReport};
use hdclt::oracle::{self, AtomicLaw};
use hdclt::Covariance;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

/// Gaussian approximation experiments for sums of random vectors.
#[derive(Parser, Debug)]
#[command(name = "hdclt", version)]
struct Cli {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output format (default: json for reports, plain text for bound-eval).
    #[arg(long, global = true, value_enum)]
    output: Option<Format>,
    /// Scalar-draw budget (default 1e10, or $HDCLT_BUDGET).
    #[arg(long, global = true)]
    budget: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment config (TOML, or JSON by extension).
    Run { config: PathBuf },
    /// Evaluate one of the closed-form bounds.
    BoundEval {
        #[arg(value_enum)]
        formula: Formula,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        nu1: Option<f64>,
        #[arg(long)]
        nu3: Option<f64>,
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_under: Option<f64>,
        /// Lopes moment parameter.
        #[arg(long)]
        nu: Option<f64>,
        /// Lopes variance floor.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Universal constant.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Run an exact oracle on JSON input (a path, `-` for stdin, or inline JSON).
    Oracle {
        #[arg(value_enum)]
        op: OracleOp,
        input: String,
    },
    /// Compare two JSON reports, ignoring wall time and worker count.
    ReportDiff { a: PathBuf, b: PathBuf },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Formula {
    Theorem1,
    Lopes,
    Nazarov,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OracleOp {
    ExactMuAtomic,
    ExactMuAtomicVsGaussian,
    ExactPseudoMoment,
    NormalizedSumLaw,
    SpikeZeroProbability,
    PseudoMomentVsGaussian,
}

/// Failure classes mapped to exit codes.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run { ref config } => run(&cli, config),
        Command::BoundEval {
            formula,
            n,
            p,
            nu1,
            nu3,
            sigma_min,
            sigma_under,
            nu,
            rho,
            delta,
            c,
        } => {
            let need = |name: &str, v: Option<f64>| v.ok_or_else(|| anyhow!("{formula:?} needs --{name}"));
            let value = match formula {
                Formula::Theorem1 => bounds::theorem1_rhs(&BoundInputs {
                    n,
                    p,
                    nu1: need("nu1", nu1)?,
                    nu3: need("nu3", nu3)?,
                    sigma_min: need("sigma-min", sigma_min)?,
                    sigma_under: need("sigma-under", sigma_under)?,
                    c_universal: c,
                })?,
                Formula::Lopes => bounds::lopes_rhs(need("nu", nu)?, need("rho", rho)?, n, p, c)?,
                Formula::Nazarov => bounds::nazarov_rhs(need("sigma-min", sigma_min)?, p, need("delta", delta)?, c)?,
            };
            match cli.output {
                Some(Format::Json) => println!("{}", json!({ "formula": format!("{formula:?}").to_lowercase(), "value": value })),
                Some(Format::Csv) => println!("formula,value\n{},{value}", format!("{formula:?}").to_lowercase()),
                None => println!("{value}"),
            }
            Ok(Outcome::Pass)
        }
        Command::Oracle { op, ref input } => {
            let value = run_oracle(op, &read_input(input)?)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(Outcome::Pass)
        }
        Command::ReportDiff { ref a, ref b } => {
            let load = |p: &Path| -> Result<Value> {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            };
            let diffs = harness::report_diff(&load(a)?, &load(b)?);
            for d in &diffs {
                println!("{d}");
            }
            Ok(if diffs.is_empty() { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn run(cli: &Cli, path: &Path) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let budget = match cli.budget {
        Some(b) if b >= 0.0 => b as u128,
        Some(b) => bail!("budget must be nonnegative, got {b}"),
        None => harness::default_budget(),
    };
    let report = harness::run(&cfg, budget)?;
    let text = render(&report, cli.output.unwrap_or(Format::Json))?;
    if cfg.output_path.is_empty() {
        print!("{text}");
    } else {
        std::fs::write(&cfg.output_path, &text).with_context(|| format!("writing {}", cfg.output_path))?;
    }
    for c in report.checks.iter().filter(|c| c.failed()) {
        eprintln!("check failed: {}: {}", c.name, c.detail);
    }
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

fn render(report: &ExperimentReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv()?,
    })
}

fn read_input(arg: &str) -> Result<Value> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    serde_json::from_str(&text).context("oracle input is not valid JSON")
}

fn field<T: DeserializeOwned>(v: &Value, key: &str) -> Result<T> {
    let raw = v.get(key).ok_or_else(|| anyhow!("missing field `{key}`"))?;
    serde_json::from_value(raw.clone()).with_context(|| format!("field `{key}`"))
}

fn run_oracle(op: OracleOp, v: &Value) -> Result<Value> {
    Ok(match op {
        OracleOp::ExactMuAtomic => {
            json!({ "value": oracle::exact_mu_atomic(&field::<AtomicLaw>(v, "a")?, &field::<AtomicLaw>(v, "b")?)? })
        }
        OracleOp::ExactMuAtomicVsGaussian => {
            let law: AtomicLaw = field(v, "law")?;
            let cov: Covariance = field(v, "covariance")?;
            serde_json::to_value(oracle::exact_mu_atomic_vs_gaussian(&law, &cov)?)?
        }
        OracleOp::ExactPseudoMoment => json!({
            "value": oracle::exact_pseudo_moment(&field(v, "a")?, &field(v, "b")?, field(v, "order")?)?
        }),
        OracleOp::NormalizedSumLaw => {
            serde_json::to_value(oracle::normalized_sum_law(&field(v, "law")?, field(v, "n")?)?)?
        }
        OracleOp::SpikeZeroProbability => {
            let n: u64 = field(v, "n")?;
            let gamma: f64 = field(v, "gamma")?;
            if !(gamma >= 1.0 && gamma.is_finite()) {
                bail!("gamma must be finite and >= 1");
            }
            json!({ "value": oracle::spike_zero_probability(n, gamma) })
        }
        OracleOp::PseudoMomentVsGaussian => {
            let spec: DistributionSpec = field(v, "distribution")?;
            json!({ "value": oracle::pseudo_moment_vs_gaussian(&spec, field(v, "order")?)? })
        }
    })
}
