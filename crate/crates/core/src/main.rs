use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use nalab::checkers::Verdict;
use nalab::cli::config::{CheckerSpec, ExperimentConfig};
use nalab::cli::{self, ExperimentId, Outcome, Row};
use nalab::geometry::{Normalization, SpaceParams};
use nalab::specfun::{self, JacobiParams};
use nalab::weights::WeightSpec;
use nalab::{Error, Result};

#[derive(Parser)]
#[command(name = "nalab", version, about = "Weighted maximal-operator laboratory")]
struct Cli {
    /// Seed for every random family; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dimensional data of a space.
    Space {
        #[command(subcommand)]
        command: SpaceCommand,
    },
    /// Jacobi function traces.
    Jacobi {
        #[command(subcommand)]
        command: JacobiCommand,
    },
    /// Weight-condition checks.
    Weight {
        #[command(subcommand)]
        command: WeightCommand,
    },
    /// Run a named experiment with its canonical parameters.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(ExperimentId::ALL.map(ExperimentId::as_str)))]
        id: String,
    },
    /// Grid sweep over the axes declared in a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long, requires = "k", conflicts_with_all = ["sigma", "tau"])]
    m: Option<u32>,
    #[arg(long, requires = "m")]
    k: Option<u32>,
    #[arg(long, requires = "tau")]
    sigma: Option<f64>,
    #[arg(long, requires = "sigma")]
    tau: Option<f64>,
}

impl SpaceArgs {
    fn params(&self) -> Result<SpaceParams> {
        match (self.m, self.k, self.sigma, self.tau) {
            (Some(m), Some(k), _, _) => SpaceParams::from_mk(m, k),
            (_, _, Some(s), Some(t)) => SpaceParams::from_jacobi(s, t),
            _ => Ok(SpaceParams::canonical()),
        }
    }
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Print ρ, ϱ, σ, τ and a few ball volumes.
    Info(SpaceArgs),
}

#[derive(Subcommand)]
enum JacobiCommand {
    /// CSV trace `t,re,im,err,method` of φ_λ (or Φ_λ with `--second`).
    Eval {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda_re: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda_im: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        step: f64,
        /// First grid point; defaults to 0, or `step` for the second solution.
        #[arg(long)]
        tmin: Option<f64>,
        /// Evaluate the second solution Φ_λ instead of φ_λ.
        #[arg(long)]
        second: bool,
    },
}

#[derive(Subcommand)]
enum WeightCommand {
    /// Run one condition checker on a weight at the canonical grid.
    Check {
        /// WeightSpec as inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        condition: String,
        /// JSON object overriding the condition's default parameters.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        j_max: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_parser = ["off", "scalar", "exact-mass"])]
        normalization: Option<String>,
    },
}

fn json_arg(text: &str) -> Result<Value> {
    let path = PathBuf::from(text);
    let body = if !text.trim_start().starts_with(['{', '[']) && path.is_file() {
        std::fs::read_to_string(&path)?
    } else {
        text.to_string()
    };
    serde_json::from_str(&body).map_err(|e| Error::Config(format!("invalid JSON {text:?}: {e}")))
}

fn default_params(condition: &str) -> Result<Value> {
    Ok(match condition {
        "msw" => json!({"s": 2.0}),
        "easy-check" => json!({"p": 2.0, "eta": -1.0}),
        "large-scale" => json!({"p": 2.0, "alpha": 0.5, "beta": 0.5}),
        "necessary" => json!({"p": 2.0}),
        "ap-loc" => json!({"p": 2.0}),
        "classical-ap" => json!({"p": 2.0, "j_lo": 5, "j_hi": 35}),
        other => {
            return Err(Error::Config(format!(
                "unknown condition {other:?}; expected one of msw, easy-check, large-scale, necessary, ap-loc, classical-ap"
            )))
        }
    })
}

fn emit(outcome: &Outcome) -> Result<ExitCode> {
    let (json, csv) = outcome.write(&cli::out_dir())?;
    println!(
        "{}: {} ({}, {})",
        outcome.id,
        outcome.verdict.as_str(),
        json.display(),
        csv.display()
    );
    Ok(ExitCode::from(outcome.exit_code() as u8))
}

fn run(args: Cli) -> Result<ExitCode> {
    match args.command {
        Command::Space {
            command: SpaceCommand::Info(sa),
        } => {
            let p = sa.params()?;
            let vols: Map<String, Value> = [1.0, 5.0, 10.0]
                .into_iter()
                .map(|r| (format!("{r}"), json!(p.volume(r))))
                .collect();
            let info = json!({"params": p, "volume": vols});
            println!("{}", serde_json::to_string_pretty(&info)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Jacobi {
            command:
                JacobiCommand::Eval {
                    sigma,
                    tau,
                    lambda_re,
                    lambda_im,
                    tmax,
                    step,
                    tmin,
                    second,
                },
        } => {
            if !(step > 0.0 && tmax.is_finite()) {
                return Err(Error::Config("need step > 0 and finite tmax".into()));
            }
            let jp = JacobiParams::new(sigma, tau, Complex64::new(lambda_re, lambda_im))?;
            let t0 = tmin.unwrap_or(if second { step } else { 0.0 });
            if tmax < t0 {
                return Err(Error::Config(format!("tmax = {tmax} lies below the first point {t0}")));
            }
            let grid = specfun::uniform_grid(t0, tmax, step);
            let trace = if second {
                specfun::jacobi_phi_second_trace(&jp, &grid)?
            } else {
                specfun::jacobi_phi_trace(&jp, &grid)?
            };
            print!("{}", trace.to_csv());
            Ok(ExitCode::SUCCESS)
        }
        Command::Weight {
            command:
                WeightCommand::Check {
                    spec,
                    condition,
                    params,
                    j_max,
                    n_max,
                    normalization,
                },
        } => {
            let weight: WeightSpec =
                serde_json::from_value(json_arg(&spec)?).map_err(|e| Error::Config(format!("weight spec: {e}")))?;
            let mut checker = default_params(&condition)?;
            if let Some(p) = params {
                match json_arg(&p)? {
                    Value::Object(m) => checker.as_object_mut().unwrap().extend(m),
                    _ => return Err(Error::Config("--params must be a JSON object".into())),
                }
            }
            checker["id"] = json!(condition);
            let checker: CheckerSpec =
                serde_json::from_value(checker).map_err(|e| Error::Config(format!("{condition}: {e}")))?;
            let mut cfg = ExperimentConfig::new(checker);
            cfg.weight = weight;
            cfg.seed = args.seed.unwrap_or(0);
            if let Some(j) = j_max {
                cfg.grid.j_max = j;
            }
            if let Some(n) = n_max {
                cfg.grid.n_max = n;
            }
            if let Some(n) = normalization {
                cfg.grid.normalization = serde_json::from_value::<Normalization>(json!(n))?;
            }
            cfg.output.name = Some(format!("weight-check-{condition}"));
            let report = cli::run_checker(&cfg)?;
            let outcome = Outcome {
                id: cfg.name(),
                seed: cfg.seed,
                verdict: if report.verdict == Verdict::Fail { Verdict::Fail } else { report.verdict },
                param_names: Vec::new(),
                summary: [("config".to_string(), serde_json::to_value(&cfg)?)].into(),
                rows: vec![Row {
                    params: Vec::new(),
                    report,
                }],
            };
            emit(&outcome)
        }
        Command::Reproduce { id } => {
            let id: ExperimentId = id.parse()?;
            emit(&cli::reproduce(id, args.seed.unwrap_or(0))?)
        }
        Command::Sweep { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            emit(&cli::sweep(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
