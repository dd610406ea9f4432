use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use privcalc::accuracy::{alpha_for_epsilon, epsilon_for_accuracy};
use privcalc::interactive::BudgetMode;
use privcalc::plan::{run_plan, Plan, PLAN_JSON_SCHEMA};
use privcalc::repl::{Outcome, Repl};
use privcalc::tester::{stochastic_test, StochasticConfig, Verdict};
use privcalc::{Dataset, Error, Metric, PrivacyLoss, Schema};

const EXIT_FAILURE: u8 = 1;
const EXIT_PLAN_INVALID: u8 = 2;
const EXIT_BUDGET_VIOLATION: u8 = 3;
const EXIT_DATA_ERROR: u8 = 4;

#[derive(Parser)]
#[command(name = "privcalc", version, about = "Differentially private queries over CSV data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a batch plan after checking its total loss against the budget.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// CSV file; defaults to the plan's `dataset`, relative to the plan.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, env = "PRIVCALC_SEED", default_value_t = 0)]
        seed: u64,
        /// Results file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interactive session reading commands from stdin.
    Repl {
        #[arg(long)]
        data: PathBuf,
        /// Schema JSON: {"columns": [{"name": ..., "kind": ...}]}.
        #[arg(long)]
        schema: PathBuf,
        /// Pure epsilon budget. Ignored by the odometer.
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        #[arg(long, value_enum, default_value_t = Mode::Filter)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = DatasetMetric::Symmetric)]
        metric: DatasetMetric,
        #[arg(long, env = "PRIVCALC_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Error radius of Laplace noise at a given budget.
    Accuracy {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        sensitivity: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Budget needed for a target error radius.
    Budget {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        sensitivity: f64,
    },
    /// Statistical test of a plan query's privacy claim.
    Test {
        /// Plan file holding the mechanism.
        #[arg(long)]
        mechanism: PathBuf,
        /// Query name; may be omitted when the plan has one query.
        #[arg(long)]
        query: Option<String>,
        /// Claimed epsilon; defaults to the loss the plan computes.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        significance: f64,
        #[arg(long, env = "PRIVCALC_SEED", default_value_t = 0)]
        seed: u64,
        /// Report file; stdout if absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the plan JSON schema.
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Filter,
    Odometer,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetMetric {
    Symmetric,
    ChangeOne,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::PlanInvalid(_)) => EXIT_PLAN_INVALID,
            Some(Error::BudgetViolation { .. }) => EXIT_BUDGET_VIOLATION,
            Some(Error::DataSchemaMismatch(_) | Error::RecordSchemaMismatch(_) | Error::Csv(_) | Error::Io(_)) => {
                EXIT_DATA_ERROR
            }
            _ => EXIT_FAILURE,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Run { plan, data, seed, out } => run(&plan, data.as_deref(), seed, out.as_deref()).map(|_| 0),
        Command::Repl { data, schema, budget, mode, metric, seed } => {
            repl(&data, &schema, budget, mode, metric, seed).map(|_| 0)
        }
        Command::Accuracy { epsilon, sensitivity, beta } => {
            let alpha = alpha_for_epsilon(sensitivity, epsilon, beta)?;
            print_json(
                &serde_json::json!({ "epsilon": epsilon, "sensitivity": sensitivity, "beta": beta, "alpha": alpha }),
            );
            Ok(0)
        }
        Command::Budget { alpha, beta, sensitivity } => {
            let epsilon = epsilon_for_accuracy(sensitivity, alpha, beta)?;
            print_json(
                &serde_json::json!({ "alpha": alpha, "sensitivity": sensitivity, "beta": beta, "epsilon": epsilon }),
            );
            Ok(0)
        }
        Command::Test { mechanism, query, epsilon, samples, significance, seed, report } => {
            test(&mechanism, query.as_deref(), epsilon, samples, significance, seed, report.as_deref())
        }
        Command::Schema => {
            print!("{PLAN_JSON_SCHEMA}");
            Ok(0)
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn read_plan_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_PLAN_INVALID, error: anyhow!("reading plan {}: {e}", path.display()) })
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(plan_path: &Path, data: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let text = read_plan_text(plan_path)?;
    let results = run_plan(
        &text,
        |plan| {
            let path = match (data, &plan.dataset) {
                (Some(d), _) => d.to_path_buf(),
                (None, Some(rel)) => plan_path.parent().unwrap_or(Path::new(".")).join(rel),
                (None, None) => return Err(Error::Io("no dataset: pass --data or set it in the plan".into())),
            };
            Dataset::from_csv_path(plan.schema.clone(), &path)
        },
        seed,
    )?;
    write_or_print(out, &results.to_json())?;
    Ok(())
}

fn repl(data: &Path, schema: &Path, budget: f64, mode: Mode, metric: DatasetMetric, seed: u64) -> Result<(), Failure> {
    let schema_text = std::fs::read_to_string(schema)
        .map_err(|e| Failure { code: EXIT_DATA_ERROR, error: anyhow!("reading schema {}: {e}", schema.display()) })?;
    let schema = Schema::from_json(&schema_text).map_err(|e| Failure { code: EXIT_DATA_ERROR, error: e.into() })?;
    let dataset = Dataset::from_csv_path(schema, data)?;
    let mode = match mode {
        Mode::Filter => BudgetMode::Filter,
        Mode::Odometer => BudgetMode::Odometer,
    };
    let metric = match metric {
        DatasetMetric::Symmetric => Metric::SymmetricDistance,
        DatasetMetric::ChangeOne => Metric::ChangeOneDistance,
    };
    let mut session = Repl::new(dataset, metric, budget, mode, seed)?;
    let interactive = std::io::stdin().is_terminal();
    let mut out = std::io::stdout().lock();
    let prompt = |out: &mut std::io::StdoutLock, at: privcalc::interactive::QueryableId| -> std::io::Result<()> {
        if interactive {
            write!(out, "{at}> ")?;
            out.flush()?;
        }
        Ok(())
    };
    prompt(&mut out, session.current()).map_err(anyhow::Error::from)?;
    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(anyhow::Error::from)?;
        let result = session.execute(&line);
        let quit = matches!(result, Ok(Outcome::Quit));
        let printed = match result {
            Ok(Outcome::Nothing) => Ok(()),
            Ok(o) => writeln!(out, "{o}"),
            Err(e) => writeln!(out, "error: {e}"),
        };
        printed.map_err(anyhow::Error::from)?;
        if quit {
            break;
        }
        prompt(&mut out, session.current()).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn test(
    plan_path: &Path,
    query: Option<&str>,
    epsilon: Option<f64>,
    samples: usize,
    significance: f64,
    seed: u64,
    report: Option<&Path>,
) -> Result<u8, Failure> {
    let text = read_plan_text(plan_path)?;
    let compiled = Plan::from_json(&text)?.compile()?;
    let q = match query {
        Some(name) => compiled
            .queries()
            .iter()
            .find(|q| q.name == name)
            .ok_or_else(|| anyhow!("plan has no query named {name:?}"))?,
        None => match compiled.queries() {
            [only] => only,
            _ => return Err(anyhow!("plan has several queries; pick one with --query").into()),
        },
    };
    let claimed = match epsilon {
        Some(e) => PrivacyLoss::pure(e)?,
        None => q.loss.to_loss(),
    };
    let config = StochasticConfig::new(samples, significance, seed)?;
    let result = stochastic_test(&q.measurement, &claimed, &config)?;
    let mut json = serde_json::to_string_pretty(&result).map_err(anyhow::Error::from)?;
    json.push('\n');
    write_or_print(report, &json)?;
    eprintln!("{}", result.summary);
    Ok(if result.verdict == Verdict::Pass { 0 } else { EXIT_FAILURE })
}
