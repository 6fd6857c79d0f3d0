use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use expres::bench::{run_benchmark, write_csv, BenchConfig};
use expres::explain::{
    enumerate_explanations, explain, explanations_from_json, explanations_to_json, ExplainError, ExpresProblem,
};
use expres::generator::{generate, GenConfig};
use expres::model::{validate, PrefId, PresInstance};
use expres::render::{render, RenderMode, RenderOptions, TemplateBundle};
use expres::scheduler::{read_schedule, solve_lexicographic, ScheduleError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "expres", version, about = "Preference-driven desk scheduling with explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance.
    Generate {
        #[arg(long)]
        agents: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        days: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an instance and print its validation report.
    Validate { instance: PathBuf },
    /// Compute a lexicographically optimal schedule.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "30s", value_parser = humantime::parse_duration)]
        budget: Duration,
    },
    /// Explain why a preference is unsatisfied.
    Explain {
        instance: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        target: String,
        /// Enumerate alternatives in order of cost.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 1000)]
        max: usize,
        #[arg(long, default_value = "30s", value_parser = humantime::parse_duration)]
        budget: Duration,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn explanations into text.
    Render {
        explanation: PathBuf,
        /// The instance the explanation refers to.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        aggregate: bool,
        #[arg(long)]
        anonymize: bool,
        #[arg(long)]
        template_bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep and write CSV.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit codes: 1 no explanation or infeasible, 2 usage or schema, 3 timeout.
enum Failure {
    Unsolvable(serde_json::Value),
    Input(String),
    Timeout(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, body) = match self {
            Failure::Unsolvable(v) => (1, v),
            Failure::Input(m) => (2, json!({"error": "input", "message": m})),
            Failure::Timeout(m) => (3, json!({"error": "timeout", "message": m})),
        };
        eprintln!("{body}");
        ExitCode::from(code)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Input(e.to_string())),
    }
}

fn load_instance(path: &Path) -> Result<PresInstance, Failure> {
    PresInstance::from_json(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn explain_failure(e: ExplainError) -> Failure {
    match e {
        ExplainError::NoExplanation { target, unexplained } => Failure::Unsolvable(json!({
            "error": "no_explanation",
            "target": target.to_string(),
            "unexplained_assignments": unexplained,
        })),
        ExplainError::Timeout => Failure::Timeout("no explanation found within the budget".into()),
        other => Failure::Input(other.to_string()),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Generate { agents, seed, days, out } => {
            let config = GenConfig { n_days: days, ..GenConfig::new(agents, seed) };
            let inst = generate(&config).map_err(|e| Failure::Input(e.to_string()))?;
            emit(out.as_deref(), &inst.to_json())
        }
        Command::Validate { instance } => {
            let inst = load_instance(&instance)?;
            let report = validate(&inst);
            emit(None, &serde_json::to_string_pretty(&report).expect("reports serialize"))?;
            if report.is_clean() {
                Ok(())
            } else {
                Err(Failure::Unsolvable(json!({"error": "invalid", "violations": report.violations.len()})))
            }
        }
        Command::Solve { instance, out, budget } => {
            let inst = load_instance(&instance)?;
            match solve_lexicographic(&inst, budget) {
                Ok(result) => emit(out.as_deref(), &result.to_json(&inst)),
                Err(ScheduleError::Infeasible) => Err(Failure::Unsolvable(json!({"error": "infeasible"}))),
                Err(ScheduleError::InfeasibleByConstruction(m)) => {
                    Err(Failure::Unsolvable(json!({"error": "infeasible", "message": m})))
                }
                Err(ScheduleError::Invalid(report)) => Err(Failure::Unsolvable(json!({
                    "error": "invalid",
                    "violations": report.violations,
                }))),
                Err(e @ ScheduleError::TimedOut { .. }) => Err(Failure::Timeout(e.to_string())),
                Err(e) => Err(Failure::Input(e.to_string())),
            }
        }
        Command::Explain { instance, schedule, target, all, max, budget, out } => {
            if max == 0 {
                return Err(Failure::Input("--max must be at least 1".into()));
            }
            let inst = load_instance(&instance)?;
            let sched = read_schedule(&inst, &read(&schedule)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", schedule.display())))?;
            let problem = ExpresProblem::new(&inst, &sched, &PrefId(target)).map_err(explain_failure)?;
            if all {
                let list = enumerate_explanations(&problem, max, budget).map_err(explain_failure)?;
                if list.timed_out() {
                    eprintln!("{}", json!({"warning": "timeout", "explanations": list.explanations.len()}));
                }
                emit(out.as_deref(), &explanations_to_json(&inst, &list.explanations))
            } else {
                let e = explain(&problem, budget).map_err(explain_failure)?;
                emit(out.as_deref(), &e.to_json(&inst))
            }
        }
        Command::Render { explanation, instance, aggregate, anonymize, template_bundle, out } => {
            let inst = load_instance(&instance)?;
            let bundle = match template_bundle {
                Some(path) => {
                    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    TemplateBundle::parse(name, &read(&path)?).map_err(|e| Failure::Input(e.to_string()))?
                }
                None => TemplateBundle::default_bundle(),
            };
            let mode = if aggregate { RenderMode::Aggregated } else { RenderMode::Detailed };
            let opts = RenderOptions { mode, anonymize, bundle };
            let explanations =
                explanations_from_json(&inst, &read(&explanation)?).map_err(|e| Failure::Input(e.to_string()))?;
            let texts = explanations
                .iter()
                .map(|e| render(e, &opts, &inst))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Input(e.to_string()))?;
            let separator = if aggregate { "\n" } else { "\n\n" };
            emit(out.as_deref(), &texts.join(separator))
        }
        Command::Bench { config, out } => {
            let config = match config {
                Some(p) => BenchConfig::from_json(&read(&p)?).map_err(|e| Failure::Input(e.to_string()))?,
                None => BenchConfig::default(),
            };
            let records = run_benchmark(&config).map_err(|e| Failure::Input(e.to_string()))?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &records).map_err(|e| Failure::Input(e.to_string()))?;
            emit(out.as_deref(), &String::from_utf8(buf).expect("csv output is UTF-8"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
