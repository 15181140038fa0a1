use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lglwp_core::gcn::{gradient_check_suite, GradCheckOptions, OptimizerKind};
use lglwp_core::graph::DupPolicy;
use lglwp_core::harness::{run_ablation, run_experiment, EvalReport, ExperimentConfig, Method};
use lglwp_core::labeling::DistanceMode;

/// Link weight prediction with line-graph neural networks.
#[derive(Parser)]
#[command(name = "lglwp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated train/test experiments for one method.
    Predict(ExperimentArgs),
    /// Compare weighted and random node ordering on shared splits.
    Ablate(ExperimentArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Whitespace-separated `u v w` edge list.
    #[arg(long)]
    dataset: PathBuf,
    /// lglwp, lglwp-random-label, wcn, waa or wra.
    #[arg(long, default_value = "lglwp")]
    method: Method,
    #[arg(long, default_value_t = 0.9)]
    train_ratio: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Defaults to 5 for large networks (by file name) and 15 otherwise.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    /// Directory for report.json, loss_curves.csv, id_map.json and splits.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// How to merge both directions of a link: last, max or sum.
    #[arg(long, default_value = "max")]
    dup_policy: DupPolicy,
    /// Edge length for shortest paths: weight or inverse-weight.
    #[arg(long, default_value = "weight")]
    dist: DistanceMode,
    #[arg(long, default_value_t = 1)]
    hop: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// adam or sgd.
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    /// Score only this fraction of each repeat's test links.
    #[arg(long, default_value_t = 1.0)]
    test_fraction: f64,
}

impl ExperimentArgs {
    fn config(self) -> ExperimentConfig {
        ExperimentConfig {
            dataset_path: self.dataset,
            method: self.method,
            train_ratio: self.train_ratio,
            repeats: self.repeats,
            epochs: self.epochs,
            seed: self.seed,
            max_nodes: self.max_nodes,
            hop: self.hop,
            dup_policy: self.dup_policy,
            distance: self.dist,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            test_fraction: self.test_fraction,
            output_path: self.out,
        }
    }
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    abs_floor: f64,
}

fn summarize(label: &str, r: &EvalReport) -> String {
    let mut text = String::new();
    let epochs = match r.method.heuristic() {
        Some(_) => String::new(),
        None => format!("{} epochs, ", r.epochs),
    };
    let _ = writeln!(
        text,
        "{label}: mean RMSE {:.4} ± {:.4} over {} run(s) ({epochs}{:.1}s)",
        r.mean,
        r.std,
        r.runs.len(),
        r.wall_time_secs
    );
    for run in &r.runs {
        let _ = writeln!(
            text,
            "  run {}: rmse {:.6} (train {}, test {})",
            run.repeat, run.rmse, run.n_train, run.n_test
        );
    }
    for f in &r.failures {
        eprintln!("{label} run {} failed: {}", f.repeat, f.error);
    }
    text
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> std::io::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn status(reports: &[&EvalReport]) -> ExitCode {
    if reports.iter().any(|r| r.partial) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var("LGLWP_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| format!("LGLWP_WORKERS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err("LGLWP_WORKERS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    configure_workers()?;
    match cli.command {
        Command::Predict(args) => {
            let report = run_experiment(&args.config())?;
            emit(&summarize(report.method.as_str(), &report))?;
            Ok(status(&[&report]))
        }
        Command::Ablate(args) => {
            let paired = run_ablation(&args.config())?;
            let mut text = summarize("weighted", &paired.weighted);
            text += &summarize("random", &paired.random);
            let _ = writeln!(text, "random - weighted: {:+.4}", paired.mean_delta);
            emit(&text)?;
            Ok(status(&[&paired.weighted, &paired.random]))
        }
        Command::Gradcheck(a) => {
            let opts = GradCheckOptions {
                draws: a.draws,
                seed: a.seed,
                max_nodes: a.max_nodes,
                step: a.step,
                rel_tol: a.rel_tol,
                abs_floor: a.abs_floor,
            };
            let reports = gradient_check_suite(&opts)?;
            let mut text = String::new();
            for (i, r) in reports.iter().enumerate() {
                let line = serde_json::json!({ "draw": i, "passed": r.passed(), "report": r });
                let _ = writeln!(text, "{line}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            let _ = writeln!(text, "{} of {} draws passed", reports.len() - failed, reports.len());
            emit(&text)?;
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
