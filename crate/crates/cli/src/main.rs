use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lad_core::config::PipelineConfig;
use lad_core::eval::{emit_report, ReportFormat};
use lad_core::pipeline::{self, EvalSummary, Layout};

#[derive(Parser, Debug)]
#[command(name = "lad", version, about = "Text-based logical anomaly detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated scenarios, or "all"
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Comma-separated capture conditions, or "all"
    #[arg(long, global = true)]
    condition: Option<String>,

    /// Output directory
    #[arg(long, global = true, env = "LAD_OUT_DIR", default_value = "lad-out")]
    out_dir: PathBuf,

    /// Neighbors used by the scorer
    #[arg(long, global = true)]
    k: Option<usize>,

    /// builtin-renderer, description-file or embedding-file
    #[arg(long, global = true)]
    backend: Option<String>,

    /// Worker threads (default: logical cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Extra config override, e.g. --set train.epochs=5 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate scenes, descriptions and negatives
    Gen,
    /// Train one encoder per task
    Train,
    /// Score the test splits
    Score,
    /// Compute AUROC reports
    Eval,
    /// Print the stored report
    Report,
    /// gen, train, score and eval
    All,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    // flags win over the file
    let mut flags: Vec<(String, String)> = Vec::new();
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{o}`"))?;
        flags.push((k.trim().into(), v.trim().into()));
    }
    let named = [
        ("seed", cli.seed.map(|v| v.to_string())),
        ("scenario", cli.scenario.clone()),
        ("condition", cli.condition.clone()),
        ("k", cli.k.map(|v| v.to_string())),
        ("backend", cli.backend.clone()),
        ("jobs", cli.jobs.map(|v| v.to_string())),
    ];
    flags.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for (k, v) in flags {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_eval(out: &EvalSummary) {
    print!("{}", emit_report(&out.aggregate, ReportFormat::Markdown).conditions);
    if let (Some(m), Some(s)) = (out.aggregate.mean_of_means, out.aggregate.std) {
        println!("\nmean AUROC {m:.4} ± {s:.4} over {} tasks", out.reports.len());
    }
    if let Some((_, base)) = &out.baseline {
        if let Some(m) = base.mean_of_means {
            println!("untrained encoder: mean AUROC {m:.4}");
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    let layout = Layout::new(&cli.out_dir);
    match cli.command {
        Command::Gen => {
            let out = pipeline::run_gen(&cfg, &layout)?;
            let scenes: usize = out.iter().map(|g| g.scenes).sum();
            let skipped: usize = out.iter().map(|g| g.skipped_negatives).sum();
            println!("{} tasks, {scenes} samples, {skipped} negatives skipped", out.len());
        }
        Command::Train => {
            for t in pipeline::run_train(&cfg, &layout)? {
                let first = t.loss_curve.first().copied().unwrap_or(f64::NAN);
                let last = t.loss_curve.last().copied().unwrap_or(f64::NAN);
                println!("{}\t{} pairs\tloss {first:.4} -> {last:.4}", t.task_id, t.pairs);
            }
        }
        Command::Score => {
            let n = pipeline::run_score(&cfg, &layout)?;
            println!("scored {n} test samples");
        }
        Command::Eval => print_eval(&pipeline::run_eval(&cfg, &layout)?),
        Command::Report => print!("{}", pipeline::run_report(&cfg, &layout)?),
        Command::All => print_eval(&pipeline::run_all(&cfg, &layout)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
