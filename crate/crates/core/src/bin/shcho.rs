use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shcho::problems::{wire, ProblemKind, SegmentEvaluator};
use shcho::runner::{self, RunConfig};
use shcho::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Surrogate-assisted cooperative coevolution over chain-structured search spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write results.csv, summary.json and solution.json.
    Run(RunArgs),
    /// Tabulate finished runs by method.
    Compare {
        /// Run output directories.
        dirs: Vec<PathBuf>,
        /// Also write comparison.csv and comparison.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expose a built-in benchmark over the evaluator protocol on stdio.
    Serve(ProblemArgs),
    /// Print a built-in benchmark's layout as JSON.
    Layout(ProblemArgs),
}

#[derive(Args, Default)]
struct ProblemArgs {
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    n_blocks: Option<usize>,
    #[arg(long)]
    dims_per_block: Option<usize>,
    #[arg(long)]
    levels: Option<i64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    problem_seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with flat keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// shcho, no-macro, no-micro, no-coop, sacc or random.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    epsilon: Option<usize>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    inner_evals: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluator command for `--problem external`.
    #[arg(long)]
    external_cmd: Option<String>,
    /// Layout JSON for `--problem external`.
    #[arg(long)]
    layout_file: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
}

fn apply_problem(cfg: &mut RunConfig, p: &ProblemArgs) {
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = p.$field { cfg.$field = Some(v); } )* };
    }
    if let Some(kind) = p.problem {
        cfg.problem = kind;
    }
    set!(n_blocks, dims_per_block, levels, kappa, n_samples, width);
    if let Some(s) = p.problem_seed {
        cfg.problem_seed = s;
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    apply_problem(&mut cfg, &args.problem);
    if let Some(v) = &args.variant {
        cfg.variant = v.parse()?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { cfg.$field = v; } )* };
    }
    set!(epsilon, budget, outer_iters, inner_evals, seed, out);
    if let Some(c) = &args.external_cmd {
        cfg.external_cmd = Some(c.clone());
    }
    if let Some(l) = &args.layout_file {
        cfg.layout_file = Some(l.clone());
    }
    Ok(cfg)
}

fn builtin(p: &ProblemArgs) -> Result<Box<dyn SegmentEvaluator>> {
    let mut cfg = RunConfig::default();
    apply_problem(&mut cfg, p);
    if cfg.problem == ProblemKind::External {
        return Err(Error::Config("expected a built-in benchmark".into()));
    }
    cfg.problem_spec()?.build()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let summary = runner::run(&cfg)?;
            println!(
                "{} on {}: final fitness {} after cost {} ({} evaluations) -> {}",
                summary.method,
                summary.problem,
                summary.final_fitness,
                summary.total_cost,
                summary.evaluations,
                cfg.out.display()
            );
        }
        Command::Compare { dirs, out } => {
            let summaries = dirs
                .iter()
                .map(runner::read_summary)
                .collect::<Result<Vec<_>>>()?;
            let rows = runner::compare(&summaries)?;
            let text = runner::comparison_text(&rows);
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("comparison.csv"), runner::comparison_csv(&rows)?)?;
                std::fs::write(dir.join("comparison.txt"), text)?;
            }
        }
        Command::Serve(p) => {
            let evaluator = builtin(&p)?;
            wire::serve(evaluator, io::stdin().lock(), io::stdout().lock())?;
        }
        Command::Layout(p) => println!("{}", builtin(&p)?.layout().to_json_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
