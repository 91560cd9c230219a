//! Experiment runner behind the command-line tool: configuration, output
//! files and comparison tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::coevolution::{run_method, CoevConfig, Method, RunOutcome};
use crate::error::{Error, Result};
use crate::problems::{
    BudgetLedger, ChainProblemSpec, PipelineParams, ProblemKind, QuadraticParams,
};
use crate::space::{SolutionVector, SpaceLayout};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Flat run configuration. Every key is optional in a config file;
/// problem parameters left out take the benchmark defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub variant: Method,
    pub epsilon: usize,
    pub outer_iters: usize,
    pub inner_evals: usize,
    pub ldg_copies: usize,
    pub ldg_delta: f64,
    pub budget: f64,
    pub seed: u64,
    pub out: PathBuf,

    pub n_blocks: Option<usize>,
    pub dims_per_block: Option<usize>,
    pub levels: Option<i64>,
    pub kappa: Option<f64>,
    pub n_samples: Option<usize>,
    pub width: Option<usize>,
    pub problem_seed: u64,

    pub external_cmd: Option<String>,
    pub layout_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let coev = CoevConfig::default();
        Self {
            problem: ProblemKind::BenchQuadratic,
            variant: Method::Shcho(crate::coevolution::VariantFlags::SHCHO),
            epsilon: coev.epsilon,
            outer_iters: coev.outer_iters,
            inner_evals: coev.inner_evals,
            ldg_copies: coev.ldg_copies,
            ldg_delta: coev.ldg_delta,
            budget: 100.0,
            seed: 0,
            out: PathBuf::from("out"),
            n_blocks: None,
            dims_per_block: None,
            levels: None,
            kappa: None,
            n_samples: None,
            width: None,
            problem_seed: 0,
            external_cmd: None,
            layout_file: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return Err(Error::Config(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        self.coev_config().validate()?;
        if self.problem == ProblemKind::External {
            if self.external_cmd.is_none() {
                return Err(Error::Config("external problem needs external_cmd".into()));
            }
            if self.layout_file.is_none() {
                return Err(Error::Config("external problem needs layout_file".into()));
            }
        }
        Ok(())
    }

    pub fn coev_config(&self) -> CoevConfig {
        CoevConfig {
            epsilon: self.epsilon,
            outer_iters: self.outer_iters,
            inner_evals: self.inner_evals,
            ldg_copies: self.ldg_copies,
            ldg_delta: self.ldg_delta,
            ..CoevConfig::default()
        }
    }

    pub fn problem_spec(&self) -> Result<ChainProblemSpec> {
        Ok(match self.problem {
            ProblemKind::BenchQuadratic => {
                let d = QuadraticParams::default();
                ChainProblemSpec::Quadratic(QuadraticParams {
                    n_blocks: self.n_blocks.unwrap_or(d.n_blocks),
                    dims_per_block: self.dims_per_block.unwrap_or(d.dims_per_block),
                    levels: self.levels.unwrap_or(d.levels),
                    kappa: self.kappa.unwrap_or(d.kappa),
                    seed: self.problem_seed,
                })
            }
            ProblemKind::BenchPipeline => {
                let d = PipelineParams::default();
                ChainProblemSpec::Pipeline(PipelineParams {
                    n_blocks: self.n_blocks.unwrap_or(d.n_blocks),
                    n_samples: self.n_samples.unwrap_or(d.n_samples),
                    width: self.width.unwrap_or(d.width),
                    seed: self.problem_seed,
                })
            }
            ProblemKind::External => {
                let path = self
                    .layout_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("external problem needs layout_file".into()))?;
                let layout = SpaceLayout::from_json_file(path)
                    .map_err(|e| Error::Config(format!("layout {}: {e}", path.display())))?;
                ChainProblemSpec::External {
                    command: self.external_cmd.clone().ok_or_else(|| {
                        Error::Config("external problem needs external_cmd".into())
                    })?,
                    layout,
                    seed: self.seed,
                }
            }
        })
    }
}

/// Process exit status for an error: 2 for bad configuration, 3 for a
/// failing evaluator, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidLayout(_) => 2,
        Error::EvaluatorIo(_) | Error::StaleState(_) => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub problem: ProblemKind,
    pub h_star: SolutionVector,
    pub final_fitness: f64,
    pub total_cost: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub config: RunConfig,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub codes: SolutionVector,
    pub fitness: f64,
}

#[derive(Debug, Serialize)]
struct CsvRow {
    eval_index: usize,
    /// 1-based segment id, 0 for a full-chain evaluation.
    segment: usize,
    cost: f64,
    cumulative_cost: f64,
    fitness: f64,
    best_full_fitness: Option<f64>,
}

pub fn write_results_csv(ledger: &BudgetLedger, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut best_full: Option<f64> = None;
    for r in ledger.records() {
        if r.segment.is_none() {
            best_full = Some(best_full.map_or(r.fitness, |b| b.max(r.fitness)));
        }
        w.serialize(CsvRow {
            eval_index: r.index,
            segment: r.segment.unwrap_or(0),
            cost: r.cost,
            cumulative_cost: r.cumulative_cost,
            fitness: r.fitness,
            best_full_fitness: best_full,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Execute one configured run and write `results.csv`, `summary.json` and
/// `solution.json` into the output directory.
pub fn run(config: &RunConfig) -> Result<Summary> {
    config.validate()?;
    let spec = config.problem_spec()?;
    let mut evaluator = spec.build()?;
    let started = Instant::now();
    let outcome: RunOutcome = run_method(
        &mut evaluator,
        config.variant,
        &config.coev_config(),
        config.budget,
        config.seed,
    )?;
    let wall = started.elapsed().as_secs_f64();
    drop(evaluator);

    fs::create_dir_all(&config.out)?;
    write_results_csv(&outcome.ledger, config.out.join("results.csv"))?;
    let summary = Summary {
        method: outcome.method,
        problem: config.problem,
        h_star: outcome.best.clone(),
        final_fitness: outcome.final_fitness,
        total_cost: outcome.ledger.spent(),
        evaluations: outcome.ledger.len(),
        iterations: outcome.iterations,
        wall_time_s: wall,
        config: config.clone(),
        engine_version: ENGINE_VERSION.to_string(),
    };
    fs::write(
        config.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    let solution = SolutionFile {
        codes: outcome.best,
        fitness: outcome.final_fitness,
    };
    fs::write(
        config.out.join("solution.json"),
        serde_json::to_string_pretty(&solution)?,
    )?;
    info!(
        "{} on {}: final fitness {} at cost {}",
        summary.method, summary.problem, summary.final_fitness, summary.total_cost
    );
    Ok(summary)
}

pub fn read_summary(dir: impl AsRef<Path>) -> Result<Summary> {
    let path = dir.as_ref().join("summary.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("missing run output {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub runs: usize,
    pub median_fitness: f64,
    pub min_fitness: f64,
    pub max_fitness: f64,
    /// Sum of the runs' ledger totals.
    pub total_cost: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One row per method present, in the fixed method order.
pub fn compare(summaries: &[Summary]) -> Result<Vec<ComparisonRow>> {
    if summaries.len() < 2 {
        return Err(Error::Config(format!(
            "compare needs at least two runs, got {}",
            summaries.len()
        )));
    }
    let mut rows = Vec::new();
    for method in Method::ALL {
        let runs: Vec<&Summary> = summaries.iter().filter(|s| s.method == method).collect();
        if runs.is_empty() {
            continue;
        }
        let mut fits: Vec<f64> = runs.iter().map(|s| s.final_fitness).collect();
        rows.push(ComparisonRow {
            method,
            runs: runs.len(),
            median_fitness: median(&mut fits),
            min_fitness: fits[0],
            max_fitness: fits[fits.len() - 1],
            total_cost: runs.iter().map(|s| s.total_cost).sum(),
        });
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<10} {:>5} {:>14} {:>14} {:>14} {:>12}\n",
        "method", "runs", "median", "min", "max", "total cost"
    );
    for r in rows {
        out += &format!(
            "{:<10} {:>5} {:>14.6} {:>14.6} {:>14.6} {:>12.3}\n",
            r.method.name(),
            r.runs,
            r.median_fitness,
            r.min_fitness,
            r.max_fitness,
            r.total_cost
        );
    }
    out
}
