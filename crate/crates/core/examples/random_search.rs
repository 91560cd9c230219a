//! The random-search baseline and its budget ledger.

use shcho::coevolution::run_random_search;
use shcho::problems::{PipelineBench, PipelineParams};

fn main() -> shcho::Result<()> {
    let mut bench = PipelineBench::new(PipelineParams::default())?;
    let out = run_random_search(&mut bench, 25.0, 7)?;
    println!(
        "{:>5} {:>8} {:>12} {:>12}",
        "eval", "cost", "fitness", "best"
    );
    for r in out.ledger.records() {
        println!(
            "{:>5} {:>8.1} {:>12.5} {:>12.5}",
            r.index, r.cumulative_cost, r.fitness, r.best_so_far
        );
    }
    println!("best codes {:?}", out.best.codes());
    println!("final fitness {}", out.final_fitness);
    Ok(())
}
