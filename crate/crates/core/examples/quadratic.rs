//! SHCHO against random search on the coupled quadratic chain.
//!
//! ```text
//! cargo run --release --example quadratic -- [budget] [seed]
//! ```

use shcho::coevolution::{run_method, CoevConfig, Method, VariantFlags};
use shcho::problems::{QuadraticBench, QuadraticParams, SegmentEvaluator};

fn main() -> shcho::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let budget: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = CoevConfig {
        epsilon: 10,
        ..Default::default()
    };

    let mut bench = QuadraticBench::new(QuadraticParams::default())?;
    let optimum = bench.optimum();
    println!(
        "{} blocks, {} dims, optimum {}",
        bench.layout().n_blocks(),
        bench.layout().total_dims(),
        bench.full_evaluate(&optimum)?.fitness
    );

    for method in [Method::Shcho(VariantFlags::SHCHO), Method::Random] {
        let mut bench = QuadraticBench::new(QuadraticParams::default())?;
        let out = run_method(&mut bench, method, &cfg, budget, seed)?;
        let off = out
            .best
            .codes()
            .iter()
            .zip(optimum.codes())
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "{:<8} final {:>10.4}  evaluations {:>4}  cost {:>6.2}  rounds {}  dims off target {off}",
            method.name(),
            out.final_fitness,
            out.ledger.len(),
            out.ledger.spent(),
            out.iterations
        );
    }
    Ok(())
}
