//! Median final fitness of every method on the pipeline chain.
//!
//! ```text
//! cargo run --release --example ablation -- [budget] [seeds]
//! ```

use shcho::coevolution::{run_method, CoevConfig, Method};
use shcho::problems::{PipelineBench, PipelineParams};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn main() -> shcho::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let budget: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(80.0);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let epsilon: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(9);
    let cfg = CoevConfig {
        epsilon,
        ..Default::default()
    };

    println!(
        "{:<10} {:>12} {:>12} {:>12}   per seed",
        "method", "median", "min", "max"
    );
    for method in Method::ALL {
        let mut finals = Vec::new();
        for seed in 0..seeds {
            let mut bench = PipelineBench::new(PipelineParams::default())?;
            finals.push(run_method(&mut bench, method, &cfg, budget, seed)?.final_fitness);
        }
        let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let per: Vec<String> = finals.iter().map(|f| format!("{f:.4}")).collect();
        println!(
            "{:<10} {:>12.5} {:>12.5} {:>12.5}   {}",
            method,
            median(finals.clone()),
            lo,
            hi,
            per.join(" ")
        );
    }
    Ok(())
}
