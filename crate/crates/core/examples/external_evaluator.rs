//! Drive an evaluator in a child process over the JSON-lines protocol.
//!
//! The child here is a stand-in written in `sh`: every request is answered
//! with a constant fitness. Any command that speaks the protocol works, for
//! example `shcho serve --problem bench_pipeline`.
//!
//! ```text
//! cargo run --example external_evaluator -- ['<evaluator command>']
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shcho::decomposition::sod_decompose;
use shcho::problems::{ExternalSession, SegmentEvaluator};
use shcho::space::{HyperparameterSpec, SpaceLayout};

const STAND_IN: &str = r#"sh -c '
while IFS= read -r line; do
  case "$line" in
    *hello*) echo "{\"ok\":true,\"n_blocks\":4,\"dims_per_block\":[2,2,2,2]}" ;;
    *propagate*) echo "{\"ok\":true,\"state\":\"s1\",\"cost\":0.0}" ;;
    *evaluate*) echo "{\"ok\":true,\"fitness\":-0.25,\"cost\":0.5}" ;;
    *shutdown*) echo "{\"ok\":true}"; exit 0 ;;
  esac
done'"#;

fn main() -> shcho::Result<()> {
    let command = std::env::args()
        .nth(1)
        .unwrap_or_else(|| STAND_IN.to_string());
    let block = vec![
        HyperparameterSpec::integer("width", 0, 9)?,
        HyperparameterSpec::categorical("act", ["relu", "tanh", "clip"])?,
    ];
    let layout = SpaceLayout::uniform(4, block)?;
    let plan = sod_decompose(&layout, 4)?;

    let mut session = ExternalSession::connect(&command, layout.clone(), Some(11))?;
    let h = layout.random_solution(&mut ChaCha8Rng::seed_from_u64(5));
    let root = session.root_state();
    let first = plan.segment(0);
    let sub = h.project(&first.dims);
    let eval = session.evaluate_segment(first, &sub, &root)?;
    println!(
        "segment {} on the root state: fitness {} cost {}",
        first.id, eval.fitness, eval.cost
    );

    let state = session.propagate(first, plan.handoff_block(0), &sub, &root)?;
    let second = plan.segment(1);
    let eval = session.evaluate_segment(second, &h.project(&second.dims), &state)?;
    println!(
        "segment {} on state {}: fitness {}",
        second.id, state.id, eval.fitness
    );

    println!("whole chain: {}", session.full_evaluate(&h)?.fitness);
    session.shutdown()
}
