//! Split a chain into overlapping segments and show what each phase optimizes.
//!
//! ```text
//! cargo run --example decompose -- [n_blocks] [dims_per_block] [epsilon]
//! ```

use shcho::decomposition::{exclusive_decompose, sod_decompose};
use shcho::space::{HyperparameterSpec, SpaceLayout};

fn main() -> shcho::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    let n_blocks = args.first().copied().unwrap_or(15);
    let per_block = args.get(1).copied().unwrap_or(3);
    let epsilon = args.get(2).copied().unwrap_or(20);

    let block = (0..per_block)
        .map(|j| HyperparameterSpec::integer(format!("h{j}"), 0, 3))
        .collect::<shcho::Result<Vec<_>>>()?;
    let layout = SpaceLayout::uniform(n_blocks, block)?;

    let plan = sod_decompose(&layout, epsilon)?;
    println!(
        "{n_blocks} blocks x {per_block} dims, epsilon {epsilon}: {} segments",
        plan.m()
    );
    for (i, seg) in plan.segments.iter().enumerate() {
        println!(
            "  segment {} blocks {:>2}..={:<2} dims {:>2}  peculiar {:>2}  hand-off after block {}",
            seg.id,
            seg.first_block(),
            seg.last_block(),
            seg.dims.len(),
            plan.peculiar_dims(i).len(),
            plan.handoff_block(i),
        );
    }
    for ov in &plan.overlaps {
        println!(
            "  overlap {}|{}: {} shared blocks, {} shared dims",
            ov.left + 1,
            ov.left + 2,
            ov.shared_blocks,
            ov.com.len()
        );
    }

    let exclusive = exclusive_decompose(&layout, epsilon)?;
    let ranges: Vec<String> = exclusive
        .segments
        .iter()
        .map(|s| format!("{}..={}", s.first_block(), s.last_block()))
        .collect();
    println!("without overlap: {}", ranges.join(" "));
    println!("{}", plan.to_json_string());
    Ok(())
}
