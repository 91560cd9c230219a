//! NSGA-II on two competing surrogates, then the knee of the resulting front.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shcho::evolve::{knee_point, nsga2_optimize, EvolveParams};
use shcho::space::{normalize, HyperparameterSpec, SpaceLayout, SubVector};
use shcho::surrogate::{fit_rbf, TrainingSet};

fn main() -> shcho::Result<()> {
    let layout = SpaceLayout::uniform(
        1,
        vec![
            HyperparameterSpec::integer("a", 0, 20)?,
            HyperparameterSpec::integer("b", 0, 20)?,
        ],
    )?;
    let dims = [0, 1];

    // one objective prefers small codes, the other large ones
    let mut left = TrainingSet::new();
    let mut right = TrainingSet::new();
    for a in (0..=20).step_by(5) {
        for b in (0..=20).step_by(5) {
            let x = normalize(&SubVector::new(dims.to_vec(), vec![a, b])?, &layout)?;
            left.push_real(x.clone(), -(x[0] * x[0] + x[1] * x[1]))?;
            right.push_real(x.clone(), -((1.0 - x[0]).powi(2) + (1.0 - x[1]).powi(2)))?;
        }
    }
    let (ma, mb) = (fit_rbf(&left)?, fit_rbf(&right)?);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut front = nsga2_optimize(&ma, &mb, &dims, &layout, &EvolveParams::default(), &mut rng)?;
    front
        .members
        .sort_by(|x, y| x.objectives[0].total_cmp(&y.objectives[0]));
    println!("front of {} members", front.len());
    for m in &front.members {
        println!(
            "  {:?}  {:>8.4} {:>8.4}",
            m.sub.codes, m.objectives[0], m.objectives[1]
        );
    }
    let knee = knee_point(&front)?;
    println!("knee {:?} {:?}", knee.sub.codes, knee.objectives);
    Ok(())
}
