//! Fit the RBF surrogate to a handful of samples of a 2-D function and
//! compare predictions with the truth on a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shcho::surrogate::{fit_rbf, localized_augment, TrainingSet};

fn truth(x: &[f64]) -> f64 {
    -((x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2))
}

fn main() -> shcho::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ts = TrainingSet::new();
    for _ in 0..12 {
        let p = vec![rng.gen::<f64>(), rng.gen::<f64>()];
        let f = truth(&p);
        ts.push_real(p, f)?;
    }

    for (label, data) in [
        ("real points only", ts.clone()),
        (
            "with 3 jittered copies each",
            localized_augment(&ts, 3, 0.05, &mut rng)?,
        ),
    ] {
        let model = fit_rbf(&data)?;
        let mut worst: f64 = 0.0;
        let mut sum = 0.0;
        let steps = 21;
        for i in 0..steps {
            for j in 0..steps {
                let x = [i as f64 / 20.0, j as f64 / 20.0];
                let err = (model.predict(&x)? - truth(&x)).abs();
                worst = worst.max(err);
                sum += err;
            }
        }
        println!(
            "{label:<28} centers {:>2}  width {:.4}  mean |err| {:.4}  max |err| {:.4}",
            model.n_centers(),
            model.width,
            sum / (steps * steps) as f64,
            worst
        );
    }
    Ok(())
}
