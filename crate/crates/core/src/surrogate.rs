//! Radial-basis-function surrogate over normalized sub-vectors.
//!
//! The model is a constant offset (the mean training label) plus a weighted
//! sum of kernels centred on the training points. Weights solve the ridge
//! system `(K + λI) w = f - offset`. The kernel width starts at the median
//! pairwise distance and is halved while the fit fails to interpolate its
//! own centres, which happens when points crowd together relative to that
//! width (e.g. after localized augmentation).

use std::collections::HashMap;

use log::trace;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// Normalized points with their fitness labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub points: Vec<Vec<f64>>,
    pub fitnesses: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn push(&mut self, point: Vec<f64>, fitness: f64, provenance: Provenance) -> Result<()> {
        if let Some(d) = self.dim() {
            if point.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: point.len(),
                });
            }
        }
        if point.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "training point outside the unit cube: {point:?}"
            )));
        }
        self.points.push(point);
        self.fitnesses.push(fitness);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn push_real(&mut self, point: Vec<f64>, fitness: f64) -> Result<()> {
        self.push(point, fitness, Provenance::Real)
    }

    pub fn real(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points
            .iter()
            .zip(&self.fitnesses)
            .zip(&self.provenance)
            .filter(|(_, p)| **p == Provenance::Real)
            .map(|((x, &f), _)| (x.as_slice(), f))
    }

    /// Collapse identical points, keeping the best label (real wins ties).
    pub fn deduplicated(&self) -> TrainingSet {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut out = TrainingSet::new();
        for ((p, &f), &prov) in self
            .points
            .iter()
            .zip(&self.fitnesses)
            .zip(&self.provenance)
        {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&j) => {
                    let better = f > out.fitnesses[j]
                        || (f == out.fitnesses[j]
                            && prov == Provenance::Real
                            && out.provenance[j] == Provenance::Synthetic);
                    if better {
                        out.fitnesses[j] = f;
                        out.provenance[j] = prov;
                    }
                }
                None => {
                    index.insert(key, out.points.len());
                    out.points.push(p.clone());
                    out.fitnesses.push(f);
                    out.provenance.push(prov);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-r^2 / (2 σ^2))`
    Gaussian,
    /// `1 / sqrt(1 + r^2 / (2 σ^2))`
    InverseMultiquadric,
}

impl Kernel {
    fn eval(self, sq_dist: f64, width: f64) -> f64 {
        let s = sq_dist / (2.0 * width * width);
        match self {
            Kernel::Gaussian => (-s).exp(),
            Kernel::InverseMultiquadric => 1.0 / (1.0 + s).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub kernel: Kernel,
    pub regularization: f64,
    /// Allowed interpolation residual, relative to `max(1, max |f - offset|)`.
    pub interpolation_tol: f64,
    pub max_width_halvings: u32,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            regularization: 1e-8,
            interpolation_tol: 1e-7,
            max_width_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub width: f64,
    pub regularization: f64,
    pub offset: f64,
    pub config: RbfConfig,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median(mut values: Vec<f64>) -> f64 {
    let n = values.len();
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl RbfModel {
    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.offset
            + self
                .centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * self.config.kernel.eval(sq_dist(x, c), self.width))
                .sum::<f64>()
    }
}

pub fn fit_rbf(ts: &TrainingSet) -> Result<RbfModel> {
    fit_rbf_with(ts, &RbfConfig::default())
}

pub fn fit_rbf_with(ts: &TrainingSet, config: &RbfConfig) -> Result<RbfModel> {
    let data = ts.deduplicated();
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let offset = data.fitnesses.iter().sum::<f64>() / n as f64;
    let targets = DVector::from_iterator(n, data.fitnesses.iter().map(|f| f - offset));
    let scale = targets.amax().max(1.0);

    let mut sq = DMatrix::<f64>::zeros(n, n);
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for k in (j + 1)..n {
            let d2 = sq_dist(&data.points[j], &data.points[k]);
            sq[(j, k)] = d2;
            sq[(k, j)] = d2;
            dists.push(d2.sqrt());
        }
    }
    let mut width = median(dists);
    if !(width > 0.0) {
        width = 1.0;
    }

    let lambda = config.regularization;
    let mut halvings = 0;
    loop {
        let kernel = sq.map(|d2| config.kernel.eval(d2, width));
        let system = &kernel + DMatrix::identity(n, n) * lambda;
        let weights = match system.clone().cholesky() {
            Some(chol) => chol.solve(&targets),
            None => system
                .lu()
                .solve(&targets)
                .ok_or_else(|| Error::InvalidParameter("singular RBF system".into()))?,
        };
        let residual = (&kernel * &weights - &targets).amax();
        if residual <= config.interpolation_tol * scale || halvings >= config.max_width_halvings {
            trace!("rbf fit: n={n} width={width:.3e} halvings={halvings} residual={residual:.2e}");
            return Ok(RbfModel {
                centers: data.points,
                weights: weights.iter().copied().collect(),
                width,
                regularization: lambda,
                offset,
                config: *config,
            });
        }
        width *= 0.5;
        halvings += 1;
    }
}

pub fn predict_rbf(model: &RbfModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Add `count_per_point` jittered copies of every real point, each
/// coordinate moved uniformly within `±delta` and clamped to `[0, 1]`.
/// Copies inherit their parent's label.
pub fn localized_augment<R: Rng + ?Sized>(
    ts: &TrainingSet,
    count_per_point: usize,
    delta: f64,
    rng: &mut R,
) -> Result<TrainingSet> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let mut out = ts.clone();
    let parents: Vec<(Vec<f64>, f64)> = ts.real().map(|(p, f)| (p.to_vec(), f)).collect();
    for (p, f) in parents {
        for _ in 0..count_per_point {
            let q = p
                .iter()
                .map(|&v| (v + rng.gen_range(-delta..=delta)).clamp(0.0, 1.0))
                .collect();
            out.push(q, f, Provenance::Synthetic)?;
        }
    }
    Ok(out)
}

/// Append a real-evaluated point and refit from scratch.
pub fn refit_with(
    model: &RbfModel,
    ts: &mut TrainingSet,
    new_point: Vec<f64>,
    new_fitness: f64,
) -> Result<RbfModel> {
    if new_point.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: new_point.len(),
        });
    }
    ts.push_real(new_point, new_fitness)?;
    fit_rbf_with(ts, &model.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(points: &[&[f64]], fitnesses: &[f64]) -> TrainingSet {
        let mut ts = TrainingSet::new();
        for (p, &f) in points.iter().zip(fitnesses) {
            ts.push_real(p.to_vec(), f).unwrap();
        }
        ts
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TrainingSet {
        let mut ts = TrainingSet::new();
        for _ in 0..n {
            let p = (0..d).map(|_| rng.gen::<f64>()).collect();
            ts.push_real(p, rng.gen_range(-3.0..3.0)).unwrap();
        }
        ts
    }

    #[test]
    fn two_point_closed_form() {
        // offset 0.5, targets (-0.5, 0.5), width 1, k = exp(-1/2)
        let model = fit_rbf(&set(&[&[0.0], &[1.0]], &[0.0, 1.0])).unwrap();
        let k = (-0.5f64).exp();
        let lambda = 1e-8;
        let det = (1.0 + lambda) * (1.0 + lambda) - k * k;
        let w0 = ((1.0 + lambda) * -0.5 - k * 0.5) / det;
        let w1 = ((1.0 + lambda) * 0.5 - k * -0.5) / det;
        assert_eq!(model.width, 1.0);
        assert_abs_diff_eq!(model.weights[0], w0, epsilon = 1e-9);
        assert_abs_diff_eq!(model.weights[1], w1, epsilon = 1e-9);
        let mid = (-0.125f64).exp();
        let expected = 0.5 + w0 * mid + w1 * mid;
        assert_abs_diff_eq!(model.predict(&[0.5]).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(model.predict(&[0.5]).unwrap(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            model.predict(&[0.25]).unwrap(),
            0.5 + w0 * (-0.03125f64).exp() + w1 * (-0.28125f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetric_centres_midpoint_kernel_sum() {
        let model = fit_rbf(&set(&[&[0.2, 0.5], &[0.8, 0.5]], &[2.0, 4.0])).unwrap();
        let at_mid = model.predict(&[0.5, 0.5]).unwrap();
        let direct: f64 = model.offset
            + model
                .centers
                .iter()
                .zip(&model.weights)
                .map(|(c, w)| {
                    let d2 = (0.5 - c[0]).powi(2) + (0.5 - c[1]).powi(2);
                    w * (-d2 / (2.0 * model.width * model.width)).exp()
                })
                .sum::<f64>();
        assert_abs_diff_eq!(at_mid, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(at_mid, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn interpolates_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let d = rng.gen_range(1..=10);
            let n = rng.gen_range(2..=40);
            let ts = random_set(&mut rng, n, d);
            let model = fit_rbf(&ts).unwrap();
            for (p, f) in ts.points.iter().zip(&ts.fitnesses) {
                assert!((model.predict(p).unwrap() - f).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn far_points_decay_to_offset() {
        let model = fit_rbf(&set(
            &[&[0.0, 0.0], &[0.1, 0.0], &[0.0, 0.1]],
            &[1.0, -1.0, 3.0],
        ))
        .unwrap();
        assert_abs_diff_eq!(model.offset, 1.0);
        assert_abs_diff_eq!(model.predict(&[50.0, 50.0]).unwrap(), 1.0, epsilon = 1e-12);
        let zero_mean = fit_rbf(&set(&[&[0.0], &[0.1]], &[-1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(zero_mean.predict(&[100.0]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_rbf(&set(&[&[0.3], &[0.3], &[0.3]], &[1.0, 2.0, 0.0])),
            Err(Error::InsufficientData { got: 1, .. })
        ));
        assert!(matches!(
            fit_rbf(&TrainingSet::new()),
            Err(Error::InsufficientData { .. })
        ));
        let model = fit_rbf(&set(&[&[0.0], &[1.0]], &[0.0, 1.0])).unwrap();
        assert!(matches!(
            model.predict(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut ts = TrainingSet::new();
        ts.push_real(vec![0.1], 0.0).unwrap();
        assert!(ts.push_real(vec![0.1, 0.2], 0.0).is_err());
        assert!(ts.push_real(vec![1.5], 0.0).is_err());
    }

    #[test]
    fn duplicates_keep_best_label() {
        let ts = set(&[&[0.1], &[0.9], &[0.1]], &[1.0, 0.0, 5.0]);
        let model = fit_rbf(&ts).unwrap();
        assert_eq!(model.n_centers(), 2);
        assert!((model.predict(&[0.1]).unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn augment_counts_and_containment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = set(&[&[0.5, 0.02, 0.99]], &[7.0]);
        let out = localized_augment(&ts, 3, 0.05, &mut rng).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(
            out.provenance
                .iter()
                .filter(|p| **p == Provenance::Real)
                .count(),
            1
        );
        assert!(out.fitnesses.iter().all(|&f| f == 7.0));
        for q in &out.points[1..] {
            for (a, b) in q.iter().zip(&ts.points[0]) {
                assert!((a - b).abs() <= 0.05 + 1e-15);
                assert!((0.0..=1.0).contains(a));
            }
        }
        assert_eq!(localized_augment(&ts, 0, 0.05, &mut rng).unwrap(), ts);
        assert!(localized_augment(&ts, 1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn augment_keeps_real_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ts = random_set(&mut rng, 6, 3);
        let out = localized_augment(&ts, 3, 0.05, &mut rng).unwrap();
        let before: Vec<_> = ts.real().map(|(p, f)| (p.to_vec(), f)).collect();
        let after: Vec<_> = out.real().map(|(p, f)| (p.to_vec(), f)).collect();
        assert_eq!(before, after);
        // augmented sets still interpolate every real point
        let model = fit_rbf(&out).unwrap();
        for (p, f) in before {
            assert!((model.predict(&p).unwrap() - f).abs() < 1e-4);
        }
    }

    #[test]
    fn refit_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ts = random_set(&mut rng, 5, 2);
        let model = fit_rbf(&ts).unwrap();
        let grown = refit_with(&model, &mut ts, vec![0.33, 0.66], 9.0).unwrap();
        assert_eq!(grown.n_centers(), model.n_centers() + 1);
        assert!((grown.predict(&[0.33, 0.66]).unwrap() - 9.0).abs() < 1e-6);

        let dup = ts.points[0].clone();
        let best = ts.fitnesses[0] + 10.0;
        let replaced = refit_with(&grown, &mut ts, dup.clone(), best).unwrap();
        assert_eq!(replaced.n_centers(), grown.n_centers());
        assert!((replaced.predict(&dup).unwrap() - best).abs() < 1e-6);

        assert!(refit_with(&replaced, &mut ts, vec![0.1], 0.0).is_err());
    }

    #[test]
    fn prediction_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let ts = random_set(&mut rng, 12, 3);
            let model = fit_rbf(&ts).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let y: Vec<f64> = x.iter().map(|v| v + 1e-9).collect();
            let scale = model.weights.iter().map(|w| w.abs()).sum::<f64>().max(1.0);
            let diff = (model.predict(&x).unwrap() - model.predict(&y).unwrap()).abs();
            assert!(diff / scale < 1e-6, "diff {diff} scale {scale}");
        }
    }

    #[test]
    fn inverse_multiquadric_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ts = random_set(&mut rng, 15, 4);
        let config = RbfConfig {
            kernel: Kernel::InverseMultiquadric,
            ..RbfConfig::default()
        };
        let model = fit_rbf_with(&ts, &config).unwrap();
        for (p, f) in ts.points.iter().zip(&ts.fitnesses) {
            assert!((model.predict(p).unwrap() - f).abs() < 1e-4);
        }
    }
}
