use super::{Individual, ParetoFront};
use crate::error::{Error, Result};

fn normalized_objectives(front: &ParetoFront) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for m in &front.members {
        for k in 0..2 {
            lo[k] = lo[k].min(m.objectives[k]);
            hi[k] = hi[k].max(m.objectives[k]);
        }
    }
    front
        .members
        .iter()
        .map(|m| {
            let mut out = [0.0; 2];
            for k in 0..2 {
                if hi[k] > lo[k] {
                    out[k] = (m.objectives[k] - lo[k]) / (hi[k] - lo[k]);
                }
            }
            out
        })
        .collect()
}

/// Index of the knee of a bi-objective front (maximization).
///
/// Objectives are min-max normalized over the front. The knee is the member
/// lying farthest beyond the line through the two extreme members, measured
/// perpendicular to that line and positive toward the ideal point `(1, 1)`.
/// Ties go to the lower index. Fronts of one or two members return the
/// member with the larger normalized sum, ties again to the lower index.
pub fn knee_index(front: &ParetoFront) -> Result<usize> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    for m in &front.members {
        if m.objectives.len() != 2 {
            return Err(Error::ArityMismatch {
                expected: 2,
                got: m.objectives.len(),
            });
        }
    }
    let norm = normalized_objectives(front);
    if norm.len() <= 2 {
        let mut best = 0;
        for (i, p) in norm.iter().enumerate().skip(1) {
            if p[0] + p[1] > norm[best][0] + norm[best][1] {
                best = i;
            }
        }
        return Ok(best);
    }

    // extreme members: best on one objective, the other breaking ties
    let extreme = |k: usize| {
        let o = 1 - k;
        let mut best = 0;
        for (i, p) in norm.iter().enumerate().skip(1) {
            if p[k] > norm[best][k] || (p[k] == norm[best][k] && p[o] > norm[best][o]) {
                best = i;
            }
        }
        norm[best]
    };
    let a = extreme(0);
    let b = extreme(1);
    // normal to the segment a-b, oriented toward the ideal point
    let mut normal = [b[1] - a[1], a[0] - b[0]];
    if normal[0] + normal[1] < 0.0 {
        normal = [-normal[0], -normal[1]];
    }
    let len = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
    if len == 0.0 {
        return Ok(0);
    }
    let mut best = 0;
    let mut best_dist = f64::NEG_INFINITY;
    for (i, p) in norm.iter().enumerate() {
        let dist = (normal[0] * (p[0] - a[0]) + normal[1] * (p[1] - a[1])) / len;
        if dist > best_dist {
            best = i;
            best_dist = dist;
        }
    }
    Ok(best)
}

pub fn knee_point(front: &ParetoFront) -> Result<Individual> {
    knee_index(front).map(|i| front.members[i].clone())
}
