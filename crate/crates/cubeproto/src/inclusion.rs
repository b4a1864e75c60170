//! Inclusion probabilities from component scores: positive sizes, then an
//! exact solve of `sum_i min(z * s_i / X, 1) = N` so the probabilities sum
//! to the requested sample size.

use crate::error::{Error, Result};
use crate::pca::ComponentScores;

/// Per-unit inclusion probabilities summing to the sample size.
#[derive(Debug, Clone)]
pub struct InclusionPlan {
    pi: Vec<f64>,
    sizes: Vec<f64>,
    sample_size: usize,
    z_star: f64,
}

impl InclusionPlan {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// The solved scaling factor applied to `size / total` before capping.
    pub fn z_star(&self) -> f64 {
        self.z_star
    }
}

/// Shifts component scores into strictly positive sizes.
///
/// `s_i = (score_i - min) + 0.01 * (max - min)`; a zero score range yields
/// uniform all-ones sizes.
pub fn sizes_from_scores(scores: &ComponentScores) -> Vec<f64> {
    shift_to_positive(scores.scores())
}

fn shift_to_positive(s: &[f64]) -> Vec<f64> {
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) {
        return vec![1.0; s.len()];
    }
    let shift = 0.01 * range;
    s.iter().map(|&v| (v - min) + shift).collect()
}

/// Solves for inclusion probabilities `pi_i = min(1, z* s_i / X)` with
/// `sum pi = N`, where `X = sum s_i`.
///
/// `h(z) = sum_i min(z s_i / X, 1)` is piecewise linear with breakpoints at
/// `X / s_i`; walking its segments in breakpoint order gives the exact
/// crossing without an iterative tolerance.
pub fn inclusion_probabilities(sizes: &[f64], sample_size: usize) -> Result<InclusionPlan> {
    let n = sizes.len();
    if n == 0 {
        return Err(Error::Argument("sizes must be non-empty".into()));
    }
    if sample_size < 1 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    if sample_size > n {
        return Err(Error::Argument(format!(
            "sample size {sample_size} exceeds population size {n}"
        )));
    }
    if sizes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Argument("sizes must be positive and finite".into()));
    }

    let total: f64 = sizes.iter().sum();
    if sample_size == n {
        return Ok(InclusionPlan {
            pi: vec![1.0; n],
            sizes: sizes.to_vec(),
            sample_size,
            z_star: total / sizes.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }

    // Indices by size descending: unit `order[k]` caps k-th.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sizes[b].partial_cmp(&sizes[a]).unwrap());

    // Suffix sums of uncapped sizes.
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + sizes[order[k]];
    }

    let target = sample_size as f64;
    let mut z_star = None;
    for capped in 0..n {
        let uncapped_total = suffix[capped];
        let candidate = (target - capped as f64) * total / uncapped_total;
        // Next breakpoint: where the (capped+1)-th largest unit hits 1.
        let next_break = total / sizes[order[capped]];
        if candidate <= next_break * (1.0 + 1e-12) {
            z_star = Some(candidate);
            break;
        }
    }
    // The crossing always exists for sample_size < n; the fallback guards
    // against accumulated rounding at the final breakpoint.
    let z_star = z_star.unwrap_or(total / sizes[order[n - 1]]);

    let pi: Vec<f64> = sizes
        .iter()
        .map(|&s| (z_star * s / total).min(1.0))
        .collect();
    Ok(InclusionPlan {
        pi,
        sizes: sizes.to_vec(),
        sample_size,
        z_star,
    })
}
