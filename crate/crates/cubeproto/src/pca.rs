//! First-principal-component scores via power iteration on the sample
//! covariance. The per-row scores act as the scalar sizes that drive
//! inclusion probabilities.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Projection of every row onto a dominant principal axis.
#[derive(Debug, Clone)]
pub struct ComponentScores {
    scores: Vec<f64>,
    explained_variance_ratio: f64,
    axis: Vec<f64>,
}

impl ComponentScores {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        self.explained_variance_ratio
    }

    /// Unit-norm principal axis in encoded-column space.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
}

/// Scores along the first principal component of the encoded matrix.
///
/// Runs power iteration on the d x d sample covariance until successive
/// eigenvector estimates differ by less than `tol` in 2-norm. The returned
/// axis is sign-fixed so its largest-magnitude coordinate is positive,
/// making the output deterministic. The seed only matters when the
/// all-ones start vector is orthogonal to the dominant eigenvector; a
/// seeded random restart then recovers it.
pub fn first_component(
    matrix: &EncodedMatrix,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<ComponentScores> {
    let mut all = top_components(matrix, 1, seed, tol, max_iter)?;
    Ok(all.remove(0))
}

/// Scores along the top `count` principal components, extracted by power
/// iteration with deflation. Component 0 equals `first_component`.
pub fn top_components(
    matrix: &EncodedMatrix,
    count: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<ComponentScores>> {
    let values = matrix.values();
    let (n, d) = values.dim();
    if n < 2 {
        return Err(Error::Argument(format!(
            "principal components need at least 2 rows, got {n}"
        )));
    }
    if d < 1 {
        return Err(Error::Argument("matrix has no columns".into()));
    }
    if count < 1 || count > d {
        return Err(Error::Argument(format!(
            "component count {count} must be in 1..={d}"
        )));
    }

    let centered = center_columns(values);
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    let trace: f64 = (0..d).map(|j| cov[(j, j)]).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (axis, eigenvalue) = dominant_eigenvector(&cov, &mut rng, tol, max_iter)?;
        let axis = fix_sign(axis);
        let scores = centered.dot(&axis).to_vec();
        let ratio = if trace > 0.0 {
            (eigenvalue / trace).clamp(0.0, 1.0)
        } else {
            0.0
        };
        // Deflate before extracting the next component.
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] -= eigenvalue * axis[i] * axis[j];
            }
        }
        out.push(ComponentScores {
            scores,
            explained_variance_ratio: ratio,
            axis: axis.to_vec(),
        });
    }
    Ok(out)
}

fn center_columns(values: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = values.dim();
    let mut centered = values.to_owned();
    for j in 0..d {
        let mean = values.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    centered
}

/// Power iteration from the normalized all-ones vector, with a seeded
/// random restart to cover starts orthogonal to the dominant eigenvector.
/// Keeps whichever converged run has the larger Rayleigh quotient.
fn dominant_eigenvector(
    cov: &Array2<f64>,
    rng: &mut ChaCha8Rng,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, f64)> {
    let d = cov.nrows();
    let ones = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let noise = Array1::from_shape_fn(d, |_| rng.random::<f64>() - 0.5);

    let first = power_iteration(cov, ones, tol, max_iter);
    let second = power_iteration(cov, noise, tol, max_iter);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            if b.1 > a.1 * (1.0 + 1e-6) + f64::MIN_POSITIVE {
                Ok(b)
            } else {
                Ok(a)
            }
        }
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

fn power_iteration(
    cov: &Array2<f64>,
    start: Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, f64)> {
    let norm0 = norm2(&start);
    if norm0 == 0.0 {
        return Err(Error::Argument("power iteration start vector is zero".into()));
    }
    let mut v = start / norm0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let w = cov.dot(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            // v lies in the null space; it is an exact eigenvector for 0.
            return Ok((v, 0.0));
        }
        let next = w / nw;
        residual = norm2(&(&next - &v));
        v = next;
        if residual < tol {
            let lambda = v.dot(&cov.dot(&v));
            return Ok((v, lambda));
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

fn norm2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Flips the vector so its largest-magnitude coordinate (first among ties)
/// is positive.
fn fix_sign(mut v: Array1<f64>) -> Array1<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    v
}
