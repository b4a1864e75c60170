//! The cube method: a balanced-sampling flight phase walking the inclusion
//! probabilities inside the null space of the balancing constraints, and a
//! landing phase that rounds the few remaining fractional units by
//! exhaustive enumeration. A uniform random-sampling baseline lives here too.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{encode, Dataset};
use crate::error::{Error, Result};
use crate::inclusion::{inclusion_probabilities, sizes_from_scores, InclusionPlan};
use crate::pca::{top_components, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Fractional units the landing enumeration will accept (2^20 completions).
pub const LANDING_LIMIT: usize = 20;

/// Probabilities within this distance of 0 or 1 are snapped to the boundary.
const BOUNDARY_EPS: f64 = 1e-12;

/// Relative rank tolerance for the null-space elimination.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Cube,
    Random,
}

/// Selected unit indices with their Horvitz-Thompson weights.
#[derive(Debug, Clone)]
pub struct Sample {
    indices: Vec<usize>,
    weights: Vec<f64>,
    method: SampleMethod,
}

impl Sample {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn method(&self) -> SampleMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The `p x n` matrix of balancing variables `x~_j / pi_j`, with row 0 equal
/// to `pi / pi = 1` so the sample size itself is a balancing constraint.
#[derive(Debug, Clone)]
pub struct BalanceSystem {
    a: Array2<f64>,
    pi_initial: Vec<f64>,
    initial_totals: Vec<f64>,
}

impl BalanceSystem {
    /// Rows of the balancing matrix.
    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    /// Population size.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn pi_initial(&self) -> &[f64] {
        &self.pi_initial
    }

    /// `A . pi_initial`, the totals the sample must preserve.
    pub fn initial_totals(&self) -> &[f64] {
        &self.initial_totals
    }

    /// Builds a system from a raw balancing matrix and initial probabilities;
    /// used for synthetic systems in tests and tools.
    pub fn from_parts(a: Array2<f64>, pi_initial: Vec<f64>) -> Result<BalanceSystem> {
        if a.ncols() != pi_initial.len() {
            return Err(Error::Argument(format!(
                "matrix has {} columns but {} probabilities given",
                a.ncols(),
                pi_initial.len()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::Argument("balance system needs at least one row".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("balance matrix entries must be finite".into()));
        }
        if pi_initial.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Argument("initial probabilities must lie in [0, 1]".into()));
        }
        let initial_totals = mat_vec(a.view(), &pi_initial);
        Ok(BalanceSystem {
            a,
            pi_initial,
            initial_totals,
        })
    }
}

/// Assembles the balancing matrix from an inclusion plan and `q` auxiliary
/// score columns: row 0 is all ones, row `r > 0` holds `score_r[j] / pi_j`.
pub fn build_balance_system(
    plan: &InclusionPlan,
    aux_scores: &[Vec<f64>],
) -> Result<BalanceSystem> {
    let n = plan.n();
    for (r, col) in aux_scores.iter().enumerate() {
        if col.len() != n {
            return Err(Error::Argument(format!(
                "auxiliary score column {r} has length {}, expected {n}",
                col.len()
            )));
        }
    }
    if let Some(j) = plan.pi().iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Argument(format!(
            "unit {j} has zero inclusion probability; exclude it before balancing"
        )));
    }
    let p = aux_scores.len() + 1;
    let mut a = Array2::zeros((p, n));
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    for (r, col) in aux_scores.iter().enumerate() {
        for j in 0..n {
            a[(r + 1, j)] = col[j] / plan.pi()[j];
        }
    }
    BalanceSystem::from_parts(a, plan.pi().to_vec())
}

/// Probabilities after the flight phase: all but at most `p` units settled
/// at 0 or 1.
#[derive(Debug, Clone)]
pub struct FlightState {
    pi: Vec<f64>,
    fractional: Vec<usize>,
    steps_taken: usize,
}

impl FlightState {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Indices still strictly between 0 and 1, ascending.
    pub fn fractional(&self) -> &[usize] {
        &self.fractional
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }
}

fn is_fractional(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

fn snap(p: &mut f64) {
    if p.abs() <= BOUNDARY_EPS {
        *p = 0.0;
    } else if (*p - 1.0).abs() <= BOUNDARY_EPS {
        *p = 1.0;
    }
}

/// Runs the flight phase: a martingale random walk that keeps `A . pi`
/// constant while driving probabilities to 0 or 1.
pub fn flight_phase<R: Rng + ?Sized>(system: &BalanceSystem, rng: &mut R) -> FlightState {
    flight_phase_observed(system, rng, |_| {})
}

/// Flight phase with a per-step observer; the observer sees the probability
/// vector after every completed walk step.
pub fn flight_phase_observed<R: Rng + ?Sized>(
    system: &BalanceSystem,
    rng: &mut R,
    mut on_step: impl FnMut(&[f64]),
) -> FlightState {
    let n = system.n();
    let p = system.p();
    let a = system.matrix();

    let mut pi: Vec<f64> = system.pi_initial().to_vec();
    for v in pi.iter_mut() {
        snap(v);
    }

    let mut pending: std::collections::VecDeque<usize> =
        (0..n).filter(|&i| is_fractional(pi[i])).collect();
    let mut window: Vec<usize> = Vec::with_capacity(p + 1);
    let mut steps = 0usize;

    loop {
        while window.len() < p + 1 {
            match pending.pop_front() {
                Some(i) => window.push(i),
                None => break,
            }
        }
        if window.len() < p + 1 {
            break;
        }

        let mut active = Array2::zeros((p, window.len()));
        for (k, &j) in window.iter().enumerate() {
            for r in 0..p {
                active[(r, k)] = a[(r, j)];
            }
        }
        let u = match null_space_vector(&active) {
            Some(u) => u,
            None => break,
        };

        // Largest steps along +u and -u keeping every window unit in [0, 1].
        let mut lambda_pos = f64::INFINITY;
        let mut lambda_neg = f64::INFINITY;
        for (k, &j) in window.iter().enumerate() {
            let uk = u[k];
            if uk > 0.0 {
                lambda_pos = lambda_pos.min((1.0 - pi[j]) / uk);
                lambda_neg = lambda_neg.min(pi[j] / uk);
            } else if uk < 0.0 {
                lambda_pos = lambda_pos.min(pi[j] / -uk);
                lambda_neg = lambda_neg.min((1.0 - pi[j]) / -uk);
            }
        }

        if !(lambda_pos + lambda_neg > 0.0) {
            // Degenerate direction: settle the blocking unit at its nearest
            // boundary and continue with the rest of the window.
            let &blocker = window
                .iter()
                .min_by(|&&x, &&y| {
                    boundary_distance(pi[x])
                        .partial_cmp(&boundary_distance(pi[y]))
                        .unwrap()
                })
                .unwrap();
            pi[blocker] = if pi[blocker] < 0.5 { 0.0 } else { 1.0 };
            window.retain(|&j| j != blocker);
            continue;
        }

        let step = if rng.random::<f64>() * (lambda_pos + lambda_neg) < lambda_neg {
            lambda_pos
        } else {
            -lambda_neg
        };
        for (k, &j) in window.iter().enumerate() {
            pi[j] += step * u[k];
        }
        window.retain(|&j| {
            snap(&mut pi[j]);
            is_fractional(pi[j])
        });
        steps += 1;
        on_step(&pi);
    }

    let fractional: Vec<usize> = (0..n).filter(|&i| is_fractional(pi[i])).collect();
    FlightState {
        pi,
        fractional,
        steps_taken: steps,
    }
}

fn boundary_distance(p: f64) -> f64 {
    p.min(1.0 - p)
}

/// A nonzero vector in the null space of a `p x w` matrix, scaled to unit
/// max-norm, or `None` when the matrix has full column rank. Gaussian
/// elimination with partial pivoting; deterministic free-column choice.
fn null_space_vector(m: &Array2<f64>) -> Option<Vec<f64>> {
    let (rows, cols) = m.dim();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = RANK_TOL * scale;

    let mut a = m.clone();
    let mut pivot_row_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0usize;
    for c in 0..cols {
        if rank >= rows {
            break;
        }
        let mut best = rank;
        for r in (rank + 1)..rows {
            if a[(r, c)].abs() > a[(best, c)].abs() {
                best = r;
            }
        }
        if a[(best, c)].abs() <= tol {
            continue;
        }
        if best != rank {
            for j in 0..cols {
                let tmp = a[(rank, j)];
                a[(rank, j)] = a[(best, j)];
                a[(best, j)] = tmp;
            }
        }
        // Full (Gauss-Jordan) elimination keeps back-substitution trivial.
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let factor = a[(r, c)] / a[(rank, c)];
            if factor != 0.0 {
                for j in 0..cols {
                    a[(r, j)] -= factor * a[(rank, j)];
                }
                a[(r, c)] = 0.0;
            }
        }
        pivot_row_of_col[c] = Some(rank);
        rank += 1;
    }

    let free = (0..cols).find(|&c| pivot_row_of_col[c].is_none())?;
    let mut u = vec![0.0; cols];
    u[free] = 1.0;
    for c in 0..cols {
        if let Some(r) = pivot_row_of_col[c] {
            u[c] = -a[(r, free)] / a[(r, c)];
        }
    }
    let max = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max == 0.0 {
        return None;
    }
    for v in u.iter_mut() {
        *v /= max;
    }
    Some(u)
}

/// Rounds the remaining fractional units by enumerating all completions and
/// keeping the one with the least relative balance violation. Ties go to the
/// lexicographically smallest completion (fractional units in index order).
pub fn landing_phase(system: &BalanceSystem, state: &FlightState) -> Result<Sample> {
    let frac = state.fractional();
    let p_prime = frac.len();
    if p_prime > LANDING_LIMIT {
        return Err(Error::Landing {
            fractional: p_prime,
            limit: LANDING_LIMIT,
        });
    }

    let a = system.matrix();
    let p = system.p();
    let denominators: Vec<f64> = system
        .initial_totals()
        .iter()
        .map(|t| t.abs() + 1e-12)
        .collect();

    let mut best_mask = 0usize;
    let mut best_cost = f64::INFINITY;
    for mask in 0..(1usize << p_prime) {
        let mut cost = 0.0;
        for r in 0..p {
            let mut violation = 0.0;
            for (k, &j) in frac.iter().enumerate() {
                // Unit k maps to the (p'-1-k)-th bit so ascending masks
                // enumerate completions in lexicographic order.
                let bit = (mask >> (p_prime - 1 - k)) & 1;
                violation += a[(r, j)] * (bit as f64 - state.pi()[j]);
            }
            cost += (violation / denominators[r]).powi(2);
        }
        if cost < best_cost {
            best_cost = cost;
            best_mask = mask;
        }
    }

    let mut final_pi = state.pi().to_vec();
    for (k, &j) in frac.iter().enumerate() {
        final_pi[j] = ((best_mask >> (p_prime - 1 - k)) & 1) as f64;
    }

    let indices: Vec<usize> = (0..system.n()).filter(|&j| final_pi[j] == 1.0).collect();
    let weights: Vec<f64> = indices
        .iter()
        .map(|&j| 1.0 / system.pi_initial()[j])
        .collect();
    Ok(Sample {
        indices,
        weights,
        method: SampleMethod::Cube,
    })
}

/// Draws a cube sample of `sample_size` units from the dataset, balancing on
/// the sample size plus the top `balance_dims` principal-component scores.
/// Deterministic given the seed.
pub fn cube_sample(
    dataset: &Dataset,
    sample_size: usize,
    balance_dims: usize,
    seed: u64,
) -> Result<Sample> {
    let n = dataset.n();
    if sample_size < 1 || sample_size > n {
        return Err(Error::Argument(format!(
            "sample size {sample_size} must be in 1..={n}"
        )));
    }
    if sample_size == n {
        return Ok(Sample {
            indices: (0..n).collect(),
            weights: vec![1.0; n],
            method: SampleMethod::Cube,
        });
    }

    let encoded = encode(dataset);
    let components = top_components(
        &encoded,
        balance_dims.max(1).min(encoded.d()),
        seed,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    let sizes = sizes_from_scores(&components[0]);
    let plan = inclusion_probabilities(&sizes, sample_size)?;
    let aux: Vec<Vec<f64>> = components
        .iter()
        .take(balance_dims)
        .map(|c| c.scores().to_vec())
        .collect();
    let system = build_balance_system(&plan, &aux)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = flight_phase(&system, &mut rng);
    landing_phase(&system, &state)
}

/// Uniform sampling without replacement via a seeded partial Fisher-Yates
/// shuffle; every selected unit gets weight `n / N`.
pub fn random_sample(n: usize, sample_size: usize, seed: u64) -> Result<Sample> {
    if sample_size < 1 || sample_size > n {
        return Err(Error::Argument(format!(
            "sample size {sample_size} must be in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..sample_size {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut indices: Vec<usize> = pool[..sample_size].to_vec();
    indices.sort_unstable();
    let weight = n as f64 / sample_size as f64;
    Ok(Sample {
        indices,
        weights: vec![weight; sample_size],
        method: SampleMethod::Random,
    })
}


pub(crate) fn mat_vec(a: ArrayView2<'_, f64>, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = a.dim();
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += a[(r, c)] * x[c];
        }
        out[r] = acc;
    }
    out
}
