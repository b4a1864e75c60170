//! K-prototypes clustering over mixed data: squared Euclidean distance on
//! numeric features plus a gamma-weighted mismatch count on categorical
//! ones. K-means and k-modes fall out as degenerate configurations, and
//! unsampled units are reverse-mapped onto the fitted prototypes.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{zscore_columns, Dataset};
use crate::error::{Error, Result};

/// Default categorical weight when numeric features are z-scored.
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_MAX_ITER: usize = 300;

/// Numeric and categorical feature matrices sharing row order.
#[derive(Debug, Clone)]
pub struct MixedData {
    numeric: Array2<f64>,
    categorical: Array2<u32>,
}

impl MixedData {
    pub fn new(numeric: Array2<f64>, categorical: Array2<u32>) -> Result<MixedData> {
        let n = match (numeric.ncols() > 0, categorical.ncols() > 0) {
            (true, true) => {
                if numeric.nrows() != categorical.nrows() {
                    return Err(Error::Argument(format!(
                        "numeric rows {} != categorical rows {}",
                        numeric.nrows(),
                        categorical.nrows()
                    )));
                }
                numeric.nrows()
            }
            (true, false) => numeric.nrows(),
            (false, true) => categorical.nrows(),
            (false, false) => return Err(Error::Argument("no features".into())),
        };
        if n == 0 {
            return Err(Error::Argument("no rows".into()));
        }
        // Zero-width matrices are reshaped so both sides agree on n.
        let numeric = if numeric.ncols() == 0 {
            Array2::zeros((n, 0))
        } else {
            numeric
        };
        let categorical = if categorical.ncols() == 0 {
            Array2::zeros((n, 0))
        } else {
            categorical
        };
        Ok(MixedData {
            numeric,
            categorical,
        })
    }

    /// Raw feature matrices from a dataset.
    pub fn from_dataset(dataset: &Dataset) -> MixedData {
        MixedData {
            numeric: dataset.numeric().to_owned(),
            categorical: dataset.categorical().to_owned(),
        }
    }

    /// Like `from_dataset` but with z-scored numeric features, so the two
    /// distance terms are commensurate. Statistics come from the full
    /// matrix handed in; restrict afterwards to keep sample and population
    /// on one scale.
    pub fn zscored_from_dataset(dataset: &Dataset) -> MixedData {
        let (numeric, _, _) = zscore_columns(dataset.numeric());
        MixedData {
            numeric,
            categorical: dataset.categorical().to_owned(),
        }
    }

    pub fn restrict(&self, indices: &[usize]) -> Result<MixedData> {
        for &i in indices {
            if i >= self.n() {
                return Err(Error::Argument(format!("row {i} out of bounds")));
            }
        }
        let numeric = Array2::from_shape_fn((indices.len(), self.numeric.ncols()), |(i, j)| {
            self.numeric[(indices[i], j)]
        });
        let categorical =
            Array2::from_shape_fn((indices.len(), self.categorical.ncols()), |(i, j)| {
                self.categorical[(indices[i], j)]
            });
        Ok(MixedData {
            numeric,
            categorical,
        })
    }

    pub fn n(&self) -> usize {
        self.numeric.nrows().max(self.categorical.nrows())
    }

    pub fn numeric_count(&self) -> usize {
        self.numeric.ncols()
    }

    pub fn categorical_count(&self) -> usize {
        self.categorical.ncols()
    }

    pub fn numeric(&self) -> ArrayView2<'_, f64> {
        self.numeric.view()
    }

    pub fn categorical(&self) -> ArrayView2<'_, u32> {
        self.categorical.view()
    }

    fn numeric_row(&self, i: usize) -> &[f64] {
        let w = self.numeric.ncols();
        &self.numeric.as_slice().expect("standard layout")[i * w..(i + 1) * w]
    }

    fn categorical_row(&self, i: usize) -> &[u32] {
        let w = self.categorical.ncols();
        &self.categorical.as_slice().expect("standard layout")[i * w..(i + 1) * w]
    }
}

/// A cluster center: per-feature numeric means and categorical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub numeric: Vec<f64>,
    pub categorical: Vec<u32>,
}

/// Squared Euclidean distance over numeric features plus `gamma` times the
/// number of categorical mismatches.
pub fn dist(numeric: &[f64], categorical: &[u32], proto: &Prototype, gamma: f64) -> Result<f64> {
    if numeric.len() != proto.numeric.len() || categorical.len() != proto.categorical.len() {
        return Err(Error::Argument(format!(
            "record arity ({}, {}) does not match prototype arity ({}, {})",
            numeric.len(),
            categorical.len(),
            proto.numeric.len(),
            proto.categorical.len()
        )));
    }
    if gamma < 0.0 {
        return Err(Error::Argument("gamma must be nonnegative".into()));
    }
    Ok(dist_unchecked(numeric, categorical, proto, gamma))
}

fn dist_unchecked(numeric: &[f64], categorical: &[u32], proto: &Prototype, gamma: f64) -> f64 {
    let mut d = 0.0;
    for (x, q) in numeric.iter().zip(&proto.numeric) {
        let diff = x - q;
        d += diff * diff;
    }
    let mismatches = categorical
        .iter()
        .zip(&proto.categorical)
        .filter(|(x, q)| x != q)
        .count();
    d + gamma * mismatches as f64
}

/// A fitted clustering: prototypes, per-row assignments, and the cost trace.
#[derive(Debug, Clone)]
pub struct KPrototypeModel {
    prototypes: Vec<Prototype>,
    gamma: f64,
    assignments: Vec<usize>,
    iterations: usize,
    final_cost: f64,
    cost_per_iteration: Vec<f64>,
}

impl KPrototypeModel {
    pub fn k(&self) -> usize {
        self.prototypes.len()
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Cluster id per fitted row.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn final_cost(&self) -> f64 {
        self.final_cost
    }

    /// Total cost after each assign/update iteration; non-increasing.
    pub fn cost_per_iteration(&self) -> &[f64] {
        &self.cost_per_iteration
    }
}

/// Fits k prototypes starting from `k` distinct random rows (seeded).
pub fn fit(
    data: &MixedData,
    k: usize,
    gamma: f64,
    seed: u64,
    max_iter: usize,
) -> Result<KPrototypeModel> {
    let n = data.n();
    if k < 1 || k > n {
        return Err(Error::Argument(format!("k = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let init: Vec<Prototype> = pool[..k]
        .iter()
        .map(|&i| Prototype {
            numeric: data.numeric_row(i).to_vec(),
            categorical: data.categorical_row(i).to_vec(),
        })
        .collect();
    fit_from_initial(data, init, gamma, max_iter)
}

/// Fits from explicit initial prototypes.
pub fn fit_from_initial(
    data: &MixedData,
    init: Vec<Prototype>,
    gamma: f64,
    max_iter: usize,
) -> Result<KPrototypeModel> {
    fit_from_initial_observed(data, init, gamma, max_iter, |_, _, _| {})
}

/// Fit with a per-iteration observer receiving the iteration number (from 1),
/// the assignments after the assignment pass, and the prototypes after the
/// update pass.
pub fn fit_from_initial_observed(
    data: &MixedData,
    init: Vec<Prototype>,
    gamma: f64,
    max_iter: usize,
    mut on_iteration: impl FnMut(usize, &[usize], &[Prototype]),
) -> Result<KPrototypeModel> {
    let n = data.n();
    let k = init.len();
    if k < 1 || k > n {
        return Err(Error::Argument(format!("k = {k} must be in 1..={n}")));
    }
    if gamma < 0.0 {
        return Err(Error::Argument("gamma must be nonnegative".into()));
    }
    if max_iter < 1 {
        return Err(Error::Argument("max_iter must be at least 1".into()));
    }
    for proto in &init {
        if proto.numeric.len() != data.numeric_count()
            || proto.categorical.len() != data.categorical_count()
        {
            return Err(Error::Argument("prototype arity does not match data".into()));
        }
    }

    let mut prototypes = init;
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut cost_per_iteration = Vec::new();
    let mut iterations = 0usize;

    for iter in 1..=max_iter {
        // Assignment pass: nearest prototype, ties to the lowest cluster id.
        let mut changed = false;
        for i in 0..n {
            let xn = data.numeric_row(i);
            let xc = data.categorical_row(i);
            let mut best = 0usize;
            let mut best_d = dist_unchecked(xn, xc, &prototypes[0], gamma);
            for (l, proto) in prototypes.iter().enumerate().skip(1) {
                let d = dist_unchecked(xn, xc, proto, gamma);
                if d < best_d {
                    best_d = d;
                    best = l;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        iterations = iter;

        update_prototypes(data, &assignments, &mut prototypes, gamma);
        let cost_now = total_cost(data, &assignments, &prototypes, gamma);
        cost_per_iteration.push(cost_now);
        on_iteration(iter, &assignments, &prototypes);
    }

    let final_cost = total_cost(data, &assignments, &prototypes, gamma);
    Ok(KPrototypeModel {
        prototypes,
        gamma,
        assignments,
        iterations,
        final_cost,
        cost_per_iteration,
    })
}

/// Recomputes numeric means and categorical modes per cluster. Mode ties go
/// to the smallest category id. An empty cluster is reseeded to the row
/// farthest from its currently assigned prototype.
fn update_prototypes(
    data: &MixedData,
    assignments: &[usize],
    prototypes: &mut [Prototype],
    gamma: f64,
) {
    let n = data.n();
    let k = prototypes.len();
    let m_r = data.numeric_count();
    let m_t = data.categorical_count();

    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }

    let mut sums = vec![vec![0.0; m_r]; k];
    // Per cluster and categorical feature: counts per category id.
    let mut cat_counts: Vec<Vec<std::collections::BTreeMap<u32, usize>>> =
        vec![vec![std::collections::BTreeMap::new(); m_t]; k];
    for i in 0..n {
        let l = assignments[i];
        for (j, v) in data.numeric_row(i).iter().enumerate() {
            sums[l][j] += v;
        }
        for (j, &c) in data.categorical_row(i).iter().enumerate() {
            *cat_counts[l][j].entry(c).or_insert(0) += 1;
        }
    }

    for l in 0..k {
        if counts[l] == 0 {
            continue;
        }
        for j in 0..m_r {
            prototypes[l].numeric[j] = sums[l][j] / counts[l] as f64;
        }
        for j in 0..m_t {
            // BTreeMap iterates ids ascending, so a strict greater-than
            // keeps the smallest id among tied modes.
            let mut best_id = 0u32;
            let mut best_count = 0usize;
            for (&id, &c) in &cat_counts[l][j] {
                if c > best_count {
                    best_count = c;
                    best_id = id;
                }
            }
            prototypes[l].categorical[j] = best_id;
        }
    }

    // Reseed empty clusters with the rows worst-served by their prototypes.
    let empties: Vec<usize> = (0..k).filter(|&l| counts[l] == 0).collect();
    if empties.is_empty() {
        return;
    }
    let mut taken = vec![false; n];
    for l in empties {
        let mut far_row = 0usize;
        let mut far_d = -1.0;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = dist_unchecked(
                data.numeric_row(i),
                data.categorical_row(i),
                &prototypes[assignments[i]],
                gamma,
            );
            if d > far_d {
                far_d = d;
                far_row = i;
            }
        }
        taken[far_row] = true;
        prototypes[l].numeric = data.numeric_row(far_row).to_vec();
        prototypes[l].categorical = data.categorical_row(far_row).to_vec();
    }
}

fn total_cost(data: &MixedData, assignments: &[usize], prototypes: &[Prototype], gamma: f64) -> f64 {
    (0..data.n())
        .map(|i| {
            dist_unchecked(
                data.numeric_row(i),
                data.categorical_row(i),
                &prototypes[assignments[i]],
                gamma,
            )
        })
        .sum()
}

/// Recomputes the clustering cost of a fitted model on its data.
pub fn cost(model: &KPrototypeModel, data: &MixedData) -> Result<f64> {
    if data.n() != model.assignments.len() {
        return Err(Error::Argument(format!(
            "model fitted on {} rows, data has {}",
            model.assignments.len(),
            data.n()
        )));
    }
    Ok(total_cost(
        data,
        &model.assignments,
        &model.prototypes,
        model.gamma,
    ))
}

/// Assigns every row of the full data to a cluster: fitted rows keep their
/// fitted assignment, all others go to the nearest prototype (ties to the
/// lowest cluster id).
pub fn reverse_map(
    full: &MixedData,
    fitted_ids: &[usize],
    model: &KPrototypeModel,
) -> Result<Vec<usize>> {
    if fitted_ids.len() != model.assignments.len() {
        return Err(Error::Argument(format!(
            "{} fitted ids for {} fitted assignments",
            fitted_ids.len(),
            model.assignments.len()
        )));
    }
    let n = full.n();
    let mut out = vec![usize::MAX; n];
    for (pos, &orig) in fitted_ids.iter().enumerate() {
        if orig >= n {
            return Err(Error::Argument(format!("fitted id {orig} out of bounds")));
        }
        out[orig] = model.assignments[pos];
    }
    for (i, slot) in out.iter_mut().enumerate() {
        if *slot != usize::MAX {
            continue;
        }
        let xn = full.numeric_row(i);
        let xc = full.categorical_row(i);
        let mut best = 0usize;
        let mut best_d = dist_unchecked(xn, xc, &model.prototypes[0], model.gamma);
        for (l, proto) in model.prototypes.iter().enumerate().skip(1) {
            let d = dist_unchecked(xn, xc, proto, model.gamma);
            if d < best_d {
                best_d = d;
                best = l;
            }
        }
        *slot = best;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_only(values: Array2<f64>) -> MixedData {
        let n = values.nrows();
        MixedData::new(values, Array2::zeros((n, 0))).unwrap()
    }

    fn mixed(numeric: Array2<f64>, categorical: Array2<u32>) -> MixedData {
        MixedData::new(numeric, categorical).unwrap()
    }

    #[test]
    fn dist_zero_for_identical_record() {
        let proto = Prototype {
            numeric: vec![1.0, 2.0],
            categorical: vec![3, 4],
        };
        assert_eq!(dist(&[1.0, 2.0], &[3, 4], &proto, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn dist_hand_evaluation() {
        // numeric (1,2) vs (0,0) -> 1 + 4; one categorical mismatch at
        // gamma 0.5 -> 5.5 total.
        let proto = Prototype {
            numeric: vec![0.0, 0.0],
            categorical: vec![0, 1],
        };
        let d = dist(&[1.0, 2.0], &[0, 2], &proto, 0.5).unwrap();
        assert_eq!(d, 5.5);
    }

    #[test]
    fn dist_gamma_zero_ignores_categoricals() {
        let proto = Prototype {
            numeric: vec![1.0],
            categorical: vec![0, 0],
        };
        let d = dist(&[3.0], &[5, 9], &proto, 0.0).unwrap();
        assert_eq!(d, 4.0);
    }

    #[test]
    fn dist_arity_mismatch_is_error() {
        let proto = Prototype {
            numeric: vec![0.0],
            categorical: vec![],
        };
        assert!(matches!(
            dist(&[1.0, 2.0], &[], &proto, 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn fit_k1_yields_feature_means_and_modes() {
        let data = mixed(
            array![[0.0], [2.0], [4.0]],
            array![[0], [1], [1]],
        );
        let model = fit(&data, 1, 0.5, 0, 100).unwrap();
        assert_eq!(model.prototypes()[0].numeric, vec![2.0]);
        assert_eq!(model.prototypes()[0].categorical, vec![1]);
        // Cost: (2^2 + 0 + 2^2) + 0.5 * (one mismatch on the mode)
        assert!((model.final_cost() - (8.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn fit_two_points_two_clusters_is_perfect() {
        let data = numeric_only(array![[0.0], [10.0]]);
        let model = fit(&data, 2, 0.0, 1, 100).unwrap();
        assert_eq!(model.final_cost(), 0.0);
        assert_ne!(model.assignments()[0], model.assignments()[1]);
    }

    #[test]
    fn fit_separated_blobs_matches_lloyd_oracle() {
        let data = numeric_only(array![
            [0.0, 0.1],
            [0.1, 0.0],
            [0.2, 0.2],
            [10.0, 10.1],
            [10.1, 9.9],
            [9.9, 10.0],
        ]);
        let init = vec![
            Prototype { numeric: vec![0.0, 0.1], categorical: vec![] },
            Prototype { numeric: vec![10.0, 10.1], categorical: vec![] },
        ];
        let model = fit_from_initial(&data, init.clone(), 0.0, 100).unwrap();
        assert_eq!(model.assignments(), &[0, 0, 0, 1, 1, 1]);

        let oracle = lloyd_oracle(&data, init, 100);
        assert_eq!(model.assignments(), oracle.as_slice());
    }

    /// Minimal independent Lloyd loop used as the k-means oracle.
    fn lloyd_oracle(data: &MixedData, init: Vec<Prototype>, max_iter: usize) -> Vec<usize> {
        let n = data.n();
        let d = data.numeric_count();
        let mut centers: Vec<Vec<f64>> = init.into_iter().map(|p| p.numeric).collect();
        let mut assign = vec![usize::MAX; n];
        for _ in 0..max_iter {
            let mut changed = false;
            for i in 0..n {
                let x = data.numeric_row(i);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (l, c) in centers.iter().enumerate() {
                    let dd: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    if dd < best_d {
                        best_d = dd;
                        best = l;
                    }
                }
                if assign[i] != best {
                    assign[i] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            for (l, center) in centers.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == l).collect();
                if members.is_empty() {
                    continue;
                }
                for j in 0..d {
                    center[j] =
                        members.iter().map(|&i| data.numeric_row(i)[j]).sum::<f64>()
                            / members.len() as f64;
                }
            }
        }
        assign
    }

    #[test]
    fn cost_recompute_matches_final_cost() {
        let data = mixed(
            array![[1.0, 0.0], [2.0, 1.0], [8.0, 7.0], [9.0, 8.0]],
            array![[0], [0], [1], [1]],
        );
        let model = fit(&data, 2, 0.5, 3, 100).unwrap();
        let recomputed = cost(&model, &data).unwrap();
        assert!((recomputed - model.final_cost()).abs() <= 1e-9);
    }

    #[test]
    fn cost_single_cluster_hand_case() {
        let data = numeric_only(array![[0.0], [2.0]]);
        let model = fit(&data, 1, 0.0, 0, 10).unwrap();
        assert_eq!(model.final_cost(), 2.0);
    }

    #[test]
    fn descent_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let n = rng.random_range(4..40);
            let m_r = rng.random_range(0..4usize);
            let m_t = rng.random_range(if m_r == 0 { 1 } else { 0 }..4usize);
            let numeric =
                Array2::from_shape_fn((n, m_r), |_| rng.random::<f64>() * 10.0 - 5.0);
            let categorical =
                Array2::from_shape_fn((n, m_t), |_| rng.random_range(0..4u32));
            let data = MixedData::new(numeric, categorical).unwrap();
            let k = rng.random_range(1..=n.min(5));
            let gamma = rng.random::<f64>();
            let model = fit(&data, k, gamma, trial, 300).unwrap();
            let trace = model.cost_per_iteration();
            for w in trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "cost increased {} -> {} (trial {trial})",
                    w[0],
                    w[1]
                );
            }
            assert!(model.iterations() <= 300);
            assert!((cost(&model, &data).unwrap() - model.final_cost()).abs() <= 1e-9);
        }
    }

    #[test]
    fn kmodes_specialization_matches_brute_force_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..50 {
            let n = rng.random_range(4..20);
            let m_t = rng.random_range(1..4usize);
            let categorical =
                Array2::from_shape_fn((n, m_t), |_| rng.random_range(0..3u32));
            let data = MixedData::new(Array2::zeros((n, 0)), categorical).unwrap();
            let k = rng.random_range(1..=n.min(4));
            let model = fit(&data, k, 1.0, trial, 300).unwrap();
            // Every row must sit with a prototype at minimal Hamming distance.
            for i in 0..n {
                let row = data.categorical_row(i);
                let hamming = |proto: &Prototype| -> usize {
                    row.iter()
                        .zip(&proto.categorical)
                        .filter(|(a, b)| a != b)
                        .count()
                };
                let assigned = hamming(&model.prototypes()[model.assignments()[i]]);
                let best = model.prototypes().iter().map(hamming).min().unwrap();
                assert_eq!(assigned, best, "row {i} trial {trial}");
            }
        }
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // Three identical rows and one far outlier with k = 3: random init
        // may pick duplicates, forcing the reseed path.
        let data = numeric_only(array![[0.0], [0.0], [0.0], [100.0]]);
        for seed in 0..20 {
            let model = fit(&data, 3, 0.0, seed, 100).unwrap();
            assert_eq!(model.k(), 3);
            // The outlier always ends up alone once reseeding kicks in.
            let outlier_cluster = model.assignments()[3];
            assert!((model.prototypes()[outlier_cluster].numeric[0] - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reverse_map_keeps_fitted_assignments_and_covers_all_rows() {
        let full = numeric_only(array![[0.0], [0.2], [9.8], [10.0], [5.2]]);
        let sample_ids = vec![0, 3];
        let sample = full.restrict(&sample_ids).unwrap();
        let model = fit(&sample, 2, 0.0, 0, 100).unwrap();
        let all = reverse_map(&full, &sample_ids, &model).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all[0], model.assignments()[0]);
        assert_eq!(all[3], model.assignments()[1]);
        // Row 1 sits next to row 0, row 2 next to row 3.
        assert_eq!(all[1], all[0]);
        assert_eq!(all[2], all[3]);
    }

    #[test]
    fn reverse_map_point_equal_to_prototype_joins_it() {
        let full = numeric_only(array![[0.0], [10.0], [10.0]]);
        let sample_ids = vec![0, 1];
        let sample = full.restrict(&sample_ids).unwrap();
        let model = fit(&sample, 2, 0.0, 1, 100).unwrap();
        let all = reverse_map(&full, &sample_ids, &model).unwrap();
        assert_eq!(all[2], all[1]);
    }

    #[test]
    fn fit_rejects_k_larger_than_population() {
        let data = numeric_only(array![[1.0], [2.0]]);
        assert!(matches!(fit(&data, 3, 0.0, 0, 10), Err(Error::Argument(_))));
    }
}
