//! Clustering accuracy against ground-truth labels: the fraction of units
//! carrying the majority label of their assigned cluster.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    /// Most frequent true label; smallest label id among ties.
    pub majority_label: u32,
    pub majority_count: usize,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    ca: f64,
    per_cluster: Vec<ClusterSummary>,
    n_total: usize,
}

impl EvaluationReport {
    pub fn ca(&self) -> f64 {
        self.ca
    }

    /// Summaries ordered by cluster id.
    pub fn per_cluster(&self) -> &[ClusterSummary] {
        &self.per_cluster
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }
}

/// Computes clustering accuracy: per cluster, count the most frequent true
/// label; CA is the sum of those counts over the total unit count.
pub fn clustering_accuracy(assignments: &[usize], labels: &[u32]) -> Result<EvaluationReport> {
    if assignments.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} assignments but {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if assignments.is_empty() {
        return Err(Error::Argument("cannot evaluate zero units".into()));
    }

    let mut clusters: BTreeMap<usize, BTreeMap<u32, usize>> = BTreeMap::new();
    for (&a, &l) in assignments.iter().zip(labels) {
        *clusters.entry(a).or_default().entry(l).or_insert(0) += 1;
    }

    let n_total = assignments.len();
    let mut per_cluster = Vec::with_capacity(clusters.len());
    let mut majority_sum = 0usize;
    for (cluster, label_counts) in clusters {
        let size: usize = label_counts.values().sum();
        // Ascending label order plus strict comparison keeps the smallest
        // label id among ties.
        let mut majority_label = 0u32;
        let mut majority_count = 0usize;
        for (&label, &count) in &label_counts {
            if count > majority_count {
                majority_count = count;
                majority_label = label;
            }
        }
        majority_sum += majority_count;
        per_cluster.push(ClusterSummary {
            cluster,
            size,
            majority_label,
            majority_count,
        });
    }

    Ok(EvaluationReport {
        ca: majority_sum as f64 / n_total as f64,
        per_cluster,
        n_total,
    })
}
