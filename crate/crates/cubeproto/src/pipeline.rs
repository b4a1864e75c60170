//! End-to-end orchestration: sample, cluster, reverse-map, evaluate, and
//! aggregate over seeds. The CLI subcommands are thin wrappers over this
//! module.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use crate::data::{load_csv_auto, Dataset};
use crate::error::{Error, Result};
use crate::kproto::{self, MixedData};
use crate::metrics::clustering_accuracy;
use crate::sampling::{cube_sample, random_sample, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    None,
    Random,
    Cube,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Random => "random",
            Method::Cube => "cube",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    KPrototype,
    KMeans,
    KModes,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::KPrototype => "kprototype",
            Algo::KMeans => "kmeans",
            Algo::KModes => "kmodes",
        }
    }
}

/// One experiment: how to sample, how to cluster, which seeds to run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Option<PathBuf>,
    pub label_column: Option<String>,
    pub dataset_name: String,
    pub method: Method,
    /// Ignored when `method` is `None`.
    pub sample_size: usize,
    pub balance_dims: usize,
    pub algo: Algo,
    /// Zero means "use the dataset's class count".
    pub k: usize,
    pub gamma: Option<f64>,
    pub seeds: Vec<u64>,
    pub max_iter: usize,
    /// Z-score numeric features before clustering.
    pub zscore: bool,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Argument("at least one seed is required".into()));
        }
        Ok(())
    }

    fn resolved_gamma(&self) -> f64 {
        match self.algo {
            Algo::KMeans => 0.0,
            Algo::KPrototype => self.gamma.unwrap_or(kproto::DEFAULT_GAMMA),
            Algo::KModes => self.gamma.unwrap_or(1.0),
        }
    }
}

/// Per-seed result row.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub dataset: String,
    pub method: Method,
    pub algo: Algo,
    /// None when no sampling was performed.
    pub sample_size: Option<usize>,
    pub k: usize,
    pub seed: u64,
    pub ca: f64,
    pub iterations: usize,
    pub timing: RunTiming,
}

/// Wall-clock timings; kept out of the deterministic results CSV.
#[derive(Debug, Clone, Copy)]
pub struct RunTiming {
    pub sample_ms: f64,
    pub cluster_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub rows: Vec<RunRow>,
    pub failures: Vec<SeedFailure>,
    pub mean_ca: f64,
    pub std_ca: f64,
}

/// Loads the dataset described by the config: explicit schema overrides on
/// top of full-file inference, then the label column flag.
pub fn load_configured_dataset(config: &RunConfig) -> Result<Dataset> {
    load_csv_auto(
        &config.input,
        config.schema.as_deref(),
        config.label_column.as_deref(),
    )
}

/// Runs the configured experiment for every seed and aggregates CA.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineReport> {
    let dataset = load_configured_dataset(config)?;
    run_pipeline_on(&dataset, config)
}

/// Like `run_pipeline` but on an already-loaded dataset.
pub fn run_pipeline_on(dataset: &Dataset, config: &RunConfig) -> Result<PipelineReport> {
    config.validate()?;
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Argument("dataset has no label column; pass --label-column".into()))?;
    let k = if config.k > 0 {
        config.k
    } else {
        dataset
            .class_count()
            .ok_or_else(|| Error::Argument("cannot default k without labels".into()))?
    };

    let full = clustering_data(dataset, config);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &seed in &config.seeds {
        match run_one_seed(dataset, &full, labels, config, k, seed) {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(SeedFailure {
                seed,
                message: e.to_string(),
            }),
        }
    }

    let (mean_ca, std_ca) = mean_std_of(rows.iter().map(|r| r.ca));
    Ok(PipelineReport {
        rows,
        failures,
        mean_ca,
        std_ca,
    })
}

fn clustering_data(dataset: &Dataset, config: &RunConfig) -> MixedData {
    let base = if config.zscore {
        MixedData::zscored_from_dataset(dataset)
    } else {
        MixedData::from_dataset(dataset)
    };
    match config.algo {
        Algo::KModes => {
            // Categorical features only.
            let n = base.n();
            MixedData::new(ndarray::Array2::zeros((n, 0)), base.categorical().to_owned())
                .unwrap_or(base)
        }
        _ => base,
    }
}

fn run_one_seed(
    dataset: &Dataset,
    full: &MixedData,
    labels: &[u32],
    config: &RunConfig,
    k: usize,
    seed: u64,
) -> Result<RunRow> {
    let n = dataset.n();
    let started = Instant::now();

    let sample: Option<Sample> = match config.method {
        Method::None => None,
        Method::Random => Some(random_sample(n, config.sample_size, seed)?),
        Method::Cube => Some(cube_sample(
            dataset,
            config.sample_size,
            config.balance_dims,
            seed,
        )?),
    };
    let sample_ms = elapsed_ms(started);

    let fitted_ids: Vec<usize> = match &sample {
        Some(s) => s.indices().to_vec(),
        None => (0..n).collect(),
    };
    let clustering_started = Instant::now();
    let fit_data = full.restrict(&fitted_ids)?;
    let model = kproto::fit(
        &fit_data,
        k,
        config.resolved_gamma(),
        seed,
        config.max_iter,
    )?;
    let assignments = kproto::reverse_map(full, &fitted_ids, &model)?;
    let cluster_ms = elapsed_ms(clustering_started);

    let report = clustering_accuracy(&assignments, labels)?;
    Ok(RunRow {
        dataset: config.dataset_name.clone(),
        method: config.method,
        algo: config.algo,
        sample_size: sample.as_ref().map(|_| config.sample_size),
        k,
        seed,
        ca: report.ca(),
        iterations: model.iterations(),
        timing: RunTiming {
            sample_ms,
            cluster_ms,
            total_ms: elapsed_ms(started),
        },
    })
}

fn elapsed_ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

fn mean_std_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = collected.len() as f64;
    let mean = collected.iter().sum::<f64>() / n;
    if collected.len() < 2 {
        return (mean, 0.0);
    }
    let var = collected.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sample_size: usize,
    pub mean_ca: f64,
    pub std_ca: f64,
}

/// Runs the pipeline once per requested sample size; an empty size list
/// yields an empty result.
pub fn run_sweep(config: &RunConfig, sizes: &[usize]) -> Result<Vec<SweepRow>> {
    let dataset = load_configured_dataset(config)?;
    run_sweep_on(&dataset, config, sizes)
}

pub fn run_sweep_on(
    dataset: &Dataset,
    config: &RunConfig,
    sizes: &[usize],
) -> Result<Vec<SweepRow>> {
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut c = config.clone();
        c.sample_size = size;
        let report = run_pipeline_on(dataset, &c)?;
        out.push(SweepRow {
            sample_size: size,
            mean_ca: report.mean_ca,
            std_ca: report.std_ca,
        });
    }
    Ok(out)
}

/// Results CSV: per-seed rows then `mean`/`std` aggregate rows. Byte-stable
/// for identical configs; wall-times are written separately.
pub fn write_results_csv(report: &PipelineReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "dataset,method,algo,sample_size,k,seed,ca,iterations")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.dataset,
            row.method.as_str(),
            row.algo.as_str(),
            row.sample_size.map_or(String::new(), |n| n.to_string()),
            row.k,
            row.seed,
            row.ca,
            row.iterations
        )?;
    }
    for failure in &report.failures {
        writeln!(
            out,
            "# seed {} failed: {}",
            failure.seed,
            failure.message.replace('\n', " ")
        )?;
    }
    if let Some(first) = report.rows.first() {
        let prefix = format!(
            "{},{},{},{},{}",
            first.dataset,
            first.method.as_str(),
            first.algo.as_str(),
            first.sample_size.map_or(String::new(), |n| n.to_string()),
            first.k
        );
        writeln!(out, "{prefix},mean,{},", report.mean_ca)?;
        writeln!(out, "{prefix},std,{},", report.std_ca)?;
    }
    Ok(())
}

/// Timings CSV: same keys as the results rows plus wall-clock columns.
pub fn write_timings_csv(report: &PipelineReport, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "dataset,method,algo,sample_size,k,seed,sample_ms,cluster_ms,total_ms"
    )?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3},{:.3},{:.3}",
            row.dataset,
            row.method.as_str(),
            row.algo.as_str(),
            row.sample_size.map_or(String::new(), |n| n.to_string()),
            row.k,
            row.seed,
            row.timing.sample_ms,
            row.timing.cluster_ms,
            row.timing.total_ms
        )?;
    }
    Ok(())
}

/// Sweep CSV: one row per sample size.
pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "sample_size,mean_ca,std_ca")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.sample_size, row.mean_ca, row.std_ca)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{infer_schema, load_csv_reader};

    fn demo_dataset() -> Dataset {
        // Two planted groups differing in both numeric level and category.
        let mut text = String::from("x,y,c,class\n");
        for i in 0..12 {
            text.push_str(&format!("{},{},a,p\n", i as f64 * 0.1, 5.0 + (i % 3) as f64));
        }
        for i in 0..12 {
            text.push_str(&format!("{},{},b,q\n", 8.0 + i as f64 * 0.1, 1.0 + (i % 3) as f64));
        }
        let header: Vec<String> = vec!["x".into(), "y".into(), "c".into(), "class".into()];
        let rows: Vec<Vec<String>> = text
            .trim()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|s| s.to_string()).collect())
            .collect();
        let schema = infer_schema(&header, &rows).unwrap();
        load_csv_reader(text.as_bytes(), schema, Some("class")).unwrap()
    }

    fn base_config() -> RunConfig {
        RunConfig {
            input: PathBuf::from("unused"),
            schema: None,
            label_column: Some("class".into()),
            dataset_name: "demo".into(),
            method: Method::None,
            sample_size: 0,
            balance_dims: 1,
            algo: Algo::KPrototype,
            k: 2,
            gamma: None,
            seeds: vec![1, 2, 3],
            max_iter: 100,
            zscore: true,
        }
    }

    #[test]
    fn unsampled_pipeline_recovers_planted_groups() {
        let ds = demo_dataset();
        let report = run_pipeline_on(&ds, &base_config()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.failures.is_empty());
        assert!(report.mean_ca > 0.95, "mean CA {}", report.mean_ca);
    }

    #[test]
    fn cube_full_population_matches_unsampled_assignments() {
        let ds = demo_dataset();
        let mut config = base_config();
        config.seeds = vec![7];
        let unsampled = run_pipeline_on(&ds, &config).unwrap();

        config.method = Method::Cube;
        config.sample_size = ds.n();
        let cube = run_pipeline_on(&ds, &config).unwrap();
        assert_eq!(unsampled.rows[0].ca, cube.rows[0].ca);
    }

    #[test]
    fn pipeline_output_is_deterministic() {
        let ds = demo_dataset();
        let mut config = base_config();
        config.method = Method::Cube;
        config.sample_size = 10;

        let mut a = Vec::new();
        write_results_csv(&run_pipeline_on(&ds, &config).unwrap(), &mut a).unwrap();
        let mut b = Vec::new();
        write_results_csv(&run_pipeline_on(&ds, &config).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_with_full_size_matches_unsampled_ca() {
        let ds = demo_dataset();
        let mut config = base_config();
        config.seeds = vec![11];
        let unsampled = run_pipeline_on(&ds, &config).unwrap();

        config.method = Method::Cube;
        let sweep = run_sweep_on(&ds, &config, &[ds.n()]).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].mean_ca, unsampled.mean_ca);
    }

    #[test]
    fn sweep_empty_sizes_writes_header_only() {
        let rows = Vec::new();
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "sample_size,mean_ca,std_ca\n");
    }

    #[test]
    fn failed_seed_is_recorded_and_others_proceed() {
        let ds = demo_dataset();
        let mut config = base_config();
        // k larger than the sample forces a per-seed failure.
        config.method = Method::Random;
        config.sample_size = 1;
        config.k = 2;
        config.seeds = vec![1, 2];
        let report = run_pipeline_on(&ds, &config).unwrap();
        assert_eq!(report.rows.len(), 0);
        assert_eq!(report.failures.len(), 2);
    }

    #[test]
    fn missing_labels_is_config_error() {
        let text = "x\n1\n2\n";
        let header = vec!["x".to_string()];
        let rows = vec![vec!["1".to_string()], vec!["2".to_string()]];
        let schema = infer_schema(&header, &rows).unwrap();
        let ds = load_csv_reader(text.as_bytes(), schema, None).unwrap();
        let err = run_pipeline_on(&ds, &base_config()).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn kmeans_algo_ignores_categorical_features() {
        let ds = demo_dataset();
        let mut config = base_config();
        config.algo = Algo::KMeans;
        let report = run_pipeline_on(&ds, &config).unwrap();
        // Numeric separation alone is enough for the planted groups.
        assert!(report.mean_ca > 0.9);
    }

    #[test]
    fn kmodes_algo_clusters_on_categories() {
        let ds = demo_dataset();
        let mut config = base_config();
        config.algo = Algo::KModes;
        let report = run_pipeline_on(&ds, &config).unwrap();
        // The planted category split is exactly the class split.
        assert!(report.mean_ca > 0.99, "mean CA {}", report.mean_ca);
    }
}
