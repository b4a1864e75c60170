//! Command-line interface: sampling, clustering, and evaluation over CSV
//! datasets, plus the end-to-end experiment runner and sample-size sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cubeproto::data::{encode, load_csv_auto, Dataset};
use cubeproto::error::{Error, Result};
use cubeproto::inclusion::{inclusion_probabilities, sizes_from_scores};
use cubeproto::kproto::{self, MixedData};
use cubeproto::metrics::clustering_accuracy;
use cubeproto::pca::{first_component, DEFAULT_MAX_ITER, DEFAULT_TOL};
use cubeproto::pipeline::{
    run_pipeline, run_sweep, write_results_csv, write_sweep_csv, write_timings_csv, Algo, Method,
    RunConfig,
};
use cubeproto::sampling::{cube_sample, random_sample};

#[derive(Parser)]
#[command(
    name = "cubeproto",
    version,
    about = "Balanced cube sampling and k-prototypes clustering for mixed CSV data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit per-unit sizes and inclusion probabilities as CSV.
    Probabilities(ProbabilitiesArgs),
    /// Draw a cube or random sample; emits (row_index, weight) CSV.
    Sample(SampleArgs),
    /// Cluster the full dataset; emits (row_index, cluster) CSV.
    Cluster(ClusterArgs),
    /// Score an assignments CSV against the dataset's labels.
    Evaluate(EvaluateArgs),
    /// Sample, cluster, reverse-map, and evaluate over a list of seeds.
    Run(RunArgs),
    /// Repeat a run over several sample sizes; emits plot-ready CSV.
    Sweep(SweepArgs),
}

/// Flags shared by every subcommand that reads a dataset.
#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row. Missing cells are '?' or empty.
    #[arg(long)]
    input: PathBuf,
    /// JSON schema override: {"column": "numeric"|"categorical"|"label"|"ignore"}.
    /// Unlisted columns are inferred: numeric iff every value parses as a
    /// number, so columns with missing markers infer as categorical unless
    /// overridden here. With no data rows every column infers categorical.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Column holding class labels (never inferred).
    #[arg(long)]
    label_column: Option<String>,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset> {
        load_csv_auto(
            &self.input,
            self.schema.as_deref(),
            self.label_column.as_deref(),
        )
    }

    fn dataset_name(&self) -> String {
        self.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[derive(Args)]
struct ProbabilitiesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target sample size N.
    #[arg(long)]
    sample_size: usize,
    #[arg(long, default_value_t = 42, env = "CUBEPROTO_SEED")]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Cube,
    Random,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    sample_size: usize,
    /// Principal-component balancing dimensions (cube method only).
    #[arg(long, default_value_t = 1)]
    balance_dims: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Cube)]
    method: MethodArg,
    #[arg(long, default_value_t = 42, env = "CUBEPROTO_SEED")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Kprototype,
    Kmeans,
    Kmodes,
}

impl AlgoArg {
    fn to_algo(self) -> Algo {
        match self {
            AlgoArg::Kprototype => Algo::KPrototype,
            AlgoArg::Kmeans => Algo::KMeans,
            AlgoArg::Kmodes => Algo::KModes,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters; defaults to the dataset's class count.
    #[arg(long)]
    k: Option<usize>,
    /// Categorical weight; defaults to 0.5 (k-prototypes) or 1 (k-modes).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 42, env = "CUBEPROTO_SEED")]
    seed: u64,
    #[arg(long, default_value_t = kproto::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = AlgoArg::Kprototype)]
    algo: AlgoArg,
    /// Cluster on raw numeric values instead of z-scored ones.
    #[arg(long)]
    no_zscore: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Assignments CSV with header row_index,cluster covering every row.
    #[arg(long)]
    assignments: PathBuf,
    /// Machine-readable per-cluster CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Dataset name used in output rows; defaults to the input file stem.
    #[arg(long)]
    name: Option<String>,
    /// none | random | cube
    #[arg(long, default_value = "cube")]
    method: String,
    #[arg(long, default_value_t = 100)]
    sample_size: usize,
    #[arg(long, default_value_t = 1)]
    balance_dims: usize,
    #[arg(long, value_enum, default_value_t = AlgoArg::Kprototype)]
    algo: AlgoArg,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated seed list.
    #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: String,
    #[arg(long, default_value_t = kproto::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    no_zscore: bool,
    /// Results CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock timings CSV (not byte-deterministic).
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated sample sizes, e.g. 100,200,500.
    #[arg(long)]
    sizes: String,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Probabilities(args) => cmd_probabilities(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn cmd_probabilities(args: ProbabilitiesArgs) -> Result<()> {
    let dataset = args.input.load()?;
    let encoded = encode(&dataset);
    let component = first_component(&encoded, args.seed, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let sizes = sizes_from_scores(&component);
    let plan = inclusion_probabilities(&sizes, args.sample_size)?;

    let mut out = open_output(&args.out)?;
    writeln!(out, "row_index,size,pi")?;
    for (i, (size, pi)) in plan.sizes().iter().zip(plan.pi()).enumerate() {
        writeln!(out, "{i},{size},{pi}")?;
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let dataset = args.input.load()?;
    let sample = match args.method {
        MethodArg::Cube => cube_sample(&dataset, args.sample_size, args.balance_dims, args.seed)?,
        MethodArg::Random => random_sample(dataset.n(), args.sample_size, args.seed)?,
    };
    let mut out = open_output(&args.out)?;
    writeln!(out, "row_index,weight")?;
    for (&i, &w) in sample.indices().iter().zip(sample.weights()) {
        writeln!(out, "{i},{w}")?;
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let dataset = args.input.load()?;
    let k = match args.k {
        Some(k) => k,
        None => dataset.class_count().ok_or_else(|| {
            Error::Argument("no --k given and no label column to take a class count from".into())
        })?,
    };
    let algo = args.algo.to_algo();
    let gamma = match (algo, args.gamma) {
        (Algo::KMeans, _) => 0.0,
        (Algo::KModes, g) => g.unwrap_or(1.0),
        (Algo::KPrototype, g) => g.unwrap_or(kproto::DEFAULT_GAMMA),
    };
    let base = if args.no_zscore {
        MixedData::from_dataset(&dataset)
    } else {
        MixedData::zscored_from_dataset(&dataset)
    };
    let data = match algo {
        Algo::KModes => MixedData::new(
            ndarray::Array2::zeros((base.n(), 0)),
            base.categorical().to_owned(),
        )?,
        _ => base,
    };

    let model = kproto::fit(&data, k, gamma, args.seed, args.max_iter)?;
    let mut out = open_output(&args.out)?;
    writeln!(out, "row_index,cluster")?;
    for (i, &c) in model.assignments().iter().enumerate() {
        writeln!(out, "{i},{c}")?;
    }
    eprintln!(
        "iterations={} final_cost={}",
        model.iterations(),
        model.final_cost()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let dataset = args.input.load()?;
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Argument("evaluate needs --label-column".into()))?;

    let text = std::fs::read_to_string(&args.assignments)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut by_row: BTreeMap<usize, usize> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let row: usize = record
            .get(0)
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::Argument("assignments CSV needs integer row_index".into()))?;
        let cluster: usize = record
            .get(1)
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::Argument("assignments CSV needs integer cluster".into()))?;
        by_row.insert(row, cluster);
    }
    if by_row.len() != dataset.n() || by_row.keys().last() != Some(&(dataset.n() - 1)) {
        return Err(Error::Argument(format!(
            "assignments cover {} rows, dataset has {}",
            by_row.len(),
            dataset.n()
        )));
    }
    let assignments: Vec<usize> = by_row.values().copied().collect();

    let report = clustering_accuracy(&assignments, labels)?;
    println!("CA: {}", report.ca());
    println!("cluster,size,majority_label,majority_count");
    for c in report.per_cluster() {
        let label = dataset
            .label_names()
            .map(|m| m.name(c.majority_label).to_string())
            .unwrap_or_else(|| c.majority_label.to_string());
        println!("{},{},{},{}", c.cluster, c.size, label, c.majority_count);
    }
    if let Some(path) = &args.out {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "cluster,size,majority_label,majority_count")?;
        for c in report.per_cluster() {
            writeln!(
                out,
                "{},{},{},{}",
                c.cluster, c.size, c.majority_label, c.majority_count
            )?;
        }
        writeln!(out, "# ca={}", report.ca())?;
    }
    Ok(())
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "none" => Ok(Method::None),
        "random" => Ok(Method::Random),
        "cube" => Ok(Method::Cube),
        other => Err(Error::Argument(format!(
            "unknown method '{other}' (expected none, random, or cube)"
        ))),
    }
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::Argument(format!("invalid integer '{t}' in list")))
        })
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    Ok(parse_u64_list(s)?.into_iter().map(|v| v as usize).collect())
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        input: args.input.input.clone(),
        schema: args.input.schema.clone(),
        label_column: args.input.label_column.clone(),
        dataset_name: args.name.clone().unwrap_or_else(|| args.input.dataset_name()),
        method: parse_method(&args.method)?,
        sample_size: args.sample_size,
        balance_dims: args.balance_dims,
        algo: args.algo.to_algo(),
        k: args.k.unwrap_or(0),
        gamma: args.gamma,
        seeds: parse_u64_list(&args.seeds)?,
        max_iter: args.max_iter,
        zscore: !args.no_zscore,
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = build_config(&args)?;
    let report = run_pipeline(&config)?;

    let out = open_output(&args.out)?;
    write_results_csv(&report, out)?;
    if let Some(path) = &args.timings {
        let timings = BufWriter::new(File::create(path)?);
        write_timings_csv(&report, timings)?;
    }
    eprintln!(
        "{}: mean CA {} (std {}) over {} seeds, {} failures",
        config.dataset_name,
        report.mean_ca,
        report.std_ca,
        report.rows.len(),
        report.failures.len()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let sizes = parse_usize_list(&args.sizes)?;
    let config = build_config(&args.run)?;
    let rows = run_sweep(&config, &sizes)?;
    let out = open_output(&args.run.out)?;
    write_sweep_csv(&rows, out)?;
    Ok(())
}
