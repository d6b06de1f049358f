//! Command-line surface: generate synthetic embedding datasets, cluster and
//! score them, probe the attribute hierarchy, train a centroid classifier,
//! and classify unseen vectors.
//!
//! Exit codes: 0 on success, 2 when an input file is unreadable or malformed,
//! 3 when an input parses but fails validation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use subdisc::align::{align_and_score, average_runs, hierarchy_probe};
use subdisc::classifier::{
    classify, evaluate_classifier, split_dataset, train_centroid_classifier,
    train_centroid_classifier_gmm, SplitSpec, DEFAULT_TRAIN_FRACTION,
};
use subdisc::dataset::Dataset;
use subdisc::error::{Error, Result};
use subdisc::gmm::{gmm_fit, CovarianceKind, GmmConfig};
use subdisc::io::{load_classifier, read_dataset_file, save_classifier, write_dataset_file};
use subdisc::kmeans::{kmeans_fit, restart_seed, InitMethod, KMeansConfig};
use subdisc::report::RunReport;
use subdisc::synth::{generate, AttributeAxis, HierarchySpec};
use subdisc::AlignmentReport;

#[derive(Parser)]
#[command(
    name = "subdisc",
    version,
    about = "Cluster metric-learning embeddings, probe their attribute hierarchy, and classify unseen vectors by persisted centroids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic embedding dataset with a controlled attribute hierarchy
    Generate(GenerateArgs),
    /// Cluster a dataset and score the clusters against attribute labels
    Cluster(ClusterArgs),
    /// Probe which attributes successive cluster counts resolve
    Hierarchy(HierarchyArgs),
    /// Train a nearest-centroid classifier on a stratified split and persist it
    Train(TrainArgs),
    /// Classify vectors with a persisted classifier
    Classify(ClassifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Kmeans,
    Mog,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    FarthestFirst,
    RandomRecords,
}

impl From<InitArg> for InitMethod {
    fn from(value: InitArg) -> Self {
        match value {
            InitArg::FarthestFirst => InitMethod::FarthestFirst,
            InitArg::RandomRecords => InitMethod::RandomRecords,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CovarianceArg {
    Diagonal,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    /// Report format
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Include the wall-clock duration in the report (makes output
    /// run-dependent)
    #[arg(long)]
    timing: bool,
}

impl ReportArgs {
    fn emit(&self, mut report: RunReport, started: Instant) -> Result<()> {
        if self.timing {
            report.duration_ms = Some(started.elapsed().as_millis() as u64);
        }
        let text = match self.format {
            Format::Table => report.to_table(),
            Format::Json => report.to_json(),
        };
        match &self.output {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset path
    #[arg(long)]
    output: PathBuf,
    /// Embedding dimension
    #[arg(long, default_value_t = 16)]
    dimension: usize,
    /// Attribute axes as name=offset, most dominant first (repeatable)
    #[arg(long = "attribute", value_name = "NAME=OFFSET")]
    attributes: Vec<String>,
    /// Isotropic noise level around each cell mean
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 25)]
    samples_per_cell: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dataset file (JSON lines with a header)
    dataset: PathBuf,
    /// Cluster count
    #[arg(long)]
    k: usize,
    /// Attributes whose composite the clusters are scored against
    #[arg(long, value_delimiter = ',', required = true)]
    attributes: Vec<String>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "kmeans")]
    algorithm: Algorithm,
    /// Centroid initialization for --algorithm kmeans
    #[arg(long, value_enum, default_value = "farthest-first")]
    init: InitArg,
    /// Covariance structure for --algorithm mog
    #[arg(long, value_enum, default_value = "diagonal")]
    covariance: CovarianceArg,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct HierarchyArgs {
    dataset: PathBuf,
    /// Binary attributes to probe, most dominant expectation first
    #[arg(long, value_delimiter = ',', required = true)]
    attributes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8])]
    cluster_counts: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "farthest-first")]
    init: InitArg,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    /// Attributes the classifier learns to predict
    #[arg(long, value_delimiter = ',', required = true)]
    attributes: Vec<String>,
    /// Where to persist the trained classifier
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8])]
    cluster_counts: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each stratum used for training; the rest is held out for
    /// the test evaluation in the report
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value = "kmeans")]
    algorithm: Algorithm,
    /// Centroid initialization for --algorithm kmeans
    #[arg(long, value_enum, default_value = "farthest-first")]
    init: InitArg,
    /// Covariance structure for --algorithm mog
    #[arg(long, value_enum, default_value = "diagonal")]
    covariance: CovarianceArg,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Persisted classifier file
    #[arg(long)]
    model: PathBuf,
    /// Batch input: a dataset file whose records are classified one per line
    input: Option<PathBuf>,
    /// Single query vector as comma-separated components
    #[arg(
        long,
        value_name = "V1,V2,...",
        conflicts_with = "input",
        allow_hyphen_values = true
    )]
    vector: Option<String>,
    /// Only consult centroids from this cluster-count level
    #[arg(long)]
    level: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed stdout (e.g. piping into head) is not an error
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_malformed_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => run_generate(args),
        Command::Cluster(args) => run_cluster(args),
        Command::Hierarchy(args) => run_hierarchy(args),
        Command::Train(args) => run_train(args),
        Command::Classify(args) => run_classify(args),
    }
}

fn parse_axis(text: &str) -> Result<AttributeAxis> {
    let (name, offset) = text.split_once('=').ok_or_else(|| Error::InvalidSpec {
        reason: format!("attribute {text:?} must look like name=offset"),
    })?;
    let offset: f64 = offset.parse().map_err(|_| Error::InvalidSpec {
        reason: format!("attribute {text:?} has a non-numeric offset"),
    })?;
    Ok(AttributeAxis::random(name, offset))
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let attributes = if args.attributes.is_empty() {
        vec![
            AttributeAxis::random("skin_tone", 8.0),
            AttributeAxis::random("gender", 2.0),
            AttributeAxis::random("age", 0.5),
        ]
    } else {
        args.attributes
            .iter()
            .map(|a| parse_axis(a))
            .collect::<Result<_>>()?
    };
    let spec = HierarchySpec {
        dimension: args.dimension,
        attributes,
        noise_sigma: args.noise_sigma,
        samples_per_cell: args.samples_per_cell,
        rng_seed: args.seed,
    };
    let data = generate(&spec)?;
    write_dataset_file(&data, &args.output)?;
    eprintln!(
        "wrote {} records ({} cells x {}) to {}",
        data.len(),
        spec.cell_count(),
        spec.samples_per_cell,
        args.output.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cluster_reports(
    data: &Dataset,
    attributes: &[String],
    k: usize,
    restarts: usize,
    seed: u64,
    init: InitMethod,
    algorithm: Algorithm,
    covariance: CovarianceArg,
) -> Result<Vec<AlignmentReport>> {
    match algorithm {
        Algorithm::Kmeans => {
            let config = KMeansConfig::new(k, seed)
                .with_restarts(restarts)
                .with_init(init);
            kmeans_fit(data, &config)?
                .iter()
                .map(|m| align_and_score(&m.assignments, data, attributes))
                .collect()
        }
        Algorithm::Mog => {
            let kind = match covariance {
                CovarianceArg::Diagonal => CovarianceKind::Diagonal,
                CovarianceArg::Full => CovarianceKind::Full,
            };
            (0..restarts.max(1))
                .map(|i| {
                    let config =
                        GmmConfig::new(k, restart_seed(seed, i as u64)).with_covariance_kind(kind);
                    let model = gmm_fit(data, &config)?;
                    align_and_score(&model.hard_assignments(), data, attributes)
                })
                .collect()
        }
    }
}

fn run_cluster(args: ClusterArgs) -> Result<()> {
    let started = Instant::now();
    let data = read_dataset_file(&args.dataset)?;
    let runs = cluster_reports(
        &data,
        &args.attributes,
        args.k,
        args.restarts,
        args.seed,
        args.init.into(),
        args.algorithm,
        args.covariance,
    )?;
    let averages = average_runs(&runs)?;
    let mut report = RunReport::new("cluster");
    report
        .parameter("dataset", args.dataset.display())
        .parameter("k", args.k)
        .parameter("restarts", args.restarts)
        .parameter("seed", args.seed)
        .parameter("attributes", args.attributes.join(","))
        .parameter(
            "algorithm",
            match args.algorithm {
                Algorithm::Kmeans => "kmeans",
                Algorithm::Mog => "mog",
            },
        );
    report.runs = runs;
    report.averages = Some(averages);
    args.report.emit(report, started)
}

fn run_hierarchy(args: HierarchyArgs) -> Result<()> {
    let started = Instant::now();
    let data = read_dataset_file(&args.dataset)?;
    let config = KMeansConfig::new(2, args.seed)
        .with_restarts(args.restarts)
        .with_init(args.init.into());
    let hierarchy = hierarchy_probe(&data, &args.attributes, &args.cluster_counts, &config)?;
    let mut report = RunReport::new("hierarchy");
    report
        .parameter("dataset", args.dataset.display())
        .parameter("attributes", args.attributes.join(","))
        .parameter(
            "cluster_counts",
            args.cluster_counts
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )
        .parameter("restarts", args.restarts)
        .parameter("seed", args.seed);
    report.hierarchy = Some(hierarchy);
    args.report.emit(report, started)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let data = read_dataset_file(&args.dataset)?;
    let split = SplitSpec::new(args.seed)
        .stratified_by(args.attributes.iter().cloned())
        .with_fraction(args.train_fraction);
    let (train, test) = split_dataset(&data, &split)?;
    let outcome = match args.algorithm {
        Algorithm::Kmeans => {
            let config = KMeansConfig::new(2, args.seed)
                .with_restarts(args.restarts)
                .with_init(args.init.into());
            train_centroid_classifier(&train, &args.attributes, &args.cluster_counts, &config)?
        }
        Algorithm::Mog => {
            let kind = match args.covariance {
                CovarianceArg::Diagonal => CovarianceKind::Diagonal,
                CovarianceArg::Full => CovarianceKind::Full,
            };
            let base = GmmConfig::new(2, args.seed).with_covariance_kind(kind);
            train_centroid_classifier_gmm(
                &train,
                &args.attributes,
                &args.cluster_counts,
                &base,
                args.restarts,
            )?
        }
    };
    save_classifier(&outcome.classifier, &args.model)?;

    let mut report = RunReport::new("train");
    report
        .parameter("dataset", args.dataset.display())
        .parameter("model", args.model.display())
        .parameter("attributes", args.attributes.join(","))
        .parameter("train_fraction", args.train_fraction)
        .parameter("train_records", train.len())
        .parameter("test_records", test.len())
        .parameter("restarts", args.restarts)
        .parameter("seed", args.seed)
        .parameter(
            "algorithm",
            match args.algorithm {
                Algorithm::Kmeans => "kmeans",
                Algorithm::Mog => "mog",
            },
        );
    for level in &outcome.levels {
        let evaluation = evaluate_classifier(
            &outcome.classifier,
            &test,
            &args.attributes,
            Some(level.cluster_count),
        )?;
        report
            .evaluations
            .insert(format!("test (level {})", level.cluster_count), evaluation);
    }
    report.training = outcome.levels;
    args.report.emit(report, started)
}

fn run_classify(args: ClassifyArgs) -> Result<()> {
    let classifier = load_classifier(&args.model)?;
    let mut sink: BufWriter<Box<dyn Write>> = BufWriter::new(match &args.output {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    });

    let mut emit = |id: &str, vector: &[f64]| -> Result<()> {
        let result = classify(&classifier, vector, args.level)?;
        match args.format {
            Format::Table => {
                let labels: Vec<String> = result
                    .labels
                    .iter()
                    .map(|(a, v)| format!("{a}={v}"))
                    .collect();
                writeln!(
                    sink,
                    "{id}\t{}\t{}\t{}",
                    labels.join(","),
                    result.level,
                    result.distance
                )?;
            }
            Format::Json => {
                let line = serde_json::json!({
                    "id": id,
                    "labels": result.labels,
                    "level": result.level,
                    "distance": result.distance,
                });
                writeln!(sink, "{line}")?;
            }
        }
        Ok(())
    };

    match (&args.vector, &args.input) {
        (Some(text), None) => {
            let vector: Vec<f64> = text
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::InvalidConfig {
                        reason: format!("vector component {c:?} is not a number"),
                    })
                })
                .collect::<Result<_>>()?;
            emit("query", &vector)?;
        }
        (None, Some(path)) => {
            let data = read_dataset_file(path)?;
            for record in data.records() {
                emit(&record.id, &record.vector)?;
            }
        }
        _ => {
            return Err(Error::InvalidConfig {
                reason: "provide either a dataset file or --vector".to_string(),
            })
        }
    }
    sink.flush()?;
    Ok(())
}
