use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use faultclust::api::{self, AppState};
use faultclust::config::{Overrides, PipelineConfig, SilhouetteSpace};
use faultclust::core::kmeans::elbow_curve;
use faultclust::core::labels::LabelLevel;
use faultclust::core::reduce::ReductionMode;
use faultclust::core::synth::{benchmark_counts, describe_counts, generate_dataset, parse_class_counts, SynthOptions};
use faultclust::core::waveform::{DatasetMeta, DEFAULT_NOMINAL_FREQ_HZ, DEFAULT_SAMPLING_RATE_HZ};
use faultclust::labelstore::{load_labels, LabelStore};
use faultclust::pipeline::{self, ModelFile, ASSIGNMENTS_FILE, MODEL_FILE};
use faultclust::worksheet::{self, DEFAULT_PER_CLUSTER};
use faultclust::{csvio, store, Error, Result};

/// Unsupervised clustering of 3-phase voltage/current fault recordings.
#[derive(Debug, Parser)]
#[command(name = "faultclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Gen(GenArgs),
    /// Convert a long-format CSV (id,channel,t,value) into a dataset.
    Import(ImportArgs),
    /// Compute FFT magnitude features.
    Features(FeaturesArgs),
    /// Reduce features with PCA or PCA followed by t-SNE.
    Reduce(ReduceArgs),
    /// Cluster an embedding with K-Means.
    Cluster(ClusterArgs),
    /// Score a clustering against expert labels.
    Evaluate(EvaluateArgs),
    /// Run every stage and write all artifacts to the output directory.
    Run(RunArgs),
    /// Draw a labeling worksheet of samples per cluster.
    Sample(SampleArgs),
    /// Serve the labeling HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Pca,
    PcaThenTsne,
}

impl From<ModeArg> for ReductionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pca => ReductionMode::Pca,
            ModeArg::PcaThenTsne => ReductionMode::PcaThenTsne,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    EventType,
    FaultClass,
}

impl From<LevelArg> for LabelLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::EventType => LabelLevel::EventType,
            LevelArg::FaultClass => LabelLevel::FaultClass,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Embedding,
    Features,
}

impl From<SpaceArg> for SilhouetteSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Embedding => SilhouetteSpace::Embedding,
            SpaceArg::Features => SilhouetteSpace::Features,
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Dataset manifest to write; the blob goes next to it.
    #[arg(long)]
    out: PathBuf,
    /// Label CSV to write [default: labels.csv next to the manifest].
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Records per benchmark class.
    #[arg(long, default_value_t = 50, conflicts_with = "classes")]
    count: usize,
    /// Explicit per-class counts, e.g. "Normal=10,SC-1P-A=5".
    #[arg(long)]
    classes: Option<String>,
    #[arg(long, default_value_t = 2048)]
    timesteps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Gaussian noise, relative to the nominal amplitude.
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Debug, Args)]
struct ImportArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_RATE_HZ)]
    sampling_rate_hz: f64,
    #[arg(long, default_value_t = DEFAULT_NOMINAL_FREQ_HZ)]
    nominal_freq_hz: f64,
}

/// Optional TOML file supplying stage parameters.
#[derive(Debug, Args)]
struct ConfigArg {
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p),
            None => Ok(PipelineConfig::new("", "")),
        }
    }
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the per-iteration KL trace (t-SNE only).
    #[arg(long)]
    kl_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    embedding: PathBuf,
    /// Receives assignments.csv, model.json and cluster_sizes.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write elbow.csv for a range of k, e.g. "2..20" or "5,10,15".
    #[arg(long)]
    elbow: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Run directory holding assignments.csv and model.json.
    #[arg(long)]
    run: PathBuf,
    /// Label CSV or .jsonl label log.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_enum)]
    level: Option<LevelArg>,
    #[arg(long, value_enum)]
    silhouette_space: Option<SpaceArg>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(short, long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    run: PathBuf,
    /// Samples per cluster.
    #[arg(short, long, default_value_t = DEFAULT_PER_CLUSTER)]
    n: usize,
    /// Marks already-labeled samples.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "worksheet.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    run: Option<PathBuf>,
    /// Label log (JSON lines); created if missing.
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Import(a) => import(a),
        Command::Features(a) => features(a),
        Command::Reduce(a) => reduce(a),
        Command::Cluster(a) => cluster(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Run(a) => run(a),
        Command::Sample(a) => sample(a),
        Command::Serve(a) => serve(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let counts = match &a.classes {
        Some(spec) => parse_class_counts(spec).map_err(|e| Error::Config(e.to_string()))?,
        None => benchmark_counts(a.count),
    };
    let mut opts = SynthOptions::default();
    if let Some(n) = a.noise_std {
        opts.noise_std = n;
    }
    opts.validate().map_err(|e| Error::Config(e.to_string()))?;
    let (ds, labels) = generate_dataset(&counts, a.timesteps, a.seed, &opts)?;
    store::save_dataset(&ds, &a.out)?;
    let labels_out = a.labels_out.unwrap_or_else(|| a.out.with_file_name("labels.csv"));
    csvio::write_labels_csv(&labels_out, &labels)?;
    println!(
        "wrote {} records ({}) to {} and labels to {}",
        ds.len(),
        describe_counts(&counts),
        a.out.display(),
        labels_out.display()
    );
    Ok(())
}

fn import(a: ImportArgs) -> Result<()> {
    let mut meta = DatasetMeta::new(0, 0);
    meta.sampling_rate_hz = a.sampling_rate_hz;
    meta.nominal_freq_hz = a.nominal_freq_hz;
    let ds = store::import_csv(&a.csv, meta)?;
    store::save_dataset(&ds, &a.out)?;
    println!(
        "imported {} records x {} samples to {}",
        ds.len(),
        ds.meta.timesteps,
        a.out.display()
    );
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let ds = store::load_dataset(&a.input)?;
    let fm = pipeline::extract_features(&ds, &cfg.feature_config(), a.workers.unwrap_or(cfg.workers))?;
    csvio::write_features(&a.out, &fm.ids, &fm.values)?;
    let degenerate = fm.degenerate.iter().flatten().filter(|&&d| d).count();
    println!(
        "{} records x {} features (FFT length {}, {} flat channels) -> {}",
        fm.len(),
        fm.values.cols(),
        fm.fft_len,
        degenerate,
        a.out.display()
    );
    Ok(())
}

fn reduce(a: ReduceArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    cfg.apply(&Overrides {
        mode: a.mode.map(Into::into),
        seed: a.seed,
        ..Overrides::default()
    });
    cfg.validate()?;
    let (ids, x) = csvio::read_features(&a.features)?;
    let mode = cfg.reduction.mode;
    let r = pipeline::reduce(&x, mode, &cfg.reduction_params())?;
    csvio::write_embedding(&a.out, &ids, &r.embedding.coords, pipeline::embedding_header(mode))?;
    if let Some(p) = &a.kl_trace {
        csvio::write_kl_trace(p, &r.embedding.kl_trace)?;
    }
    let kl = r
        .embedding
        .final_kl
        .map_or_else(String::new, |kl| format!(", final KL {kl:.4}"));
    println!(
        "{} x {} -> {} x {} (PCA kept {} components{kl}) -> {}",
        x.rows(),
        x.cols(),
        r.embedding.coords.rows(),
        r.embedding.coords.cols(),
        r.pca.n_components(),
        a.out.display()
    );
    Ok(())
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse k range {s:?}; use \"2..20\" or \"5,10,15\""));
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    cfg.apply(&Overrides {
        k: a.k,
        seed: a.seed,
        ..Overrides::default()
    });
    cfg.validate()?;
    let ks = a.elbow.as_deref().map(parse_k_range).transpose()?;
    let (ids, x) = csvio::read_embedding(&a.embedding)?;
    let params = cfg.kmeans_params();
    let model = pipeline::cluster(&x, &params)?;
    pipeline::write_cluster_outputs(&a.out_dir, &ids, &model)?;
    if let Some(ks) = ks {
        let curve = elbow_curve(&x, &ks, &params)?;
        csvio::write_elbow(a.out_dir.join("elbow.csv"), &curve)?;
    }
    println!(
        "k = {}: inertia {:.4} after {} iterations; sizes {:?} -> {}",
        model.k,
        model.inertia,
        model.iterations_run,
        model.sizes,
        a.out_dir.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(l) = a.level {
        cfg.metrics.level = l.into();
    }
    if let Some(s) = a.silhouette_space {
        cfg.metrics.silhouette_space = s.into();
    }
    let path = a
        .labels
        .or(cfg.labels.clone())
        .ok_or_else(|| Error::Config("evaluate needs --labels (CSV or .jsonl log)".into()))?;
    let labels = load_labels(&path)?;
    if labels.is_empty() {
        return Err(Error::Config(format!("{} holds no labels", path.display())));
    }
    let doc = pipeline::evaluate_run(&a.run, &labels, &cfg.metrics)?;
    pipeline::write_metrics(&a.run, &doc)?;
    print!("{}", doc.to_markdown());
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config.config {
        Some(p) => PipelineConfig::load(p)?,
        None => {
            let input = a
                .input
                .clone()
                .ok_or_else(|| Error::Config("run needs --config or --input".into()))?;
            let out = a
                .output_dir
                .clone()
                .ok_or_else(|| Error::Config("run needs --config or --output-dir".into()))?;
            PipelineConfig::new(input, out)
        }
    };
    cfg.apply(&Overrides {
        input: a.input,
        labels: a.labels,
        output_dir: a.output_dir,
        seed: a.seed,
        workers: a.workers,
        mode: a.mode.map(Into::into),
        k: a.k,
    });
    let s = pipeline::run_pipeline(&cfg)?;
    println!(
        "{} records, {} features -> {}-d embedding{}; k = {}, inertia {:.4}",
        s.records,
        s.feature_dims,
        s.embedding_dims,
        s.final_kl.map_or_else(String::new, |kl| format!(" (KL {kl:.4})")),
        s.model.k,
        s.model.inertia
    );
    if let Some(m) = &s.metrics {
        println!(
            "purity {:.3} (weighted), entropy {:.3} (weighted) over {} labeled samples",
            m.report.purity.weighted.mean, m.report.entropy.weighted.mean, m.report.labeled_samples
        );
    }
    let timings: Vec<String> = s.stage_ms.iter().map(|(k, v)| format!("{k} {v} ms")).collect();
    println!("stages: {}", timings.join(", "));
    println!("artifacts in {}", s.output_dir.display());
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let model = ModelFile::load(a.run.join(MODEL_FILE))?;
    let (ids, clusters) = csvio::read_assignments(a.run.join(ASSIGNMENTS_FILE))?;
    let labeled: BTreeSet<u64> = match &a.labels {
        Some(p) => load_labels(p)?.into_iter().map(|l| l.sample_id).collect(),
        None => BTreeSet::new(),
    };
    let entries = worksheet::draw(&ids, &clusters, model.k, model.seed, a.n, &labeled)?;
    worksheet::write_csv(&a.out, &entries)?;
    let pending = entries.iter().filter(|e| !e.labeled).count();
    println!(
        "{} samples from {} clusters ({} unlabeled) -> {}",
        entries.len(),
        model.k,
        pending,
        a.out.display()
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let ds = store::load_dataset(&a.input)?;
    let labels = LabelStore::open(&a.labels)?;
    let state = Arc::new(AppState::new(ds, a.run.clone(), labels, cfg.metrics));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Config(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(api::serve(state, a.addr))
        .map_err(|e| io_error(Path::new(&a.addr.to_string()), e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
