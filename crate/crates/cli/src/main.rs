//! `rigsplit`: cluster a blendshape model in mesh and controller space,
//! solve the inverse rig per cluster, and evaluate against the whole-face
//! baseline.

use clap::{Args, Parser, Subcommand};
use rigsplit_core::clustering::{self};
use rigsplit_core::compute_offsets;
use rigsplit_core::exec;
use rigsplit_core::metrics::{self, SolveReport};
use rigsplit_core::model::{self, AnimationSet, BlendshapeModel};
use rigsplit_core::solver;
use rigsplit_core::synth::{self, SynthSpec};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

mod sweep;

#[derive(Parser)]
#[command(name = "rigsplit", version, about)]
struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cap the worker thread count (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic model with planted block structure.
    Synth(SynthArgs),
    /// Cluster a model in mesh and controller space.
    Cluster(ClusterArgs),
    /// Train per-cluster regressors and evaluate on a test set.
    Solve(SolveArgs),
    /// Evaluate previously trained submodels on a test set.
    Eval(EvalArgs),
    /// Cluster, train and evaluate over a grid of (K, p) values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "k-true")]
    k_true: usize,
    /// Fraction of vertices in the inactive skull block.
    #[arg(long, default_value_t = 0.0)]
    inactive: f64,
    /// Off-block leakage magnitude.
    #[arg(long = "cross-talk", default_value_t = 0.0)]
    cross_talk: f64,
    /// Output model file.
    #[arg(short, long)]
    output: PathBuf,
    /// Output file for the planted ground-truth clustering.
    #[arg(long)]
    planted: Option<PathBuf>,
    /// Also generate a training animation set.
    #[arg(long = "train-out")]
    train_out: Option<PathBuf>,
    #[arg(long = "train-frames", default_value_t = 231)]
    train_frames: usize,
    /// Also generate a test animation set.
    #[arg(long = "test-out")]
    test_out: Option<PathBuf>,
    #[arg(long = "test-frames", default_value_t = 129)]
    test_frames: usize,
    /// Probability that a controller is active in a frame.
    #[arg(long, default_value_t = 0.3)]
    sparsity: f64,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of mesh clusters.
    #[arg(short = 'K', long = "clusters")]
    k: usize,
    /// Tolerated controller-overlap fraction before merging.
    #[arg(short, long, default_value_t = 0.75)]
    p: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Dump the offset matrix as CSV.
    #[arg(long = "dump-offsets")]
    dump_offsets: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Regularization added to the kernel diagonal.
    #[arg(long, default_value_t = 1e-6)]
    noise: f64,
    /// Clamp predicted weights to [0, 1].
    #[arg(long)]
    clamp: bool,
    /// Output report file.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write per-frame errors as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Serialize the trained submodels.
    #[arg(long = "submodels-out")]
    submodels_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    submodels: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    clamp: bool,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Cluster counts to try, comma separated.
    #[arg(long = "k-values", value_delimiter = ',', required = true)]
    k_values: Vec<usize>,
    /// Overlap parameters to try, comma separated.
    #[arg(long = "p-values", value_delimiter = ',', default_value = "0.75")]
    p_values: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    noise: f64,
    #[arg(long)]
    clamp: bool,
    /// Output CSV file.
    #[arg(short, long)]
    output: PathBuf,
}

/// Failures split by exit code: 2 for bad usage or invalid inputs, 1 for
/// runtime/numeric failures.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        usage(e)
    }
}

impl From<clustering::ClusterError> for CliError {
    fn from(e: clustering::ClusterError) -> Self {
        usage(e)
    }
}

impl From<synth::SynthError> for CliError {
    fn from(e: synth::SynthError) -> Self {
        usage(e)
    }
}

impl From<solver::SolveError> for CliError {
    fn from(e: solver::SolveError) -> Self {
        match e {
            solver::SolveError::SingularGram { .. } | solver::SolveError::Metrics(_) => runtime(e),
            _ => usage(e),
        }
    }
}

impl From<metrics::MetricsError> for CliError {
    fn from(e: metrics::MetricsError) -> Self {
        runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if cli.quiet { "off" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .init();
    if cli.threads > 0 {
        if let Err(e) = exec::set_threads(cli.threads) {
            log::warn!("could not configure thread pool: {e}");
        }
    }

    let result = match &cli.command {
        Command::Synth(args) => cmd_synth(&cli, args),
        Command::Cluster(args) => cmd_cluster(&cli, args),
        Command::Solve(args) => cmd_solve(&cli, args),
        Command::Eval(args) => cmd_eval(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn say(cli: &Cli, text: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", text.as_ref());
    }
}

fn load_validated_animation(
    path: &PathBuf,
    model: &BlendshapeModel,
) -> Result<AnimationSet, CliError> {
    let set = model::load_animation(path)?;
    set.validate_against(model)?;
    Ok(set)
}

fn write_report(
    cli: &Cli,
    report: &SolveReport,
    output: &PathBuf,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    metrics::save_report(report, output)?;
    if let Some(path) = csv {
        let mut out = BufWriter::new(File::create(path)?);
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    say(
        cli,
        format!(
            "mean_CE {}  mean_ME {}  NCV {}  CpC {}  VpC {}",
            report.mean_ce, report.mean_me, report.ncv, report.cpc, report.vpc
        ),
    );
    Ok(())
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        n: args.n,
        m: args.m,
        k_true: args.k_true,
        inactive_fraction: args.inactive,
        cross_talk: args.cross_talk,
        seed: cli.seed,
    };
    let (model, planted) = synth::generate_model(&spec)?;
    model::save_model(&model, &args.output)?;
    say(
        cli,
        format!("model: {} vertices, {} controllers", args.n, args.m),
    );
    if let Some(path) = &args.planted {
        clustering::save_clustering(&planted, path)?;
    }
    let model_ref = args
        .output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    if let Some(path) = &args.train_out {
        let mut set =
            synth::generate_animation(&model, args.train_frames, args.sparsity, cli.seed + 1)?;
        set.model_ref = model_ref.clone();
        model::save_animation(&set, path)?;
        say(cli, format!("train set: {} frames", args.train_frames));
    }
    if let Some(path) = &args.test_out {
        let mut set =
            synth::generate_animation(&model, args.test_frames, args.sparsity, cli.seed + 2)?;
        set.model_ref = model_ref;
        model::save_animation(&set, path)?;
        say(cli, format!("test set: {} frames", args.test_frames));
    }
    Ok(())
}

fn cmd_cluster(cli: &Cli, args: &ClusterArgs) -> Result<(), CliError> {
    let model = model::load_model(&args.model)?;
    let offsets = compute_offsets(&model);
    if let Some(path) = &args.dump_offsets {
        let mut out = BufWriter::new(File::create(path)?);
        offsets.write_csv(&model, &mut out)?;
        out.flush()?;
    }
    let clustering = clustering::cluster_offsets(&offsets, args.k, args.p, cli.seed)?;
    clustering::save_clustering(&clustering, &args.output)?;

    say(
        cli,
        format!("{} cluster(s) after merging:", clustering.len()),
    );
    for (k, (mesh, ctrl)) in clustering
        .mesh_clusters
        .iter()
        .zip(&clustering.controller_clusters)
        .enumerate()
    {
        say(
            cli,
            format!(
                "  cluster {k}: {} vertices, {} controllers",
                mesh.len(),
                ctrl.len()
            ),
        );
    }
    match metrics::structural_metrics(&clustering) {
        Ok(s) => say(cli, format!("NCV {}  CpC {}  VpC {}", s.ncv, s.cpc, s.vpc)),
        Err(e) => log::warn!("{e}"),
    }
    Ok(())
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Result<(), CliError> {
    let model = model::load_model(&args.model)?;
    let clustering = clustering::load_clustering(&args.clusters)?;
    let train_set = load_validated_animation(&args.train, &model)?;
    let test_set = load_validated_animation(&args.test, &model)?;

    let submodels = solver::train(&model, &clustering, &train_set, args.noise)?;
    if let Some(path) = &args.submodels_out {
        solver::save_submodels(&submodels, path)?;
    }
    let report = solver::evaluate(
        &model,
        &clustering,
        &submodels,
        &test_set,
        args.noise,
        args.clamp,
    )?;
    write_report(cli, &report, &args.output, args.csv.as_ref())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<(), CliError> {
    let model = model::load_model(&args.model)?;
    let clustering = clustering::load_clustering(&args.clusters)?;
    let submodels = solver::load_submodels(&args.submodels)?;
    let test_set = load_validated_animation(&args.test, &model)?;
    let noise = submodels.first().map(|s| s.noise()).unwrap_or(0.0);
    let report = solver::evaluate(
        &model,
        &clustering,
        &submodels,
        &test_set,
        noise,
        args.clamp,
    )?;
    write_report(cli, &report, &args.output, args.csv.as_ref())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), CliError> {
    let model = model::load_model(&args.model)?;
    let train_set = load_validated_animation(&args.train, &model)?;
    let test_set = load_validated_animation(&args.test, &model)?;
    let n = model.num_vertices();
    for &k in &args.k_values {
        if k < 1 || k > n {
            return Err(usage(format!("K = {k} is out of range (1 ..= {n})")));
        }
    }
    for &p in &args.p_values {
        if !(p > 0.0 && p <= 1.0) {
            return Err(usage(format!("p = {p} must lie in (0, 1]")));
        }
    }

    let config = sweep::SweepConfig {
        k_values: args.k_values.clone(),
        p_values: args.p_values.clone(),
        seed: cli.seed,
        noise: args.noise,
        clamp: args.clamp,
    };
    let csv = sweep::run_sweep(&model, &train_set, &test_set, &config);
    let mut out = BufWriter::new(File::create(&args.output)?);
    out.write_all(csv.as_bytes())?;
    out.flush()?;
    say(
        cli,
        format!(
            "{} sweep cell(s) written",
            args.k_values.len() * args.p_values.len()
        ),
    );
    Ok(())
}
