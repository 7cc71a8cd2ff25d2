//! `cns`: command-line driver for the Correct-and-Smooth pipeline.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 non-convergence, 1 anything
//! else (I/O failures and the like).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cns_core::bench::{
    bench_table, build_features, post_process, spectral_embedding, BaseKind, BenchSpec,
    ExperimentConfig, FeatureConfig,
};
use cns_core::correct_smooth::{LabelSource, PipelineMode, SearchSpace, Variant};
use cns_core::data::{fixed_split_load, load_dataset, make_split, Dataset, Split};
use cns_core::io::{read_matrix, write_matrix};
use cns_core::metrics::{accuracy, argmax_rows};
use cns_core::model::{import_predictions, ModelKind};
use cns_core::spectral::FeatureScaling;
use cns_core::Error;

#[derive(Parser)]
#[command(
    name = "cns",
    version,
    about = "Correct-and-Smooth node classification"
)]
struct Cli {
    /// Worker threads for parallel kernels (default: all cores).
    #[arg(long, global = true, env = "CNS_THREADS")]
    threads: Option<usize>,
    /// Run single-threaded so every result is bitwise reproducible.
    #[arg(long, global = true)]
    strict_deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and build its spectral-embedding cache.
    Prep(PrepArgs),
    /// Generate a random train/validation/test split file.
    Split(SplitArgs),
    /// Train a base predictor; writes a checkpoint and the prediction matrix.
    Train(TrainArgs),
    /// Correct and smooth a prediction matrix (or plain label propagation).
    Cas(CasArgs),
    /// Reproduce benchmark tables over several split seeds.
    Bench(BenchArgs),
    /// Accuracy of a prediction file on one part of a split.
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct FeatureArgs {
    /// Spectral embedding dimension.
    #[arg(long, default_value_t = 128)]
    embedding_dim: usize,
    /// Spectral regularization (default: average degree).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = Scaling::RawNonBinary)]
    scaling: Scaling,
    /// Embedding cache directory (default: <data>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl FeatureArgs {
    fn config(&self, data: &Path) -> FeatureConfig {
        FeatureConfig {
            embedding_dim: self.embedding_dim,
            tau: self.tau,
            scaling: self.scaling.into(),
            eigen_seed: 0,
            cache_dir: Some(self.cache.clone().unwrap_or_else(|| data.join("cache"))),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    /// Standardize every column.
    All,
    /// Standardize columns that are not purely 0/1.
    NonBinary,
    /// Standardize raw-feature columns that are not purely 0/1; keep spectral columns as is.
    RawNonBinary,
    None,
}

impl From<Scaling> for FeatureScaling {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::All => FeatureScaling::Standardize,
            Scaling::NonBinary => FeatureScaling::StandardizeNonBinary,
            Scaling::RawNonBinary => FeatureScaling::RawNonBinary,
            Scaling::None => FeatureScaling::None,
        }
    }
}

#[derive(Args)]
struct PrepArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Skip the spectral embedding.
    #[arg(long)]
    no_embedding: bool,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.6,0.2,0.2")]
    fractions: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value = "plain-linear")]
    base: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    features: FeatureArgs,
    /// Model checkpoint output.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Prediction matrix output (`.bin` for binary, CSV otherwise).
    #[arg(long)]
    predictions: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Autoscale,
    Fdiff,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    CorrectOnly,
    Basic,
    LpOnly,
    BaseOnly,
}

impl From<ModeArg> for PipelineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => PipelineMode::Full,
            ModeArg::CorrectOnly => PipelineMode::CorrectOnly,
            ModeArg::Basic => PipelineMode::Basic,
            ModeArg::LpOnly => PipelineMode::LpOnly,
            ModeArg::BaseOnly => PipelineMode::BaseOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelsArg {
    Train,
    #[value(name = "train+val")]
    TrainVal,
}

#[derive(Args)]
struct CasArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Base prediction matrix (not needed for --mode lp-only).
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Autoscale)]
    variant: VariantArg,
    #[arg(long, default_value_t = 0.9)]
    alpha_correct: f64,
    #[arg(long, default_value_t = 0.8)]
    alpha_smooth: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_s: f64,
    #[arg(long, value_enum, default_value_t = LabelsArg::Train)]
    labels: LabelsArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// Choose alpha/s by validation accuracy over the standard grid instead of the flags.
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Fail with exit code 3 when a propagation does not reach its tolerance.
    #[arg(long)]
    require_convergence: bool,
    /// JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-node CSV (node, true, base, corrected, final).
    #[arg(long)]
    per_node: Option<PathBuf>,
    /// Final score matrix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset directories.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Number of split seeds (0..n).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Timing repetitions (median reported).
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "0.6,0.2,0.2")]
    fractions: String,
    /// Comma-separated base models.
    #[arg(long, default_value = "plain-linear,linear,mlp")]
    bases: String,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Score matrix, or a per-node CSV written by `cas` (its `final` column is used).
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = Part::Test)]
    set: Part,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Valid,
    Test,
}

fn parse_fractions(s: &str) -> anyhow::Result<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidConfig(format!("bad fractions {s:?}: {e}")))?;
    match v.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(Error::InvalidConfig(format!("expected three fractions, got {s:?}")).into()),
    }
}

fn load(data: &Path) -> anyhow::Result<Dataset> {
    load_dataset(data).with_context(|| format!("loading dataset {}", data.display()))
}

fn load_split(path: &Path, d: &Dataset) -> anyhow::Result<Split> {
    fixed_split_load(path, d.num_nodes())
        .with_context(|| format!("loading split {}", path.display()))
}

fn prep(a: PrepArgs) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let g = &d.graph;
    let mut summary = serde_json::json!({
        "dataset": d.name,
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "edge_lines": d.edge_lines,
        "classes": d.num_classes,
        "labeled": d.labeled_nodes().len(),
        "features": d.features.as_ref().map(|x| x.ncols()),
        "isolated_nodes": g.isolated_nodes(),
        "components": g.connected_components(),
        "graph_hash": g.content_hash(),
    });
    if !a.no_embedding {
        let cfg = a.features.config(&a.data);
        let emb = spectral_embedding(&d, &cfg)?;
        summary["embedding_dim"] = emb.dim().into();
        summary["leading_eigenvalues"] = emb
            .values
            .iter()
            .take(5)
            .copied()
            .collect::<Vec<_>>()
            .into();
        summary["cache"] = cfg.cache_dir.map(|p| p.display().to_string()).into();
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let s = make_split(&d.labeled_nodes(), parse_fractions(&a.fractions)?, a.seed)?;
    s.save(&a.out)?;
    eprintln!(
        "split {}: train {}, valid {}, test {}",
        a.out.display(),
        s.train.len(),
        s.valid.len(),
        s.test.len()
    );
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let s = load_split(&a.split, &d)?;
    let kind: BaseKind = a.base.parse()?;
    let mut cfg = kind.train_config(a.seed);
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.layers {
        cfg.layers = v;
    }
    if let Some(v) = a.dropout {
        cfg.dropout = v;
    }
    cfg.batch_size = a.batch_size;
    let (x, _) = build_features(
        &d,
        kind.feature_mode(d.features.is_some()),
        &a.features.config(&a.data),
    )?;
    let train_pairs = Split::pairs(&s.train, &d.labels)?;
    let valid_pairs = Split::pairs(&s.valid, &d.labels)?;
    let out = cns_core::model::train(x.view(), &train_pairs, &valid_pairs, d.num_classes, &cfg)?;
    let z = out.model.predict_proba(x.view())?;
    write_matrix(&a.predictions, z.view())?;
    if let Some(p) = &a.checkpoint {
        out.model.save(p)?;
    }
    let base_acc = accuracy(&argmax_rows(z.view()), &d.labels, &s.test)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "dataset": d.name,
            "model": match cfg.model_kind { ModelKind::Linear => "linear", ModelKind::Mlp => "mlp" },
            "base": kind.label(),
            "parameters": out.model.count_parameters(),
            "best_epoch": out.best_epoch,
            "valid_accuracy": out.best_valid_accuracy,
            "test_accuracy": base_acc,
            "final_train_loss": out.loss_history.last(),
            "config": cfg,
        }))?
    );
    Ok(())
}

fn cas(a: CasArgs) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let s = load_split(&a.split, &d)?;
    let mode: PipelineMode = a.mode.into();
    let variant = match (mode.uses_correct(), a.variant) {
        (false, _) => Variant::None,
        (true, VariantArg::Autoscale) => Variant::Autoscale,
        (true, VariantArg::Fdiff) => Variant::FdiffScale,
    };
    let source = match a.labels {
        LabelsArg::Train => LabelSource::TrainOnly,
        LabelsArg::TrainVal => LabelSource::TrainPlusVal,
    };
    let mut cfg = ExperimentConfig::new(None, mode, variant).with_label_source(source);
    cfg.train = None;
    cfg.search = a.search.then(SearchSpace::default);
    let p = &mut cfg.pipeline;
    p.correction.alpha_correct = a.alpha_correct;
    p.correction.s = a.scale_s;
    p.correction.max_iters = a.max_iters;
    p.correction.tol = a.tol;
    p.smooth.alpha_smooth = a.alpha_smooth;
    p.smooth.max_iters = a.max_iters;
    p.smooth.tol = a.tol;

    let base = match (mode.needs_base(), &a.predictions) {
        (true, None) => bail!(Error::InvalidConfig(format!(
            "--mode {mode} needs --predictions"
        ))),
        (true, Some(path)) => Some(cns_core::bench::BaseRun {
            z: import_predictions(path, d.num_nodes(), d.num_classes)?,
            parameters: 0,
            best_epoch: None,
            seconds: 0.0,
        }),
        (false, _) => None,
    };
    let run = post_process(&d, base.as_ref(), &s, &cfg)?;
    if let Some(p) = &a.report {
        run.report.save(p)?;
    }
    if let Some(p) = &a.per_node {
        std::fs::write(p, run.per_node_csv(&d.labels))?;
    }
    if let Some(p) = &a.out {
        write_matrix(p, run.outputs.final_scores.view())?;
    }
    println!("{}", run.report.to_json());
    if a.require_convergence {
        run.outputs.require_converged()?;
    } else if !run.report.converged {
        eprintln!(
            "warning: a propagation stopped at its iteration budget before reaching the tolerance"
        );
    }
    Ok(())
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let mut datasets = Vec::new();
    for p in &a.data {
        datasets.push(load(p)?);
    }
    let bases = a
        .bases
        .split(',')
        .map(|b| b.trim().parse::<BaseKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = BenchSpec {
        bases,
        seeds: (0..a.seeds).collect(),
        reps: a.reps,
        fractions: parse_fractions(&a.fractions)?,
        features: a.features.config(&a.data[0]),
        ..Default::default()
    };
    bench_table(&datasets, &spec, &a.out, |r| {
        println!(
            "{:<10} {:<13} {:<10} {:<11} {:<15} {:>6} ± {:<5} ({}s)",
            r[1], r[2], r[3], r[4], r[5], r[7], r[8], r[12]
        );
    })?;
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let s = load_split(&a.split, &d)?;
    let pred = read_predictions(&a.predictions, d.num_nodes())?;
    let part = match a.set {
        Part::Train => &s.train,
        Part::Valid => &s.valid,
        Part::Test => &s.test,
    };
    let acc = accuracy(&pred, &d.labels, part)?;
    println!("{acc:.6}");
    Ok(())
}

/// Predicted labels from either a per-node CSV (column `final`) or a score matrix.
fn read_predictions(path: &Path, n: usize) -> anyhow::Result<Vec<usize>> {
    let head = std::fs::read_to_string(path)
        .ok()
        .and_then(|t| t.lines().next().map(str::to_string));
    if head.as_deref() == Some("node,true,base,corrected,final") {
        let mut pred = vec![usize::MAX; n];
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.records() {
            let rec = rec?;
            let node: usize = rec[0]
                .parse()
                .map_err(|e| Error::Format(format!("bad node: {e}")))?;
            if node >= n {
                bail!(Error::NodeOutOfRange { index: node, n });
            }
            pred[node] = rec[4]
                .parse()
                .map_err(|e| Error::Format(format!("bad label: {e}")))?;
        }
        return Ok(pred);
    }
    let z = read_matrix(path)?;
    if z.nrows() != n {
        bail!(Error::DimensionMismatch {
            context: "prediction rows",
            expected: n,
            found: z.nrows(),
        });
    }
    Ok(argmax_rows(z.view()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(err) if err.is_validation() => 2,
        Some(err) if err.is_non_convergence() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.strict_deterministic {
        Some(1)
    } else {
        cli.threads
    };
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Prep(a) => prep(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Cas(a) => cas(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
