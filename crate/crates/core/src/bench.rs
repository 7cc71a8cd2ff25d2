//! End-to-end runs: features, base model, Correct and Smooth, evaluation, and the
//! benchmark table that aggregates runs over split seeds.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correct_smooth::{
    grid_search, run_stages, LabelSource, PipelineConfig, PipelineMode, SearchSpace, StageOutputs,
    Variant,
};
use crate::data::{make_split, Dataset, Split};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, argmax_rows};
use crate::model::{self, TrainConfig};
use crate::spectral::{
    augment_features, cached_top_eigs, top_eigs, EigenConfig, FeatureMode, FeatureScaling,
    RegularizedOperator, SpectralEmbedding, DEFAULT_EMBEDDING_DIM,
};
use crate::ProbMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The base predictor families of the benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    /// Linear model on raw features only.
    PlainLinear,
    /// Linear model on raw features plus the spectral embedding.
    Linear,
    /// 3-layer, 64-channel MLP on raw features plus the spectral embedding.
    Mlp,
    /// 5-layer, 256-channel MLP (lr 0.005) on raw features plus the spectral embedding.
    MlpWide,
}

impl BaseKind {
    pub fn train_config(self, seed: u64) -> TrainConfig {
        match self {
            BaseKind::PlainLinear | BaseKind::Linear => TrainConfig::linear(seed),
            BaseKind::Mlp => TrainConfig::mlp(seed),
            BaseKind::MlpWide => TrainConfig::mlp_wide(seed),
        }
    }

    /// Spectral-only when the dataset has no raw features.
    pub fn feature_mode(self, has_raw: bool) -> FeatureMode {
        match (self, has_raw) {
            (BaseKind::PlainLinear, _) => FeatureMode::RawOnly,
            (_, true) => FeatureMode::Concat,
            (_, false) => FeatureMode::SpectralOnly,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BaseKind::PlainLinear => "Plain Linear",
            BaseKind::Linear => "Linear",
            BaseKind::Mlp => "MLP",
            BaseKind::MlpWide => "MLP (wide)",
        }
    }
}

impl std::str::FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "plain-linear" | "plain_linear" => BaseKind::PlainLinear,
            "linear" => BaseKind::Linear,
            "mlp" => BaseKind::Mlp,
            "mlp-wide" | "mlp_wide" => BaseKind::MlpWide,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown base model {other:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub embedding_dim: usize,
    /// Regularization of the spectral operator; `None` uses the average degree.
    pub tau: Option<f64>,
    pub scaling: FeatureScaling,
    pub eigen_seed: u64,
    /// Where embeddings are cached between runs (not part of the config hash).
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            tau: None,
            scaling: FeatureScaling::RawNonBinary,
            eigen_seed: 0,
            cache_dir: None,
        }
    }
}

/// Base-model input for `mode`, plus the time spent building it.
pub fn build_features(
    dataset: &Dataset,
    mode: FeatureMode,
    cfg: &FeatureConfig,
) -> Result<(Array2<f64>, f64)> {
    let start = Instant::now();
    let emb = match mode {
        FeatureMode::RawOnly => None,
        FeatureMode::SpectralOnly | FeatureMode::Concat => Some(spectral_embedding(dataset, cfg)?),
    };
    let raw = dataset.features.as_ref().map(|x| x.view());
    let x = augment_features(raw, emb.as_ref(), mode, cfg.scaling)?;
    Ok((x, start.elapsed().as_secs_f64()))
}

pub fn spectral_embedding(dataset: &Dataset, cfg: &FeatureConfig) -> Result<SpectralEmbedding> {
    let op = RegularizedOperator::new(&dataset.graph, cfg.tau)?;
    let eig = EigenConfig::new(cfg.embedding_dim.min(dataset.num_nodes()), cfg.eigen_seed);
    match &cfg.cache_dir {
        Some(dir) => cached_top_eigs(&op, &eig, dir),
        None => top_eigs(&op, &eig),
    }
}

/// Everything that determines a run except the split seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `None` for label propagation alone.
    pub base: Option<BaseKind>,
    pub train: Option<TrainConfig>,
    pub features: FeatureConfig,
    pub pipeline: PipelineConfig,
    /// Validation grid; `None` uses `pipeline` as given.
    pub search: Option<SearchSpace>,
    pub fractions: (f64, f64, f64),
}

impl ExperimentConfig {
    /// Defaults for a base family and post-processing mode, with the standard grid search.
    pub fn new(base: Option<BaseKind>, mode: PipelineMode, variant: Variant) -> Self {
        let mut pipeline = PipelineConfig {
            mode,
            ..Default::default()
        };
        pipeline.correction.variant = variant;
        Self {
            base,
            train: base.map(|b| b.train_config(0)),
            features: FeatureConfig::default(),
            pipeline,
            search: Some(SearchSpace::default()),
            fractions: (0.6, 0.2, 0.2),
        }
    }

    pub fn lp_only() -> Self {
        Self::new(None, PipelineMode::LpOnly, Variant::None)
    }

    pub fn with_label_source(mut self, source: LabelSource) -> Self {
        self.pipeline.smooth.label_source = source;
        self
    }

    pub fn with_fractions(mut self, fractions: (f64, f64, f64)) -> Self {
        self.fractions = fractions;
        self
    }

    /// Stable hash of the dataset identity and this configuration.
    pub fn hash(&self, dataset: &Dataset) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(dataset.name.as_bytes());
        h.update(dataset.graph.content_hash().as_bytes());
        h.update(json.as_bytes());
        let digest = h.finalize();
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Base predictions for one split.
#[derive(Debug, Clone)]
pub struct BaseRun {
    pub z: ProbMatrix,
    pub parameters: usize,
    pub best_epoch: Option<usize>,
    pub seconds: f64,
}

/// Trains the base model on `split` (test labels are never passed in).
pub fn train_base(
    dataset: &Dataset,
    features: ArrayView2<'_, f64>,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<BaseRun> {
    let start = Instant::now();
    let train = Split::pairs(&split.train, &dataset.labels)?;
    let valid = Split::pairs(&split.valid, &dataset.labels)?;
    let out = model::train(features, &train, &valid, dataset.num_classes, cfg)?;
    let z = out.model.predict_proba(features)?;
    Ok(BaseRun {
        z,
        parameters: out.model.count_parameters(),
        best_epoch: Some(out.best_epoch),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageAccuracy {
    pub base: Option<f64>,
    pub corrected: Option<f64>,
    #[serde(rename = "final")]
    pub final_: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub features: f64,
    pub train: f64,
    pub search: f64,
    pub correct: f64,
    pub smooth: f64,
    pub total: f64,
}

/// One run: configuration echo, per-stage test accuracies, timings, and propagation traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub dataset: String,
    pub graph_hash: String,
    pub config_hash: String,
    pub version: String,
    pub seed: Option<u64>,
    pub experiment: ExperimentConfig,
    /// Configuration actually applied after the validation search.
    pub chosen: PipelineConfig,
    pub test_accuracy: StageAccuracy,
    pub valid_accuracy: f64,
    pub parameters: usize,
    pub best_epoch: Option<usize>,
    pub sigma: Option<f64>,
    pub correct_iterations: Option<usize>,
    pub smooth_iterations: Option<usize>,
    pub converged: bool,
    pub timings: StageTimings,
}

/// Run record kept for every reported number.
pub type RunManifest = PipelineReport;

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub outputs: StageOutputs,
}

impl PipelineRun {
    /// Per-node CSV: node, true label, base, corrected and final argmax (blank when absent).
    pub fn per_node_csv(&self, labels: &[Option<usize>]) -> String {
        let base = self.outputs.base.as_ref().map(|z| argmax_rows(z.view()));
        let corrected = self
            .outputs
            .corrected
            .as_ref()
            .map(|z| argmax_rows(z.view()));
        let fin = self.outputs.final_labels();
        let cell = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("node,true,base,corrected,final\n");
        for (i, &f) in fin.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{},{},{f}",
                cell(labels[i]),
                cell(base.as_ref().map(|b| b[i])),
                cell(corrected.as_ref().map(|c| c[i]))
            );
        }
        s
    }
}

/// Post-processing and evaluation on top of an optional base run.
pub fn post_process(
    dataset: &Dataset,
    base: Option<&BaseRun>,
    split: &Split,
    cfg: &ExperimentConfig,
) -> Result<PipelineRun> {
    let start = Instant::now();
    let z = base.map(|b| b.z.view());
    // Only train and validation labels reach the search and the stages.
    let known = split.mask_labels(&dataset.labels);
    let search_start = Instant::now();
    let (chosen, _) = match &cfg.search {
        Some(space) => {
            let out = grid_search(
                &dataset.graph,
                z,
                &known,
                split,
                dataset.num_classes,
                &cfg.pipeline,
                space,
            )?;
            (out.best, Some(out.valid_accuracy))
        }
        None => (cfg.pipeline, None),
    };
    let search_seconds = search_start.elapsed().as_secs_f64();
    let outputs = run_stages(
        &dataset.graph,
        z,
        &known,
        split,
        dataset.num_classes,
        &chosen,
    )?;

    let labels = &dataset.labels;
    let acc = |m: &ProbMatrix| accuracy(&argmax_rows(m.view()), labels, &split.test);
    let final_labels = outputs.final_labels();
    let test_accuracy = StageAccuracy {
        base: outputs.base.as_ref().map(acc).transpose()?,
        corrected: outputs.corrected.as_ref().map(acc).transpose()?,
        final_: accuracy(&final_labels, labels, &split.test)?,
    };
    let valid_accuracy = accuracy(&final_labels, &known, &split.valid)?;
    let timings = StageTimings {
        features: 0.0,
        train: base.map_or(0.0, |b| b.seconds),
        search: search_seconds,
        correct: outputs.correct_seconds,
        smooth: outputs.smooth_seconds,
        total: start.elapsed().as_secs_f64() + base.map_or(0.0, |b| b.seconds),
    };
    let report = PipelineReport {
        dataset: dataset.name.clone(),
        graph_hash: dataset.graph.content_hash(),
        config_hash: cfg.hash(dataset),
        version: VERSION.to_string(),
        seed: split.seed,
        experiment: cfg.clone(),
        chosen,
        test_accuracy,
        valid_accuracy,
        parameters: base.map_or(0, |b| b.parameters),
        best_epoch: base.and_then(|b| b.best_epoch),
        sigma: outputs.sigma,
        correct_iterations: outputs.correct_iterations,
        smooth_iterations: outputs.smooth_iterations,
        converged: outputs.converged(),
        timings,
    };
    Ok(PipelineRun { report, outputs })
}

/// Full pipeline for one split: features (if given, otherwise built), base model, post
/// processing, evaluation. The base model's seed is the split seed when the split has one.
pub fn run_pipeline(
    dataset: &Dataset,
    features: Option<ArrayView2<'_, f64>>,
    split: &Split,
    cfg: &ExperimentConfig,
) -> Result<PipelineRun> {
    let mut feature_seconds = 0.0;
    let base = if cfg.pipeline.mode.needs_base() {
        let kind = cfg
            .base
            .ok_or_else(|| Error::InvalidConfig("mode needs a base model".into()))?;
        let mut train_cfg = cfg.train.clone().unwrap_or_else(|| kind.train_config(0));
        if let Some(seed) = split.seed {
            train_cfg.seed = seed;
        }
        let owned;
        let x = match features {
            Some(x) => x,
            None => {
                let mode = kind.feature_mode(dataset.features.is_some());
                let (x, secs) = build_features(dataset, mode, &cfg.features)?;
                feature_seconds = secs;
                owned = x;
                owned.view()
            }
        };
        Some(train_base(dataset, x, split, &train_cfg)?)
    } else {
        None
    };
    let mut run = post_process(dataset, base.as_ref(), split, cfg)?;
    run.report.timings.features = feature_seconds;
    run.report.timings.total += feature_seconds;
    Ok(run)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// CPU model and worker-thread count, for timing context.
pub fn hardware_string() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    format!("{cpu} / {} threads", rayon::current_num_threads())
}

/// Accuracy summary of one configuration over several split seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub reports: Vec<PipelineReport>,
    pub final_mean: f64,
    pub final_std: f64,
    pub base_mean: Option<f64>,
    pub corrected_mean: Option<f64>,
    /// Median over repetitions of the summed per-seed wall-clock time.
    pub seconds: f64,
}

/// Trained base runs keyed by dataset, base-model configuration, features, fractions and
/// split seed. Experiments that differ only in post-processing reuse the same base model;
/// training is deterministic, so this changes nothing but the amount of work.
#[derive(Debug, Default)]
pub struct BaseCache {
    /// Base run plus the feature-construction time it was trained after.
    runs: HashMap<(String, u64), (BaseRun, f64)>,
}

impl BaseCache {
    fn key(dataset: &Dataset, cfg: &ExperimentConfig, seed: u64) -> Option<(String, u64)> {
        let base = cfg.base.filter(|_| cfg.pipeline.mode.needs_base())?;
        let identity = serde_json::json!({
            "dataset": dataset.name,
            "graph": dataset.graph.content_hash(),
            "base": base,
            "train": cfg.train,
            "features": cfg.features,
            "fractions": cfg.fractions,
        });
        Some((identity.to_string(), seed))
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Runs `cfg` on every seed (features built once) and aggregates test accuracy in percent.
/// Accuracies come from the first of `reps` repetitions (runs are deterministic); timing is
/// the median over repetitions of the summed per-seed end-to-end time. Base models found in
/// `cache` are reused, and their recorded training time still counts toward the run time.
pub fn run_seeds(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    reps: usize,
    mut cache: Option<&mut BaseCache>,
) -> Result<SeedSummary> {
    let eligible = dataset.labeled_nodes();
    let base_kind = cfg.base.filter(|_| cfg.pipeline.mode.needs_base());
    let mut features = None;
    let mut feature_seconds = 0.0;
    let mut times = Vec::new();
    let mut reports = Vec::new();
    for rep in 0..reps.max(1) {
        let mut total = 0.0;
        for &seed in seeds {
            let split = make_split(&eligible, cfg.fractions, seed)?;
            let key = BaseCache::key(dataset, cfg, seed);
            let cached = match (&key, cache.as_deref_mut()) {
                (Some(k), Some(c)) if rep == 0 => c.runs.get(k).cloned(),
                _ => None,
            };
            let base = match (base_kind, cached) {
                (None, _) => None,
                (Some(_), Some((run, secs))) => {
                    feature_seconds = secs;
                    Some(run)
                }
                (Some(kind), None) => {
                    if features.is_none() {
                        let mode = kind.feature_mode(dataset.features.is_some());
                        let (x, secs) = build_features(dataset, mode, &cfg.features)?;
                        features = Some(x);
                        feature_seconds = secs;
                    }
                    let mut train_cfg = cfg.train.clone().unwrap_or_else(|| kind.train_config(0));
                    train_cfg.seed = seed;
                    let x = features.as_ref().expect("built above");
                    let run = train_base(dataset, x.view(), &split, &train_cfg)?;
                    if let (Some(k), Some(c)) = (&key, cache.as_deref_mut()) {
                        c.runs.insert(k.clone(), (run.clone(), feature_seconds));
                    }
                    Some(run)
                }
            };
            let run = post_process(dataset, base.as_ref(), &split, cfg)?;
            total += run.report.timings.total;
            if rep == 0 {
                reports.push(run.report);
            }
        }
        times.push(total);
    }
    // Feature construction is shared by all seeds; charge it once per repetition.
    for t in &mut times {
        *t += feature_seconds;
    }
    for r in &mut reports {
        r.timings.features = feature_seconds;
    }
    let pct = |f: &dyn Fn(&PipelineReport) -> Option<f64>| -> Option<Vec<f64>> {
        reports.iter().map(|r| f(r).map(|a| 100.0 * a)).collect()
    };
    let finals = pct(&|r| Some(r.test_accuracy.final_)).expect("final accuracy present");
    let (final_mean, final_std) = mean_std(&finals);
    Ok(SeedSummary {
        final_mean,
        final_std,
        base_mean: pct(&|r| r.test_accuracy.base).map(|v| mean_std(&v).0),
        corrected_mean: pct(&|r| r.test_accuracy.corrected).map(|v| mean_std(&v).0),
        seconds: median(&mut times),
        reports,
    })
}

/// What to put in the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub bases: Vec<BaseKind>,
    pub variants: Vec<Variant>,
    pub label_sources: Vec<LabelSource>,
    pub include_lp: bool,
    pub include_base_only: bool,
    pub seeds: Vec<u64>,
    pub reps: usize,
    pub fractions: (f64, f64, f64),
    pub features: FeatureConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            bases: vec![BaseKind::PlainLinear, BaseKind::Linear, BaseKind::Mlp],
            variants: vec![Variant::Autoscale, Variant::FdiffScale],
            label_sources: vec![LabelSource::TrainOnly, LabelSource::TrainPlusVal],
            include_lp: true,
            include_base_only: true,
            seeds: (0..5).collect(),
            reps: 3,
            fractions: (0.6, 0.2, 0.2),
            features: FeatureConfig::default(),
        }
    }
}

impl BenchSpec {
    /// Every experiment in table order; bases that need raw features are skipped when the
    /// dataset has none.
    pub fn experiments(&self, dataset: &Dataset) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        let finish = |mut c: ExperimentConfig| {
            c.fractions = self.fractions;
            c.features = self.features.clone();
            c
        };
        if self.include_lp {
            for &ls in &self.label_sources {
                out.push(finish(ExperimentConfig::lp_only().with_label_source(ls)));
            }
        }
        for &b in &self.bases {
            if b == BaseKind::PlainLinear && dataset.features.is_none() {
                continue;
            }
            if self.include_base_only {
                out.push(finish(ExperimentConfig::new(
                    Some(b),
                    PipelineMode::BaseOnly,
                    Variant::None,
                )));
            }
            for &v in &self.variants {
                for &ls in &self.label_sources {
                    out.push(finish(
                        ExperimentConfig::new(Some(b), PipelineMode::Full, v).with_label_source(ls),
                    ));
                }
            }
        }
        out
    }
}

pub const BENCH_HEADER: [&str; 15] = [
    "config_hash",
    "dataset",
    "base_model",
    "mode",
    "variant",
    "label_source",
    "seeds",
    "accuracy_mean",
    "accuracy_std",
    "base_accuracy_mean",
    "corrected_accuracy_mean",
    "parameters",
    "time_median_s",
    "hardware",
    "version",
];

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn bench_row(dataset: &Dataset, cfg: &ExperimentConfig, s: &SeedSummary) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    vec![
        cfg.hash(dataset),
        dataset.name.clone(),
        cfg.base.map_or("LP", BaseKind::label).to_string(),
        cfg.pipeline.mode.to_string(),
        enum_name(&cfg.pipeline.correction.variant),
        enum_name(&cfg.pipeline.smooth.label_source),
        s.reports.len().to_string(),
        format!("{:.2}", s.final_mean),
        format!("{:.2}", s.final_std),
        opt(s.base_mean),
        opt(s.corrected_mean),
        s.reports.first().map_or(0, |r| r.parameters).to_string(),
        format!("{:.3}", s.seconds),
        hardware_string(),
        VERSION.to_string(),
    ]
}

/// Runs every experiment of `spec` on each dataset and merges each row into the CSV at
/// `out` as soon as it is ready: rows whose config hash already exists are replaced in
/// place, new rows appended. `on_row` sees every row as it is written. Returns the rows
/// produced by this call.
pub fn bench_table<F>(
    datasets: &[Dataset],
    spec: &BenchSpec,
    out: &Path,
    mut on_row: F,
) -> Result<Vec<Vec<String>>>
where
    F: FnMut(&[String]),
{
    let mut rows = Vec::new();
    for d in datasets {
        let mut cache = BaseCache::default();
        for cfg in spec.experiments(d) {
            let summary = run_seeds(d, &cfg, &spec.seeds, spec.reps, Some(&mut cache))?;
            let row = bench_row(d, &cfg, &summary);
            merge_rows(out, std::slice::from_ref(&row))?;
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Merges rows keyed by their first column into a CSV file, writing atomically.
pub fn merge_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut table: Vec<Vec<String>> = Vec::new();
    if path.exists() {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != BENCH_HEADER {
            return Err(Error::Format(format!(
                "{}: existing table has a different header",
                path.display()
            )));
        }
        for rec in r.records() {
            table.push(rec?.iter().map(str::to_string).collect());
        }
    }
    let mut index: BTreeMap<String, usize> = table
        .iter()
        .enumerate()
        .map(|(i, r)| (r[0].clone(), i))
        .collect();
    for row in rows {
        match index.get(&row[0]) {
            Some(&i) => table[i] = row.clone(),
            None => {
                index.insert(row[0].clone(), table.len());
                table.push(row.clone());
            }
        }
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(BENCH_HEADER)?;
        for r in &table {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
