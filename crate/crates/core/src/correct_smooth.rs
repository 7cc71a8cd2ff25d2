//! The two post-processing stages on top of a base prediction `Z`.
//!
//! *Correct* spreads the training residual `E = Z - Y` over the graph and removes the
//! propagated error from `Z`, either rescaled row by row to the mean training error
//! (Autoscale) or by a global factor after fixed-boundary diffusion (FDiff-scale).
//! *Smooth* resets known rows to their true labels and label-spreads the result.
//!
//! Labels are passed as `&[Option<usize>]`; only train rows (and validation rows when asked to)
//! are ever read, so the contents of test rows cannot influence any output.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{Error, Result};
use crate::graph::{GraphOperator, OperatorKind, SparseGraph};
use crate::metrics::{argmax_rows, hits};
use crate::propagation::{fixed_diffusion, label_spread, Propagated, SpreadParams};
use crate::ProbMatrix;

pub const DEFAULT_EPSILON_ROW: f64 = 1e-9;
pub const ALPHA_GRID: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
pub const SCALE_GRID: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Autoscale,
    FdiffScale,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConfig {
    pub variant: Variant,
    pub alpha_correct: f64,
    /// Global correction scale for FDiff-scale.
    pub s: f64,
    pub epsilon_row: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        let p = SpreadParams::default();
        Self {
            variant: Variant::Autoscale,
            alpha_correct: 0.9,
            s: 1.0,
            epsilon_row: DEFAULT_EPSILON_ROW,
            max_iters: p.max_iters,
            tol: p.tol,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scale s must be positive, got {}",
                self.s
            )));
        }
        if self.epsilon_row.is_nan() || self.epsilon_row <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon_row must be positive, got {}",
                self.epsilon_row
            )));
        }
        self.spread_params().validate()
    }

    fn spread_params(&self) -> SpreadParams {
        SpreadParams {
            alpha: self.alpha_correct,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    TrainOnly,
    TrainPlusVal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothMode {
    /// Smooth the guess built from corrected predictions and true labels.
    Standard,
    /// Smooth the base prediction directly.
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothConfig {
    pub alpha_smooth: f64,
    pub label_source: LabelSource,
    pub mode: SmoothMode,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        let p = SpreadParams::default();
        Self {
            alpha_smooth: 0.8,
            label_source: LabelSource::TrainOnly,
            mode: SmoothMode::Standard,
            max_iters: p.max_iters,
            tol: p.tol,
        }
    }
}

impl SmoothConfig {
    fn spread_params(&self) -> SpreadParams {
        SpreadParams {
            alpha: self.alpha_smooth,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

fn one_hot_row(classes: usize, c: usize) -> impl Iterator<Item = f64> {
    (0..classes).map(move |j| if j == c { 1.0 } else { 0.0 })
}

fn label_of(labels: &[Option<usize>], i: usize, classes: usize) -> Result<usize> {
    match labels.get(i).copied().flatten() {
        Some(c) if c < classes => Ok(c),
        Some(c) => Err(Error::UnknownClass {
            node: i,
            label: c as i64,
            classes,
        }),
        None => Err(Error::InvalidConfig(format!(
            "labeled-set node {i} has no label"
        ))),
    }
}

fn check_rows(z: ArrayView2<'_, f64>, labels: &[Option<usize>]) -> Result<()> {
    if labels.len() != z.nrows() {
        return Err(Error::DimensionMismatch {
            context: "label vector length",
            expected: z.nrows(),
            found: labels.len(),
        });
    }
    Ok(())
}

/// `E[i] = Z[i] - onehot(y_i)` for training nodes, exactly zero elsewhere.
pub fn residual_error(
    z: ArrayView2<'_, f64>,
    labels: &[Option<usize>],
    train: &[usize],
) -> Result<ProbMatrix> {
    check_rows(z, labels)?;
    let classes = z.ncols();
    let mut e = Array2::zeros(z.dim());
    for &i in train {
        let c = label_of(labels, i, classes)?;
        let mut row = e.row_mut(i);
        row.assign(&z.row(i));
        row[c] -= 1.0;
    }
    Ok(e)
}

/// Mean L1 norm of the residual rows over the training nodes.
pub fn autoscale_sigma(e: ArrayView2<'_, f64>, train: &[usize]) -> f64 {
    if train.is_empty() {
        return 0.0;
    }
    let total: f64 = train
        .iter()
        .map(|&i| e.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    total / train.len() as f64
}

/// Outcome of the Correct stage.
#[derive(Debug, Clone)]
pub struct Corrected {
    pub values: ProbMatrix,
    /// The propagated residual `Ê`.
    pub propagated: Propagated,
    /// Mean training error (Autoscale only).
    pub sigma: Option<f64>,
}

/// Autoscale: `Ê` = label spreading of `E`; every non-training row with `‖Ê[i]‖₁ > ε_row`
/// becomes `Z[i] - σ Ê[i] / ‖Ê[i]‖₁`, rows under the guard keep `Z[i]`, and training rows
/// become `Z[i] - Ê[i]`.
pub fn correct_autoscale(
    z: ArrayView2<'_, f64>,
    e: ArrayView2<'_, f64>,
    train: &[usize],
    op: &GraphOperator<'_>,
    cfg: &CorrectionConfig,
) -> Result<Corrected> {
    cfg.validate()?;
    let sigma = autoscale_sigma(e, train);
    let propagated = label_spread(op, e, &cfg.spread_params())?;
    let mut is_train = vec![false; z.nrows()];
    for &i in train {
        is_train[i] = true;
    }
    let mut values = z.to_owned();
    Zip::indexed(values.axis_iter_mut(Axis(0)))
        .and(propagated.values.axis_iter(Axis(0)))
        .par_for_each(|i, mut out, err| {
            if is_train[i] {
                out -= &err;
                return;
            }
            let norm: f64 = err.iter().map(|v| v.abs()).sum();
            if norm > cfg.epsilon_row {
                out.scaled_add(-sigma / norm, &err);
            }
        });
    Ok(Corrected {
        values,
        propagated,
        sigma: Some(sigma),
    })
}

/// FDiff-scale: `Ê` = fixed-boundary diffusion of `E` with all labeled rows (`fixed`, train
/// and validation) pinned, then `Z_r = Z - s Ê`.
pub fn correct_fdiff(
    z: ArrayView2<'_, f64>,
    e: ArrayView2<'_, f64>,
    fixed: &[usize],
    op: &GraphOperator<'_>,
    cfg: &CorrectionConfig,
) -> Result<Corrected> {
    cfg.validate()?;
    let params = SpreadParams {
        alpha: 0.0,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
    };
    let propagated = fixed_diffusion(op, e, fixed, &params)?;
    let values = apply_scale(z, propagated.values.view(), cfg.s);
    Ok(Corrected {
        values,
        propagated,
        sigma: None,
    })
}

fn apply_scale(z: ArrayView2<'_, f64>, e_hat: ArrayView2<'_, f64>, s: f64) -> ProbMatrix {
    let mut out = z.to_owned();
    out.scaled_add(-s, &e_hat);
    out
}

/// Guess matrix: training rows (and validation rows for `TrainPlusVal`) are one-hot truth,
/// all other rows are copied from `z_r`.
pub fn make_guess(
    z_r: ArrayView2<'_, f64>,
    labels: &[Option<usize>],
    split: &Split,
    source: LabelSource,
) -> Result<ProbMatrix> {
    check_rows(z_r, labels)?;
    let classes = z_r.ncols();
    let mut g = z_r.to_owned();
    let reset: &[&[usize]] = match source {
        LabelSource::TrainOnly => &[&split.train],
        LabelSource::TrainPlusVal => &[&split.train, &split.valid],
    };
    for part in reset {
        for &i in *part {
            let c = label_of(labels, i, classes)?;
            for (dst, v) in g.row_mut(i).iter_mut().zip(one_hot_row(classes, c)) {
                *dst = v;
            }
        }
    }
    Ok(g)
}

/// One-hot known labels, zero rows elsewhere (the label-propagation-only input).
pub fn label_guess(
    n: usize,
    classes: usize,
    labels: &[Option<usize>],
    split: &Split,
    source: LabelSource,
) -> Result<ProbMatrix> {
    make_guess(Array2::zeros((n, classes)).view(), labels, split, source)
}

/// Label-spreads the guess with `α_smooth`. Rows are score vectors, not renormalized.
pub fn smooth(
    g: ArrayView2<'_, f64>,
    op: &GraphOperator<'_>,
    cfg: &SmoothConfig,
) -> Result<Propagated> {
    label_spread(op, g, &cfg.spread_params())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Correct, then smooth the guess.
    Full,
    /// Correct only; predictions are argmax of `Z_r`.
    CorrectOnly,
    /// Smooth the base prediction directly.
    Basic,
    /// Spread one-hot labels; no base model.
    LpOnly,
    /// Base predictions unchanged.
    BaseOnly,
}

impl PipelineMode {
    pub fn needs_base(self) -> bool {
        self != PipelineMode::LpOnly
    }

    pub fn uses_correct(self) -> bool {
        matches!(self, PipelineMode::Full | PipelineMode::CorrectOnly)
    }

    pub fn uses_smooth(self) -> bool {
        matches!(
            self,
            PipelineMode::Full | PipelineMode::Basic | PipelineMode::LpOnly
        )
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => PipelineMode::Full,
            "correct-only" | "correct_only" => PipelineMode::CorrectOnly,
            "basic" => PipelineMode::Basic,
            "lp-only" | "lp_only" => PipelineMode::LpOnly,
            "base-only" | "base_only" => PipelineMode::BaseOnly,
            other => return Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        })
    }
}

impl std::fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PipelineMode::Full => "full",
            PipelineMode::CorrectOnly => "correct_only",
            PipelineMode::Basic => "basic",
            PipelineMode::LpOnly => "lp_only",
            PipelineMode::BaseOnly => "base_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub correction: CorrectionConfig,
    pub smooth: SmoothConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::Full,
            correction: CorrectionConfig::default(),
            smooth: SmoothConfig::default(),
        }
    }
}

/// Everything the post-processing stages produced for one configuration.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub config: PipelineConfig,
    pub base: Option<ProbMatrix>,
    pub corrected: Option<ProbMatrix>,
    pub final_scores: ProbMatrix,
    pub sigma: Option<f64>,
    pub correct_iterations: Option<usize>,
    pub correct_converged: Option<bool>,
    pub smooth_iterations: Option<usize>,
    pub smooth_converged: Option<bool>,
    pub correct_seconds: f64,
    pub smooth_seconds: f64,
}

impl StageOutputs {
    pub fn final_labels(&self) -> Vec<usize> {
        argmax_rows(self.final_scores.view())
    }

    /// True when every propagation that ran met its tolerance.
    pub fn converged(&self) -> bool {
        self.correct_converged.unwrap_or(true) && self.smooth_converged.unwrap_or(true)
    }

    /// Fails with a non-convergence error if any propagation exhausted its budget.
    pub fn require_converged(&self) -> Result<()> {
        for (stage, iters, conv, tol) in [
            (
                "correct",
                self.correct_iterations,
                self.correct_converged,
                self.config.correction.tol,
            ),
            (
                "smooth",
                self.smooth_iterations,
                self.smooth_converged,
                self.config.smooth.tol,
            ),
        ] {
            if conv == Some(false) {
                return Err(Error::NotConverged {
                    stage,
                    iterations: iters.unwrap_or(0),
                    delta: tol,
                });
            }
        }
        Ok(())
    }
}

/// Runs the post-processing stages selected by `cfg.mode` on base prediction `z`
/// (ignored for `LpOnly`, required otherwise).
pub fn run_stages(
    graph: &SparseGraph,
    z: Option<ArrayView2<'_, f64>>,
    labels: &[Option<usize>],
    split: &Split,
    classes: usize,
    cfg: &PipelineConfig,
) -> Result<StageOutputs> {
    let n = graph.num_nodes();
    split.validate(n)?;
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "label vector length",
            expected: n,
            found: labels.len(),
        });
    }
    let sym = GraphOperator::new(graph, OperatorKind::SymNorm);
    let z = match (cfg.mode.needs_base(), z) {
        (true, Some(z)) => {
            if z.dim() != (n, classes) {
                return Err(Error::DimensionMismatch {
                    context: "base prediction shape",
                    expected: n * classes,
                    found: z.len(),
                });
            }
            Some(z)
        }
        (true, None) => {
            return Err(Error::InvalidConfig(format!(
                "mode {} needs a base prediction",
                cfg.mode
            )))
        }
        (false, _) => None,
    };

    let mut out = StageOutputs {
        config: *cfg,
        base: z.map(|z| z.to_owned()),
        corrected: None,
        final_scores: Array2::zeros((0, 0)),
        sigma: None,
        correct_iterations: None,
        correct_converged: None,
        smooth_iterations: None,
        smooth_converged: None,
        correct_seconds: 0.0,
        smooth_seconds: 0.0,
    };

    let start = Instant::now();
    let corrected = if cfg.mode.uses_correct() {
        let z = z.expect("checked above");
        let c = correct(graph, &sym, z, labels, split, &cfg.correction)?;
        out.sigma = c.sigma;
        out.correct_iterations = Some(c.propagated.iterations);
        out.correct_converged = Some(c.propagated.converged);
        Some(c.values)
    } else {
        None
    };
    out.correct_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let final_scores = match cfg.mode {
        PipelineMode::BaseOnly => z.expect("checked above").to_owned(),
        PipelineMode::CorrectOnly => corrected.clone().expect("correct ran"),
        PipelineMode::Full | PipelineMode::Basic | PipelineMode::LpOnly => {
            let g = match cfg.mode {
                PipelineMode::Full => make_guess(
                    corrected.as_ref().expect("correct ran").view(),
                    labels,
                    split,
                    cfg.smooth.label_source,
                )?,
                PipelineMode::Basic => match cfg.smooth.mode {
                    SmoothMode::Basic => z.expect("checked above").to_owned(),
                    SmoothMode::Standard => make_guess(
                        z.expect("checked above"),
                        labels,
                        split,
                        cfg.smooth.label_source,
                    )?,
                },
                _ => label_guess(n, classes, labels, split, cfg.smooth.label_source)?,
            };
            let s = smooth(g.view(), &sym, &cfg.smooth)?;
            out.smooth_iterations = Some(s.iterations);
            out.smooth_converged = Some(s.converged);
            s.values
        }
    };
    out.smooth_seconds = start.elapsed().as_secs_f64();
    out.corrected = corrected;
    out.final_scores = final_scores;
    Ok(out)
}

fn correct(
    graph: &SparseGraph,
    sym: &GraphOperator<'_>,
    z: ArrayView2<'_, f64>,
    labels: &[Option<usize>],
    split: &Split,
    cfg: &CorrectionConfig,
) -> Result<Corrected> {
    let e = residual_error(z, labels, &split.train)?;
    match cfg.variant {
        Variant::Autoscale => correct_autoscale(z, e.view(), &split.train, sym, cfg),
        Variant::FdiffScale => {
            let row = GraphOperator::new(graph, OperatorKind::RowStoch);
            correct_fdiff(z, e.view(), &split.labeled(), &row, cfg)
        }
        Variant::None => {
            cfg.validate()?;
            Ok(Corrected {
                values: z.to_owned(),
                propagated: Propagated {
                    values: Array2::zeros(z.dim()),
                    iterations: 0,
                    final_delta: 0.0,
                    converged: true,
                },
                sigma: None,
            })
        }
    }
}

/// Candidate values for the validation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub alpha_correct: Vec<f64>,
    pub alpha_smooth: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            alpha_correct: ALPHA_GRID.to_vec(),
            alpha_smooth: ALPHA_GRID.to_vec(),
            scale: SCALE_GRID.to_vec(),
        }
    }
}

impl SearchSpace {
    pub fn singleton(cfg: &PipelineConfig) -> Self {
        Self {
            alpha_correct: vec![cfg.correction.alpha_correct],
            alpha_smooth: vec![cfg.smooth.alpha_smooth],
            scale: vec![cfg.correction.s],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: PipelineConfig,
    pub valid_accuracy: f64,
    /// Every evaluated configuration with its validation accuracy, in evaluation order.
    pub evaluated: Vec<(PipelineConfig, f64)>,
}

/// Picks the configuration with the best validation accuracy over the grid, varying only the
/// knobs that the mode and variant actually use. Ties go to the smaller `α` (correct stage,
/// then smooth stage) and then the smaller `s`.
///
/// Test labels are masked out before any stage runs. Because validation labels inside the
/// guess would make validation accuracy meaningless, the search always builds guesses from
/// training labels only; the chosen configuration keeps `base.smooth.label_source`.
pub fn grid_search(
    graph: &SparseGraph,
    z: Option<ArrayView2<'_, f64>>,
    labels: &[Option<usize>],
    split: &Split,
    classes: usize,
    base: &PipelineConfig,
    space: &SearchSpace,
) -> Result<SearchOutcome> {
    let masked = split.mask_labels(labels);
    let mode = base.mode;
    let sorted = |v: &[f64], used: bool, default: f64| -> Result<Vec<f64>> {
        if !used {
            return Ok(vec![default]);
        }
        if v.is_empty() {
            return Err(Error::Empty("search grid axis"));
        }
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    };
    let autoscale = mode.uses_correct() && base.correction.variant == Variant::Autoscale;
    let fdiff = mode.uses_correct() && base.correction.variant == Variant::FdiffScale;
    let alphas_c = sorted(
        &space.alpha_correct,
        autoscale,
        base.correction.alpha_correct,
    )?;
    let alphas_s = sorted(
        &space.alpha_smooth,
        mode.uses_smooth(),
        base.smooth.alpha_smooth,
    )?;
    let scales = sorted(&space.scale, fdiff, base.correction.s)?;

    let n = graph.num_nodes();
    split.validate(n)?;
    let sym = GraphOperator::new(graph, OperatorKind::SymNorm);
    let mut search_smooth = base.smooth;
    search_smooth.label_source = LabelSource::TrainOnly;

    // Corrections depend on (α_correct, s) only; compute each once.
    let mut corrections: Vec<(f64, f64, ProbMatrix)> = Vec::new();
    if mode.uses_correct() {
        let z =
            z.ok_or_else(|| Error::InvalidConfig(format!("mode {mode} needs a base prediction")))?;
        let e = residual_error(z, &masked, &split.train)?;
        match base.correction.variant {
            Variant::Autoscale => {
                for &a in &alphas_c {
                    let cfg = CorrectionConfig {
                        alpha_correct: a,
                        ..base.correction
                    };
                    let c = correct_autoscale(z, e.view(), &split.train, &sym, &cfg)?;
                    corrections.push((a, cfg.s, c.values));
                }
            }
            Variant::FdiffScale => {
                let row = GraphOperator::new(graph, OperatorKind::RowStoch);
                let unit = CorrectionConfig {
                    s: 1.0,
                    ..base.correction
                };
                let c = correct_fdiff(z, e.view(), &split.labeled(), &row, &unit)?;
                for &s in &scales {
                    let cfg = CorrectionConfig {
                        s,
                        ..base.correction
                    };
                    cfg.validate()?;
                    corrections.push((
                        base.correction.alpha_correct,
                        s,
                        apply_scale(z, c.propagated.values.view(), s),
                    ));
                }
            }
            Variant::None => corrections.push((
                base.correction.alpha_correct,
                base.correction.s,
                z.to_owned(),
            )),
        }
    } else {
        corrections.push((
            base.correction.alpha_correct,
            base.correction.s,
            Array2::zeros((0, 0)),
        ));
    }

    let mut evaluated: Vec<(PipelineConfig, usize)> = Vec::new();
    for (a_c, s, zr) in &corrections {
        // smooth input for this correction, independent of α_smooth
        let guess = match mode {
            PipelineMode::Full => Some(make_guess(
                zr.view(),
                &masked,
                split,
                LabelSource::TrainOnly,
            )?),
            PipelineMode::Basic => Some(match base.smooth.mode {
                SmoothMode::Basic => z.expect("needs_base").to_owned(),
                SmoothMode::Standard => make_guess(
                    z.expect("needs_base"),
                    &masked,
                    split,
                    LabelSource::TrainOnly,
                )?,
            }),
            PipelineMode::LpOnly => Some(label_guess(
                n,
                classes,
                &masked,
                split,
                LabelSource::TrainOnly,
            )?),
            PipelineMode::CorrectOnly | PipelineMode::BaseOnly => None,
        };
        for &a_s in &alphas_s {
            let scores = match (&guess, mode) {
                (Some(g), _) => {
                    let cfg = SmoothConfig {
                        alpha_smooth: a_s,
                        ..search_smooth
                    };
                    smooth(g.view(), &sym, &cfg)?.values
                }
                (None, PipelineMode::CorrectOnly) => zr.clone(),
                (None, _) => z
                    .ok_or_else(|| {
                        Error::InvalidConfig("base_only needs a base prediction".into())
                    })?
                    .to_owned(),
            };
            let pred = argmax_rows(scores.view());
            let h = hits(&pred, &masked, &split.valid)?;
            let cfg = PipelineConfig {
                mode,
                correction: CorrectionConfig {
                    alpha_correct: *a_c,
                    s: *s,
                    ..base.correction
                },
                smooth: SmoothConfig {
                    alpha_smooth: a_s,
                    ..base.smooth
                },
            };
            evaluated.push((cfg, h));
        }
    }
    // Highest hit count wins; among equals the smallest (α_correct, α_smooth, s).
    let key = |c: &PipelineConfig| {
        (
            c.correction.alpha_correct,
            c.smooth.alpha_smooth,
            c.correction.s,
        )
    };
    let (best, h) = *evaluated
        .iter()
        .min_by(|(a, ha), (b, hb)| {
            hb.cmp(ha).then_with(|| {
                let (ka, kb) = (key(a), key(b));
                ka.0.total_cmp(&kb.0)
                    .then(ka.1.total_cmp(&kb.1))
                    .then(ka.2.total_cmp(&kb.2))
            })
        })
        .expect("grid is non-empty");
    let m = split.valid.len() as f64;
    Ok(SearchOutcome {
        best,
        valid_accuracy: h as f64 / m,
        evaluated: evaluated
            .into_iter()
            .map(|(c, h)| (c, h as f64 / m))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> SparseGraph {
        SparseGraph::from_edges(&[(0, 1), (1, 2)], 3).unwrap()
    }

    fn split3() -> Split {
        Split {
            train: vec![0],
            valid: vec![1],
            test: vec![2],
            seed: None,
        }
    }

    #[test]
    fn residual_direct_subtraction() {
        let z = array![[0.6, 0.4], [0.5, 0.5], [0.2, 0.8]];
        let y = [Some(0), Some(1), Some(1)];
        let e = residual_error(z.view(), &y, &[0]).unwrap();
        assert_eq!(e, array![[-0.4, 0.4], [0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(autoscale_sigma(e.view(), &[0]), 0.8);
    }

    #[test]
    fn perfect_predictions_have_zero_residual() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let e = residual_error(z.view(), &[Some(0), Some(1)], &[0, 1]).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_needs_train_labels() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(residual_error(z.view(), &[None, Some(1)], &[0]).is_err());
    }

    #[test]
    fn zero_error_autoscale_is_identity() {
        let g = path3();
        let op = GraphOperator::new(&g, OperatorKind::SymNorm);
        let z = array![[0.7, 0.3], [0.4, 0.6], [0.1, 0.9]];
        let e = Array2::zeros((3, 2));
        let c =
            correct_autoscale(z.view(), e.view(), &[0], &op, &CorrectionConfig::default()).unwrap();
        assert_eq!(c.sigma, Some(0.0));
        assert_eq!(c.values, z);
    }

    #[test]
    fn autoscale_rows_move_by_sigma() {
        let g = path3();
        let op = GraphOperator::new(&g, OperatorKind::SymNorm);
        let z = array![[0.6, 0.4], [0.5, 0.5], [0.3, 0.7]];
        let y = [Some(0), None, None];
        let e = residual_error(z.view(), &y, &[0]).unwrap();
        let c =
            correct_autoscale(z.view(), e.view(), &[0], &op, &CorrectionConfig::default()).unwrap();
        for i in [1, 2] {
            let moved: f64 = (&c.values.row(i) - &z.row(i)).iter().map(|v| v.abs()).sum();
            assert!((moved - 0.8).abs() < 1e-12, "row {i}: {moved}");
        }
        // training row gets the unscaled correction
        let expect = &z.row(0) - &c.propagated.values.row(0);
        assert_eq!(c.values.row(0), expect);
    }

    #[test]
    fn fdiff_zero_scale_and_all_fixed() {
        let g = path3();
        let op = GraphOperator::new(&g, OperatorKind::RowStoch);
        let z = array![[0.6, 0.4], [0.5, 0.5], [0.3, 0.7]];
        let e = array![[-0.4, 0.4], [0.1, -0.1], [0.0, 0.0]];
        let cfg = CorrectionConfig {
            variant: Variant::FdiffScale,
            s: 2.0,
            ..Default::default()
        };
        let c = correct_fdiff(z.view(), e.view(), &[0, 1, 2], &op, &cfg).unwrap();
        assert_eq!(c.propagated.values, e);
        assert_eq!(c.values, &z - &(&e * 2.0));
        // s = 0 is rejected by validation but the scaling itself annihilates the correction
        assert_eq!(apply_scale(z.view(), e.view(), 0.0), z);
        assert!(CorrectionConfig { s: 0.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn guess_label_sources() {
        let zr = array![[0.6, 0.4], [0.5, 0.5], [0.3, 0.7]];
        let y = [Some(1), Some(0), Some(0)];
        let g = make_guess(zr.view(), &y, &split3(), LabelSource::TrainOnly).unwrap();
        assert_eq!(g, array![[0.0, 1.0], [0.5, 0.5], [0.3, 0.7]]);
        let g = make_guess(zr.view(), &y, &split3(), LabelSource::TrainPlusVal).unwrap();
        assert_eq!(g, array![[0.0, 1.0], [1.0, 0.0], [0.3, 0.7]]);
    }

    #[test]
    fn alpha_zero_smooth_returns_guess() {
        let g = path3();
        let op = GraphOperator::new(&g, OperatorKind::SymNorm);
        let guess = array![[0.0, 1.0], [0.5, 0.5], [0.3, 0.7]];
        let cfg = SmoothConfig {
            alpha_smooth: 0.0,
            ..Default::default()
        };
        assert_eq!(smooth(guess.view(), &op, &cfg).unwrap().values, guess);
    }

    #[test]
    fn modes_parse_and_require_base() {
        assert_eq!(
            "correct-only".parse::<PipelineMode>().unwrap(),
            PipelineMode::CorrectOnly
        );
        assert!("both".parse::<PipelineMode>().is_err());
        let g = path3();
        let cfg = PipelineConfig::default();
        assert!(run_stages(&g, None, &[Some(0), Some(1), Some(0)], &split3(), 2, &cfg).is_err());
        let lp = PipelineConfig {
            mode: PipelineMode::LpOnly,
            ..cfg
        };
        let out = run_stages(&g, None, &[Some(0), Some(1), Some(0)], &split3(), 2, &lp).unwrap();
        assert_eq!(out.final_labels()[0], 0);
        assert!(out.corrected.is_none());
    }

    #[test]
    fn singleton_grid_returns_that_config() {
        let g = path3();
        let z = array![[0.6, 0.4], [0.5, 0.5], [0.3, 0.7]];
        let y = [Some(0), Some(0), Some(1)];
        let cfg = PipelineConfig {
            correction: CorrectionConfig {
                alpha_correct: 0.7,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = grid_search(
            &g,
            Some(z.view()),
            &y,
            &split3(),
            2,
            &cfg,
            &SearchSpace::singleton(&cfg),
        )
        .unwrap();
        assert_eq!(out.best, cfg);
        assert_eq!(out.evaluated.len(), 1);
    }
}
