//! Graph-agnostic base predictors: a multinomial linear classifier and a batch-normalized
//! MLP, trained full-batch with Adam on the training rows and snapshotted at the epoch with
//! the best validation accuracy.

pub mod adam;
pub mod network;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ProbMatrix;
use adam::Adam;
use network::{BatchNorm, Dense, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    /// Number of dense layers (MLP only; at least 2).
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub dropout: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub weight_decay: f64,
}

impl TrainConfig {
    pub fn linear(seed: u64) -> Self {
        Self {
            model_kind: ModelKind::Linear,
            layers: 1,
            hidden: 0,
            lr: 0.01,
            dropout: 0.0,
            epochs: 300,
            batch_size: None,
            seed,
            weight_decay: 5e-4,
        }
    }

    /// Small-graph MLP: 3 layers, 64 hidden channels, lr 0.01, dropout 0.5.
    pub fn mlp(seed: u64) -> Self {
        Self {
            model_kind: ModelKind::Mlp,
            layers: 3,
            hidden: 64,
            lr: 0.01,
            dropout: 0.5,
            epochs: 300,
            batch_size: None,
            seed,
            weight_decay: 5e-4,
        }
    }

    /// Deeper MLP used for the social/geographic graphs: 5 layers, 256 channels, lr 0.005.
    pub fn mlp_wide(seed: u64) -> Self {
        Self {
            layers: 5,
            hidden: 256,
            lr: 0.005,
            ..Self::mlp(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.model_kind == ModelKind::Mlp {
            if self.layers < 2 {
                return bad(format!("mlp needs at least 2 layers, got {}", self.layers));
            }
            if self.hidden == 0 {
                return bad("mlp needs a positive hidden width".into());
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }

    fn effective_layers(&self) -> usize {
        match self.model_kind {
            ModelKind::Linear => 1,
            ModelKind::Mlp => self.layers,
        }
    }

    fn effective_dropout(&self) -> f64 {
        match self.model_kind {
            ModelKind::Linear => 0.0,
            ModelKind::Mlp => self.dropout,
        }
    }
}

/// A trained (or freshly initialized) base predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    kind: ModelKind,
    net: Network,
}

impl BaseModel {
    pub fn init(cfg: &TrainConfig, features: usize, classes: usize) -> Result<Self> {
        cfg.validate()?;
        if classes == 0 {
            return Err(Error::Empty("class set"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = Network::new(
            features,
            cfg.hidden,
            classes,
            cfg.effective_layers(),
            cfg.effective_dropout(),
            &mut rng,
        );
        Ok(Self {
            kind: cfg.model_kind,
            net,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_features(&self) -> usize {
        self.net.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    /// Trainable scalars, including normalization scale and shift.
    pub fn count_parameters(&self) -> usize {
        self.net.param_count()
    }

    /// Row-stochastic class probabilities in inference mode.
    pub fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Result<ProbMatrix> {
        if features.ncols() != self.num_features() {
            return Err(Error::DimensionMismatch {
                context: "feature columns",
                expected: self.num_features(),
                found: features.ncols(),
            });
        }
        Ok(self.net.predict_proba(features))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[match self.kind {
            ModelKind::Linear => 0u8,
            ModelKind::Mlp => 1u8,
        }])?;
        w.write_all(&self.net.dropout.to_le_bytes())?;
        write_u64(&mut w, self.net.dense.len())?;
        for d in &self.net.dense {
            write_u64(&mut w, d.weight.nrows())?;
            write_u64(&mut w, d.weight.ncols())?;
            write_f64s(&mut w, d.weight.iter())?;
            write_f64s(&mut w, d.bias.iter())?;
        }
        for n in &self.net.norms {
            for v in [&n.gamma, &n.beta, &n.running_mean, &n.running_var] {
                write_f64s(&mut w, v.iter())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let fail = |m: &str| Error::Format(format!("{}: {m}", path.display()));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| fail("truncated header"))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(fail("not a model checkpoint"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(fail(&format!("unsupported checkpoint version {version}")));
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let kind = match byte[0] {
            0 => ModelKind::Linear,
            1 => ModelKind::Mlp,
            k => return Err(fail(&format!("unknown model kind tag {k}"))),
        };
        let dropout = read_f64(&mut r)?;
        let layers = read_u64(&mut r)?;
        if layers == 0 || layers > 1024 {
            return Err(fail(&format!("implausible layer count {layers}")));
        }
        let mut dense = Vec::with_capacity(layers);
        for _ in 0..layers {
            let rows = read_u64(&mut r)?;
            let cols = read_u64(&mut r)?;
            let weight = Array2::from_shape_vec((rows, cols), read_f64s(&mut r, rows * cols)?)
                .map_err(|e| fail(&e.to_string()))?;
            let bias = Array1::from(read_f64s(&mut r, cols)?);
            dense.push(Dense { weight, bias });
        }
        for pair in dense.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(fail("layer shapes do not chain"));
            }
        }
        let mut norms = Vec::with_capacity(layers - 1);
        for d in &dense[..layers - 1] {
            let width = d.weight.ncols();
            let mut next = || read_f64s(&mut r, width).map(Array1::from);
            norms.push(BatchNorm {
                gamma: next()?,
                beta: next()?,
                running_mean: next()?,
                running_var: next()?,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(fail("trailing bytes after parameters"));
        }
        Ok(Self {
            kind,
            net: Network {
                dense,
                norms,
                dropout,
            },
        })
    }
}

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"CNSMODEL";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_u64(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn write_f64s<'a>(w: &mut impl Write, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<usize> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    Ok(u64::from_le_bytes(word) as usize)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    Ok(f64::from_le_bytes(word))
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![
        0u8;
        count
            .checked_mul(8)
            .ok_or(Error::Format("overflow".into()))?
    ];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Reads an externally produced `n x c` prediction matrix so any third-party model's output
/// can be post-processed. Entries must be finite and non-negative.
pub fn import_predictions(path: &Path, n: usize, classes: usize) -> Result<ProbMatrix> {
    let z = crate::io::read_matrix(path)?;
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "prediction rows",
            expected: n,
            found: z.nrows(),
        });
    }
    if z.ncols() != classes {
        return Err(Error::DimensionMismatch {
            context: "prediction columns",
            expected: classes,
            found: z.ncols(),
        });
    }
    if let Some(((i, j), v)) = z
        .indexed_iter()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::Format(format!(
            "{}: entry ({i}, {j}) = {v} is not a finite non-negative score",
            path.display()
        )));
    }
    Ok(z)
}

/// A trained model plus the training trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BaseModel,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_valid_accuracy: f64,
    /// Mean training cross-entropy per epoch, measured before that epoch's update(s).
    pub loss_history: Vec<f64>,
}

/// Trains a base model. Only `(node, class)` pairs for the training and validation sets are
/// supplied, so test labels are unreachable by construction. Gradients use `train` rows only;
/// `valid` is used only to choose the returned epoch snapshot (when it is empty, the last
/// epoch is returned).
pub fn train(
    features: ArrayView2<'_, f64>,
    train: &[(usize, usize)],
    valid: &[(usize, usize)],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let n = features.nrows();
    for &(node, class) in train.iter().chain(valid) {
        if node >= n {
            return Err(Error::NodeOutOfRange { index: node, n });
        }
        if class >= classes {
            return Err(Error::UnknownClass {
                node,
                label: class as i64,
                classes,
            });
        }
    }

    let mut model = BaseModel::init(cfg, features.ncols(), classes)?;
    let train_nodes: Vec<usize> = train.iter().map(|&(v, _)| v).collect();
    let train_targets: Vec<usize> = train.iter().map(|&(_, c)| c).collect();
    let x_train = features.select(Axis(0), &train_nodes);
    let valid_nodes: Vec<usize> = valid.iter().map(|&(v, _)| v).collect();
    let x_valid = features.select(Axis(0), &valid_nodes);

    // Separate stream from initialization so changing dropout does not change initial weights.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut opt = Adam::new(cfg.lr, cfg.weight_decay, &model.net.param_shapes());
    let batch = cfg.batch_size.unwrap_or(train.len()).min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let use_dropout = model.net.dropout > 0.0;

    let mut best: Option<(BaseModel, usize, f64)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if batch < train.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, grads) = if batch == train.len() {
                model.net.loss_and_grad(
                    x_train.view(),
                    &train_targets,
                    use_dropout.then_some(&mut rng),
                    true,
                )
            } else {
                let x = x_train.select(Axis(0), chunk);
                let t: Vec<usize> = chunk.iter().map(|&i| train_targets[i]).collect();
                model
                    .net
                    .loss_and_grad(x.view(), &t, use_dropout.then_some(&mut rng), true)
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, lr: cfg.lr });
            }
            epoch_loss += loss * chunk.len() as f64;
            let grad_tensors = grads.tensors();
            opt.step(model.net.tensors_mut(), grad_tensors);
            if !model.net.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, lr: cfg.lr });
            }
        }
        history.push(epoch_loss / train.len() as f64);

        let acc = if valid.is_empty() {
            0.0
        } else {
            let pred = model.net.logits(x_valid.view());
            let hits = valid
                .iter()
                .enumerate()
                .filter(|(r, &(_, c))| argmax(pred.row(*r)) == c)
                .count();
            hits as f64 / valid.len() as f64
        };
        let improved = match &best {
            None => true,
            Some((_, _, b)) => acc > *b || valid.is_empty(),
        };
        if improved {
            best = Some((model.clone(), epoch, acc));
        }
    }
    let (model, best_epoch, best_valid_accuracy) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_valid_accuracy,
        loss_history: history,
    })
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub parameters_checked: usize,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Denominator floor of the relative error. A central difference at step `h` carries
/// round-off of order `eps * |loss| / h` (~1e-10 here), and biases feeding a normalization
/// layer have an exactly zero gradient, so their numeric value is pure round-off.
const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Checks the cross-entropy gradient of a freshly initialized model (dropout off,
/// normalization in training mode) against central finite differences for every parameter,
/// at steps `GRAD_CHECK_STEP` and `GRAD_CHECK_STEP / 10`. Relative error is
/// `|a - n| / max(|a| + |n|, 1e-5)`.
pub fn grad_check(
    cfg: &TrainConfig,
    features: ArrayView2<'_, f64>,
    targets: &[usize],
    classes: usize,
) -> Result<GradCheck> {
    if features.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "grad_check targets",
            expected: features.nrows(),
            found: targets.len(),
        });
    }
    let mut model = BaseModel::init(cfg, features.ncols(), classes)?;
    model.net.dropout = 0.0;
    Ok(grad_check_model(&mut model.net, features, targets))
}

/// Gradient check on a given network (its dropout setting is ignored).
pub fn grad_check_model(
    net: &mut Network,
    features: ArrayView2<'_, f64>,
    targets: &[usize],
) -> GradCheck {
    let loss_at = |net: &mut Network| {
        net.loss_and_grad::<ChaCha8Rng>(features, targets, None, false)
            .0
    };
    let (_, grads) = net.loss_and_grad::<ChaCha8Rng>(features, targets, None, false);
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut checked = 0;
    for (t, a_tensor) in analytic.iter().enumerate() {
        for (i, &a) in a_tensor.iter().enumerate() {
            let orig = net.tensors_mut()[t][i];
            // A step straddling a ReLU kink is not differentiable there; a genuine gradient
            // error disagrees at both steps, so the better of the two is kept.
            let (abs, rel) = [GRAD_CHECK_STEP, GRAD_CHECK_STEP / 10.0]
                .into_iter()
                .map(|h| {
                    net.tensors_mut()[t][i] = orig + h;
                    let up = loss_at(net);
                    net.tensors_mut()[t][i] = orig - h;
                    let down = loss_at(net);
                    net.tensors_mut()[t][i] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let abs = (a - numeric).abs();
                    (abs, abs / (a.abs() + numeric.abs()).max(GRAD_CHECK_FLOOR))
                })
                .fold((f64::INFINITY, f64::INFINITY), |best, e| {
                    if e.1 < best.1 {
                        e
                    } else {
                        best
                    }
                });
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        parameters_checked: checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> (Array2<f64>, Vec<(usize, usize)>) {
        let x = array![
            [2.0, 1.0],
            [1.5, 2.0],
            [3.0, 0.5],
            [-2.0, -1.0],
            [-1.0, -2.5],
            [-3.0, 0.2]
        ];
        let labels = vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1)];
        (x, labels)
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (x, labels) = toy();
        let cfg = TrainConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..TrainConfig::linear(1)
        };
        let out = train(x.view(), &labels, &labels, 2, &cfg).unwrap();
        let z = out.model.predict_proba(x.view()).unwrap();
        for &(v, c) in &labels {
            assert_eq!(argmax(z.row(v)), c);
        }
        assert_eq!(out.best_valid_accuracy, 1.0);
    }

    #[test]
    fn identical_labels_drive_loss_to_zero() {
        let (x, _) = toy();
        let labels: Vec<_> = (0..6).map(|v| (v, 2)).collect();
        let cfg = TrainConfig {
            lr: 0.5,
            weight_decay: 0.0,
            epochs: 500,
            ..TrainConfig::linear(3)
        };
        let out = train(x.view(), &labels, &[], 3, &cfg).unwrap();
        assert!(*out.loss_history.last().unwrap() < 1e-3);
        let z = out.model.predict_proba(x.view()).unwrap();
        assert!(z.rows().into_iter().all(|r| argmax(r) == 2));
    }

    #[test]
    fn zero_weight_linear_is_uniform() {
        let mut m = BaseModel::init(&TrainConfig::linear(0), 3, 4).unwrap();
        for t in m.network_mut().tensors_mut() {
            t.fill(0.0);
        }
        let z = m.predict_proba(Array2::ones((5, 3)).view()).unwrap();
        assert!(z.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let m = BaseModel::init(&TrainConfig::linear(0), 3, 2).unwrap();
        assert!(matches!(
            m.predict_proba(Array2::zeros((2, 4)).view()),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 4,
                ..
            })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::mlp(0);
        cfg.layers = 1;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::mlp(0);
        cfg.dropout = 1.0;
        assert!(cfg.validate().is_err());
        // linear ignores layer/hidden/dropout settings
        let cfg = TrainConfig {
            layers: 7,
            hidden: 9,
            ..TrainConfig::linear(0)
        };
        let m = BaseModel::init(&cfg, 5, 3).unwrap();
        assert_eq!(m.count_parameters(), 5 * 3 + 3);
    }

    #[test]
    fn parameter_counts() {
        let cfg = TrainConfig {
            hidden: 256,
            ..TrainConfig::mlp(0)
        };
        let m = BaseModel::init(&cfg, 100, 7).unwrap();
        // (100*256+256) + (256*256+256) + (256*7+7) + 2 norm layers * (256 + 256)
        assert_eq!(m.count_parameters(), 94_471);
        let lin = BaseModel::init(&TrainConfig::linear(0), 1433, 7).unwrap();
        assert_eq!(lin.count_parameters(), 1433 * 7 + 7);
    }

    #[test]
    fn empty_training_set_rejected() {
        let (x, labels) = toy();
        assert!(matches!(
            train(x.view(), &[], &labels, 2, &TrainConfig::linear(0)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn huge_learning_rate_reports_non_finite_loss() {
        let x = Array2::from_elem((4, 2), 1e300);
        let labels = vec![(0, 0), (1, 1), (2, 0), (3, 1)];
        let cfg = TrainConfig {
            lr: 1e300,
            ..TrainConfig::linear(0)
        };
        assert!(matches!(
            train(x.view(), &labels, &[], 2, &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let (x, labels) = toy();
        let cfg = TrainConfig {
            epochs: 5,
            hidden: 4,
            ..TrainConfig::mlp(2)
        };
        let out = train(x.view(), &labels, &labels, 2, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        out.model.save(&p).unwrap();
        let back = BaseModel::load(&p).unwrap();
        assert_eq!(back, out.model);
        std::fs::write(&p, b"CNSMODEL\x09\x00\x00\x00").unwrap();
        assert!(matches!(BaseModel::load(&p), Err(Error::Format(_))));
    }

    #[test]
    fn grad_check_linear_and_mlp() {
        let x = array![
            [0.3, -1.2, 0.5],
            [1.1, 0.4, -0.7],
            [-0.9, 0.8, 0.2],
            [0.05, -0.3, 1.4],
            [-1.5, -0.6, -0.1],
            [0.7, 1.3, 0.9]
        ];
        let t = [0, 2, 1, 1, 0, 2];
        let lin = grad_check(&TrainConfig::linear(4), x.view(), &t, 3).unwrap();
        assert!(lin.max_relative_error < 1e-6, "{lin:?}");
        let cfg = TrainConfig {
            hidden: 5,
            ..TrainConfig::mlp(4)
        };
        let mlp = grad_check(&cfg, x.view(), &t, 3).unwrap();
        assert!(mlp.max_relative_error < 1e-4, "{mlp:?}");
        assert_eq!(
            mlp.parameters_checked,
            3 * 5 + 5 + 5 * 5 + 5 + 5 * 3 + 3 + 4 * 5
        );
    }
}
