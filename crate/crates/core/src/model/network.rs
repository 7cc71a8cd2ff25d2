//! Feed-forward stack `[Dense -> BatchNorm -> ReLU -> Dropout]* -> Dense` with hand-written
//! backpropagation. A single dense layer is the multinomial linear model.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, CowArray, Ix2, Zip};
use rand::Rng;
use rayon::prelude::*;

pub const BN_EPS: f64 = 1e-5;
/// Weight on the old running statistic: `running = m * running + (1 - m) * batch`.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Uniform fan-in initialization in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut draw = || (rng.random::<f64>() * 2.0 - 1.0) * bound;
        let weight = Array2::from_shape_simple_fn((inputs, outputs), &mut draw);
        let bias = Array1::from_shape_simple_fn(outputs, &mut draw);
        Self { weight, bias }
    }

    fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = par_dot(x, self.weight.view());
        out += &self.bias;
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }

    fn forward_eval(&self, a: &mut Array2<f64>) {
        let scale: Array1<f64> = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|g, v| g / (v + BN_EPS).sqrt());
        let shift = &self.beta - &(&self.running_mean * &scale);
        *a *= &scale;
        *a += &shift;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub dense: Vec<Dense>,
    /// One per hidden layer; empty for the linear model.
    pub norms: Vec<BatchNorm>,
    pub dropout: f64,
}

struct HiddenCache<'x> {
    input: CowArray<'x, f64, Ix2>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Post-BN pre-ReLU values (only their sign is needed).
    normed: Array2<f64>,
    /// Inverted dropout multipliers (0 or 1/(1-p)).
    mask: Option<Array2<f64>>,
}

/// Gradients laid out like the network's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dense: Vec<(Array2<f64>, Array1<f64>)>,
    pub norms: Vec<(Array1<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (w, b) in &self.dense {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        for (g, b) in &self.norms {
            out.push(g.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

const DOT_CHUNK: usize = 64;

/// `a · b` with output row blocks computed in parallel. Each output entry is produced by a
/// single sequential kernel call, so results do not depend on the thread count.
pub fn par_dot(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    let outs: Vec<_> = out.axis_chunks_iter_mut(Axis(0), DOT_CHUNK).collect();
    let ins: Vec<_> = a.axis_chunks_iter(Axis(0), DOT_CHUNK).collect();
    outs.into_par_iter()
        .zip(ins)
        .for_each(|(mut o, a)| general_mat_mul(1.0, &a, &b, 0.0, &mut o));
    out
}

/// Stable row-wise softmax.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl Network {
    /// `layers` dense layers; hidden layers get batch norm. `layers == 1` is linear.
    pub fn new(
        inputs: usize,
        hidden: usize,
        classes: usize,
        layers: usize,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut dims = vec![inputs];
        dims.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
        dims.push(classes);
        let dense: Vec<Dense> = dims
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        let norms = dims[1..dims.len() - 1]
            .iter()
            .map(|&d| BatchNorm::new(d))
            .collect();
        Self {
            dense,
            norms,
            dropout,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dense[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.dense
            .last()
            .expect("at least one layer")
            .weight
            .ncols()
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for d in &self.dense {
            out.push(d.weight.len());
            out.push(d.bias.len());
        }
        for n in &self.norms {
            out.push(n.gamma.len());
            out.push(n.beta.len());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.dense {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_slice_mut().expect("standard layout"));
            out.push(n.beta.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .all(|d| d.weight.iter().chain(d.bias.iter()).all(|v| v.is_finite()))
            && self.norms.iter().all(|n| {
                n.gamma
                    .iter()
                    .chain(n.beta.iter())
                    .chain(n.running_mean.iter())
                    .chain(n.running_var.iter())
                    .all(|v| v.is_finite())
            })
    }

    /// Inference-mode logits: running statistics, no dropout.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.dense.len() - 1;
        let mut h: CowArray<'_, f64, Ix2> = x.into();
        for (l, layer) in self.dense.iter().enumerate() {
            let mut a = layer.forward(h.view());
            if l < last {
                self.norms[l].forward_eval(&mut a);
                a.mapv_inplace(|v| v.max(0.0));
            }
            h = a.into();
        }
        h.into_owned()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        softmax_rows(&mut z);
        z
    }

    /// Mean cross-entropy over the batch and its gradient, with batch statistics in the
    /// normalization layers. Running statistics are updated when `update_running` is set;
    /// dropout is applied only when `rng` is given.
    pub fn loss_and_grad<'x, R: Rng>(
        &mut self,
        x: ArrayView2<'x, f64>,
        targets: &[usize],
        rng: Option<&mut R>,
        update_running: bool,
    ) -> (f64, Gradients) {
        let batch = x.nrows();
        let bf = batch as f64;
        let last = self.dense.len() - 1;
        let mut rng = rng;
        let keep = 1.0 - self.dropout;

        let mut caches = Vec::with_capacity(last);
        let mut h: CowArray<'x, f64, Ix2> = x.into();
        for l in 0..last {
            let a = self.dense[l].forward(h.view());
            let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &a - &mean;
            let var = centered
                .mapv(|v| v * v)
                .mean_axis(Axis(0))
                .expect("non-empty batch");
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = &centered * &inv_std;
            let bn = &self.norms[l];
            let normed = &(&xhat * &bn.gamma) + &bn.beta;
            if update_running {
                let unbiased = if batch > 1 { bf / (bf - 1.0) } else { 1.0 };
                let bn = &mut self.norms[l];
                bn.running_mean = &bn.running_mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM);
                bn.running_var =
                    &bn.running_var * BN_MOMENTUM + &var * ((1.0 - BN_MOMENTUM) * unbiased);
            }
            let mut out = normed.mapv(|v| v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 => {
                    let m = Array2::from_shape_simple_fn(out.dim(), || {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out *= &m;
                    Some(m)
                }
                _ => None,
            };
            caches.push(HiddenCache {
                input: h,
                xhat,
                inv_std,
                normed,
                mask,
            });
            h = out.into();
        }
        let mut probs = self.dense[last].forward(h.view());
        softmax_rows(&mut probs);

        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            loss -= probs[[i, t]].max(f64::MIN_POSITIVE).ln();
        }
        loss /= bf;

        // d loss / d logits = (softmax - onehot) / batch
        let mut delta = probs;
        for (i, &t) in targets.iter().enumerate() {
            delta[[i, t]] -= 1.0;
        }
        delta /= bf;

        let mut dense_grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.dense.len()];
        let mut norm_grads = vec![(Array1::zeros(0), Array1::zeros(0)); self.norms.len()];
        dense_grads[last] = (par_dot(h.t(), delta.view()), delta.sum_axis(Axis(0)));
        let mut upstream = par_dot(delta.view(), self.dense[last].weight.t());

        for l in (0..last).rev() {
            let cache = &caches[l];
            if let Some(mask) = &cache.mask {
                upstream *= mask;
            }
            Zip::from(&mut upstream)
                .and(&cache.normed)
                .for_each(|g, &v| {
                    if v <= 0.0 {
                        *g = 0.0
                    }
                });
            let dgamma = (&upstream * &cache.xhat).sum_axis(Axis(0));
            let dbeta = upstream.sum_axis(Axis(0));
            let dxhat = &upstream * &self.norms[l].gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
            let mut da = &dxhat * bf - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
            da *= &(&cache.inv_std / bf);
            dense_grads[l] = (par_dot(cache.input.t(), da.view()), da.sum_axis(Axis(0)));
            norm_grads[l] = (dgamma, dbeta);
            if l > 0 {
                upstream = par_dot(da.view(), self.dense[l].weight.t());
            }
        }

        (
            loss,
            Gradients {
                dense: dense_grads,
                norms: norm_grads,
            },
        )
    }
}
