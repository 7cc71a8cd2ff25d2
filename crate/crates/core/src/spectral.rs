//! Regularized spectral embedding used as extra node features.
//!
//! The operator is `D_tau^-1/2 (A + (tau/n) 1 1^T) D_tau^-1/2` with `D_tau = D + tau I`.
//! It is never materialized: the rank-one term is applied as a dot product, so a
//! matrix-vector product costs `O(|E| + n)`. The leading eigenvectors come from a
//! Lanczos iteration with full reorthogonalization.

use std::path::{Path, PathBuf};

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::io::{read_matrix, write_matrix_binary};

pub const DEFAULT_EMBEDDING_DIM: usize = 128;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

/// Entries below this magnitude are treated as zero when fixing eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RegularizedOperator<'g> {
    graph: &'g SparseGraph,
    tau: f64,
    dtau_scale: Vec<f64>,
}

impl<'g> RegularizedOperator<'g> {
    /// `tau = None` uses the average degree `2|E| / n`.
    pub fn new(graph: &'g SparseGraph, tau: Option<f64>) -> Result<Self> {
        let tau = tau.unwrap_or_else(|| graph.average_degree());
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidConfig(format!("tau must be >= 0, got {tau}")));
        }
        let dtau_scale = graph
            .degrees()
            .iter()
            .map(|&d| {
                let s = d + tau;
                if s > 0.0 {
                    1.0 / s.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            graph,
            tau,
            dtau_scale,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn graph(&self) -> &'g SparseGraph {
        self.graph
    }

    pub fn dtau_scale(&self) -> &[f64] {
        &self.dtau_scale
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.num_nodes();
        if x.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                context: "regularized matvec",
                expected: n,
                found: if x.len() != n { x.len() } else { out.len() },
            });
        }
        let s = &self.dtau_scale;
        let rank_one = if n > 0 {
            self.tau / n as f64 * s.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        } else {
            0.0
        };
        let g = self.graph;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let acc: f64 = g.neighbors(i).iter().map(|&j| s[j] * x[j]).sum();
            *o = s[i] * acc + rank_one * s[i];
        });
        Ok(())
    }

    /// Dense copy of the operator, for oracles on small graphs.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.num_nodes();
        let s = &self.dtau_scale;
        let r = if n > 0 { self.tau / n as f64 } else { 0.0 };
        let mut m = nalgebra::DMatrix::from_fn(n, n, |i, j| r * s[i] * s[j]);
        for i in 0..n {
            for &j in self.graph.neighbors(i) {
                m[(i, j)] += s[i] * s[j];
            }
        }
        m
    }
}

/// Free-function form of [`RegularizedOperator::matvec`].
pub fn reg_matvec(op: &RegularizedOperator<'_>, x: &[f64]) -> Result<Vec<f64>> {
    op.matvec(x)
}

/// Leading eigenpairs of the regularized operator, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub vectors: Array2<f64>,
    pub values: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    /// Lanczos step budget; `None` means `max(10 k, k + 200)`. Always capped at `n`.
    pub max_iters: Option<usize>,
}

impl EigenConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            tol: DEFAULT_RESIDUAL_TOL,
            max_iters: None,
        }
    }

    pub fn budget(&self) -> usize {
        self.max_iters.unwrap_or((10 * self.k).max(self.k + 200))
    }
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM, 0)
    }
}

/// Krylov basis stored column by column.
struct Basis {
    n: usize,
    data: Vec<f64>,
}

impl Basis {
    fn len(&self) -> usize {
        self.data.len().checked_div(self.n).unwrap_or(0)
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    fn push(&mut self, v: &[f64]) {
        self.data.extend_from_slice(v);
    }

    /// Two passes of classical Gram-Schmidt against every stored column.
    fn orthogonalize(&self, w: &mut [f64]) {
        for _ in 0..2 {
            let coeffs: Vec<f64> = (0..self.len())
                .into_par_iter()
                .map(|j| dot(self.col(j), w))
                .collect();
            for (j, c) in coeffs.iter().enumerate() {
                axpy(-c, self.col(j), w);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, bases: [&Basis; 2]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for b in bases {
            b.orthogonalize(&mut v);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Computes the `k` algebraically largest eigenpairs.
///
/// Each returned pair satisfies `||M v - lambda v||_2 <= tol`, columns are orthonormal,
/// and each vector's first entry with magnitude above `1e-12` is positive. The result
/// is a deterministic function of the inputs and the seed.
pub fn top_eigs(op: &RegularizedOperator<'_>, cfg: &EigenConfig) -> Result<SpectralEmbedding> {
    let n = op.num_nodes();
    let k = cfg.k;
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut emb = lanczos(
        op,
        cfg,
        &Basis {
            n,
            data: Vec::new(),
        },
        k,
        &mut rng,
    )?;
    // One Krylov sequence carries a single copy of each repeated eigenvalue, so the
    // complement of the accepted vectors is probed for anything above the k-th value.
    for _ in 0..n {
        let locked = Basis {
            n,
            data: emb.vectors.t().iter().copied().collect(),
        };
        let probe = lanczos(op, cfg, &locked, 1, &mut rng)?;
        if probe.values[0] <= emb.values[k - 1] + cfg.tol {
            break;
        }
        let at = emb.values.partition_point(|&v| v >= probe.values[0]);
        emb.values.insert(at, probe.values[0]);
        emb.values.truncate(k);
        let mut cols: Vec<Array1<f64>> = emb
            .vectors
            .columns()
            .into_iter()
            .map(|c| c.to_owned())
            .collect();
        cols.insert(at, probe.vectors.column(0).to_owned());
        for (j, col) in cols.iter().take(k).enumerate() {
            emb.vectors.column_mut(j).assign(col);
        }
    }
    let residuals = residual_norms(op, &emb)?;
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let converged = residuals.iter().filter(|&&r| r <= cfg.tol).count();
    if converged < k {
        return Err(Error::EigenNotConverged {
            converged,
            requested: k,
            iterations: cfg.budget().min(n),
            worst_residual: worst,
        });
    }
    Ok(emb)
}

/// Lanczos with full reorthogonalization on the operator restricted to the orthogonal
/// complement of `locked`; returns its `k` largest eigenpairs once their residuals
/// (measured in that complement) are below `cfg.tol`.
fn lanczos(
    op: &RegularizedOperator<'_>,
    cfg: &EigenConfig,
    locked: &Basis,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SpectralEmbedding> {
    let n = op.num_nodes();
    let dim = n - locked.len();
    let budget = cfg.budget().min(dim).max(k);
    let mut basis = Basis {
        n,
        data: Vec::with_capacity(n * budget),
    };
    let mut diag: Vec<f64> = Vec::with_capacity(budget);
    let mut offdiag: Vec<f64> = Vec::with_capacity(budget);

    let mut v = random_unit(rng, n, [locked, &basis]).expect("complement admits a random start");
    let mut w = vec![0.0; n];
    let mut next_check = (2 * k).max(k + 20).min(budget);
    let mut worst = f64::INFINITY;
    let mut converged = 0;

    loop {
        basis.push(&v);
        let j = basis.len() - 1;
        op.matvec_into(&v, &mut w)?;
        let a = dot(&v, &w);
        diag.push(a);
        axpy(-a, &v, &mut w);
        if j > 0 {
            axpy(-offdiag[j - 1], basis.col(j - 1), &mut w);
        }
        locked.orthogonalize(&mut w);
        basis.orthogonalize(&mut w);
        let b = norm(&w);

        let m = basis.len();
        let at_end = m >= budget;
        if m >= next_check || at_end {
            let (ritz_vals, ritz_vecs) = tridiagonal_eigen(&diag, &offdiag);
            // descending order; estimated residual is |b * last component|
            let order: Vec<usize> = (0..m).rev().collect();
            let estimates: Vec<f64> = order[..k.min(m)]
                .iter()
                .map(|&i| (b * ritz_vecs[i * m + m - 1]).abs())
                .collect();
            let estimated_ok = m >= k && estimates.iter().all(|&r| r <= cfg.tol * 0.5);
            if estimated_ok || at_end {
                let emb = assemble(op, &basis, &ritz_vals, &ritz_vecs, &order[..k.min(m)])?;
                let residuals = deflated_residuals(op, locked, &emb)?;
                worst = residuals.iter().cloned().fold(0.0, f64::max);
                converged = residuals.iter().filter(|&&r| r <= cfg.tol).count();
                if m >= k && converged == k {
                    return Ok(emb);
                }
            }
            if at_end {
                return Err(Error::EigenNotConverged {
                    converged,
                    requested: k,
                    iterations: m,
                    worst_residual: worst,
                });
            }
            next_check = (m + m / 4).max(m + 8).min(budget);
        }

        if b > 1e-10 {
            offdiag.push(b);
            v = w.iter().map(|x| x / b).collect();
        } else {
            // invariant subspace found; continue in its orthogonal complement
            offdiag.push(0.0);
            match random_unit(rng, n, [locked, &basis]) {
                Some(fresh) => v = fresh,
                None => {
                    return Err(Error::EigenNotConverged {
                        converged,
                        requested: k,
                        iterations: basis.len(),
                        worst_residual: worst,
                    })
                }
            }
        }
    }
}

fn assemble(
    op: &RegularizedOperator<'_>,
    basis: &Basis,
    ritz_vals: &[f64],
    ritz_vecs: &[f64],
    order: &[usize],
) -> Result<SpectralEmbedding> {
    let n = op.num_nodes();
    let m = basis.len();
    let cols: Vec<Vec<f64>> = order
        .par_iter()
        .map(|&i| {
            let coeffs = &ritz_vecs[i * m..(i + 1) * m];
            let mut y = vec![0.0; n];
            for (j, &c) in coeffs.iter().enumerate() {
                axpy(c, basis.col(j), &mut y);
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            if let Some(first) = y.iter().find(|x| x.abs() > SIGN_EPS) {
                if *first < 0.0 {
                    y.iter_mut().for_each(|x| *x = -*x);
                }
            }
            y
        })
        .collect();
    let mut vectors = Array2::zeros((n, order.len()));
    for (c, col) in cols.iter().enumerate() {
        vectors.column_mut(c).assign(&Array1::from(col.clone()));
    }
    Ok(SpectralEmbedding {
        vectors,
        values: order.iter().map(|&i| ritz_vals[i]).collect(),
    })
}

/// Residuals of the operator projected onto the complement of `locked`.
fn deflated_residuals(
    op: &RegularizedOperator<'_>,
    locked: &Basis,
    emb: &SpectralEmbedding,
) -> Result<Vec<f64>> {
    (0..emb.dim())
        .map(|i| {
            let v = emb.vectors.column(i).to_vec();
            let mut mv = op.matvec(&v)?;
            locked.orthogonalize(&mut mv);
            axpy(-emb.values[i], &v, &mut mv);
            Ok(norm(&mv))
        })
        .collect()
}

/// `||M v_i - lambda_i v_i||_2` for every stored pair.
pub fn residual_norms(op: &RegularizedOperator<'_>, emb: &SpectralEmbedding) -> Result<Vec<f64>> {
    (0..emb.dim())
        .map(|i| {
            let v = emb.vectors.column(i).to_vec();
            let mv = op.matvec(&v)?;
            Ok(mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - emb.values[i] * b).powi(2))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL with Wilkinson-style
/// shifts. Returns eigenvalues ascending and eigenvectors stored column-major
/// (`vecs[i * m .. (i + 1) * m]` is the vector for `vals[i]`).
pub fn tridiagonal_eigen(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; m];
    e[..m.saturating_sub(1)].copy_from_slice(&offdiag[..m.saturating_sub(1)]);
    let mut z = vec![0.0; m * m];
    for i in 0..m {
        z[i * m + i] = 1.0;
    }

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..m {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut mm = l;
        while mm < m {
            if e[mm].abs() <= eps * tst1 {
                break;
            }
            mm += 1;
        }
        if mm > l {
            loop {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[mm];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..mm).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = z.split_at_mut((i + 1) * m);
                    let zi = &mut left[i * m..];
                    let zi1 = &mut right[..m];
                    for kk in 0..m {
                        let hz = zi1[kk];
                        zi1[kk] = s * zi[kk] + c * hz;
                        zi[kk] = c * zi[kk] - s * hz;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Vec::with_capacity(m * m);
    for &i in &order {
        vecs.extend_from_slice(&z[i * m..(i + 1) * m]);
    }
    (vals, vecs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    RawOnly,
    SpectralOnly,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureScaling {
    /// Zero mean, unit variance per column; constant columns become zero.
    Standardize,
    /// Like `Standardize`, but columns whose entries are all 0 or 1 are passed through.
    StandardizeNonBinary,
    /// `StandardizeNonBinary` on the raw feature columns only; spectral columns keep the
    /// unit-norm scale of the eigenvectors.
    RawNonBinary,
    None,
}

/// Builds the base-predictor input: raw features, spectral embedding, or both side by
/// side, with per-column scaling over all `n` rows (of the raw block alone for
/// `RawNonBinary`).
pub fn augment_features(
    raw: Option<ArrayView2<'_, f64>>,
    emb: Option<&SpectralEmbedding>,
    mode: FeatureMode,
    scaling: FeatureScaling,
) -> Result<Array2<f64>> {
    let need_emb = || {
        emb.ok_or_else(|| {
            Error::InvalidConfig("spectral features requested without an embedding".into())
        })
    };
    // Raw columns are scaled on their own when the spectral block is left as is.
    let (raw_scaling, all_scaling) = match scaling {
        FeatureScaling::RawNonBinary => {
            (FeatureScaling::StandardizeNonBinary, FeatureScaling::None)
        }
        other => (FeatureScaling::None, other),
    };
    let scaled_raw = || -> Result<Array2<f64>> {
        let mut r = raw.ok_or(Error::MissingFeatures)?.to_owned();
        scale_columns(&mut r, raw_scaling);
        Ok(r)
    };
    let mut x = match mode {
        FeatureMode::RawOnly => scaled_raw()?,
        FeatureMode::SpectralOnly => need_emb()?.vectors.clone(),
        FeatureMode::Concat => {
            let e = need_emb()?;
            let raw = scaled_raw()?;
            if raw.nrows() != e.vectors.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "feature/embedding rows",
                    expected: raw.nrows(),
                    found: e.vectors.nrows(),
                });
            }
            concatenate(Axis(1), &[raw.view(), e.vectors.view()]).expect("row counts checked")
        }
    };
    scale_columns(&mut x, all_scaling);
    Ok(x)
}

/// Per-column scaling over all rows. `RawNonBinary` has no block structure to respect
/// here and acts like `StandardizeNonBinary`.
pub fn scale_columns(x: &mut Array2<f64>, scaling: FeatureScaling) {
    if scaling == FeatureScaling::None || x.nrows() == 0 {
        return;
    }
    let n = x.nrows() as f64;
    x.axis_iter_mut(Axis(1))
        .into_par_iter()
        .for_each(|mut col| {
            if matches!(
                scaling,
                FeatureScaling::StandardizeNonBinary | FeatureScaling::RawNonBinary
            ) && col.iter().all(|&v| v == 0.0 || v == 1.0)
            {
                return;
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + mean.abs()) {
                col.mapv_inplace(|v| (v - mean) / sd);
            } else {
                col.fill(0.0);
            }
        });
}

/// File stem identifying an embedding by graph content, tau, dimension and seed.
pub fn cache_key(op: &RegularizedOperator<'_>, cfg: &EigenConfig) -> String {
    format!(
        "spectral-v2-{}-tau{:016x}-k{}-seed{}",
        op.graph().content_hash(),
        op.tau().to_bits(),
        cfg.k,
        cfg.seed
    )
}

fn cache_paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{key}.vectors.bin")),
        dir.join(format!("{key}.values.bin")),
    )
}

/// Loads a cached embedding or computes and stores it.
pub fn cached_top_eigs(
    op: &RegularizedOperator<'_>,
    cfg: &EigenConfig,
    cache_dir: &Path,
) -> Result<SpectralEmbedding> {
    let key = cache_key(op, cfg);
    let (vec_path, val_path) = cache_paths(cache_dir, &key);
    if vec_path.exists() && val_path.exists() {
        let vectors = read_matrix(&vec_path)?;
        let values = read_matrix(&val_path)?;
        if vectors.dim() == (op.num_nodes(), cfg.k) && values.len() == cfg.k {
            return Ok(SpectralEmbedding {
                vectors,
                values: values.iter().copied().collect(),
            });
        }
    }
    let emb = top_eigs(op, cfg)?;
    std::fs::create_dir_all(cache_dir)?;
    write_matrix_binary(&vec_path, emb.vectors.view())?;
    let vals = Array2::from_shape_vec((1, emb.dim()), emb.values.clone()).expect("1 x k");
    write_matrix_binary(&val_path, vals.view())?;
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn triangle() -> SparseGraph {
        SparseGraph::from_edges(&[(0, 1), (1, 2), (0, 2)], 3).unwrap()
    }

    #[test]
    fn regular_graph_fixes_ones() {
        let g = SparseGraph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4).unwrap();
        let op = RegularizedOperator::new(&g, None).unwrap();
        let y = op.matvec(&[1.0; 4]).unwrap();
        for v in y {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_maps_to_zero_and_lengths_checked() {
        let g = triangle();
        let op = RegularizedOperator::new(&g, None).unwrap();
        assert_eq!(op.matvec(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(op.matvec(&[0.0; 2]).is_err());
    }

    #[test]
    fn default_tau_is_average_degree() {
        let g = SparseGraph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let op = RegularizedOperator::new(&g, None).unwrap();
        assert_abs_diff_eq!(op.tau(), 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_leading_pair() {
        let g = triangle();
        let op = RegularizedOperator::new(&g, Some(2.0)).unwrap();
        let emb = top_eigs(&op, &EigenConfig::new(1, 3)).unwrap();
        assert_abs_diff_eq!(emb.values[0], 1.0, epsilon = 1e-10);
        for i in 0..3 {
            assert_abs_diff_eq!(emb.vectors[[i, 0]], 1.0 / 3f64.sqrt(), epsilon = 1e-8);
        }
    }

    #[test]
    fn k_must_be_below_n() {
        let g = triangle();
        let op = RegularizedOperator::new(&g, None).unwrap();
        assert!(top_eigs(&op, &EigenConfig::new(3, 0)).is_err());
        assert!(top_eigs(&op, &EigenConfig::new(0, 0)).is_err());
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [2.0, -1.0, 0.5, 3.0, 0.0];
        let off = [1.0, 0.25, -0.7, 1.5];
        let (vals, vecs) = tridiagonal_eigen(&diag, &off);
        let m = diag.len();
        let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let mut reference: Vec<f64> = dense
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&reference) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for i in 0..m {
            let v = nalgebra::DVector::from_column_slice(&vecs[i * m..(i + 1) * m]);
            let r = &dense * &v - &v * vals[i];
            assert!(r.norm() < 1e-12);
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn feature_modes() {
        let raw = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let emb = SpectralEmbedding {
            vectors: array![[0.1], [0.2], [0.3]],
            values: vec![1.0],
        };
        let x = augment_features(
            Some(raw.view()),
            None,
            FeatureMode::RawOnly,
            FeatureScaling::None,
        )
        .unwrap();
        assert_eq!(x, raw);
        let x = augment_features(
            Some(raw.view()),
            Some(&emb),
            FeatureMode::Concat,
            FeatureScaling::None,
        )
        .unwrap();
        assert_eq!(x.ncols(), 3);
        assert!(matches!(
            augment_features(None, Some(&emb), FeatureMode::RawOnly, FeatureScaling::None),
            Err(Error::MissingFeatures)
        ));
        let x = augment_features(
            None,
            Some(&emb),
            FeatureMode::SpectralOnly,
            FeatureScaling::Standardize,
        )
        .unwrap();
        assert_abs_diff_eq!(x.column(0).sum(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            x.column(0).mapv(|v| v * v).sum() / 3.0,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scaling_variants() {
        let mut x = array![[1.0, 2.0, 5.0], [0.0, 4.0, 5.0], [1.0, 6.0, 5.0]];
        let mut y = x.clone();
        scale_columns(&mut x, FeatureScaling::Standardize);
        assert!(x.column(0).iter().any(|&v| v != 0.0 && v != 1.0));
        assert_eq!(x.column(2).to_vec(), vec![0.0; 3]);
        scale_columns(&mut y, FeatureScaling::StandardizeNonBinary);
        assert_eq!(y.column(0).to_vec(), vec![1.0, 0.0, 1.0]);
        assert_abs_diff_eq!(y[[0, 1]], -(1.5f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn raw_non_binary_leaves_spectral_block() {
        let raw = array![[1.0, 0.3], [0.0, 0.9], [1.0, 0.1], [0.0, 0.5]];
        let emb = SpectralEmbedding {
            vectors: array![[0.5, 0.1], [0.5, -0.7], [0.5, 0.1], [0.5, 0.5]],
            values: vec![1.0, 0.4],
        };
        let x = augment_features(
            Some(raw.view()),
            Some(&emb),
            FeatureMode::Concat,
            FeatureScaling::RawNonBinary,
        )
        .unwrap();
        assert_eq!(x.column(0).to_vec(), vec![1.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(x.column(1).mean().unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(x.slice(ndarray::s![.., 2..]), emb.vectors);
    }

    #[test]
    fn cache_round_trip() {
        let g =
            SparseGraph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)], 5).unwrap();
        let op = RegularizedOperator::new(&g, None).unwrap();
        let cfg = EigenConfig::new(2, 11);
        let dir = tempfile::tempdir().unwrap();
        let first = cached_top_eigs(&op, &cfg, dir.path()).unwrap();
        let second = cached_top_eigs(&op, &cfg, dir.path()).unwrap();
        assert_eq!(first, second);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
