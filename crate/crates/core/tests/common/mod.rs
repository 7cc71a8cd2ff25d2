//! Shared generators and dense helpers for the integration and property tests.

#![allow(dead_code)]

use cns_core::graph::SparseGraph;
use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random edge list on `n` nodes with roughly `p * n^2 / 2` edges; may contain self-loops,
/// duplicates and isolated nodes.
pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Connected random graph: a random spanning tree plus extra edges with probability `p`.
pub fn random_connected(rng: &mut impl Rng, n: usize, p: f64) -> SparseGraph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    edges.extend(random_edges(rng, n, p));
    SparseGraph::from_edges(&edges, n).expect("indices in range")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strategy for `(n, edges)` with `n` in `lo..=hi`.
pub fn arb_edges(lo: usize, hi: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (lo..=hi).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..=3 * n);
        (Just(n), edges)
    })
}

/// Strategy for connected graphs with `n` in `lo..=hi`, built from a seed.
pub fn arb_connected(lo: usize, hi: usize) -> impl Strategy<Value = SparseGraph> {
    (lo..=hi, 0.0f64..0.3, any::<u64>())
        .prop_map(|(n, p, seed)| random_connected(&mut rng(seed), n, p))
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, c), |_| rng.random_range(-1.0..1.0))
}

pub fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest absolute eigenvalue of a symmetric dense matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Every node labeled uniformly at random among `classes` classes.
pub fn random_labels(rng: &mut impl Rng, n: usize, classes: usize) -> Vec<Option<usize>> {
    (0..n).map(|_| Some(rng.random_range(0..classes))).collect()
}

/// Random row-stochastic matrix.
pub fn random_probs(rng: &mut impl Rng, n: usize, c: usize) -> Array2<f64> {
    let mut z = Array2::from_shape_fn((n, c), |_| rng.random_range(0.01..1.0));
    for mut row in z.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    z
}
