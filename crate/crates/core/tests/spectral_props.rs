//! Eigenpairs of the regularized operator checked against a dense symmetric solver.

mod common;

use cns_core::graph::SparseGraph;
use cns_core::spectral::{
    augment_features, reg_matvec, residual_norms, top_eigs, EigenConfig, FeatureMode,
    FeatureScaling, RegularizedOperator,
};
use common::{arb_edges, random_connected, random_edges, rng};
use ndarray::Array2;
use proptest::prelude::*;

const PAIR_TOL: f64 = 1e-6;

fn dense_descending(op: &RegularizedOperator<'_>) -> Vec<f64> {
    let mut vals: Vec<f64> = op
        .to_dense()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matvec_matches_dense((n, edges) in arb_edges(1, 40), tau in prop::option::of(0.0f64..5.0), seed in any::<u64>()) {
        let g = SparseGraph::from_edges(&edges, n).unwrap();
        let op = RegularizedOperator::new(&g, tau).unwrap();
        let x = common::random_matrix(&mut rng(seed), n, 1).into_raw_vec_and_offset().0;
        let sparse = reg_matvec(&op, &x).unwrap();
        let dense = op.to_dense() * nalgebra::DVector::from_vec(x);
        for i in 0..n {
            prop_assert!((sparse[i] - dense[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn eigenpairs_match_dense_solver(n in 20usize..70, p in 0.02f64..0.2, k in 1usize..8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = SparseGraph::from_edges(&random_edges(&mut r, n, p), n).unwrap();
        let op = RegularizedOperator::new(&g, None).unwrap();
        let emb = top_eigs(&op, &EigenConfig::new(k, seed)).unwrap();
        prop_assert_eq!(emb.vectors.dim(), (n, k));
        for (i, res) in residual_norms(&op, &emb).unwrap().into_iter().enumerate() {
            prop_assert!(res <= PAIR_TOL, "pair {i} residual {res}");
        }
        let dense = dense_descending(&op);
        for (i, (&got, &want)) in emb.values.iter().zip(&dense).enumerate() {
            prop_assert!((got - want).abs() <= PAIR_TOL, "eigenvalue {i}: {got} vs {want}");
            prop_assert!(got <= 1.0 + 1e-9);
        }
        let gram = emb.vectors.t().dot(&emb.vectors);
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((gram[[a, b]] - want).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn same_seed_same_embedding() {
    let g = random_connected(&mut rng(5), 150, 0.03);
    let op = RegularizedOperator::new(&g, None).unwrap();
    let cfg = EigenConfig::new(12, 99);
    assert_eq!(top_eigs(&op, &cfg).unwrap(), top_eigs(&op, &cfg).unwrap());
}

#[test]
fn concat_widths_add_up() {
    let g = random_connected(&mut rng(6), 200, 0.02);
    let op = RegularizedOperator::new(&g, None).unwrap();
    let emb = top_eigs(&op, &EigenConfig::new(128, 0)).unwrap();
    let raw = Array2::from_shape_fn((200, 100), |(i, j)| ((i * 7 + j) % 3) as f64);
    let x = augment_features(
        Some(raw.view()),
        Some(&emb),
        FeatureMode::Concat,
        FeatureScaling::None,
    )
    .unwrap();
    assert_eq!(x.dim(), (200, 228));
    assert!(residual_norms(&op, &emb)
        .unwrap()
        .iter()
        .all(|&r| r <= PAIR_TOL));
}

#[test]
fn repeated_eigenvalues_are_all_found() {
    // Twenty identical triangles beside one long path: every triangle eigenvalue has
    // multiplicity twenty, and the Krylov space is far from exhausting the graph.
    let mut edges = Vec::new();
    for t in 0..20 {
        let b = 3 * t;
        edges.extend([(b, b + 1), (b + 1, b + 2), (b + 2, b)]);
    }
    edges.extend((60..199).map(|v| (v, v + 1)));
    let g = SparseGraph::from_edges(&edges, 200).unwrap();
    let op = RegularizedOperator::new(&g, None).unwrap();
    let dense = dense_descending(&op);
    for k in [4, 8, 12] {
        let emb = top_eigs(&op, &EigenConfig::new(k, 5)).unwrap();
        for (i, (&got, &want)) in emb.values.iter().zip(&dense).enumerate() {
            assert!((got - want).abs() <= PAIR_TOL, "k={k} eigenvalue {i}: {got} vs {want}");
        }
        let gram = emb.vectors.t().dot(&emb.vectors);
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[[a, b]] - want).abs() <= 1e-8);
            }
        }
    }
}
