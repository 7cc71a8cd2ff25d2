//! Iterative propagation kernels: label spreading on the symmetric normalized adjacency
//! and fixed-boundary diffusion on the row-stochastic one, plus dense closed-form solves
//! used to check them on small graphs.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphOperator, OperatorKind};
use crate::ProbMatrix;

pub const DEFAULT_ORACLE_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadParams {
    /// Weight on the propagated term; `mu = 1/alpha - 1` in the regularized objective.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the largest absolute entry change drops to this value.
    pub tol: f64,
}

impl Default for SpreadParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl SpreadParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be >= 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }

    /// The smoothness/fidelity trade-off `mu` matching this `alpha`.
    pub fn mu(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }
}

/// Outcome of an iterative propagation.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub values: ProbMatrix,
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
}

impl Propagated {
    /// Converts a non-converged run into an error for callers that require convergence.
    pub fn require_converged(self, stage: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                stage,
                iterations: self.iterations,
                delta: self.final_delta,
            })
        }
    }
}

fn check_kind(op: &GraphOperator<'_>, want: OperatorKind) -> Result<()> {
    if op.kind() != want {
        return Err(Error::InvalidConfig(format!(
            "expected a {want:?} operator, got {:?}",
            op.kind()
        )));
    }
    Ok(())
}

fn check_rows(op: &GraphOperator<'_>, init: ArrayView2<'_, f64>) -> Result<()> {
    if init.nrows() != op.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "propagation input rows",
            expected: op.num_nodes(),
            found: init.nrows(),
        });
    }
    Ok(())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0f64, |acc, &x, &y| acc.max((x - y).abs()))
}

/// Label spreading: iterates `W <- (1 - alpha) init + alpha S W` from `W = init`.
pub fn label_spread(
    op: &GraphOperator<'_>,
    init: ArrayView2<'_, f64>,
    params: &SpreadParams,
) -> Result<Propagated> {
    label_spread_observed(op, init, params, |_, _| {})
}

/// [`label_spread`] with a hook called on every iterate (iteration number, iterate).
pub fn label_spread_observed<F>(
    op: &GraphOperator<'_>,
    init: ArrayView2<'_, f64>,
    params: &SpreadParams,
    mut observe: F,
) -> Result<Propagated>
where
    F: FnMut(usize, &Array2<f64>),
{
    check_kind(op, OperatorKind::SymNorm)?;
    check_rows(op, init)?;
    params.validate()?;

    let alpha = params.alpha;
    let base = init.mapv(|x| (1.0 - alpha) * x);
    let mut current = init.to_owned();
    let mut next = Array2::zeros(init.dim());
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iters {
        op.spmm_into(current.view(), next.view_mut())?;
        Zip::from(&mut next)
            .and(&base)
            .for_each(|n, &b| *n = b + alpha * *n);
        delta = max_abs_diff(&next, &current);
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        observe(iterations, &current);
        if delta <= params.tol {
            break;
        }
    }
    Ok(Propagated {
        values: current,
        iterations,
        final_delta: delta,
        converged: delta <= params.tol,
    })
}

/// Fixed-boundary diffusion: free rows are repeatedly replaced by the average of their
/// neighbors while rows in `fixed` stay pinned to `init`.
///
/// Free components that touch no fixed node keep averaging among themselves; when they
/// start at zero they stay at zero.
pub fn fixed_diffusion(
    op: &GraphOperator<'_>,
    init: ArrayView2<'_, f64>,
    fixed: &[usize],
    params: &SpreadParams,
) -> Result<Propagated> {
    check_kind(op, OperatorKind::RowStoch)?;
    check_rows(op, init)?;
    if params.max_iters == 0 || params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::InvalidConfig(
            "max_iters must be positive and tol >= 0".into(),
        ));
    }
    let n = op.num_nodes();
    for &i in fixed {
        if i >= n {
            return Err(Error::NodeOutOfRange { index: i, n });
        }
    }

    let mut current = init.to_owned();
    let mut next = Array2::zeros(init.dim());
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iters {
        op.spmm_into(current.view(), next.view_mut())?;
        for &i in fixed {
            next.row_mut(i).assign(&init.row(i));
        }
        delta = max_abs_diff(&next, &current);
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        if delta <= params.tol {
            break;
        }
    }
    Ok(Propagated {
        values: current,
        iterations,
        final_delta: delta,
        converged: delta <= params.tol,
    })
}

/// Which fixed point the dense oracle should solve for.
#[derive(Debug, Clone)]
pub enum OracleProblem {
    /// `(1 - alpha) (I - alpha S)^-1 init`
    Spread { alpha: f64 },
    /// Free block of `X = P X` with the `fixed` rows held at `init`.
    FixedDiffusion { fixed: Vec<usize> },
}

/// Solves either propagation exactly with a dense LU factorization.
pub fn dense_lp_oracle(
    op: &GraphOperator<'_>,
    init: ArrayView2<'_, f64>,
    problem: &OracleProblem,
    cap: usize,
) -> Result<ProbMatrix> {
    let n = op.num_nodes();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    check_rows(op, init)?;
    let c = init.ncols();
    let dense = op.to_dense();
    let rhs_init = DMatrix::from_fn(n, c, |i, j| init[[i, j]]);

    match problem {
        OracleProblem::Spread { alpha } => {
            let system = DMatrix::identity(n, n) - dense * *alpha;
            let sol = system
                .lu()
                .solve(&(rhs_init * (1.0 - alpha)))
                .ok_or_else(|| Error::InvalidConfig("singular spreading system".into()))?;
            Ok(Array2::from_shape_fn((n, c), |(i, j)| sol[(i, j)]))
        }
        OracleProblem::FixedDiffusion { fixed } => {
            let mut is_fixed = vec![false; n];
            for &i in fixed {
                if i >= n {
                    return Err(Error::NodeOutOfRange { index: i, n });
                }
                is_fixed[i] = true;
            }
            let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
            let mut out = init.to_owned();
            if free.is_empty() {
                return Ok(out);
            }
            let m = free.len();
            // (I - P_UU) X_U = P_UL X_L
            let system = DMatrix::from_fn(m, m, |a, b| {
                let v = -dense[(free[a], free[b])];
                if a == b {
                    1.0 + v
                } else {
                    v
                }
            });
            let rhs = DMatrix::from_fn(m, c, |a, j| {
                (0..n)
                    .filter(|&k| is_fixed[k])
                    .map(|k| dense[(free[a], k)] * init[[k, j]])
                    .sum()
            });
            let sol = system.lu().solve(&rhs).ok_or_else(|| {
                Error::InvalidConfig("a free component touches no fixed node".into())
            })?;
            for (a, &i) in free.iter().enumerate() {
                for j in 0..c {
                    out[[i, j]] = sol[(a, j)];
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseGraph;
    use ndarray::array;

    fn path3() -> SparseGraph {
        SparseGraph::from_edges(&[(0, 1), (1, 2)], 3).unwrap()
    }

    #[test]
    fn alpha_zero_returns_init_after_one_step() {
        let g = path3();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let init = array![[0.2, 0.8], [1.0, 0.0], [0.3, 0.3]];
        let out = label_spread(&s, init.view(), &SpreadParams::with_alpha(0.0)).unwrap();
        assert_eq!(out.values, init);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn zero_init_stays_zero() {
        let g = path3();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let out = label_spread(&s, Array2::zeros((3, 4)).view(), &SpreadParams::default()).unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_alpha_one_and_wrong_operator() {
        let g = path3();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let p = GraphOperator::new(&g, OperatorKind::RowStoch);
        let init = Array2::<f64>::zeros((3, 1));
        assert!(label_spread(&s, init.view(), &SpreadParams::with_alpha(1.0)).is_err());
        assert!(label_spread(&p, init.view(), &SpreadParams::default()).is_err());
        assert!(fixed_diffusion(&s, init.view(), &[0], &SpreadParams::default()).is_err());
    }

    #[test]
    fn budget_exhaustion_flags_non_convergence() {
        let g = path3();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let init = array![[1.0], [0.0], [0.0]];
        let params = SpreadParams {
            alpha: 0.99,
            max_iters: 3,
            tol: 1e-12,
        };
        let out = label_spread(&s, init.view(), &params).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.final_delta > params.tol);
        assert!(matches!(
            out.require_converged("spread"),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn all_fixed_is_identity() {
        let g = path3();
        let p = GraphOperator::new(&g, OperatorKind::RowStoch);
        let init = array![[0.5, -0.5], [0.1, 0.2], [-1.0, 1.0]];
        let out = fixed_diffusion(&p, init.view(), &[0, 1, 2], &SpreadParams::default()).unwrap();
        assert_eq!(out.values, init);
        assert!(out.converged);
    }

    #[test]
    fn star_leaves_take_center_value() {
        let g = SparseGraph::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)], 5).unwrap();
        let p = GraphOperator::new(&g, OperatorKind::RowStoch);
        let mut init = Array2::zeros((5, 2));
        init.row_mut(0).assign(&array![0.7, -0.3]);
        let out = fixed_diffusion(&p, init.view(), &[0], &SpreadParams::default()).unwrap();
        for leaf in 1..5 {
            assert_eq!(out.values.row(leaf), array![0.7, -0.3]);
        }
    }

    #[test]
    fn disconnected_free_component_keeps_zero() {
        let g = SparseGraph::from_edges(&[(0, 1), (2, 3)], 4).unwrap();
        let p = GraphOperator::new(&g, OperatorKind::RowStoch);
        let init = array![[1.0], [0.0], [0.0], [0.0]];
        let out = fixed_diffusion(&p, init.view(), &[0], &SpreadParams::default()).unwrap();
        assert_eq!(out.values.column(0).to_vec(), vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn oracle_single_node_returns_init() {
        let g = SparseGraph::from_edges(&[], 1).unwrap();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let init = array![[0.25, 0.75]];
        let out =
            dense_lp_oracle(&s, init.view(), &OracleProblem::Spread { alpha: 0.6 }, 200).unwrap();
        // isolated node: (1 - alpha) * init
        assert!((out[[0, 0]] - 0.4 * 0.25).abs() < 1e-15);
        let p = GraphOperator::new(&g, OperatorKind::RowStoch);
        let fixed = OracleProblem::FixedDiffusion { fixed: vec![0] };
        assert_eq!(dense_lp_oracle(&p, init.view(), &fixed, 200).unwrap(), init);
    }

    #[test]
    fn oracle_cap_enforced() {
        let edges: Vec<_> = (0..9).map(|i| (i, i + 1)).collect();
        let g = SparseGraph::from_edges(&edges, 10).unwrap();
        let s = GraphOperator::new(&g, OperatorKind::SymNorm);
        let init = Array2::<f64>::zeros((10, 1));
        assert!(matches!(
            dense_lp_oracle(&s, init.view(), &OracleProblem::Spread { alpha: 0.5 }, 5),
            Err(Error::OracleCap { n: 10, cap: 5 })
        ));
    }

    #[test]
    fn mu_round_trip() {
        let p = SpreadParams::with_alpha(0.8);
        assert!((1.0 / (1.0 + p.mu()) - 0.8).abs() < 1e-15);
    }
}
