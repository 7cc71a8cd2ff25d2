//! Classification metrics.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::argmax;

/// Per-row argmax (lowest index wins ties).
pub fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    let rows: Vec<_> = scores.rows().into_iter().collect();
    rows.into_par_iter().map(argmax).collect()
}

/// Number of nodes in `index` whose prediction equals the known label. Nodes without a
/// label count as misses.
pub fn hits(pred: &[usize], truth: &[Option<usize>], index: &[usize]) -> Result<usize> {
    let n = pred.len().min(truth.len());
    let mut count = 0;
    for &i in index {
        if i >= n {
            return Err(Error::NodeOutOfRange { index: i, n });
        }
        if truth[i] == Some(pred[i]) {
            count += 1;
        }
    }
    Ok(count)
}

/// Fraction of exact matches over `index`, in `[0, 1]`.
pub fn accuracy(pred: &[usize], truth: &[Option<usize>], index: &[usize]) -> Result<f64> {
    if index.is_empty() {
        return Err(Error::Empty("accuracy index set"));
    }
    Ok(hits(pred, truth, index)? as f64 / index.len() as f64)
}
