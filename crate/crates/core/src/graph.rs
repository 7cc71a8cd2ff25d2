//! Undirected graph storage in CSR form and the two normalized adjacency operators
//! (`D^-1/2 A D^-1/2` and `D^-1 A`) that every propagation step multiplies by.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis, Zip};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Symmetric, self-loop free adjacency in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGraph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    degrees: Vec<f64>,
}

impl SparseGraph {
    /// Canonicalizes an arbitrary edge list: both orientations are inserted, duplicates
    /// merged, self-loops dropped, and each row sorted.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut counts = vec![0usize; n];
        for &(u, v) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if u != v {
                counts[u] += 1;
                counts[v] += 1;
            }
        }

        let mut row_offsets = vec![0usize; n + 1];
        for i in 0..n {
            row_offsets[i + 1] = row_offsets[i] + counts[i];
        }
        let mut cursor = row_offsets[..n].to_vec();
        let mut cols = vec![0usize; row_offsets[n]];
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            cols[cursor[u]] = v;
            cursor[u] += 1;
            cols[cursor[v]] = u;
            cursor[v] += 1;
        }

        // sort + dedup each row, then compact
        let mut col_indices = Vec::with_capacity(cols.len());
        let mut compact_offsets = Vec::with_capacity(n + 1);
        compact_offsets.push(0);
        for i in 0..n {
            let row = &mut cols[row_offsets[i]..row_offsets[i + 1]];
            row.sort_unstable();
            let mut prev = None;
            for &c in row.iter() {
                if prev != Some(c) {
                    col_indices.push(c);
                    prev = Some(c);
                }
            }
            compact_offsets.push(col_indices.len());
        }

        let degrees = compact_offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64)
            .collect();
        Ok(Self {
            n,
            row_offsets: compact_offsets,
            col_indices,
            degrees,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn average_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.col_indices.len() as f64 / self.n as f64
        }
    }

    /// Canonical edge set with `u < v`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|u| {
                self.neighbors(u)
                    .iter()
                    .filter(move |&&v| u < v)
                    .map(move |&v| (u, v))
            })
            .collect()
    }

    pub fn isolated_nodes(&self) -> usize {
        self.degrees.iter().filter(|&&d| d == 0.0).count()
    }

    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Stable digest of the CSR arrays, used to key on-disk caches.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &o in &self.row_offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            h.update((c as u64).to_le_bytes());
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads a whitespace separated edge list; `#` lines and blank lines are skipped.
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        let mut it = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(format!("expected two node ids, got {trimmed:?}")));
        };
        let u = a
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad node id {a:?}: {e}")))?;
        let v = b
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad node id {b:?}: {e}")))?;
        edges.push((u, v));
    }
    Ok(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// `D^-1/2 A D^-1/2`
    SymNorm,
    /// `D^-1 A`
    RowStoch,
}

/// A normalized adjacency operator. Entry `(i, j)` for an edge is
/// `row_scale[i] * col_scale[j]`; isolated nodes get zero scales.
#[derive(Debug, Clone)]
pub struct GraphOperator<'g> {
    graph: &'g SparseGraph,
    kind: OperatorKind,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl<'g> GraphOperator<'g> {
    pub fn new(graph: &'g SparseGraph, kind: OperatorKind) -> Self {
        let inv_sqrt: Vec<f64> = graph
            .degrees()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let (row_scale, col_scale) = match kind {
            OperatorKind::SymNorm => (inv_sqrt.clone(), inv_sqrt),
            OperatorKind::RowStoch => (
                graph
                    .degrees()
                    .iter()
                    .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
                    .collect(),
                vec![1.0; graph.num_nodes()],
            ),
        };
        Self {
            graph,
            kind,
            row_scale,
            col_scale,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn graph(&self) -> &'g SparseGraph {
        self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Value of entry `(i, j)`; zero when `j` is not a neighbor of `i`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.graph.neighbors(i).binary_search(&j).is_ok() {
            self.row_scale[i] * self.col_scale[j]
        } else {
            0.0
        }
    }

    /// Sparse-dense product `op * m`.
    pub fn spmm(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.num_nodes(), m.ncols()));
        self.spmm_into(m, out.view_mut())?;
        Ok(out)
    }

    /// Writes `op * m` into `out`. Each output row is accumulated over its neighbors in
    /// index order, so the result is bitwise identical for any thread count.
    pub fn spmm_into(&self, m: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) -> Result<()> {
        let n = self.num_nodes();
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "spmm input rows",
                expected: n,
                found: m.nrows(),
            });
        }
        if out.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                context: "spmm output shape",
                expected: m.nrows() * m.ncols(),
                found: out.len(),
            });
        }
        let g = self.graph;
        Zip::indexed(out.axis_iter_mut(Axis(0))).par_for_each(|i, mut row| {
            row.fill(0.0);
            for &j in g.neighbors(i) {
                let w = self.col_scale[j];
                row.zip_mut_with(&m.row(j), |o, &x| *o += w * x);
            }
            let s = self.row_scale[i];
            row.mapv_inplace(|x| x * s);
        });
        Ok(())
    }

    /// Dense copy of the operator, for oracles on small graphs.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.num_nodes();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for &j in self.graph.neighbors(i) {
                d[(i, j)] = self.row_scale[i] * self.col_scale[j];
            }
        }
        d
    }
}
