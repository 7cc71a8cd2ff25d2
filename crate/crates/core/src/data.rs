//! Datasets on disk and train/validation/test splits.
//!
//! A dataset directory holds:
//! - `edges.txt`: whitespace-separated node pairs, `#` comments allowed;
//! - `labels.csv`: header `node,label`, one row per labeled node (unlisted nodes are unlabeled);
//! - `features.csv` (optional): header row, then one row of numbers per node;
//! - `meta.json` (optional): `{"num_nodes": n, "num_classes": c}` overriding inference.
//!
//! A split file has three sections, `[train]`, `[valid]` and `[test]`, each followed by node
//! indices separated by whitespace or commas.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{read_edge_list, SparseGraph};

pub const EDGES_FILE: &str = "edges.txt";
pub const LABELS_FILE: &str = "labels.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Meta {
    pub num_nodes: Option<usize>,
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: SparseGraph,
    pub features: Option<Array2<f64>>,
    /// `None` marks an unlabeled node.
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    /// Non-comment lines in the edge file, as distributed.
    pub edge_lines: usize,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Nodes that carry a label, in index order.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_some())
            .collect()
    }

    pub fn features_or_err(&self) -> Result<&Array2<f64>> {
        self.features.as_ref().ok_or(Error::MissingFeatures)
    }
}

/// Loads a dataset directory; the name defaults to the directory's file name.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let meta: Meta = match std::fs::read_to_string(dir.join(META_FILE)) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Meta::default(),
        Err(e) => return Err(e.into()),
    };

    let edges = read_edge_list(&dir.join(EDGES_FILE))?;
    let label_rows = read_labels(&dir.join(LABELS_FILE))?;
    let features_path = dir.join(FEATURES_FILE);
    let features = if features_path.exists() {
        let x = crate::io::read_matrix(&features_path)?;
        if x.nrows() == 0 || x.ncols() == 0 {
            None
        } else {
            Some(x)
        }
    } else {
        None
    };

    let max_edge = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let max_label = label_rows.iter().map(|&(v, _, _)| v + 1).max().unwrap_or(0);
    let n = match (meta.num_nodes, &features) {
        (Some(n), _) => n,
        (None, Some(x)) => x.nrows(),
        (None, None) => max_edge.max(max_label),
    };
    if let Some(x) = &features {
        if x.nrows() != n {
            return Err(Error::Cardinality(format!(
                "{}: {} feature rows for {n} nodes",
                dir.display(),
                x.nrows()
            )));
        }
    }
    let graph = SparseGraph::from_edges(&edges, n)?;

    let max_class = label_rows.iter().map(|&(_, c, _)| c).max();
    let num_classes = match (meta.num_classes, max_class) {
        (Some(c), _) => c,
        (None, Some(m)) if m >= 0 => m as usize + 1,
        (None, _) => return Err(Error::Empty("label set")),
    };
    let mut labels = vec![None; n];
    for (node, class, line) in label_rows {
        if node >= n {
            return Err(Error::Parse {
                path: dir.join(LABELS_FILE).display().to_string(),
                line,
                msg: format!("node {node} out of range for {n} nodes"),
            });
        }
        if class < 0 || class as usize >= num_classes {
            return Err(Error::UnknownClass {
                node,
                label: class,
                classes: num_classes,
            });
        }
        if labels[node].replace(class as usize).is_some() {
            return Err(Error::Parse {
                path: dir.join(LABELS_FILE).display().to_string(),
                line,
                msg: format!("node {node} labeled twice"),
            });
        }
    }
    let edge_lines = count_edge_lines(&dir.join(EDGES_FILE))?;
    Ok(Dataset {
        name,
        graph,
        features,
        labels,
        num_classes,
        edge_lines,
    })
}

fn count_edge_lines(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .count())
}

/// `(node, label, line)` rows of a `node,label` CSV.
fn read_labels(path: &Path) -> Result<Vec<(usize, i64, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fail = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if record.len() != 2 {
            return Err(fail(format!("expected 2 fields, found {}", record.len())));
        }
        let node = record[0]
            .parse::<usize>()
            .map_err(|e| fail(format!("bad node id {:?}: {e}", &record[0])))?;
        let label = record[1]
            .parse::<i64>()
            .map_err(|e| fail(format!("bad label {:?}: {e}", &record[1])))?;
        out.push((node, label, line));
    }
    Ok(out)
}

/// Disjoint train / validation / test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: Option<u64>,
}

impl Split {
    /// Checks non-empty, in-range, pairwise-disjoint parts.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.len());
        for (part, name) in [
            (&self.train, "train split"),
            (&self.valid, "validation split"),
            (&self.test, "test split"),
        ] {
            if part.is_empty() {
                return Err(Error::Empty(name));
            }
            for &i in part {
                if i >= n {
                    return Err(Error::NodeOutOfRange { index: i, n });
                }
                if !seen.insert(i) {
                    return Err(Error::SplitOverlap { index: i });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Train rows followed by validation rows.
    pub fn labeled(&self) -> Vec<usize> {
        self.train.iter().chain(&self.valid).copied().collect()
    }

    /// Labels restricted to train and validation nodes; everything else becomes unknown.
    pub fn mask_labels(&self, labels: &[Option<usize>]) -> Vec<Option<usize>> {
        let mut out = vec![None; labels.len()];
        for &i in self.train.iter().chain(&self.valid) {
            out[i] = labels[i];
        }
        out
    }

    /// `(node, label)` pairs for the given part; fails if any node is unlabeled.
    pub fn pairs(part: &[usize], labels: &[Option<usize>]) -> Result<Vec<(usize, usize)>> {
        part.iter()
            .map(|&i| {
                labels
                    .get(i)
                    .copied()
                    .flatten()
                    .map(|c| (i, c))
                    .ok_or_else(|| Error::InvalidConfig(format!("split node {i} has no label")))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed {seed}");
        }
        for (name, part) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
        ] {
            let _ = writeln!(s, "[{name}]");
            for chunk in part.chunks(20) {
                let line: Vec<String> = chunk.iter().map(usize::to_string).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Part sizes for `m` items: train and validation are rounded, test takes the remainder.
pub fn split_sizes(m: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let train = (a * m as f64).round() as usize;
    let valid = (b * m as f64).round() as usize;
    let test = m.saturating_sub(train + valid);
    if train == 0 || valid == 0 || test == 0 || train + valid > m {
        return Err(Error::Empty("split part"));
    }
    Ok((train, valid, test))
}

/// Uniform random partition of `eligible` (usually the labeled nodes) with ChaCha8 seeded by
/// `seed`. Each part is returned sorted.
pub fn make_split(eligible: &[usize], fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (train, valid, _) = split_sizes(eligible.len(), fractions)?;
    let mut order = eligible.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut parts = [
        order[..train].to_vec(),
        order[train..train + valid].to_vec(),
        order[train + valid..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, valid, test] = parts;
    Ok(Split {
        train,
        valid,
        test,
        seed: Some(seed),
    })
}

/// Parses a split file and validates it against `n` nodes.
pub fn fixed_split_load(path: &Path, n: usize) -> Result<Split> {
    let text = std::fs::read_to_string(path)?;
    let split = parse_split(&text, &path.display().to_string())?;
    split.validate(n)?;
    Ok(split)
}

pub fn parse_split(text: &str, origin: &str) -> Result<Split> {
    let mut parts: [Option<Vec<usize>>; 3] = [None, None, None];
    let mut current: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let fail = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: k + 1,
            msg,
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            let idx = match line {
                "[train]" => 0,
                "[valid]" => 1,
                "[test]" => 2,
                other => return Err(fail(format!("unknown section {other}"))),
            };
            if parts[idx].is_some() {
                return Err(fail(format!("section {line} repeated")));
            }
            parts[idx] = Some(Vec::new());
            current = Some(idx);
            continue;
        }
        let idx = current.ok_or_else(|| fail("index before any section header".into()))?;
        for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let v = tok
                .parse::<usize>()
                .map_err(|e| fail(format!("bad index {tok:?}: {e}")))?;
            parts[idx].as_mut().expect("section opened").push(v);
        }
    }
    let [train, valid, test] = parts;
    let need = |p: Option<Vec<usize>>, name: &'static str| p.ok_or(Error::Empty(name));
    Ok(Split {
        train: need(train, "train split")?,
        valid: need(valid, "validation split")?,
        test: need(test, "test split")?,
        seed: None,
    })
}
