//! Exact maximum-inner-product search over fact embeddings.
//!
//! Embeddings file format:
//!
//! ```text
//! #dim=<d>
//! <id>\t<v1> <v2> ... <vd>
//! ```
//!
//! Lines starting with `#` after the header are comments. Values are written
//! in the shortest form that parses back to the identical `f64`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::lexical_index::ScoredFact;

// Below this many entries a scan is cheaper than spawning rayon work.
const PARALLEL_SCAN_MIN: usize = 8192;

/// A fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn scaled(&self, c: f64) -> Embedding {
        Embedding(self.0.iter().map(|v| v * c).collect())
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(v: Vec<f64>) -> Self {
        Embedding(v)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct DenseIndex {
    dim: usize,
    ids: Vec<String>,
    // row-major, ids.len() x dim
    data: Vec<f64>,
    by_id: HashMap<String, usize>,
}

impl DenseIndex {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Precondition("embedding dimension must be positive".into()));
        }
        Ok(DenseIndex {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Embedding)>,
    {
        let mut idx = DenseIndex::new(dim)?;
        for (id, e) in entries {
            idx.push(id, e)?;
        }
        Ok(idx)
    }

    pub fn push(&mut self, id: String, embedding: Embedding) -> Result<()> {
        if embedding.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: embedding.dim(),
            });
        }
        if !embedding.is_finite() {
            return Err(Error::Precondition(format!(
                "embedding for {id:?} has non-finite entries"
            )));
        }
        if self.by_id.contains_key(&id) {
            return Err(Error::DuplicateId {
                id,
                line: self.ids.len() + 1,
            });
        }
        self.by_id.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(embedding.as_slice());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.by_id.get(id).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact top-`k` entries by inner product with `query`, skipping ids in
    /// `exclude`. Equal scores are ordered by ascending id.
    pub fn mips_top_k(&self, query: &Embedding, k: usize, exclude: &HashSet<&str>) -> Result<Vec<ScoredFact>> {
        if query.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: query.dim(),
            });
        }
        if k == 0 {
            return Err(Error::Precondition("k must be positive".into()));
        }
        let q = query.as_slice();
        let score_row = |i: usize| (i, dot(q, self.row(i)));
        let mut scores: Vec<(usize, f64)> = if self.len() >= PARALLEL_SCAN_MIN {
            (0..self.len()).into_par_iter().map(score_row).collect()
        } else {
            (0..self.len()).map(score_row).collect()
        };
        if !exclude.is_empty() {
            scores.retain(|&(i, _)| !exclude.contains(self.ids[i].as_str()));
        }
        let cmp =
            |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0]));
        if scores.len() > k {
            scores.select_nth_unstable_by(k - 1, cmp);
            scores.truncate(k);
        }
        scores.sort_by(cmp);
        Ok(scores
            .into_iter()
            .map(|(i, score)| ScoredFact {
                fact_id: self.ids[i].clone(),
                score,
            })
            .collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing #dim header"))?;
        let dim: usize = header
            .trim()
            .strip_prefix("#dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::parse(1, format!("unknown header {header:?}, expected #dim=<d>")))?;
        let mut idx = DenseIndex::new(dim).map_err(|e| Error::parse(1, e.to_string()))?;
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(line_no, "expected <id>\\t<values>"))?;
            if id.is_empty() {
                return Err(Error::parse(line_no, "empty id"));
            }
            let values = values
                .split_ascii_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::parse(line_no, format!("bad float: {e}")))?;
            if values.len() != dim {
                return Err(Error::parse(
                    line_no,
                    format!("expected {dim} values for {id:?}, found {}", values.len()),
                ));
            }
            idx.push(id.to_string(), Embedding(values)).map_err(|e| match e {
                Error::DuplicateId { id, .. } => Error::DuplicateId { id, line: line_no },
                other => Error::parse(line_no, other.to_string()),
            })?;
        }
        Ok(idx)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#dim={}\n", self.dim);
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            out.push('\t');
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }
}

/// Loads an embeddings file (fact or query embeddings).
pub fn load_embeddings(path: &Path) -> Result<DenseIndex> {
    DenseIndex::parse(&io::read_to_string(path)?)
}
