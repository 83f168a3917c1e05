//! Directed interference graphs.
//!
//! `neighbors(i)` lists the units whose treatment may influence unit `i`
//! (edge `j → i`, i.e. `E_ij = 1`). Symmetric graphs are the special case
//! where every edge is stored in both directions.
//!
//! The text format is one `i j` pair per line, meaning "j is a neighbor of
//! i", 1-indexed, preceded by a required `n <count>` header. `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceGraph {
    neighbors: Vec<Vec<usize>>,
}

impl InterferenceGraph {
    /// Builds a graph from per-unit neighbor lists (0-indexed). Lists are
    /// sorted and deduplicated.
    pub fn new(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for (i, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&j) = list.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidGraph(format!(
                    "unit {} lists neighbor {} but there are only {n} units",
                    i + 1,
                    j + 1
                )));
            }
            if list.binary_search(&i).is_ok() {
                return Err(Error::InvalidGraph(format!("self-loop at unit {}", i + 1)));
            }
        }
        Ok(Self { neighbors })
    }

    /// `(i, j)` pairs mean "j is a neighbor of i" (0-indexed).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge source {} out of range",
                    i + 1
                )));
            }
            neighbors[i].push(j);
        }
        Self::new(neighbors)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            neighbors: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
        }
    }

    /// Circulant ring: each unit is adjacent to its `half_width` predecessors
    /// and `half_width` successors, so every degree is `2·half_width`.
    pub fn circulant(n: usize, half_width: usize) -> Result<Self> {
        if half_width == 0 || 2 * half_width >= n {
            return Err(Error::InvalidGraph(format!(
                "circulant graph needs 0 < 2·half_width < n (n = {n}, half_width = {half_width})"
            )));
        }
        let neighbors = (0..n)
            .map(|i| {
                (1..=half_width)
                    .flat_map(|k| [(i + n - k) % n, (i + k) % n])
                    .collect()
            })
            .collect();
        Self::new(neighbors)
    }

    /// Directed Erdős–Rényi graph, each ordered pair kept with probability `p`.
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && rng.random::<f64>() < p).collect())
            .collect();
        Self { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Whether `j` is a neighbor of `i`.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Common degree if every unit has the same number of neighbors.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.neighbors.first()?.len();
        self.neighbors.iter().all(|l| l.len() == d).then_some(d)
    }

    /// First unit without neighbors, if any.
    pub fn isolated_unit(&self) -> Option<usize> {
        self.neighbors.iter().position(Vec::is_empty)
    }

    /// Adds the reverse of every edge.
    pub fn symmetrized(&self) -> Self {
        let mut neighbors = self.neighbors.clone();
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                neighbors[j].push(i);
            }
        }
        Self::new(neighbors).expect("symmetrizing a valid graph")
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::InvalidGraph(format!("line {}: {msg}", lineno + 1));
            if n.is_none() {
                if fields.len() != 2 || fields[0] != "n" {
                    return Err(bad("expected header `n <count>`"));
                }
                n = Some(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|_| bad("unit count is not a non-negative integer"))?,
                );
                continue;
            }
            if fields.len() != 2 {
                return Err(bad("expected `i j`"));
            }
            let parse = |s: &str| -> Result<usize> {
                let v: usize = s.parse().map_err(|_| bad("unit is not a positive integer"))?;
                if v == 0 || v > n.unwrap_or(0) {
                    return Err(bad("unit index out of range (units are 1-indexed)"));
                }
                Ok(v - 1)
            };
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        let n = n.ok_or_else(|| Error::InvalidGraph("missing `n <count>` header".into()))?;
        Self::from_edges(n, &edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n());
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                let _ = writeln!(out, "{} {}", i + 1, j + 1);
            }
        }
        out
    }
}
