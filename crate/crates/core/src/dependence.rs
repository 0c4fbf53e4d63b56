//! Dependence structures: which pairs of units may be correlated.
//!
//! Two units are "correlated" when the structure allows a non-zero covariance
//! between them. Pair counts and degrees drive the variance bounds used by the
//! diagnostics, and neighbor sets drive the dependence-aware splitters and
//! variance estimators.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sparse symmetric adjacency with zero diagonal, stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Builds the adjacency from an undirected edge list. Each edge is
    /// inserted in both directions; duplicates collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::IndexOutOfRange { index: u, len: n });
            }
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, len: n });
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop on unit {u}")));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    pub fn empty(n: usize) -> Self {
        Self { neighbors: vec![Vec::new(); n] }
    }

    pub fn complete(n: usize) -> Self {
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
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

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Undirected edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Cluster memberships for one clustering dimension.
#[derive(Debug, Clone, PartialEq)]
struct Groups {
    ids: Vec<usize>,
    members: BTreeMap<usize, Vec<usize>>,
}

impl Groups {
    fn new(ids: Vec<usize>) -> Self {
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (unit, &id) in ids.iter().enumerate() {
            members.entry(id).or_default().push(unit);
        }
        Self { ids, members }
    }

    fn of(&self, i: usize) -> &[usize] {
        &self.members[&self.ids[i]]
    }

    fn within_pairs(&self) -> usize {
        self.members.values().map(|m| choose2(m.len())).sum()
    }
}

fn choose2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Two-way clustering on a grid of row and column ids. Cells sharing a row id
/// or a column id are correlated.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoWayClusters {
    rows: Groups,
    cols: Groups,
    cells: Groups,
}

impl TwoWayClusters {
    pub fn new(row_ids: Vec<usize>, col_ids: Vec<usize>) -> Result<Self> {
        if row_ids.len() != col_ids.len() {
            return Err(Error::SizeMismatch { expected: row_ids.len(), found: col_ids.len() });
        }
        let max_col = col_ids.iter().copied().max().unwrap_or(0) + 1;
        let cell_ids = row_ids.iter().zip(&col_ids).map(|(&r, &c)| r * max_col + c).collect();
        Ok(Self { rows: Groups::new(row_ids), cols: Groups::new(col_ids), cells: Groups::new(cell_ids) })
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.rows.ids
    }

    pub fn col_ids(&self) -> &[usize] {
        &self.cols.ids
    }

    pub fn distinct_rows(&self) -> Vec<usize> {
        self.rows.members.keys().copied().collect()
    }

    pub fn distinct_cols(&self) -> Vec<usize> {
        self.cols.members.keys().copied().collect()
    }

    pub fn max_row_size(&self) -> usize {
        self.rows.members.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_col_size(&self) -> usize {
        self.cols.members.values().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DependenceStructure {
    Independent { n: usize },
    OneWayClustered { cluster_ids: Vec<usize>, members: BTreeMap<usize, Vec<usize>> },
    TwoWayClustered(TwoWayClusters),
    Network(Adjacency),
    /// Units in time order; units further than `m` steps apart are independent.
    TimeSeries { n: usize, m: usize },
}

impl DependenceStructure {
    pub fn one_way(cluster_ids: Vec<usize>) -> Self {
        let g = Groups::new(cluster_ids);
        DependenceStructure::OneWayClustered { cluster_ids: g.ids, members: g.members }
    }

    pub fn two_way(row_ids: Vec<usize>, col_ids: Vec<usize>) -> Result<Self> {
        Ok(DependenceStructure::TwoWayClustered(TwoWayClusters::new(row_ids, col_ids)?))
    }

    pub fn network(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Ok(DependenceStructure::Network(Adjacency::from_edges(n, edges)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DependenceStructure::Independent { .. } => "independent",
            DependenceStructure::OneWayClustered { .. } => "one_way_clustered",
            DependenceStructure::TwoWayClustered(_) => "two_way_clustered",
            DependenceStructure::Network(_) => "network",
            DependenceStructure::TimeSeries { .. } => "time_series",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DependenceStructure::Independent { n } | DependenceStructure::TimeSeries { n, .. } => *n,
            DependenceStructure::OneWayClustered { cluster_ids, .. } => cluster_ids.len(),
            DependenceStructure::TwoWayClustered(tw) => tw.rows.ids.len(),
            DependenceStructure::Network(adj) => adj.n(),
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let n = self.n();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        Ok(())
    }

    /// Sorted indices of the units correlated with `i` (never includes `i`).
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        self.check_index(i)?;
        Ok(match self {
            DependenceStructure::Independent { .. } => Vec::new(),
            DependenceStructure::OneWayClustered { cluster_ids, members } => {
                members[&cluster_ids[i]].iter().copied().filter(|&j| j != i).collect()
            }
            DependenceStructure::TwoWayClustered(tw) => {
                let mut out: Vec<usize> =
                    tw.rows.of(i).iter().chain(tw.cols.of(i)).copied().filter(|&j| j != i).collect();
                out.sort_unstable();
                out.dedup();
                out
            }
            DependenceStructure::Network(adj) => adj.neighbors(i).to_vec(),
            DependenceStructure::TimeSeries { n, m } => {
                let lo = i.saturating_sub(*m);
                let hi = (i + m).min(n - 1);
                (lo..=hi).filter(|&j| j != i).collect()
            }
        })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_index(i)?;
        Ok(match self {
            DependenceStructure::Independent { .. } => 0,
            DependenceStructure::OneWayClustered { cluster_ids, members } => members[&cluster_ids[i]].len() - 1,
            DependenceStructure::TwoWayClustered(tw) => {
                tw.rows.of(i).len() + tw.cols.of(i).len() - tw.cells.of(i).len() - 1
            }
            DependenceStructure::Network(adj) => adj.degree(i),
            DependenceStructure::TimeSeries { n, m } => i.min(*m) + (n - 1 - i).min(*m),
        })
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i).unwrap_or(0)).max().unwrap_or(0)
    }

    /// Number of unordered correlated pairs `{i, j}`, `i != j`.
    pub fn correlated_pairs(&self, n: usize) -> Result<usize> {
        if n != self.n() {
            return Err(Error::SizeMismatch { expected: self.n(), found: n });
        }
        Ok(match self {
            DependenceStructure::Independent { .. } => 0,
            DependenceStructure::OneWayClustered { members, .. } => members.values().map(|m| choose2(m.len())).sum(),
            DependenceStructure::TwoWayClustered(tw) => {
                tw.rows.within_pairs() + tw.cols.within_pairs() - tw.cells.within_pairs()
            }
            DependenceStructure::Network(adj) => adj.edge_count(),
            DependenceStructure::TimeSeries { n, m } => (1..=*m).map(|d| n.saturating_sub(d)).sum(),
        })
    }

    pub fn is_correlated(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        match self {
            DependenceStructure::Independent { .. } => false,
            DependenceStructure::OneWayClustered { cluster_ids, .. } => cluster_ids[i] == cluster_ids[j],
            DependenceStructure::TwoWayClustered(tw) => tw.rows.ids[i] == tw.rows.ids[j] || tw.cols.ids[i] == tw.cols.ids[j],
            DependenceStructure::Network(adj) => adj.has_edge(i, j),
            DependenceStructure::TimeSeries { m, .. } => i.abs_diff(j) <= *m,
        }
    }

    /// Restriction of the structure to the units in `idx` (re-indexed `0..idx.len()`).
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        for &i in idx {
            self.check_index(i)?;
        }
        Ok(match self {
            DependenceStructure::Independent { .. } => DependenceStructure::Independent { n: idx.len() },
            DependenceStructure::OneWayClustered { cluster_ids, .. } => {
                DependenceStructure::one_way(idx.iter().map(|&i| cluster_ids[i]).collect())
            }
            DependenceStructure::TwoWayClustered(tw) => DependenceStructure::two_way(
                idx.iter().map(|&i| tw.rows.ids[i]).collect(),
                idx.iter().map(|&i| tw.cols.ids[i]).collect(),
            )?,
            DependenceStructure::Network(adj) => {
                let mut pos = vec![usize::MAX; adj.n()];
                for (new, &old) in idx.iter().enumerate() {
                    pos[old] = new;
                }
                let mut edges = Vec::new();
                for (new, &old) in idx.iter().enumerate() {
                    for &nb in adj.neighbors(old) {
                        if pos[nb] != usize::MAX && pos[nb] > new {
                            edges.push((new, pos[nb]));
                        }
                    }
                }
                DependenceStructure::network(idx.len(), &edges)?
            }
            DependenceStructure::TimeSeries { m, .. } => {
                if idx.windows(2).any(|w| w[1] != w[0] + 1) {
                    return Err(Error::InvalidInput("time-series restriction must be a contiguous range".into()));
                }
                DependenceStructure::TimeSeries { n: idx.len(), m: *m }
            }
        })
    }
}
