//! Sample-splitting schemes for cross-fitting.
//!
//! Every scheme returns a [`SplitPlan`]: a list of folds whose evaluation sets
//! partition the units. Training sets are the complement of the evaluation set
//! for the as-independent scheme, and a dependence-pruned subset of it for the
//! two-way, leave-neighbors-out and neighbors-left-out schemes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dependence::{Adjacency, TwoWayClusters};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    AsIndependent,
    TwoWay,
    NetworkLno,
    Nlo,
}

impl SplitScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitScheme::AsIndependent => "as_independent",
            SplitScheme::TwoWay => "two_way",
            SplitScheme::NetworkLno => "network_lno",
            SplitScheme::Nlo => "nlo",
        }
    }
}

impl std::fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub eval: Vec<usize>,
    pub train: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "PlanFile")]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
    #[serde(skip_serializing)]
    pub n: usize,
}

#[derive(Deserialize)]
struct PlanFile {
    scheme: SplitScheme,
    k: usize,
    seed: u64,
    folds: Vec<Fold>,
}

impl From<PlanFile> for SplitPlan {
    fn from(p: PlanFile) -> Self {
        let n = p.folds.iter().map(|f| f.eval.len()).sum();
        SplitPlan { scheme: p.scheme, k: p.k, seed: p.seed, folds: p.folds, n }
    }
}

impl SplitPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("split plan serializes")
    }

    /// Checks the plan invariants: evaluation sets partition `0..n`, training
    /// sets are non-empty and disjoint from their evaluation set.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        for (f, fold) in self.folds.iter().enumerate() {
            if fold.train.is_empty() {
                return Err(Error::EmptyTrainingFold { fold: f });
            }
            for &i in &fold.eval {
                if i >= self.n {
                    return Err(Error::IndexOutOfRange { index: i, len: self.n });
                }
                if seen[i] {
                    return Err(Error::InvalidInput(format!("unit {i} evaluated more than once")));
                }
                seen[i] = true;
            }
            let mut in_eval = vec![false; self.n];
            fold.eval.iter().for_each(|&i| in_eval[i] = true);
            if let Some(&i) = fold.train.iter().find(|&&i| i >= self.n || in_eval[i]) {
                return Err(Error::InvalidInput(format!("fold {f}: unit {i} is in both train and eval")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("unit {i} is never evaluated")));
        }
        Ok(())
    }
}

/// Sizes of `k` contiguous groups over `n` items, differing by at most one
/// (the first `n % k` groups get the extra item).
fn group_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|f| n / k + usize::from(f < n % k)).collect()
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    Ok(())
}

/// Random fold label per unit: a uniformly random permutation cut into `k`
/// groups of near-equal size.
fn random_eval_sets(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for size in group_sizes(n, k) {
        let mut eval = perm[start..start + size].to_vec();
        eval.sort_unstable();
        out.push(eval);
        start += size;
    }
    out
}

fn complement(n: usize, eval: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    eval.iter().for_each(|&i| mask[i] = false);
    (0..n).filter(|&i| mask[i]).collect()
}

/// Size of the training sample under a single as-independent split,
/// `round(n (1 - 1/k))` with halves rounded up.
pub fn single_split_train_size(n: usize, k: usize) -> usize {
    let exact = n as f64 * (1.0 - 1.0 / k as f64);
    (exact + 0.5).floor() as usize
}

/// As-independent k-fold cross-fitting: random evaluation folds, training on
/// the full complement, dependence ignored.
pub fn as_independent_split(n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    check_k(n, k)?;
    let folds = random_eval_sets(n, k, seed)
        .into_iter()
        .map(|eval| Fold { train: complement(n, &eval), eval })
        .collect();
    Ok(SplitPlan { scheme: SplitScheme::AsIndependent, k, seed, folds, n })
}

/// Two-way (row-block x column-block) cross-fitting with `K^2` folds.
///
/// Rows and columns are each shuffled into `k` blocks. Fold `(a, b)` evaluates
/// the cells in row block `a` and column block `b`, and trains on cells that
/// share neither a row block nor a column block with it.
pub fn two_way_split(clusters: &TwoWayClusters, k: usize, seed: u64) -> Result<SplitPlan> {
    let rows = clusters.distinct_rows();
    let cols = clusters.distinct_cols();
    if rows.len() < k || k < 2 {
        return Err(Error::InsufficientClusters { what: "row", needed: k.max(2), found: rows.len() });
    }
    if cols.len() < k {
        return Err(Error::InsufficientClusters { what: "column", needed: k, found: cols.len() });
    }
    let mut rng = rng_from_seed(seed);
    let block_of = |ids: Vec<usize>, rng: &mut _| -> std::collections::BTreeMap<usize, usize> {
        let mut shuffled = ids;
        shuffled.shuffle(rng);
        let mut map = std::collections::BTreeMap::new();
        let mut start = 0;
        for (b, size) in group_sizes(shuffled.len(), k).into_iter().enumerate() {
            for &id in &shuffled[start..start + size] {
                map.insert(id, b);
            }
            start += size;
        }
        map
    };
    let row_block = block_of(rows, &mut rng);
    let col_block = block_of(cols, &mut rng);
    let n = clusters.row_ids().len();
    let cell_blocks: Vec<(usize, usize)> = (0..n)
        .map(|i| (row_block[&clusters.row_ids()[i]], col_block[&clusters.col_ids()[i]]))
        .collect();

    let mut folds = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let eval: Vec<usize> = (0..n).filter(|&i| cell_blocks[i] == (a, b)).collect();
            let train: Vec<usize> = (0..n).filter(|&i| cell_blocks[i].0 != a && cell_blocks[i].1 != b).collect();
            if train.is_empty() {
                return Err(Error::EmptyTrainingFold { fold: folds.len() });
            }
            folds.push(Fold { eval, train });
        }
    }
    Ok(SplitPlan { scheme: SplitScheme::TwoWay, k, seed, folds, n })
}

/// Leave-neighbors-out cross-fitting on a network: evaluation folds as in
/// [`as_independent_split`], training drops every unit adjacent to the fold.
pub fn network_lno_split(adjacency: &Adjacency, n: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    if adjacency.n() != n {
        return Err(Error::SizeMismatch { expected: n, found: adjacency.n() });
    }
    check_k(n, k)?;
    let mut folds = Vec::with_capacity(k);
    for (f, eval) in random_eval_sets(n, k, seed).into_iter().enumerate() {
        let mut excluded = vec![false; n];
        for &i in &eval {
            excluded[i] = true;
            adjacency.neighbors(i).iter().for_each(|&j| excluded[j] = true);
        }
        let train: Vec<usize> = (0..n).filter(|&i| !excluded[i]).collect();
        if train.is_empty() {
            return Err(Error::EmptyTrainingFold { fold: f });
        }
        folds.push(Fold { eval, train });
    }
    Ok(SplitPlan { scheme: SplitScheme::NetworkLno, k, seed, folds, n })
}

/// Neighbors-left-out cross-fitting for a time series: contiguous evaluation
/// blocks in time order, training on points more than `gap` steps away from
/// the block. The seed is recorded but unused.
pub fn nlo_split(t: usize, k: usize, gap: usize, seed: u64) -> Result<SplitPlan> {
    check_k(t, k)?;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for (f, size) in group_sizes(t, k).into_iter().enumerate() {
        let end = start + size;
        let eval: Vec<usize> = (start..end).collect();
        let train: Vec<usize> = (0..t).filter(|&s| s + gap < start || s > end - 1 + gap).collect();
        if train.is_empty() {
            return Err(Error::EmptyTrainingFold { fold: f });
        }
        folds.push(Fold { eval, train });
        start = end;
    }
    Ok(SplitPlan { scheme: SplitScheme::Nlo, k, seed, folds, n: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> TwoWayClusters {
        let (mut r, mut c) = (Vec::new(), Vec::new());
        for i in 0..rows {
            for j in 0..cols {
                r.push(i);
                c.push(j);
            }
        }
        TwoWayClusters::new(r, c).unwrap()
    }

    #[test]
    fn as_independent_sizes() {
        let p = as_independent_split(4, 2, 3).unwrap();
        assert_eq!(p.folds.len(), 2);
        for f in &p.folds {
            assert_eq!(f.eval.len(), 2);
            assert_eq!(f.train.len(), 2);
        }
        p.validate().unwrap();

        let p = as_independent_split(6, 3, 11).unwrap();
        assert!(p.folds.iter().all(|f| f.eval.len() == 2 && f.train.len() == 4));

        let p = as_independent_split(5, 2, 0).unwrap();
        let mut sizes: Vec<usize> = p.folds.iter().map(|f| f.eval.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn as_independent_is_deterministic() {
        assert_eq!(as_independent_split(50, 5, 9).unwrap(), as_independent_split(50, 5, 9).unwrap());
        assert_ne!(as_independent_split(50, 5, 9).unwrap(), as_independent_split(50, 5, 10).unwrap());
    }

    #[test]
    fn as_independent_rejects_bad_k() {
        assert!(matches!(as_independent_split(5, 1, 0), Err(Error::InvalidFoldCount { .. })));
        assert!(matches!(as_independent_split(5, 6, 0), Err(Error::InvalidFoldCount { .. })));
    }

    #[test]
    fn single_split_rounds_half_up() {
        assert_eq!(single_split_train_size(10, 2), 5);
        assert_eq!(single_split_train_size(5, 2), 3);
        assert_eq!(single_split_train_size(7, 3), 5);
    }

    #[test]
    fn two_way_small_grid() {
        let g = grid(2, 2);
        let p = two_way_split(&g, 2, 5).unwrap();
        assert_eq!(p.folds.len(), 4);
        // cell (1,1) is unit 0; its only cell sharing neither row nor column is (2,2) = unit 3
        let f = p.folds.iter().find(|f| f.eval == vec![0]).unwrap();
        assert_eq!(f.train, vec![3]);
        p.validate().unwrap();
    }

    #[test]
    fn two_way_four_by_four() {
        let p = two_way_split(&grid(4, 4), 2, 1).unwrap();
        for f in &p.folds {
            assert_eq!(f.eval.len(), 4);
            assert_eq!(f.train.len(), 4);
            assert_eq!(16 - f.eval.len() - f.train.len(), 8);
        }
    }

    #[test]
    fn two_way_needs_enough_rows() {
        let g = TwoWayClusters::new(vec![0, 0, 0], vec![0, 1, 2]).unwrap();
        assert!(matches!(two_way_split(&g, 2, 0), Err(Error::InsufficientClusters { what: "row", .. })));
    }

    #[test]
    fn lno_on_empty_graph_matches_as_independent() {
        let lno = network_lno_split(&Adjacency::empty(6), 6, 3, 21).unwrap();
        let ai = as_independent_split(6, 3, 21).unwrap();
        assert_eq!(lno.folds, ai.folds);
    }

    #[test]
    fn lno_star_drops_leaves() {
        let star = Adjacency::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        for seed in 0..20 {
            match network_lno_split(&star, 5, 2, seed) {
                Ok(p) => {
                    let f = p.folds.iter().find(|f| f.eval.contains(&0)).unwrap();
                    assert!(f.train.iter().all(|&u| u == 0 || !(1..5).contains(&u)));
                }
                Err(Error::EmptyTrainingFold { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn lno_complete_graph_fails() {
        assert!(matches!(
            network_lno_split(&Adjacency::complete(4), 4, 2, 0),
            Err(Error::EmptyTrainingFold { .. })
        ));
    }

    #[test]
    fn nlo_gap_example() {
        let p = nlo_split(10, 2, 1, 0).unwrap();
        assert_eq!(p.folds[0].eval, vec![0, 1, 2, 3, 4]);
        assert_eq!(p.folds[0].train, vec![6, 7, 8, 9]);
        assert_eq!(p.folds[1].eval, vec![5, 6, 7, 8, 9]);
        assert_eq!(p.folds[1].train, vec![0, 1, 2, 3]);
    }

    #[test]
    fn nlo_zero_gap_is_complement() {
        let p = nlo_split(9, 3, 0, 0).unwrap();
        for f in &p.folds {
            assert_eq!(f.train, complement(9, &f.eval));
        }
    }

    #[test]
    fn nlo_gap_too_wide() {
        assert!(matches!(nlo_split(5, 2, 4, 0), Err(Error::EmptyTrainingFold { .. })));
    }

    #[test]
    fn json_shape_and_round_trip() {
        let p = as_independent_split(4, 2, 1).unwrap();
        let json = p.to_json();
        assert!(json.starts_with(r#"{"scheme":"as_independent","k":2,"seed":1,"folds":[{"eval":"#));
        assert!(!json.contains("\"n\""));
        let back: SplitPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
