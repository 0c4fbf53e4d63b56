//! Split invariant checkers and random configuration generators shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use crossfit::dependence::{Adjacency, TwoWayClusters};
use crossfit::splitters::{as_independent_split, network_lno_split, nlo_split, two_way_split, SplitPlan};
use crossfit::Error;
use rand::Rng;

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond { Ok(()) } else { Err(msg()) }
}

/// Every unit is evaluated exactly once and no fold trains on its own units.
pub fn check_partition(plan: &SplitPlan, n: usize) -> Check {
    plan.validate().map_err(|e| e.to_string())?;
    ensure(plan.n == n, || format!("plan covers {} units, expected {n}", plan.n))?;
    let total: usize = plan.folds.iter().map(|f| f.eval.len()).sum();
    ensure(total == n, || format!("eval sizes sum to {total}, expected {n}"))
}

fn sizes_balanced(sizes: &[usize]) -> bool {
    sizes.iter().max().zip(sizes.iter().min()).is_none_or(|(a, b)| a - b <= 1)
}

pub fn check_as_independent(n: usize, k: usize, seed: u64) -> Check {
    let plan = as_independent_split(n, k, seed).map_err(|e| e.to_string())?;
    check_partition(&plan, n)?;
    ensure(plan.folds.len() == k, || format!("{} folds, expected {k}", plan.folds.len()))?;
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.eval.len()).collect();
    ensure(sizes_balanced(&sizes), || format!("unbalanced folds {sizes:?}"))?;
    for (f, fold) in plan.folds.iter().enumerate() {
        ensure(fold.eval.len() + fold.train.len() == n, || format!("fold {f}: train is not the complement"))?;
    }
    ensure(as_independent_split(n, k, seed).unwrap() == plan, || "same seed gave a different plan".into())
}

pub fn check_two_way(clusters: &TwoWayClusters, k: usize, seed: u64) -> Check {
    let n = clusters.row_ids().len();
    let plan = two_way_split(clusters, k, seed).map_err(|e| e.to_string())?;
    check_partition(&plan, n)?;
    ensure(plan.folds.len() == k * k, || format!("{} folds, expected {}", plan.folds.len(), k * k))?;
    let (rows, cols) = (clusters.row_ids(), clusters.col_ids());
    for (f, fold) in plan.folds.iter().enumerate() {
        let eval_rows: BTreeSet<usize> = fold.eval.iter().map(|&i| rows[i]).collect();
        let eval_cols: BTreeSet<usize> = fold.eval.iter().map(|&i| cols[i]).collect();
        for &i in &fold.train {
            ensure(!eval_rows.contains(&rows[i]) && !eval_cols.contains(&cols[i]), || {
                format!("fold {f}: train cell {i} shares a row or column with the eval set")
            })?;
        }
    }
    // each fold is a row block x column block; blocks are balanced
    let mut row_block_sizes = vec![BTreeSet::new(); k];
    let mut col_block_sizes = vec![BTreeSet::new(); k];
    for (f, fold) in plan.folds.iter().enumerate() {
        for &i in &fold.eval {
            row_block_sizes[f / k].insert(rows[i]);
            col_block_sizes[f % k].insert(cols[i]);
        }
    }
    let rs: Vec<usize> = row_block_sizes.iter().map(BTreeSet::len).collect();
    let cs: Vec<usize> = col_block_sizes.iter().map(BTreeSet::len).collect();
    ensure(rs.iter().sum::<usize>() == clusters.distinct_rows().len(), || "row blocks overlap".into())?;
    ensure(cs.iter().sum::<usize>() == clusters.distinct_cols().len(), || "column blocks overlap".into())?;
    ensure(sizes_balanced(&rs) && sizes_balanced(&cs), || format!("unbalanced blocks {rs:?} {cs:?}"))
}

pub fn check_network_lno(adj: &Adjacency, k: usize, seed: u64) -> Check {
    let n = adj.n();
    let plan = match network_lno_split(adj, n, k, seed) {
        Ok(p) => p,
        Err(Error::EmptyTrainingFold { fold }) => {
            // only legitimate when the eval fold and its neighbors cover everything
            let eval = &as_independent_split(n, k, seed).unwrap().folds[fold].eval;
            let mut covered = vec![false; n];
            for &i in eval {
                covered[i] = true;
                adj.neighbors(i).iter().for_each(|&j| covered[j] = true);
            }
            return ensure(covered.iter().all(|&c| c), || format!("fold {fold} reported empty but is not"));
        }
        Err(e) => return Err(e.to_string()),
    };
    check_partition(&plan, n)?;
    let reference = as_independent_split(n, k, seed).unwrap();
    for (f, (fold, r)) in plan.folds.iter().zip(&reference.folds).enumerate() {
        ensure(fold.eval == r.eval, || format!("fold {f}: eval differs from the as-independent fold"))?;
        let eval: BTreeSet<usize> = fold.eval.iter().copied().collect();
        let expected: Vec<usize> = (0..n)
            .filter(|&u| !eval.contains(&u) && !adj.neighbors(u).iter().any(|v| eval.contains(v)))
            .collect();
        ensure(fold.train == expected, || format!("fold {f}: train is not the non-neighbors of eval"))?;
    }
    Ok(())
}

pub fn check_nlo(t: usize, k: usize, gap: usize) -> Check {
    let plan = match nlo_split(t, k, gap, 0) {
        Ok(p) => p,
        Err(Error::EmptyTrainingFold { .. }) => {
            return ensure(t < k * (gap + 2), || format!("T={t} k={k} gap={gap} should have a training set"));
        }
        Err(e) => return Err(e.to_string()),
    };
    check_partition(&plan, t)?;
    let mut next = 0;
    for (f, fold) in plan.folds.iter().enumerate() {
        let (lo, hi) = (fold.eval[0], *fold.eval.last().unwrap());
        ensure(lo == next && hi - lo + 1 == fold.eval.len(), || format!("fold {f}: eval block not contiguous in order"))?;
        next = hi + 1;
        let expected: Vec<usize> = (0..t).filter(|&s| s + gap < lo || s > hi + gap).collect();
        ensure(fold.train == expected, || format!("fold {f}: train violates the gap rule"))?;
    }
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.eval.len()).collect();
    ensure(sizes_balanced(&sizes), || format!("unbalanced blocks {sizes:?}"))
}

/// Random full two-way grid with scattered (non-contiguous) row and column ids.
pub fn random_clusters<R: Rng>(rng: &mut R, max_cells: usize) -> TwoWayClusters {
    let rows = rng.random_range(2..=22usize);
    let cols = rng.random_range(2..=(max_cells / rows).clamp(2, 22));
    let (mut r, mut c) = (Vec::new(), Vec::new());
    for i in 0..rows {
        for j in 0..cols {
            r.push(i * 7 + 3);
            c.push(j * 5 + 1);
        }
    }
    TwoWayClusters::new(r, c).unwrap()
}

/// Erdős–Rényi graph with expected degree `c`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, c: f64) -> Adjacency {
    let p = (c / n as f64).min(1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Adjacency::from_edges(n, &edges).unwrap()
}

/// Runs every scheme's checker on `configs` random configurations each.
pub fn splitter_suite(seed: u64, configs: usize) -> Vec<(&'static str, usize, Vec<String>)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut fails = Vec::new();
    for _ in 0..configs {
        let n = rng.random_range(2..=500usize);
        let k = rng.random_range(2..=n.min(10));
        if let Err(e) = check_as_independent(n, k, rng.random()) {
            fails.push(format!("n={n} k={k}: {e}"));
        }
    }
    out.push(("as_independent", configs, std::mem::take(&mut fails)));
    for _ in 0..configs {
        let clusters = random_clusters(&mut rng, 500);
        let distinct = clusters.distinct_rows().len().min(clusters.distinct_cols().len());
        let k = rng.random_range(2..=distinct.min(5));
        if let Err(e) = check_two_way(&clusters, k, rng.random()) {
            fails.push(format!("cells={} k={k}: {e}", clusters.row_ids().len()));
        }
    }
    out.push(("two_way", configs, std::mem::take(&mut fails)));
    for _ in 0..configs {
        let n = rng.random_range(4..=500usize);
        let c = rng.random_range(0.0..6.0);
        let adj = random_graph(&mut rng, n, c);
        let k = rng.random_range(2..=n.min(6));
        if let Err(e) = check_network_lno(&adj, k, rng.random()) {
            fails.push(format!("n={n} c={c:.2} k={k}: {e}"));
        }
    }
    out.push(("network_lno", configs, std::mem::take(&mut fails)));
    for _ in 0..configs {
        let t = rng.random_range(2..=500usize);
        let k = rng.random_range(2..=t.min(10));
        let gap = rng.random_range(0..=8usize);
        if let Err(e) = check_nlo(t, k, gap) {
            fails.push(format!("T={t} k={k} gap={gap}: {e}"));
        }
    }
    out.push(("nlo", configs, fails));
    out
}
