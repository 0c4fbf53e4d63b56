//! Gradient boosting with depth-limited regression trees.
//!
//! Trees are grown level by level on gradient/hessian statistics (squared
//! error or logistic loss). Each level makes one pass per feature over the
//! pre-sorted training rows. Among equal-gain splits the first feature and the
//! smallest threshold win.

use serde::Serialize;

use super::{sigmoid, LearnerSpec, Task};
use crate::error::Result;
use crate::matrix::Matrix;

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    /// Split feature, or `usize::MAX` for a leaf.
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if row[node.feature] <= node.threshold { node.left } else { node.right };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEnsemble {
    pub task: Task,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Training loss before any tree and after each round.
    pub train_loss: Vec<f64>,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.count += 1;
    }
}

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn loss(task: Task, y: &[f64], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Regression => y.iter().zip(f).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n,
        Task::Binary => {
            y.iter()
                .zip(f)
                .map(|(&t, &z)| {
                    let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                    sp - t * z
                })
                .sum::<f64>()
                / n
        }
    }
}

impl TreeEnsemble {
    pub fn fit(spec: &LearnerSpec, x: &Matrix, y: &[f64], task: Task) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        let mean = y.iter().sum::<f64>() / n as f64;
        let base_score = match task {
            Task::Regression => mean,
            Task::Binary => {
                let q = mean.clamp(1e-6, 1.0 - 1e-6);
                (q / (1.0 - q)).ln()
            }
        };
        let sorted: Vec<Vec<usize>> = (0..p)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut f = vec![base_score; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(spec.rounds);
        let mut train_loss = vec![loss(task, y, &f)];
        for _ in 0..spec.rounds {
            for i in 0..n {
                match task {
                    Task::Regression => {
                        grad[i] = f[i] - y[i];
                        hess[i] = 1.0;
                    }
                    Task::Binary => {
                        let q = sigmoid(f[i]);
                        grad[i] = q - y[i];
                        hess[i] = (q * (1.0 - q)).max(1e-12);
                    }
                }
            }
            let tree = grow_tree(spec, x, &sorted, &grad, &hess);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += tree.predict_row(x.row(i));
            }
            train_loss.push(loss(task, y, &f));
            trees.push(tree);
        }
        Ok(Self { task, base_score, trees, train_loss })
    }

    pub fn raw_score_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter()
            .map(|r| {
                let s = self.raw_score_row(r);
                match self.task {
                    Task::Regression => s,
                    Task::Binary => sigmoid(s),
                }
            })
            .collect()
    }
}

fn grow_tree(spec: &LearnerSpec, x: &Matrix, sorted: &[Vec<usize>], grad: &[f64], hess: &[f64]) -> Tree {
    let n = x.nrows();
    let lambda = spec.leaf_l2;
    let leaf_value = |s: &Stats| -spec.learning_rate * s.g / (s.h + lambda);
    let score = |g: f64, h: f64| g * g / (h + lambda);

    let mut nodes = vec![Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value: 0.0 }];
    let mut node_of = vec![0usize; n];
    let mut totals = vec![Stats::default()];
    for i in 0..n {
        totals[0].add(grad[i], hess[i]);
    }
    let mut frontier = vec![0usize];

    for _depth in 0..spec.max_depth {
        if frontier.is_empty() {
            break;
        }
        // slot of each frontier node in the per-level arrays
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            slot[node] = s;
        }
        let mut best: Vec<Option<BestSplit>> = vec![None; frontier.len()];
        for (j, order) in sorted.iter().enumerate() {
            let mut left = vec![Stats::default(); frontier.len()];
            let mut last = vec![f64::NAN; frontier.len()];
            for &i in order {
                let node = node_of[i];
                if node == LEAF {
                    continue;
                }
                let s = slot[node];
                if s == usize::MAX {
                    continue;
                }
                let xi = x.get(i, j);
                let l = left[s];
                if l.count > 0 && xi > last[s] {
                    let t = totals[node];
                    let right_count = t.count - l.count;
                    if l.count >= spec.min_leaf && right_count >= spec.min_leaf {
                        let gain = 0.5 * (score(l.g, l.h) + score(t.g - l.g, t.h - l.h) - score(t.g, t.h));
                        if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(BestSplit { gain, feature: j, threshold: 0.5 * (last[s] + xi) });
                        }
                    }
                }
                left[s].add(grad[i], hess[i]);
                last[s] = xi;
            }
        }

        let mut next_frontier = Vec::new();
        for (s, &node) in frontier.iter().enumerate() {
            let Some(split) = best[s] else { continue };
            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes.push(Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value: 0.0 });
            nodes.push(Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value: 0.0 });
            totals.push(Stats::default());
            totals.push(Stats::default());
            let nd = &mut nodes[node];
            nd.feature = split.feature;
            nd.threshold = split.threshold;
            nd.left = left_id;
            nd.right = right_id;
            next_frontier.push(left_id);
            next_frontier.push(right_id);
        }
        if next_frontier.is_empty() {
            break;
        }
        for i in 0..n {
            let node = node_of[i];
            if node == LEAF || nodes[node].feature == LEAF {
                continue;
            }
            let nd = &nodes[node];
            let child = if x.get(i, nd.feature) <= nd.threshold { nd.left } else { nd.right };
            node_of[i] = child;
            totals[child].add(grad[i], hess[i]);
        }
        frontier = next_frontier;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if node.feature == LEAF {
            node.value = leaf_value(&totals[id]);
        }
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LearnerKind, LearnerSpec};
    use proptest::prelude::*;

    fn stump_spec(rounds: usize) -> LearnerSpec {
        LearnerSpec { rounds, max_depth: 1, learning_rate: 0.1, min_leaf: 1, ..LearnerSpec::new(LearnerKind::BoostedTrees) }
    }

    #[test]
    fn stumps_learn_a_step() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 - 99.5) / 50.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] > 0.0))).collect();
        let m = TreeEnsemble::fit(&stump_spec(200), &x, &y, Task::Regression).unwrap();
        let pred = m.predict(&x);
        let mse = pred.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / 200.0;
        assert!(mse < 0.01, "mse {mse}");
        assert_eq!(m.trees[0].nodes[0].feature, 0);
        assert!(m.trees[0].nodes[0].threshold.abs() < 0.011);
    }

    #[test]
    fn ties_prefer_first_feature_and_smaller_threshold() {
        // two identical columns and a target symmetric around two cut points
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v, v]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [0.0, 1.0, 1.0, 0.0];
        let m = TreeEnsemble::fit(&stump_spec(1), &x, &y, Task::Regression).unwrap();
        let root = &m.trees[0].nodes[0];
        assert_eq!(root.feature, 0);
        assert_eq!(root.threshold, 0.5);
    }

    #[test]
    fn logistic_boosting_separates_classes() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i >= 50))).collect();
        let m = TreeEnsemble::fit(&LearnerSpec::boosted(), &x, &y, Task::Binary).unwrap();
        let p = m.predict(&x);
        assert!(p[10] < 0.2 && p[90] > 0.8);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn training_loss_never_increases(
            data in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), -5.0f64..5.0), 20..80),
            depth in 1usize..4,
        ) {
            let x = Matrix::from_rows(&data.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>()).unwrap();
            let y: Vec<f64> = data.iter().map(|(_, t)| *t).collect();
            let spec = LearnerSpec { rounds: 30, max_depth: depth, min_leaf: 2, ..LearnerSpec::boosted() };
            let m = TreeEnsemble::fit(&spec, &x, &y, Task::Regression).unwrap();
            for w in m.train_loss.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }
}
