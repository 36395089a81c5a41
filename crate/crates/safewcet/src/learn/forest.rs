//! A small random-forest classifier used only for feature ranking: bootstrap
//! bagging, per-node feature subsampling, Gini splits, and mean-decrease-in-
//! impurity importances.

use rand::Rng;
use rayon::prelude::*;

use crate::seeds::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl ForestConfig {
    /// Depth defaults to ceil(sqrt(d)) for d features.
    pub fn for_dimension(dim: usize, seed: u64) -> ForestConfig {
        ForestConfig {
            trees: 100,
            max_depth: (dim as f64).sqrt().ceil() as usize,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { prob } => return prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug)]
pub struct Forest {
    trees: Vec<Tree>,
    /// Mean decrease in Gini impurity per feature, normalized to sum to 1
    /// (all zeros when no split ever reduced impurity).
    pub importances: Vec<f64>,
}

impl Forest {
    /// Probability of the positive class, averaged over trees.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }
}

pub fn train_forest(features: &[Vec<f64>], labels: &[bool], cfg: ForestConfig) -> Forest {
    assert_eq!(features.len(), labels.len());
    assert!(!features.is_empty());
    let dim = features[0].len();
    let subset = (dim as f64).sqrt().ceil() as usize;

    let grown: Vec<(Tree, Vec<f64>)> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, "tree", &[t as u64]));
            let n = features.len();
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut builder = TreeBuilder {
                features,
                labels,
                dim,
                subset,
                max_depth: cfg.max_depth,
                total: n as f64,
                nodes: Vec::new(),
                importances: vec![0.0; dim],
            };
            builder.grow(sample, 0, &mut rng);
            (
                Tree {
                    nodes: builder.nodes,
                },
                builder.importances,
            )
        })
        .collect();

    let mut importances = vec![0.0; dim];
    let mut trees = Vec::with_capacity(cfg.trees);
    for (tree, imp) in grown {
        for (acc, v) in importances.iter_mut().zip(&imp) {
            *acc += v;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }
    Forest { trees, importances }
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    dim: usize,
    subset: usize,
    max_depth: usize,
    total: f64,
    nodes: Vec<Node>,
    importances: Vec<f64>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut impl Rng) -> usize {
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&r| self.labels[r]).count() as f64;
        let here = gini(pos, n);
        let leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf { prob: pos / n });
            nodes.len() - 1
        };
        if depth >= self.max_depth || here == 0.0 || rows.len() < 2 {
            return leaf(&mut self.nodes);
        }

        let candidates = rand::seq::index::sample(rng, self.dim, self.subset.min(self.dim));
        let mut best: Option<(usize, f64, f64)> = None; // feature, threshold, decrease
        for feature in candidates {
            let mut sorted: Vec<(f64, bool)> = rows
                .iter()
                .map(|&r| (self.features[r][feature], self.labels[r]))
                .collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for i in 1..sorted.len() {
                if sorted[i - 1].1 {
                    left_pos += 1.0;
                }
                if sorted[i].0 <= sorted[i - 1].0 {
                    continue;
                }
                let ln = i as f64;
                let rn = n - ln;
                let weighted = (ln * gini(left_pos, ln) + rn * gini(pos - left_pos, rn)) / n;
                let decrease = here - weighted;
                if decrease > best.map_or(1e-12, |(_, _, d)| d) {
                    best = Some((feature, (sorted[i - 1].0 + sorted[i].0) / 2.0, decrease));
                }
            }
        }

        let Some((feature, threshold, decrease)) = best else {
            return leaf(&mut self.nodes);
        };
        self.importances[feature] += (n / self.total) * decrease;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.features[r][feature] < threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { prob: 0.0 }); // placeholder until children exist
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn single_informative_feature_dominates() {
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..600)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let med = median(rows.iter().map(|r| r[2]).collect());
        let labels: Vec<bool> = rows.iter().map(|r| r[2] > med).collect();
        let forest = train_forest(&rows, &labels, ForestConfig::for_dimension(4, 5));
        let imp = &forest.importances;
        for j in [0usize, 1, 3] {
            assert!(imp[2] > 4.0 * imp[j], "importances {imp:?}");
        }
        // The classifier itself should be usable on the training task.
        let hits = rows
            .iter()
            .zip(&labels)
            .filter(|(r, &l)| forest.predict(r) == l)
            .count();
        assert!(hits > 540, "only {hits}/600 correct");
    }

    #[test]
    fn importances_normalize_and_trees_are_deterministic() {
        let mut rng = rng_from_seed(9);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 1.0).collect();
        let cfg = ForestConfig {
            trees: 20,
            max_depth: 3,
            seed: 42,
        };
        let a = train_forest(&rows, &labels, cfg);
        let b = train_forest(&rows, &labels, cfg);
        assert_eq!(a.importances, b.importances);
        let sum: f64 = a.importances.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}
