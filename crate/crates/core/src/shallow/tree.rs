//! CART classification trees on Gini impurity, and bagged random forests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// The root has depth 0; no leaf lies deeper than this.
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` uses `round(√d)`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 4,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        positive_fraction: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeState {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl TreeState {
    /// Positive fraction of the leaf reached by `x` (`x[f] ≤ t` goes left).
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive_fraction, .. } => return positive_fraction,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    data: &'a DatasetMatrix,
    max_depth: usize,
    min_split: usize,
    max_features: Option<usize>,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize) -> usize {
        let n = samples.len();
        let pos = samples.iter().filter(|&&i| self.data.y[i]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive_fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            n,
        });
        if depth >= self.max_depth || n < self.min_split || pos == 0 || pos == n {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(samples) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| self.data.row(i)[feature] <= threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Lowest weighted child Gini over candidate features; zero-gain splits are
    /// accepted so that interactions such as XOR can be reached. Ties keep the
    /// first feature and lowest threshold.
    fn best_split(&mut self, samples: &[usize]) -> Option<(usize, f64)> {
        let d = self.data.d();
        let features: Vec<usize> = match (self.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let n = samples.len();
        let total_pos = samples.iter().filter(|&&i| self.data.y[i]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in features {
            let mut vals: Vec<(f64, bool)> = samples.iter().map(|&i| (self.data.row(i)[f], self.data.y[i])).collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_pos += usize::from(vals[k].1);
                if vals[k].0 == vals[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let impurity = (nl as f64 * gini(left_pos, nl) + (n - nl) as f64 * gini(total_pos - left_pos, n - nl)) / n as f64;
                if best.is_none_or(|b| impurity < b.0 - 1e-15) {
                    let threshold = vals[k].0 + (vals[k + 1].0 - vals[k].0) / 2.0;
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

pub fn fit_tree(p: &TreeParams, data: &DatasetMatrix, samples: Option<&[usize]>) -> Result<TreeState> {
    build(data, p.max_depth, p.min_samples_split, None, None, samples)
}

fn build(
    data: &DatasetMatrix,
    max_depth: usize,
    min_split: usize,
    max_features: Option<usize>,
    rng: Option<ChaCha8Rng>,
    samples: Option<&[usize]>,
) -> Result<TreeState> {
    if data.n() == 0 {
        return Err(Error::Validation("cannot grow a tree on an empty dataset".into()));
    }
    let all: Vec<usize> = (0..data.n()).collect();
    let mut b = Builder {
        data,
        max_depth,
        min_split: min_split.max(2),
        max_features,
        rng,
        nodes: Vec::new(),
    };
    b.grow(samples.unwrap_or(&all), 0);
    Ok(TreeState {
        n_features: data.d(),
        nodes: b.nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestState {
    pub n_features: usize,
    pub trees: Vec<TreeState>,
}

impl ForestState {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged trees; each tree sees a bootstrap sample and `max_features` random
/// features per split.
pub fn fit_forest(p: &ForestParams, data: &DatasetMatrix) -> Result<ForestState> {
    if p.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let d = data.d();
    let m = p
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
        .clamp(1, d.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = data.n();
    let mut trees = Vec::with_capacity(p.n_trees);
    for _ in 0..p.n_trees {
        let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let tree_rng = ChaCha8Rng::seed_from_u64(rng.random());
        trees.push(build(data, p.max_depth, 2, Some(m), Some(tree_rng), Some(&boot))?);
    }
    Ok(ForestState { n_features: d, trees })
}
