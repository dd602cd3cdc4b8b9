//! Single CART classification tree stored as a node arena.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{better, class_counts, is_improvement, scan_feature, FeatureScan, Split, SplitScratch};
use super::{ForestError, Samples};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training rows (with bootstrap multiplicity) reaching this node.
        n_samples: u32,
        impurity_decrease: f64,
    },
    Leaf {
        class_counts: Vec<u32>,
    },
}

/// Nodes in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatTree", try_from = "FlatTree")]
pub struct Tree {
    nodes: Vec<Node>,
    n_root_samples: u32,
}

/// Leaf majority class, ties to the lowest class index.
pub fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Internal { feature, threshold, left, right, .. } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { class_counts } => return class_counts,
            }
        }
    }

    /// Class this tree votes for.
    pub fn vote(&self, x: &[f64]) -> usize {
        majority(self.leaf_for(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Sample-weighted impurity decrease per feature for this tree.
    pub fn impurity_decreases(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        let total = f64::from(self.n_root_samples.max(1));
        for node in &self.nodes {
            if let Node::Internal { feature, n_samples, impurity_decrease, .. } = node {
                out[*feature] += f64::from(*n_samples) / total * impurity_decrease;
            }
        }
        out
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Growth limits for one tree.
pub(crate) struct GrowConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub mtry: usize,
}

struct Grower<'a> {
    data: &'a Samples,
    config: &'a GrowConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    scratch: SplitScratch,
}

impl Grower<'_> {
    /// Draws features in random order and keeps the best split among the
    /// first `mtry` that are not constant within the node.
    fn choose_split(&mut self, rows: &[usize], counts: &[u32]) -> Option<Split> {
        let n = self.features.len();
        let mut examined = 0;
        let mut best: Option<Split> = None;
        for i in 0..n {
            if examined == self.config.mtry {
                break;
            }
            let j = self.rng.random_range(i..n);
            self.features.swap(i, j);
            let feature = self.features[i];
            if let FeatureScan::Best { threshold, decrease } =
                scan_feature(self.data, rows, feature, counts, &mut self.scratch)
            {
                examined += 1;
                let split = Split { feature, threshold, impurity_decrease: decrease };
                if better(&split, best.as_ref()) {
                    best = Some(split);
                }
            }
        }
        best.filter(is_improvement)
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let counts = class_counts(self.data, rows);
        let id = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.config.max_depth || rows.len() < self.config.min_samples_split {
            None
        } else {
            self.choose_split(rows, &counts)
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf { class_counts: counts });
            return id;
        };

        self.nodes.push(Node::Leaf { class_counts: Vec::new() }); // placeholder
        let data = self.data;
        let mut boundary = 0;
        for i in 0..rows.len() {
            if data.value(rows[i], split.feature) <= split.threshold {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let n_samples = (left_rows.len() + right_rows.len()) as u32;
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            n_samples,
            impurity_decrease: split.impurity_decrease,
        };
        id
    }
}

/// Grows a tree on `rows` (a multiset of row indices into `data`).
pub(crate) fn grow_tree(data: &Samples, mut rows: Vec<usize>, config: &GrowConfig, rng: ChaCha8Rng) -> Tree {
    let n_root_samples = rows.len() as u32;
    let mut grower = Grower {
        data,
        config,
        rng,
        nodes: Vec::new(),
        features: (0..data.n_features).collect(),
        scratch: SplitScratch::default(),
    };
    grower.grow(&mut rows, 0);
    Tree { nodes: grower.nodes, n_root_samples }
}

/// Column-oriented form used in model files. Leaves have `feature = -1`
/// and store their class histogram; internal nodes have an empty histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatTree {
    pub n_root_samples: u32,
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub n_samples: Vec<u32>,
    pub impurity_decrease: Vec<f64>,
    pub class_counts: Vec<Vec<u32>>,
}

impl From<Tree> for FlatTree {
    fn from(tree: Tree) -> Self {
        let n = tree.nodes.len();
        let mut flat = FlatTree {
            n_root_samples: tree.n_root_samples,
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            n_samples: Vec::with_capacity(n),
            impurity_decrease: Vec::with_capacity(n),
            class_counts: Vec::with_capacity(n),
        };
        for node in tree.nodes {
            match node {
                Node::Internal { feature, threshold, left, right, n_samples, impurity_decrease } => {
                    flat.feature.push(feature as i64);
                    flat.threshold.push(threshold);
                    flat.left.push(left as u32);
                    flat.right.push(right as u32);
                    flat.n_samples.push(n_samples);
                    flat.impurity_decrease.push(impurity_decrease);
                    flat.class_counts.push(Vec::new());
                }
                Node::Leaf { class_counts } => {
                    flat.feature.push(-1);
                    flat.threshold.push(0.0);
                    flat.left.push(0);
                    flat.right.push(0);
                    flat.n_samples.push(class_counts.iter().sum());
                    flat.impurity_decrease.push(0.0);
                    flat.class_counts.push(class_counts);
                }
            }
        }
        flat
    }
}

impl TryFrom<FlatTree> for Tree {
    type Error = ForestError;

    fn try_from(flat: FlatTree) -> Result<Self, Self::Error> {
        let n = flat.feature.len();
        let bad = |msg: &str| ForestError::Corrupt(msg.to_string());
        if [
            flat.threshold.len(),
            flat.left.len(),
            flat.right.len(),
            flat.n_samples.len(),
            flat.impurity_decrease.len(),
            flat.class_counts.len(),
        ]
        .iter()
        .any(|&l| l != n)
            || n == 0
        {
            return Err(bad("tree arrays have inconsistent lengths"));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if flat.feature[i] < 0 {
                if flat.class_counts[i].iter().all(|&c| c == 0) {
                    return Err(bad("leaf with empty class counts"));
                }
                nodes.push(Node::Leaf { class_counts: flat.class_counts[i].clone() });
            } else {
                let (left, right) = (flat.left[i] as usize, flat.right[i] as usize);
                // pre-order: children come after their parent
                if left <= i || right <= i || left >= n || right >= n {
                    return Err(bad("child index out of range"));
                }
                nodes.push(Node::Internal {
                    feature: flat.feature[i] as usize,
                    threshold: flat.threshold[i],
                    left,
                    right,
                    n_samples: flat.n_samples[i],
                    impurity_decrease: flat.impurity_decrease[i],
                });
            }
        }
        Ok(Tree { nodes, n_root_samples: flat.n_root_samples })
    }
}
