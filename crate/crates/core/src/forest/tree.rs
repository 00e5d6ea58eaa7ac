use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One node of a tree arena. Children always have larger indices than their
/// parent; the root is node 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Samples with `value <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        class: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub(crate) fn from_nodes(nodes: Vec<TreeNode>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn predict(&self, x: &[f32]) -> u32 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if (x[feature as usize] as f64) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Column-major training data shared by all trees.
pub(crate) struct Columns<'a> {
    pub columns: Vec<Vec<f32>>,
    pub labels: &'a [usize],
    pub classes: usize,
}

struct Candidate {
    impurity: f64,
    feature: u32,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.impurity < o.impurity
                    || (self.impurity == o.impurity
                        && (self.feature, self.threshold) < (o.feature, o.threshold))
            }
        }
    }
}

#[cfg(test)]
/// Weighted Gini impurity `n * (1 - sum p^2)` of a class histogram.
fn gini_mass(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    n as f64 - sq / n as f64
}

fn majority(counts: &[u32]) -> u32 {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u32
}

pub(crate) struct TreeBuilder<'a, 'd> {
    data: &'a Columns<'d>,
    features_per_split: usize,
    rng: &'a mut ChaCha8Rng,
    pool: Vec<u32>,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f32, u32)>,
}

impl<'a, 'd> TreeBuilder<'a, 'd> {
    pub fn new(data: &'a Columns<'d>, features_per_split: usize, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            data,
            features_per_split,
            rng,
            pool: (0..data.columns.len() as u32).collect(),
            nodes: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn build(mut self, samples: Vec<usize>) -> DecisionTree {
        self.grow(samples);
        DecisionTree::from_nodes(self.nodes)
    }

    fn histogram(&self, samples: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.data.classes];
        for &s in samples {
            counts[self.data.labels[s]] += 1;
        }
        counts
    }

    fn grow(&mut self, samples: Vec<usize>) -> u32 {
        let id = self.nodes.len() as u32;
        let counts = self.histogram(&samples);
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present <= 1 {
            self.nodes.push(TreeNode::Leaf {
                class: majority(&counts),
            });
            return id;
        }
        match self.best_split(&samples, &counts) {
            None => {
                self.nodes.push(TreeNode::Leaf {
                    class: majority(&counts),
                });
                id
            }
            Some(c) => {
                self.nodes.push(TreeNode::Leaf { class: 0 });
                let column = &self.data.columns[c.feature as usize];
                let (left, right): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&s| (column[s] as f64) <= c.threshold);
                let l = self.grow(left);
                let r = self.grow(right);
                self.nodes[id as usize] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: l,
                    right: r,
                };
                id
            }
        }
    }

    /// Draws features without replacement until `features_per_split`
    /// non-constant ones have been evaluated or all features are exhausted.
    fn best_split(&mut self, samples: &[usize], counts: &[u32]) -> Option<Candidate> {
        let total = samples.len() as u32;
        let n_features = self.pool.len();
        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        let mut left = vec![0u32; counts.len()];
        for i in 0..n_features {
            if evaluated == self.features_per_split {
                break;
            }
            let j = self.rng.random_range(i..n_features);
            self.pool.swap(i, j);
            let feature = self.pool[i];
            let column = &self.data.columns[feature as usize];

            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&s| (column[s], self.data.labels[s] as u32)));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            evaluated += 1;

            left.iter_mut().for_each(|c| *c = 0);
            let mut right = counts.to_vec();
            let mut sq_left: u64 = 0;
            let mut sq_right: u64 = counts.iter().map(|&c| c as u64 * c as u64).sum();
            for k in 0..self.scratch.len() - 1 {
                let (value, label) = self.scratch[k];
                let l = &mut left[label as usize];
                let r = &mut right[label as usize];
                sq_left += 2 * *l as u64 + 1;
                sq_right -= 2 * *r as u64 - 1;
                *l += 1;
                *r -= 1;
                let next = self.scratch[k + 1].0;
                if next == value {
                    continue;
                }
                let n_left = k as u64 + 1;
                let n_right = total as u64 - n_left;
                let impurity = (n_left as f64 - sq_left as f64 / n_left as f64)
                    + (n_right as f64 - sq_right as f64 / n_right as f64);
                let candidate = Candidate {
                    impurity,
                    feature,
                    // Exact in f64 and strictly between the two f32 neighbours.
                    threshold: (value as f64 + next as f64) / 2.0,
                };
                if candidate.beats(&best) {
                    best = Some(candidate);
                }
            }
        }
        best
    }
}
