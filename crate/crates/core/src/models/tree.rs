use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier with Gini impurity. Rows with `x[feature] <= threshold`
/// go left; the score is the positive fraction of the reached leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        self.nodes.push(Node::Leaf {
            positive_fraction: pos as f64 / rows.len() as f64,
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Best> {
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.y[r]).count();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<Best> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &f in features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for i in 1..n {
                left_pos += usize::from(sorted[i - 1].1);
                let (a, b) = (sorted[i - 1].0, sorted[i].0);
                if a == b || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let impurity = (i as f64 * gini(left_pos, i)
                    + (n - i) as f64 * gini(total_pos - left_pos, n - i))
                    / n as f64;
                if best.as_ref().map_or(true, |bst| impurity < bst.impurity) {
                    let mid = a + (b - a) / 2.0;
                    best = Some(Best {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        let pure = pos == 0 || pos == rows.len();
        let at_depth = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || at_depth || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return self.leaf(&rows);
        }
        let f = self.x.cols();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < f => {
                let mut v = sample(rng, f, m.max(1)).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..f).collect(),
        };
        let Some(split) = self.best_split(&rows, &features) else {
            return self.leaf(&rows);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, split.feature) <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive_fraction: f64::NAN,
        });
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

impl DecisionTree {
    /// Fit on the given `rows` of `x` (repeats allowed, as in a bootstrap
    /// sample). `rng` is only consulted when `max_features` subsamples.
    pub fn fit(x: &Matrix, y: &[bool], rows: &[usize], params: &TreeParams, rng: &mut Rng) -> Self {
        let mut b = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
        };
        if rows.is_empty() {
            b.nodes.push(Node::Leaf {
                positive_fraction: 0.5,
            });
        } else {
            b.grow(rows.to_vec(), 0, rng);
        }
        DecisionTree { nodes: b.nodes }
    }

    #[cfg(test)]
    pub(crate) fn constant(positive_fraction: f64) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { positive_fraction }],
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_fraction } => return positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.score_row(r)).collect()
    }
}
