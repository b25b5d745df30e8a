//! Least-squares regression trees grown by exhaustive split search.

use serde::Serialize;

/// Splits whose reduction of the squared error is below this fraction of
/// the node's total are not taken.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTree {
    root: Node,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// `sum_l^2 / n_l + sum_r^2 / n_r`; larger is a smaller squared error.
    score: f64,
}

impl RegressionTree {
    /// Fits `y` on rows of `x`. Thresholds are midpoints between
    /// consecutive distinct feature values; among equally good splits the
    /// lowest feature index, then the lowest threshold, wins.
    pub fn fit(x: &[Vec<f64>], y: &[f64], max_depth: usize, min_samples_leaf: usize) -> Self {
        let idx: Vec<usize> = (0..y.len()).collect();
        Self {
            root: grow(x, y, &idx, max_depth, min_samples_leaf.max(1)),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &[usize], depth: usize, min_leaf: usize) -> Node {
    let leaf = Node::Leaf { value: mean(y, idx) };
    if depth == 0 || idx.len() < 2 * min_leaf {
        return leaf;
    }
    let Some(best) = best_split(x, y, idx, min_leaf) else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][best.feature] <= best.threshold);
    Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: Box::new(grow(x, y, &l, depth - 1, min_leaf)),
        right: Box::new(grow(x, y, &r, depth - 1, min_leaf)),
    }
}

fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], min_leaf: usize) -> Option<Candidate> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let sum_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let base = total * total / n as f64;
    let sse = sum_sq - base;
    if !(sse > 0.0) {
        return None;
    }
    let mut best: Option<Candidate> = None;
    let mut order = idx.to_vec();
    for f in 0..x[idx[0]].len() {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..n {
            left += y[order[k - 1]];
            let (lo, hi) = (x[order[k - 1]][f], x[order[k]][f]);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = total - left;
            let score = left * left / k as f64 + right * right / (n - k) as f64;
            if best.is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    score,
                });
            }
        }
    }
    best.filter(|b| b.score - base > MIN_RELATIVE_GAIN * sse)
}
