//! Single decision tree: node layout, Gini split search, and growth.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        slot: usize,
        threshold: u64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training sample count per class at this leaf.
        histogram: Vec<u32>,
    },
}

/// A decision tree stored as a node array with the root at index 0.
/// Values at or below a split's threshold go left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(histogram: Vec<u32>) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { histogram }],
        }
    }

    pub fn leaf_histogram(&self, vector: &[u64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { histogram } => return histogram,
                Node::Split {
                    slot,
                    threshold,
                    left,
                    right,
                } => {
                    i = if vector[*slot] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// The class this tree votes for: argmax of the leaf histogram, ties
    /// to the lowest class index.
    pub fn vote(&self, vector: &[u64]) -> usize {
        argmax_lowest(self.leaf_histogram(vector))
    }

    /// Longest split-path length from the root to any leaf.
    pub fn depth(&self) -> usize {
        self.depth_from(0)
    }

    fn depth_from(&self, i: usize) -> usize {
        match &self.nodes[i] {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => {
                1 + self.depth_from(*left).max(self.depth_from(*right))
            }
        }
    }
}

/// Index of the largest count; ties resolve to the lowest index.
pub fn argmax_lowest(counts: &[u32]) -> usize {
    let mut best = 0;
    let mut best_count = counts[0];
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > best_count {
            best = i;
            best_count = c;
        }
    }
    best
}

fn gini(histogram: &[u32], n: usize) -> f64 {
    let n = n as f64;
    1.0 - histogram
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

/// Best threshold split of `idx` on one slot, returned as (weighted child
/// impurity, threshold). Thresholds are midpoints between consecutive
/// distinct values; both children must keep at least `min_leaf` samples.
fn best_split_on_slot(
    rows: &[&[u64]],
    labels: &[u32],
    idx: &[usize],
    slot: usize,
    n_classes: usize,
    min_leaf: usize,
) -> Option<(f64, u64)> {
    let mut pairs: Vec<(u64, u32)> = idx.iter().map(|&i| (rows[i][slot], labels[i])).collect();
    pairs.sort_unstable();
    let n = pairs.len();
    let mut right = vec![0u32; n_classes];
    for &(_, y) in &pairs {
        right[y as usize] += 1;
    }
    let mut left = vec![0u32; n_classes];
    let mut best: Option<(f64, u64)> = None;
    let mut i = 0;
    while i < n {
        let value = pairs[i].0;
        let mut j = i;
        while j < n && pairs[j].0 == value {
            left[pairs[j].1 as usize] += 1;
            right[pairs[j].1 as usize] -= 1;
            j += 1;
        }
        if j == n {
            break;
        }
        let (nl, nr) = (j, n - j);
        if nl >= min_leaf && nr >= min_leaf {
            let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            let threshold = value + (pairs[j].0 - value) / 2;
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, threshold));
            }
        }
        i = j;
    }
    best
}

pub struct GrowParams<'a> {
    pub max_depth: usize,
    pub n_attributes_per_split: usize,
    pub min_samples_leaf: usize,
    pub n_classes: usize,
    /// Slot indices splits may use.
    pub allowed_slots: &'a [usize],
}

pub fn grow_tree<R: Rng>(
    rows: &[&[u64]],
    labels: &[u32],
    sample: Vec<usize>,
    params: &GrowParams<'_>,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    build(rows, labels, sample, 0, params, rng, &mut nodes);
    Tree { nodes }
}

fn histogram_of(labels: &[u32], idx: &[usize], n_classes: usize) -> Vec<u32> {
    let mut hist = vec![0u32; n_classes];
    for &i in idx {
        hist[labels[i] as usize] += 1;
    }
    hist
}

fn build<R: Rng>(
    rows: &[&[u64]],
    labels: &[u32],
    idx: Vec<usize>,
    depth: usize,
    params: &GrowParams<'_>,
    rng: &mut R,
    nodes: &mut Vec<Node>,
) -> usize {
    let hist = histogram_of(labels, &idx, params.n_classes);
    let node_gini = gini(&hist, idx.len());
    if depth >= params.max_depth
        || node_gini == 0.0
        || idx.len() < 2 * params.min_samples_leaf
    {
        nodes.push(Node::Leaf { histogram: hist });
        return nodes.len() - 1;
    }

    let mtry = params.n_attributes_per_split.min(params.allowed_slots.len());
    let picks = rand::seq::index::sample(rng, params.allowed_slots.len(), mtry);
    let mut best: Option<(f64, usize, u64)> = None;
    for pick in picks {
        let slot = params.allowed_slots[pick];
        if let Some((score, threshold)) =
            best_split_on_slot(rows, labels, &idx, slot, params.n_classes, params.min_samples_leaf)
        {
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, slot, threshold));
            }
        }
    }

    // A split must strictly reduce impurity or the node stays a leaf.
    let Some((score, slot, threshold)) = best else {
        nodes.push(Node::Leaf { histogram: hist });
        return nodes.len() - 1;
    };
    if score >= node_gini - 1e-12 {
        nodes.push(Node::Leaf { histogram: hist });
        return nodes.len() - 1;
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        idx.into_iter().partition(|&i| rows[i][slot] <= threshold);
    let pos = nodes.len();
    nodes.push(Node::Leaf { histogram: Vec::new() });
    let left = build(rows, labels, left_idx, depth + 1, params, rng, nodes);
    let right = build(rows, labels, right_idx, depth + 1, params, rng, nodes);
    nodes[pos] = Node::Split {
        slot,
        threshold,
        left,
        right,
    };
    pos
}
