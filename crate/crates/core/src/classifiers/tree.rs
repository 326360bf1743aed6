//! CART decision tree with Gini impurity.
//!
//! Split candidates are midpoints between consecutive distinct values of a
//! feature; rows with `x <= threshold` go left. Split quality is compared in
//! exact integer arithmetic, so equal-gain splits really tie and the
//! tie-break (lowest feature, then lowest threshold) is deterministic.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes live in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

/// Per-split feature subsampling used by the forest.
pub(crate) struct FeatureBag<'a, R: Rng> {
    pub rng: &'a mut R,
    pub max_features: usize,
}

/// Split score `Σ_c l_c²/n_L + Σ_c r_c²/n_R` kept as an exact fraction.
/// A larger score means a lower weighted Gini impurity.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Score {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Score) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    score: Score,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        use std::cmp::Ordering::*;
        match self.score.cmp(&other.score) {
            Greater => true,
            Less => false,
            Equal => (self.feature, self.threshold) < (other.feature, other.threshold),
        }
    }
}

fn majority(counts: [usize; 2]) -> u8 {
    u8::from(counts[1] > counts[0])
}

fn counts_of(rows: &[usize], y: &[u8]) -> [usize; 2] {
    let mut c = [0; 2];
    for &r in rows {
        c[y[r] as usize] += 1;
    }
    c
}

/// Midpoint of two consecutive distinct values that still separates them.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

/// Best threshold on one feature, or `None` if the feature is constant here.
fn best_on_feature(x: &[Vec<f64>], y: &[u8], rows: &[usize], feature: usize, total: [usize; 2]) -> Option<Candidate> {
    let mut order: Vec<(f64, u8)> = rows.iter().map(|&r| (x[r][feature], y[r])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut left = [0usize; 2];
    let mut best: Option<Candidate> = None;
    for i in 0..order.len() - 1 {
        left[order[i].1 as usize] += 1;
        let (lo, hi) = (order[i].0, order[i + 1].0);
        if lo == hi {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let cand = Candidate {
            score: Score::new(left, right),
            feature,
            threshold: midpoint(lo, hi),
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best
}

struct Builder<'a, 'r, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: TreeParams,
    bag: Option<FeatureBag<'r, R>>,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, '_, R> {
    fn find_split(&mut self, rows: &[usize], total: [usize; 2]) -> Option<Candidate> {
        let width = self.x[0].len();
        let mut features: Vec<usize> = (0..width).collect();
        let limit = match &mut self.bag {
            Some(bag) => {
                features.shuffle(bag.rng);
                bag.max_features.min(width)
            }
            None => width,
        };
        let mut best: Option<Candidate> = None;
        // Like common CART implementations, keep drawing features past the
        // budget while none of the drawn ones admits a split.
        for (visited, &f) in features.iter().enumerate() {
            if visited >= limit && best.is_some() {
                break;
            }
            if let Some(c) = best_on_feature(self.x, self.y, rows, f, total) {
                if best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = counts_of(&rows, self.y);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(counts),
            counts,
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return id;
        }
        // An impure node is split even when the best split has zero gain
        // (e.g. balanced XOR): a later level may still separate the classes.
        let Some(split) = self.find_split(&rows, counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn grow_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
    bag: Option<FeatureBag<'_, R>>,
) -> DecisionTree {
    let mut builder = Builder {
        x,
        y,
        params: *params,
        bag,
        nodes: Vec::new(),
    };
    builder.build(rows, 0);
    DecisionTree {
        nodes: builder.nodes,
        n_features: x[0].len(),
    }
}

pub fn train_tree(x: &[Vec<f64>], y: &[u8], params: &TreeParams) -> Result<DecisionTree, ModelError> {
    check_training_set(x, y)?;
    if params.max_depth < 1 || params.min_samples_split < 2 {
        return Err(ModelError::InvalidParams(
            "max_depth must be >= 1 and min_samples_split >= 2".into(),
        ));
    }
    Ok(grow_tree::<rand_chacha::ChaCha8Rng>(x, y, (0..x.len()).collect(), params, None))
}

impl DecisionTree {
    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        match self.leaf_for(row) {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!("walk ends at a leaf"),
        }
    }

    /// Features tested by at least one internal node.
    pub fn used_features(&self) -> BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts, .. } => Some(*counts),
            Node::Split { .. } => None,
        })
    }
}
