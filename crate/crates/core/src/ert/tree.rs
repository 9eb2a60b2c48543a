use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use super::SplitRule;
use crate::error::{Error, Result};

/// Tree node in pre-order layout: a split's left child is the next node,
/// its right child sits at index `right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        /// Samples with `x[feature] < threshold` go left.
        threshold: f64,
        right: u32,
    },
    Leaf {
        value: f64,
        n_samples: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Rebuild a tree from its pre-order node array, checking that every
    /// split has both children and the array is fully consumed.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        fn walk(nodes: &[Node], at: usize, n_features: usize) -> Result<usize> {
            match nodes.get(at) {
                None => Err(Error::Inconsistent(format!("tree node {at} missing"))),
                Some(Node::Leaf { .. }) => Ok(at + 1),
                Some(&Node::Split { feature, right, .. }) => {
                    if feature as usize >= n_features {
                        return Err(Error::Inconsistent(format!(
                            "node {at} splits on feature {feature} of {n_features}"
                        )));
                    }
                    let after_left = walk(nodes, at + 1, n_features)?;
                    if after_left != right as usize {
                        return Err(Error::Inconsistent(format!(
                            "node {at}: right child at {right}, left subtree ends at {after_left}"
                        )));
                    }
                    walk(nodes, after_left, n_features)
                }
            }
        }
        if walk(&nodes, 0, n_features)? != nodes.len() {
            return Err(Error::Inconsistent("trailing tree nodes".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    at = if x[feature as usize] < threshold {
                        at + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> (usize, usize) {
            match nodes[at] {
                Node::Leaf { .. } => (1, at + 1),
                Node::Split { right, .. } => {
                    let (dl, _) = go(nodes, at + 1);
                    let (dr, end) = go(nodes, right as usize);
                    (1 + dl.max(dr), end)
                }
            }
        }
        go(&self.nodes, 0).0
    }
}

/// Feature-major copy of the training matrix.
pub(super) struct Columns<'a> {
    data: Vec<f64>,
    n: usize,
    pub targets: &'a [f64],
}

impl<'a> Columns<'a> {
    pub fn new(samples: &super::Samples<'a>) -> Self {
        let (n, p) = (samples.len(), samples.n_features());
        let mut data = vec![0.0; n * p];
        for (i, row) in samples.features().chunks_exact(p).enumerate() {
            for (j, &x) in row.iter().enumerate() {
                data[j * n + i] = x;
            }
        }
        Self {
            data,
            n,
            targets: samples.targets(),
        }
    }

    #[inline]
    fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn n_features(&self) -> usize {
        self.data.len() / self.n.max(1)
    }
}

pub(super) struct TreeParams {
    pub rule: SplitRule,
    pub k: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher variance reduction wins; ties go to the lower feature index,
    /// then the lower threshold.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.score > o.score
                    || (self.score == o.score
                        && (self.feature < o.feature
                            || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// Between-group sum of squares `n_l n_r / n (mean_l - mean_r)^2`, which is
/// the SSE reduction of the split.
#[inline]
fn sse_reduction(n_l: usize, sum_l: f64, n: usize, sum: f64) -> f64 {
    let n_r = n - n_l;
    let mean_l = sum_l / n_l as f64;
    let mean_r = (sum - sum_l) / n_r as f64;
    let d = mean_l - mean_r;
    (n_l as f64) * (n_r as f64) / n as f64 * d * d
}

/// Uniform in the open interval (0, 1).
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

struct Builder<'c, 'a> {
    cols: &'c Columns<'a>,
    params: &'c TreeParams,
    rng: &'c mut ChaCha8Rng,
    importances: &'c mut [f64],
    feature_order: Vec<usize>,
    /// Scratch buffers holding the current node's values.
    xs: Vec<f64>,
    ys: Vec<f64>,
    pairs: Vec<(f64, f64)>,
    low: Vec<f64>,
    high: Vec<f64>,
    right: Vec<u32>,
    /// Bitset of features constant in the current node.
    known_constant: Vec<u64>,
}

fn count_left(xs: &[f64], ys: &[f64], threshold: f64) -> (usize, f64) {
    let (mut n_l, mut sum_l) = (0usize, 0.0);
    // branch-free: with a random threshold the comparison is a coin flip
    for (&x, &y) in xs.iter().zip(ys) {
        let left = x < threshold;
        n_l += left as usize;
        sum_l += if left { y } else { 0.0 };
    }
    (n_l, sum_l)
}

/// The `m`-th smallest and `m`-th largest of `xs` (1-based), by keeping the
/// `m` extreme values seen so far in two sorted buffers. Cheap for the small
/// leaf sizes used here.
fn order_statistics(xs: &[f64], m: usize, low: &mut Vec<f64>, high: &mut Vec<f64>) -> (f64, f64) {
    low.clear();
    high.clear();
    for &x in xs {
        // low: ascending, holds the m smallest
        if low.len() < m || x < low[m - 1] {
            let at = low.partition_point(|&v| v <= x);
            low.insert(at, x);
            low.truncate(m);
        }
        // high: descending, holds the m largest
        if high.len() < m || x > high[m - 1] {
            let at = high.partition_point(|&v| v >= x);
            high.insert(at, x);
            high.truncate(m);
        }
    }
    (low[m - 1], high[m - 1])
}

impl Builder<'_, '_> {
    fn find_split(&mut self, idx: &[u32], sum: f64) -> Option<Candidate> {
        let p = self.feature_order.len();
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        let targets = self.cols.targets;
        self.ys.clear();
        self.ys.extend(idx.iter().map(|&i| targets[i as usize]));
        let mut best: Option<Candidate> = None;
        let mut visited = 0usize;
        for drawn in 0..p {
            let j = self.rng.random_range(drawn..p);
            self.feature_order.swap(drawn, j);
            let f = self.feature_order[drawn];
            let bit = 1u64 << (f % 64);
            if self.known_constant[f / 64] & bit != 0 {
                continue;
            }
            let col = self.cols.column(f);

            self.xs.clear();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in idx {
                let x = col[i as usize];
                if x < lo {
                    lo = x;
                }
                if x > hi {
                    hi = x;
                }
                self.xs.push(x);
            }
            if lo >= hi {
                // constant here and in every descendant; does not count towards k
                self.known_constant[f / 64] |= bit;
                continue;
            }
            visited += 1;

            match self.params.rule {
                SplitRule::Random => {
                    // Uniform over the thresholds that leave min_leaf samples on
                    // each side. A draw over (lo, hi) that lands there is already
                    // uniform on it, so the order statistics are only needed when
                    // the first draw misses.
                    let mut threshold = lo + open_unit(self.rng) * (hi - lo);
                    let (mut n_l, mut sum_l) = count_left(&self.xs, &self.ys, threshold);
                    if n_l < min_leaf || n - n_l < min_leaf {
                        let (a, b) = order_statistics(&self.xs, min_leaf, &mut self.low, &mut self.high);
                        if a >= b {
                            continue;
                        }
                        threshold = a + open_unit(self.rng) * (b - a);
                        (n_l, sum_l) = count_left(&self.xs, &self.ys, threshold);
                    }
                    if n_l >= min_leaf && n - n_l >= min_leaf {
                        let c = Candidate {
                            score: sse_reduction(n_l, sum_l, n, sum),
                            feature: f,
                            threshold,
                        };
                        if c.beats(&best) {
                            best = Some(c);
                        }
                    }
                }
                SplitRule::Best => {
                    self.pairs.clear();
                    self.pairs
                        .extend(self.xs.iter().copied().zip(self.ys.iter().copied()));
                    self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                    let mut sum_l = 0.0;
                    for s in 0..n - 1 {
                        sum_l += self.pairs[s].1;
                        let n_l = s + 1;
                        let (a, b) = (self.pairs[s].0, self.pairs[s + 1].0);
                        if a == b || n_l < min_leaf || n - n_l < min_leaf {
                            continue;
                        }
                        let mut threshold = a + (b - a) / 2.0;
                        if threshold <= a {
                            threshold = b;
                        }
                        let c = Candidate {
                            score: sse_reduction(n_l, sum_l, n, sum),
                            feature: f,
                            threshold,
                        };
                        if c.beats(&best) {
                            best = Some(c);
                        }
                    }
                }
            }
            if visited == self.params.k {
                break;
            }
        }
        best
    }

    fn build(mut self, mut idx: Vec<u32>) -> Tree {
        struct Frame {
            start: usize,
            end: usize,
            depth: usize,
            /// Split node whose `right` must point at this frame's node.
            parent: Option<usize>,
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut stack = vec![Frame {
            start: 0,
            end: idx.len(),
            depth: 0,
            parent: None,
        }];
        // constant-feature masks, one per stacked frame in the same order
        let words = self.known_constant.len();
        let mut masks = vec![0u64; words];
        while let Some(frame) = stack.pop() {
            let at = stack.len() * words;
            self.known_constant.copy_from_slice(&masks[at..at + words]);
            masks.truncate(at);
            let here = nodes.len();
            if let Some(parent) = frame.parent {
                if let Node::Split { right, .. } = &mut nodes[parent] {
                    *right = here as u32;
                }
            }
            let slice = &mut idx[frame.start..frame.end];
            let n = slice.len();
            let targets = self.cols.targets;
            let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for &i in slice.iter() {
                let y = targets[i as usize];
                sum += y;
                if y < lo {
                    lo = y;
                }
                if y > hi {
                    hi = y;
                }
            }
            let leaf = Node::Leaf {
                value: sum / n as f64,
                n_samples: n as u32,
            };
            let too_small = n < 2 * self.params.min_samples_leaf;
            let too_deep = self.params.max_depth.is_some_and(|d| frame.depth >= d);
            if too_small || too_deep || lo == hi {
                nodes.push(leaf);
                continue;
            }
            let Some(split) = self.find_split(slice, sum) else {
                nodes.push(leaf);
                continue;
            };

            // stable, so sample ids stay ascending and column reads stay sequential
            let col = self.cols.column(split.feature);
            let mut mid = 0;
            let mut r = 0;
            self.right.resize(n, 0);
            for s in 0..n {
                let i = slice[s];
                let left = col[i as usize] < split.threshold;
                // both writes happen; only one cursor advances
                slice[mid] = i;
                self.right[r] = i;
                mid += left as usize;
                r += !left as usize;
            }
            slice[mid..].copy_from_slice(&self.right[..r]);
            self.importances[split.feature] += split.score;
            nodes.push(Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                right: u32::MAX,
            });
            stack.push(Frame {
                start: frame.start + mid,
                end: frame.end,
                depth: frame.depth + 1,
                parent: Some(here),
            });
            stack.push(Frame {
                start: frame.start,
                end: frame.start + mid,
                depth: frame.depth + 1,
                parent: None,
            });
            for _ in 0..2 {
                masks.extend_from_slice(&self.known_constant);
            }
        }
        Tree { nodes }
    }
}

/// Grow one tree on the samples listed in `idx` (duplicates allowed).
/// Impurity decreases are added to `importances`.
pub(super) fn grow(
    cols: &Columns<'_>,
    mut idx: Vec<u32>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    importances: &mut [f64],
) -> Tree {
    let builder = Builder {
        cols,
        params,
        rng,
        importances,
        feature_order: (0..cols.n_features()).collect(),
        xs: Vec::new(),
        ys: Vec::new(),
        pairs: Vec::new(),
        low: Vec::new(),
        high: Vec::new(),
        right: Vec::new(),
        known_constant: vec![0; cols.n_features().div_ceil(64)],
    };
    idx.sort_unstable();
    builder.build(idx)
}
