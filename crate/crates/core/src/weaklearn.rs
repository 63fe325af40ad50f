//! Online weak learners.
//!
//! A weak learner predicts a distribution over labels and is trained on a
//! full cost vector. [`StumpLearner`] turns each cost vector into weighted
//! single-label examples (`w_l = max cost - cost[l]`) and grows a shallow
//! Hoeffding-style tree over a random subset of the features.

use rand::seq::index;
use rand::Rng;

use crate::error::{contract, Error, Result};

/// A probability distribution over `[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakPrediction(Vec<f64>);

impl WeakPrediction {
    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total.is_nan() || total <= 0.0 {
            return contract("weak prediction needs finite non-negative weights with positive mass");
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Costs fed to a weak learner, one per label.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.iter().any(|c| !c.is_finite()) {
            return contract("cost vector has a non-finite entry");
        }
        Ok(Self(costs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `cost · h`, the loss a learner suffers for prediction `h`.
    pub fn dot(&self, h: &WeakPrediction) -> f64 {
        self.0.iter().zip(h.as_slice()).map(|(c, p)| c * p).sum()
    }

    /// Per-label importance weights `max_l' cost[l'] - cost[l]`.
    pub fn label_weights(&self) -> Vec<f64> {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.0.iter().map(|c| max - c).collect()
    }
}

pub trait WeakLearner: Send {
    fn predict(&self, x: &[f64]) -> Result<WeakPrediction>;
    fn update(&mut self, x: &[f64], cost: &CostVector) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StumpConfig {
    /// Features sampled per learner (all of them if the data has fewer).
    pub features: usize,
    /// Threshold candidates per feature.
    pub candidates: usize,
    /// Values per feature collected before the candidate grid is fixed.
    pub sketch_size: usize,
    /// Weighted examples between split attempts.
    pub grace_period: usize,
    /// Hoeffding bound confidence.
    pub delta: f64,
    /// Split anyway once the bound falls below this.
    pub tie_threshold: f64,
    /// Additive smoothing on leaf label weights.
    pub smoothing: f64,
    pub max_depth: usize,
}

impl Default for StumpConfig {
    fn default() -> Self {
        Self {
            features: 20,
            candidates: 8,
            sketch_size: 64,
            grace_period: 50,
            delta: 0.01,
            tie_threshold: 0.1,
            smoothing: 1.0,
            max_depth: 1,
        }
    }
}

#[derive(Debug, Clone)]
struct LeafStats {
    depth: usize,
    /// Per selected feature, values seen before the grid is fixed.
    sketch: Vec<Vec<f64>>,
    /// Per selected feature, ascending thresholds. Empty until the sketch fills.
    thresholds: Vec<Vec<f64>>,
    /// `[feature][bin][label]` flattened; bin `c` holds values in
    /// `(t_{c-1}, t_c]`, the last bin everything above the top threshold.
    bins: Vec<f64>,
    bin_total: Vec<f64>,
    seen: usize,
    since_check: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        hist: Vec<f64>,
        stats: Box<LeafStats>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Streaming decision stump (or shallow tree) over a random feature subset.
#[derive(Debug, Clone)]
pub struct StumpLearner {
    m: usize,
    dim: usize,
    features: Vec<usize>,
    config: StumpConfig,
    nodes: Vec<Node>,
}

impl StumpLearner {
    pub fn new<R: Rng + ?Sized>(m: usize, dim: usize, config: StumpConfig, rng: &mut R) -> Result<Self> {
        if m < 2 || dim == 0 {
            return Err(Error::Config(format!("stump needs m >= 2 and dim >= 1, got m={m} dim={dim}")));
        }
        let mut features = if dim <= config.features {
            (0..dim).collect()
        } else {
            index::sample(rng, dim, config.features).into_vec()
        };
        features.sort_unstable();
        let mut learner = Self {
            m,
            dim,
            features,
            config,
            nodes: Vec::new(),
        };
        let root = learner.new_leaf(0, vec![0.0; m]);
        learner.nodes.push(root);
        Ok(learner)
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn new_leaf(&self, depth: usize, hist: Vec<f64>) -> Node {
        Node::Leaf {
            hist,
            stats: Box::new(LeafStats {
                depth,
                sketch: vec![Vec::with_capacity(self.config.sketch_size); self.features.len()],
                thresholds: Vec::new(),
                bins: Vec::new(),
                bin_total: vec![0.0; self.m],
                seen: 0,
                since_check: 0,
            }),
        }
    }

    fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x[*feature] <= *threshold { *left } else { *right };
        }
        at
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn try_split(&mut self, at: usize) {
        let (m, n_feat) = (self.m, self.features.len());
        let Node::Leaf { stats, .. } = &self.nodes[at] else {
            return;
        };
        if stats.depth >= self.config.max_depth || stats.thresholds.is_empty() {
            return;
        }
        let total_w: f64 = stats.bin_total.iter().sum();
        if total_w <= 0.0 {
            return;
        }
        let parent_entropy = entropy(&stats.bin_total);
        let n_bins = self.config.candidates + 1;
        // (gain, feature slot, threshold index, left hist)
        let mut best: Option<(f64, usize, usize, Vec<f64>)> = None;
        let mut second = 0.0f64;
        for f in 0..n_feat {
            let mut left = vec![0.0; m];
            for (c, &t) in stats.thresholds[f].iter().enumerate() {
                let _ = t;
                let bin = &stats.bins[(f * n_bins + c) * m..(f * n_bins + c + 1) * m];
                for l in 0..m {
                    left[l] += bin[l];
                }
                let right: Vec<f64> = stats.bin_total.iter().zip(&left).map(|(a, b)| (a - b).max(0.0)).collect();
                let wl: f64 = left.iter().sum();
                let wr = total_w - wl;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let gain = parent_entropy - (wl / total_w) * entropy(&left) - (wr / total_w) * entropy(&right);
                match &best {
                    Some((g, ..)) if gain <= *g => second = second.max(gain),
                    _ => {
                        if let Some((g, ..)) = &best {
                            second = second.max(*g);
                        }
                        best = Some((gain, f, c, left.clone()));
                    }
                }
            }
        }
        let Some((gain, f, c, left_hist)) = best else {
            return;
        };
        let range = (m as f64).log2();
        let eps = (range * range * (1.0 / self.config.delta).ln() / (2.0 * stats.seen as f64)).sqrt();
        if gain <= 0.0 || !(gain - second > eps || eps < self.config.tie_threshold) {
            return;
        }
        let depth = stats.depth + 1;
        let threshold = stats.thresholds[f][c];
        let right_hist: Vec<f64> = stats.bin_total.iter().zip(&left_hist).map(|(a, b)| (a - b).max(0.0)).collect();
        let feature = self.features[f];
        let left = self.nodes.len();
        let left_node = self.new_leaf(depth, left_hist);
        let right_node = self.new_leaf(depth, right_hist);
        self.nodes.push(left_node);
        self.nodes.push(right_node);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right: left + 1,
        };
    }
}

fn entropy(hist: &[f64]) -> f64 {
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

/// Evenly spaced quantiles of `values`, deduplicated, at most `count` of them.
fn quantile_grid(values: &mut [f64], count: usize) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
    let n = values.len();
    let mut grid: Vec<f64> = (1..=count).map(|i| values[(i * n / (count + 1)).min(n - 1)]).collect();
    grid.dedup();
    grid
}

impl WeakLearner for StumpLearner {
    fn predict(&self, x: &[f64]) -> Result<WeakPrediction> {
        self.check_dim(x)?;
        let Node::Leaf { hist, .. } = &self.nodes[self.leaf_of(x)] else {
            unreachable!("leaf_of stops at a leaf")
        };
        let a = self.config.smoothing;
        WeakPrediction::from_weights(hist.iter().map(|w| w + a).collect())
    }

    fn update(&mut self, x: &[f64], cost: &CostVector) -> Result<()> {
        self.check_dim(x)?;
        if cost.as_slice().len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: cost.as_slice().len(),
            });
        }
        let weights = cost.label_weights();
        if weights.iter().all(|&w| w <= 0.0) {
            return Ok(());
        }
        let at = self.leaf_of(x);
        let (m, n_bins, sketch_size, candidates) = (
            self.m,
            self.config.candidates + 1,
            self.config.sketch_size,
            self.config.candidates,
        );
        let features = &self.features;
        let Node::Leaf { hist, stats } = &mut self.nodes[at] else {
            unreachable!("leaf_of stops at a leaf")
        };
        for (h, w) in hist.iter_mut().zip(&weights) {
            *h += w;
        }
        if stats.thresholds.is_empty() {
            for (slot, &f) in features.iter().enumerate() {
                stats.sketch[slot].push(x[f]);
            }
            if stats.sketch[0].len() >= sketch_size {
                stats.thresholds = stats
                    .sketch
                    .iter_mut()
                    .map(|v| quantile_grid(v, candidates))
                    .collect();
                stats.sketch = Vec::new();
                stats.bins = vec![0.0; features.len() * n_bins * m];
            }
            return Ok(());
        }
        for (slot, &f) in features.iter().enumerate() {
            let bin = stats.thresholds[slot].partition_point(|&t| t < x[f]);
            let row = &mut stats.bins[(slot * n_bins + bin) * m..(slot * n_bins + bin + 1) * m];
            for (b, w) in row.iter_mut().zip(&weights) {
                *b += w;
            }
        }
        for (t, w) in stats.bin_total.iter_mut().zip(&weights) {
            *t += w;
        }
        stats.seen += 1;
        stats.since_check += 1;
        if stats.since_check >= self.config.grace_period {
            stats.since_check = 0;
            self.try_split(at);
        }
        Ok(())
    }
}
