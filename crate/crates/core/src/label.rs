//! Label-space primitives.
//!
//! Labels are numbered `1..=m` at every public boundary and `0..m`
//! internally. [`LabelId`] is the only type that speaks the 1-based
//! convention; everything else works with plain indices.

use std::fmt;
use std::ops::Deref;

use crate::error::{contract, Result};

/// A label in `[m]`, stored 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(u32);

impl LabelId {
    /// Builds a label from its 1-based number.
    pub fn new(one_based: usize) -> Result<Self> {
        if one_based == 0 || one_based > u32::MAX as usize {
            return contract(format!("label {one_based} is not 1-based"));
        }
        Ok(Self(one_based as u32))
    }

    pub fn from_index(index: usize) -> Self {
        Self(index as u32 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The relevant labels of one example, as a membership mask over `[m]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelevanceSet {
    mask: Vec<bool>,
}

impl RelevanceSet {
    pub fn empty(m: usize) -> Self {
        Self {
            mask: vec![false; m],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    /// Builds from 0-based indices; fails if any index is outside `[0, m)`.
    pub fn from_indices(m: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; m];
        for &i in indices {
            if i >= m {
                return contract(format!("label index {i} outside [0, {m})"));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn from_labels(m: usize, labels: &[LabelId]) -> Result<Self> {
        let idx: Vec<usize> = labels.iter().map(|l| l.index()).collect();
        Self::from_indices(m, &idx)
    }

    pub fn m(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// 0-based indices of the relevant labels, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.mask[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|&b| !b).collect(),
        }
    }
}

/// Per-label real scores. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return contract(format!("score {} is not finite", i + 1));
        }
        Ok(Self(scores))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + e_l` for a 0-based label index.
    pub fn plus_unit(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v[index] += 1.0;
        Self(v)
    }

    /// `self + weight * other`, entrywise.
    pub fn add_scaled(&mut self, weight: f64, other: &[f64]) {
        for (s, o) in self.0.iter_mut().zip(other) {
            *s += weight * o;
        }
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A permutation of `[m]`, highest-ranked label first. Stores 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn identity(m: usize) -> Self {
        Self {
            order: (0..m).collect(),
        }
    }

    /// Validates that `order` is a permutation of `0..order.len()`.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        let mut seen = vec![false; m];
        for &l in &order {
            if l >= m || seen[l] {
                return contract(format!("{order:?} is not a permutation of [0, {m})"));
            }
            seen[l] = true;
        }
        Ok(Self { order })
    }

    /// Builds from 1-based labels, e.g. `(2, 1, 3)`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut order = Vec::with_capacity(labels.len());
        for &l in labels {
            order.push(LabelId::new(l)?.index());
        }
        Self::from_order(order)
    }

    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(Self::from_order(order.clone()).is_ok());
        Self { order }
    }

    pub fn m(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn labels(&self) -> Vec<LabelId> {
        self.order.iter().map(|&i| LabelId::from_index(i)).collect()
    }

    /// The first `k` labels. Returned in rank order, but callers should
    /// treat the result as a set.
    pub fn top_k(&self, k: usize) -> Result<&[usize]> {
        if k == 0 || k > self.m() {
            return contract(format!("k = {k} outside [1, {}]", self.m()));
        }
        Ok(&self.order[..k])
    }

    pub fn top_k_mask(&self, k: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.m()];
        for &l in self.top_k(k)? {
            mask[l] = true;
        }
        Ok(mask)
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.order.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Orders labels by descending score. Ties go to the smaller label.
pub fn rank_of_scores(s: &[f64]) -> Ranking {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    Ranking { order }
}

/// Relevance bits revealed for the top-k of the played ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    revealed: Vec<(usize, bool)>,
}

impl Feedback {
    /// `revealed` holds 0-based label indices; labels must be distinct.
    pub fn new(revealed: Vec<(usize, bool)>) -> Result<Self> {
        let mut labels: Vec<usize> = revealed.iter().map(|&(l, _)| l).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return contract("feedback repeats a label");
        }
        Ok(Self { revealed })
    }

    pub fn revealed(&self) -> &[(usize, bool)] {
        &self.revealed
    }

    pub fn len(&self) -> usize {
        self.revealed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revealed.is_empty()
    }

    pub fn relevant(&self) -> impl Iterator<Item = usize> + '_ {
        self.revealed.iter().filter(|r| r.1).map(|r| r.0)
    }

    pub fn irrelevant(&self) -> impl Iterator<Item = usize> + '_ {
        self.revealed.iter().filter(|r| !r.1).map(|r| r.0)
    }

    /// Revealed labels, ascending.
    pub fn labels(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.revealed.iter().map(|r| r.0).collect();
        l.sort_unstable();
        l
    }
}
