//! Pairwise-decomposable ranking losses.
//!
//! Every loss here has the form `L(s, R) = Σ_{a∈R} Σ_{b∉R} f(s[a], s[b])`
//! for an atom `f` that depends only on `s[b] - s[a]`.

use crate::label::RelevanceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairwiseLoss {
    /// `1(x_rel <= x_irr)`: a tie is a full mistake.
    Rank,
    /// `max(0, x_irr - x_rel + 1)`.
    Hinge,
    /// `log(1 + exp(x_irr - x_rel))`.
    Logistic,
}

impl PairwiseLoss {
    /// The atom `f(x_rel, x_irr)` for a relevant score and an irrelevant score.
    #[inline]
    pub fn atom(self, x_rel: f64, x_irr: f64) -> f64 {
        match self {
            PairwiseLoss::Rank => rank_atom(x_rel, x_irr),
            PairwiseLoss::Hinge => (x_irr - x_rel + 1.0).max(0.0),
            PairwiseLoss::Logistic => softplus(x_irr - x_rel),
        }
    }

    pub fn is_convex(self) -> bool {
        !matches!(self, PairwiseLoss::Rank)
    }
}

#[inline]
pub(crate) fn rank_atom(x_rel: f64, x_irr: f64) -> f64 {
    if x_rel <= x_irr {
        1.0
    } else {
        0.0
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-x})` without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn loss(pl: PairwiseLoss, s: &[f64], relevant: &RelevanceSet) -> f64 {
    let rel = relevant.indices();
    let irr = relevant.complement().indices();
    let mut total = 0.0;
    for &a in &rel {
        for &b in &irr {
            total += pl.atom(s[a], s[b]);
        }
    }
    total
}

/// Rank loss normalized by `|R| (m - |R|)`; zero when `R` is empty or full.
pub fn weighted_rank_loss(s: &[f64], relevant: &RelevanceSet) -> f64 {
    let r = relevant.len();
    let m = relevant.m();
    if r == 0 || r == m {
        return 0.0;
    }
    loss(PairwiseLoss::Rank, s, relevant) / (r * (m - r)) as f64
}

/// Gradient of `Σ w · log(1 + exp(s[b] - s[a]))` over the supplied
/// `(a, b, w)` pairs, `a` relevant and `b` irrelevant.
pub fn logistic_gradient(s: &[f64], pairs: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut g = vec![0.0; s.len()];
    for &(a, b, w) in pairs {
        debug_assert_ne!(a, b);
        let d = w * sigmoid(s[b] - s[a]);
        g[b] += d;
        g[a] -= d;
    }
    g
}
