//! Randomized prediction and importance-weighted pair estimators.
//!
//! With probability `1 - rho` the booster plays its own ranking. Otherwise it
//! explores, either with a uniformly random permutation or with two
//! successive top-k/bottom swaps. Every unordered label pair then has a
//! known, positive probability of landing inside the revealed top-k, and any
//! pairwise-decomposable quantity can be estimated without bias by weighting
//! the revealed pairs with the inverse of that probability.
//!
//! Per round the PRNG is consumed in a fixed order: one `f64` explore coin,
//! then either a Fisher-Yates shuffle (uniform) or two `(inside, outside)`
//! position draws (single swap).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::label::{Feedback, LabelId, Ranking, ScoreVector};

/// Lower and upper clip applied to inclusion probabilities when clipping is on.
pub const PROB_CLIP: (f64, f64) = (0.005, 0.995);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Uniform,
    SingleSwap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationScheme {
    kind: SchemeKind,
    rho: f64,
    k: usize,
}

impl RandomizationScheme {
    /// Validates the scheme against a label count `m`.
    ///
    /// `rho = 0` is accepted only together with `k = m`, the full-information
    /// configuration; any other `k` would leave pairs with zero probability.
    pub fn new(kind: SchemeKind, rho: f64, k: usize, m: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Config(format!("rho = {rho} outside [0, 1)")));
        }
        if rho == 0.0 && k != m {
            return Err(Error::Config(
                "rho = 0 requires k = m (no exploration, full feedback)".into(),
            ));
        }
        if k > m {
            return Err(Error::Config(format!("k = {k} exceeds m = {m}")));
        }
        match kind {
            SchemeKind::Uniform if k < 2 => {
                return Err(Error::Config(format!("uniform scheme needs k >= 2, got {k}")));
            }
            SchemeKind::SingleSwap => {
                if k < 3 {
                    return Err(Error::Config(format!("single-swap needs k >= 3, got {k}")));
                }
                if rho > 0.0 && k == m {
                    return Err(Error::Config("single-swap needs k < m to swap".into()));
                }
                if rho >= 0.25 {
                    return Err(Error::Config(format!("single-swap needs rho < 0.25, got {rho}")));
                }
            }
            _ => {}
        }
        Ok(Self { kind, rho, k })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPrediction {
    pub base_ranking: Ranking,
    pub final_ranking: Ranking,
    pub explored: bool,
    /// Scores reassigned by position: the label at rank `p` of the final
    /// ranking carries the score that rank `p` carried in the base ranking.
    pub perturbed_scores: ScoreVector,
}

pub fn randomize<R: Rng + ?Sized>(
    scheme: &RandomizationScheme,
    s: &ScoreVector,
    rng: &mut R,
) -> RandomizedPrediction {
    let base = crate::label::rank_of_scores(s);
    let coin: f64 = rng.gen();
    if coin >= scheme.rho {
        return RandomizedPrediction {
            final_ranking: base.clone(),
            base_ranking: base,
            explored: false,
            perturbed_scores: s.clone(),
        };
    }
    let m = base.m();
    let mut order = base.order().to_vec();
    match scheme.kind {
        SchemeKind::Uniform => order.shuffle(rng),
        SchemeKind::SingleSwap => {
            for _ in 0..2 {
                let inside = rng.gen_range(0..scheme.k);
                let outside = rng.gen_range(scheme.k..m);
                order.swap(inside, outside);
            }
        }
    }
    let mut perturbed = vec![0.0; m];
    for (p, &label) in order.iter().enumerate() {
        perturbed[label] = s[base.order()[p]];
    }
    RandomizedPrediction {
        base_ranking: base,
        final_ranking: Ranking::from_order_unchecked(order),
        explored: true,
        perturbed_scores: ScoreVector::new(perturbed).expect("permuted finite scores"),
    }
}

/// Exact pair-inclusion probabilities for one scheme and label count.
///
/// Conditioned on the base ranking, the probability that labels `a` and `b`
/// both end in the final top-k depends only on how many of them the base
/// top-k already holds. The three exploration-branch values are computed
/// once at construction: in closed form for the uniform scheme, by
/// enumerating all `(k (m - k))^2` equally likely swap sequences otherwise.
#[derive(Debug, Clone)]
pub struct InclusionModel {
    scheme: RandomizationScheme,
    m: usize,
    /// Exploration-branch probability indexed by how many of `a, b` are in
    /// the base top-k.
    explore: [f64; 3],
}

impl InclusionModel {
    pub fn new(scheme: RandomizationScheme, m: usize) -> Self {
        let k = scheme.k;
        let explore = match scheme.kind {
            SchemeKind::Uniform => {
                let p = (k * (k - 1)) as f64 / (m * (m - 1)) as f64;
                [p, p, p]
            }
            SchemeKind::SingleSwap if k == m => [1.0; 3],
            SchemeKind::SingleSwap => [
                swap_probability(m, k, 0),
                swap_probability(m, k, 1),
                swap_probability(m, k, 2),
            ],
        };
        Self { scheme, m, explore }
    }

    pub fn scheme(&self) -> &RandomizationScheme {
        &self.scheme
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `Pr[a, b in top-k(final)]` given which labels the base top-k holds.
    pub fn prob(&self, base_top: &[bool], a: usize, b: usize) -> f64 {
        let inside = usize::from(base_top[a]) + usize::from(base_top[b]);
        let stay = if inside == 2 { 1.0 } else { 0.0 };
        (1.0 - self.scheme.rho) * stay + self.scheme.rho * self.explore[inside]
    }
}

/// Fraction of two-round swap sequences that leave both tracked labels in
/// the top-k, starting from the identity ranking with `inside` of the two
/// tracked labels in the top-k.
fn swap_probability(m: usize, k: usize, inside: usize) -> f64 {
    let (a, b) = match inside {
        2 => (0, 1),
        1 => (0, k),
        _ => {
            if m - k < 2 {
                return 0.0;
            }
            (k, k + 1)
        }
    };
    let out = m - k;
    let mut hits = 0u64;
    let mut order: Vec<usize> = (0..m).collect();
    for i1 in 0..k {
        for j1 in k..m {
            order.swap(i1, j1);
            let first = order.clone();
            let mut first_top = vec![false; m];
            for &l in &first[..k] {
                first_top[l] = true;
            }
            for i2 in 0..k {
                for j2 in k..m {
                    let (x, y) = (first[i2], first[j2]);
                    // after swapping positions i2 and j2 the top-k is first[0..k]
                    // with x replaced by y
                    let in_top = |l: usize| {
                        if l == x {
                            false
                        } else if l == y {
                            true
                        } else {
                            first_top[l]
                        }
                    };
                    if in_top(a) && in_top(b) {
                        hits += 1;
                    }
                }
            }
            order.swap(i1, j1);
        }
    }
    hits as f64 / ((k * out) * (k * out)) as f64
}

/// Exact probability that `a` and `b` both land in the final top-k.
pub fn pair_inclusion_prob(
    scheme: &RandomizationScheme,
    base: &Ranking,
    a: LabelId,
    b: LabelId,
) -> Result<f64> {
    if a == b {
        return contract(format!("pair ({a}, {a}) is not a pair of distinct labels"));
    }
    let m = base.m();
    if a.index() >= m || b.index() >= m {
        return contract(format!("label outside [1, {m}]"));
    }
    let model = InclusionModel::new(*scheme, m);
    let top = base.top_k_mask(scheme.k)?;
    Ok(model.prob(&top, a.index(), b.index()))
}

/// Inclusion probabilities and importance weights for one played round.
#[derive(Debug, Clone)]
pub struct PairWeightTable {
    m: usize,
    revealed: Vec<usize>,
    /// Row-major `m x m`, symmetric. Diagonal unused.
    probs: Vec<f64>,
    weights: Vec<f64>,
}

impl PairWeightTable {
    /// Builds the table for a round. With `clip` on, probabilities are
    /// clamped to [`PROB_CLIP`] before forming weights.
    pub fn build(model: &InclusionModel, prediction: &RandomizedPrediction, clip: bool) -> Result<Self> {
        let m = model.m;
        let k = model.scheme.k;
        let base_top = prediction.base_ranking.top_k_mask(k)?;
        let final_top = prediction.final_ranking.top_k_mask(k)?;
        let mut probs = vec![0.0; m * m];
        let mut weights = vec![0.0; m * m];
        for a in 0..m {
            for b in (a + 1)..m {
                let mut p = model.prob(&base_top, a, b);
                if p <= 0.0 {
                    return contract(format!(
                        "pair ({}, {}) has zero inclusion probability",
                        a + 1,
                        b + 1
                    ));
                }
                if clip {
                    p = p.clamp(PROB_CLIP.0, PROB_CLIP.1);
                }
                probs[a * m + b] = p;
                probs[b * m + a] = p;
                if final_top[a] && final_top[b] {
                    weights[a * m + b] = 1.0 / p;
                    weights[b * m + a] = 1.0 / p;
                }
            }
        }
        let revealed = prediction.final_ranking.top_k(k)?.to_vec();
        Ok(Self {
            m,
            revealed,
            probs,
            weights,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The final top-k labels, 0-based, in rank order.
    pub fn revealed(&self) -> &[usize] {
        &self.revealed
    }

    pub fn inclusion_prob(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.m + b]
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.m + b]
    }

    /// Revealed `(relevant, irrelevant, weight)` triples.
    ///
    /// Fails if `feedback` does not cover exactly the revealed top-k; this
    /// is the single gate through which estimators see relevance.
    pub fn pairs(&self, feedback: &Feedback) -> Result<Vec<(usize, usize, f64)>> {
        let mut expected = self.revealed.clone();
        expected.sort_unstable();
        if feedback.labels() != expected {
            return Err(Error::InformationBarrier(format!(
                "feedback covers labels {:?}, revealed top-k is {:?}",
                feedback.labels().iter().map(|l| l + 1).collect::<Vec<_>>(),
                expected.iter().map(|l| l + 1).collect::<Vec<_>>(),
            )));
        }
        let mut out = Vec::new();
        for a in feedback.relevant() {
            for b in feedback.irrelevant() {
                out.push((a, b, self.weight(a, b)));
            }
        }
        Ok(out)
    }
}

/// Importance-weighted estimate of `Σ_{a∈R} Σ_{b∉R} atoms(a, b)`.
///
/// `atoms` is only ever called on revealed (relevant, irrelevant) pairs.
pub fn estimate_pairwise_sum<F>(mut atoms: F, table: &PairWeightTable, feedback: &Feedback) -> Result<f64>
where
    F: FnMut(usize, usize) -> f64,
{
    Ok(table
        .pairs(feedback)?
        .into_iter()
        .map(|(a, b, w)| w * atoms(a, b))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(rho: f64, k: usize, m: usize) -> RandomizationScheme {
        RandomizationScheme::new(SchemeKind::Uniform, rho, k, m).unwrap()
    }

    #[test]
    fn validates_scheme_parameters() {
        assert!(RandomizationScheme::new(SchemeKind::Uniform, 1.0, 2, 4).is_err());
        assert!(RandomizationScheme::new(SchemeKind::Uniform, 0.1, 1, 4).is_err());
        assert!(RandomizationScheme::new(SchemeKind::Uniform, 0.0, 2, 4).is_err());
        assert!(RandomizationScheme::new(SchemeKind::Uniform, 0.0, 4, 4).is_ok());
        assert!(RandomizationScheme::new(SchemeKind::SingleSwap, 0.1, 2, 5).is_err());
        assert!(RandomizationScheme::new(SchemeKind::SingleSwap, 0.3, 3, 5).is_err());
        assert!(RandomizationScheme::new(SchemeKind::SingleSwap, 0.2, 3, 5).is_ok());
    }

    #[test]
    fn uniform_closed_form_values() {
        let base = Ranking::identity(4);
        let s = uniform(0.25, 2, 4);
        let l = |i| LabelId::new(i).unwrap();
        let both = pair_inclusion_prob(&s, &base, l(1), l(2)).unwrap();
        assert!((both - (0.75 + 0.25 * 2.0 / 12.0)).abs() < 1e-15);
        assert!((both - 0.791_666_7).abs() < 1e-7);
        let split = pair_inclusion_prob(&s, &base, l(1), l(3)).unwrap();
        assert!((split - 0.25 / 6.0).abs() < 1e-15);
        assert!(pair_inclusion_prob(&s, &base, l(2), l(2)).is_err());

        let full = uniform(0.3, 4, 4);
        for a in 1..=4 {
            for b in 1..=4 {
                if a != b {
                    assert_eq!(pair_inclusion_prob(&full, &base, l(a), l(b)).unwrap(), 1.0);
                }
            }
        }
    }

    #[test]
    fn uniform_probabilities_sum_to_pair_count() {
        let m = 7;
        for k in 2..=m {
            let s = uniform(0.37, k, m);
            let base = Ranking::from_order(vec![3, 0, 6, 2, 5, 1, 4]).unwrap();
            let mut total = 0.0;
            for a in 1..=m {
                for b in (a + 1)..=m {
                    total += pair_inclusion_prob(&s, &base, LabelId::new(a).unwrap(), LabelId::new(b).unwrap())
                        .unwrap();
                }
            }
            let pairs = (k * (k - 1) / 2) as f64;
            assert!((total - pairs).abs() < 1e-12, "k={k} total={total}");
        }
    }

    #[test]
    fn unexplored_round_is_identity() {
        let s = ScoreVector::new(vec![0.1, 0.9, 0.4]).unwrap();
        let scheme = uniform(0.5, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = randomize(&scheme, &s, &mut rng);
            if !p.explored {
                assert_eq!(p.final_ranking, p.base_ranking);
                assert_eq!(p.perturbed_scores, s);
            } else {
                assert_eq!(crate::label::rank_of_scores(&p.perturbed_scores), p.final_ranking);
            }
        }
    }

    #[test]
    fn estimator_rejects_mismatched_feedback() {
        let scheme = uniform(0.2, 2, 4);
        let model = InclusionModel::new(scheme, 4);
        let s = ScoreVector::new(vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = loop {
            let p = randomize(&scheme, &s, &mut rng);
            if !p.explored {
                break p;
            }
        };
        let table = PairWeightTable::build(&model, &p, false).unwrap();
        let wrong = Feedback::new(vec![(0, true), (2, false)]).unwrap();
        assert!(matches!(
            estimate_pairwise_sum(|_, _| 1.0, &table, &wrong),
            Err(Error::InformationBarrier(_))
        ));
        let all_relevant = Feedback::new(vec![(0, true), (1, true)]).unwrap();
        assert_eq!(estimate_pairwise_sum(|_, _| 1.0, &table, &all_relevant).unwrap(), 0.0);
    }

    #[test]
    fn clipping_bounds_weights() {
        let scheme = uniform(0.01, 2, 10);
        let model = InclusionModel::new(scheme, 10);
        let s = ScoreVector::zeros(10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = randomize(&scheme, &s, &mut rng);
        let clipped = PairWeightTable::build(&model, &p, true).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                if a != b {
                    let q = clipped.inclusion_prob(a, b);
                    assert!((PROB_CLIP.0..=PROB_CLIP.1).contains(&q));
                }
            }
        }
    }
}
