//! Independent oracles for checking `topk_boost`.
//!
//! Nothing here calls the production pair-probability, estimator, potential
//! or gradient code. Outcome spaces are enumerated directly, inclusion
//! probabilities are read off the enumeration, and potentials are sampled
//! by simulating the walk.

use std::collections::BTreeMap;
use std::env;
use std::path::{Path, PathBuf};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use topk_boost::data::{parse_arff, LabelSpec, MultilabelDataset, Split};
use topk_boost::randomize::{RandomizationScheme, SchemeKind};
use topk_boost::{PairwiseLoss, Ranking, RelevanceSet};

/// Largest `m` for which all `m!` uniform outcomes are listed.
pub const UNIFORM_ENUM_LIMIT: usize = 7;
/// Largest `k (m - k)` for which all swap sequences are listed.
pub const SWAP_ENUM_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle refused: {0}")]
    ScaleGuard(String),
    #[error(transparent)]
    Core(#[from] topk_boost::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub ranking: Ranking,
    pub prob: f64,
    pub explored: bool,
}

/// Full support of one randomized prediction. The unexplored branch is its
/// own entry; exploration outcomes are merged by resulting ranking.
#[derive(Debug, Clone)]
pub struct OutcomeEnumeration {
    pub base: Ranking,
    pub k: usize,
    pub outcomes: Vec<Outcome>,
}

impl OutcomeEnumeration {
    pub fn total_prob(&self) -> f64 {
        self.outcomes.iter().map(|o| o.prob).sum()
    }

    /// Total probability of ending at `ranking`, over both branches.
    pub fn prob_of(&self, ranking: &Ranking) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.ranking.order() == ranking.order())
            .map(|o| o.prob)
            .sum()
    }

    /// `Pr[a and b both land in the top-k]`, read off the support.
    pub fn pair_prob(&self, a: usize, b: usize) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| {
                let top = &o.ranking.order()[..self.k];
                top.contains(&a) && top.contains(&b)
            })
            .map(|o| o.prob)
            .sum()
    }
}

pub fn enumerate_outcomes(scheme: &RandomizationScheme, base: &Ranking) -> Result<OutcomeEnumeration> {
    let m = base.m();
    let k = scheme.k();
    let rho = scheme.rho();
    let mut outcomes = vec![Outcome {
        ranking: base.clone(),
        prob: 1.0 - rho,
        explored: false,
    }];
    match scheme.kind() {
        SchemeKind::Uniform => {
            if m > UNIFORM_ENUM_LIMIT {
                return Err(OracleError::ScaleGuard(format!(
                    "uniform enumeration needs m <= {UNIFORM_ENUM_LIMIT}, got {m}"
                )));
            }
            let perms: Vec<Vec<usize>> = (0..m).permutations(m).collect();
            let p = rho / perms.len() as f64;
            for order in perms {
                outcomes.push(Outcome {
                    ranking: Ranking::from_order(order)?,
                    prob: p,
                    explored: true,
                });
            }
        }
        SchemeKind::SingleSwap => {
            let swaps = k * (m - k);
            if swaps > SWAP_ENUM_LIMIT {
                return Err(OracleError::ScaleGuard(format!(
                    "swap enumeration needs k(m-k) <= {SWAP_ENUM_LIMIT}, got {swaps}"
                )));
            }
            let p = rho / (swaps * swaps) as f64;
            let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for i1 in 0..k {
                for j1 in k..m {
                    for i2 in 0..k {
                        for j2 in k..m {
                            let mut order = base.order().to_vec();
                            order.swap(i1, j1);
                            order.swap(i2, j2);
                            *merged.entry(order).or_insert(0.0) += p;
                        }
                    }
                }
            }
            for (order, prob) in merged {
                outcomes.push(Outcome {
                    ranking: Ranking::from_order(order)?,
                    prob,
                    explored: true,
                });
            }
        }
    }
    Ok(OutcomeEnumeration {
        base: base.clone(),
        k,
        outcomes,
    })
}

/// `Σ_outcomes prob · estimator(outcome)`.
pub fn expected_estimator(enumeration: &OutcomeEnumeration, mut estimator: impl FnMut(&Outcome) -> f64) -> f64 {
    enumeration.outcomes.iter().map(|o| o.prob * estimator(o)).sum()
}

/// Importance-weighted pair sum for one outcome, with inclusion
/// probabilities taken from the enumeration itself.
pub fn oracle_estimate(
    enumeration: &OutcomeEnumeration,
    outcome: &Outcome,
    relevant: &[bool],
    atom: impl Fn(usize, usize) -> f64,
) -> f64 {
    let top = &outcome.ranking.order()[..enumeration.k];
    let mut total = 0.0;
    for &a in top {
        for &b in top {
            if relevant[a] && !relevant[b] {
                total += atom(a, b) / enumeration.pair_prob(a, b);
            }
        }
    }
    total
}

/// `Σ_{a rel} Σ_{b irr} f(s[a], s[b])`, written out from the definitions.
pub fn brute_loss(kind: PairwiseLoss, s: &[f64], relevant: &[bool]) -> f64 {
    let mut total = 0.0;
    for a in 0..s.len() {
        for b in 0..s.len() {
            if relevant[a] && !relevant[b] {
                total += brute_atom(kind, s[a], s[b]);
            }
        }
    }
    total
}

pub fn brute_atom(kind: PairwiseLoss, x_rel: f64, x_irr: f64) -> f64 {
    match kind {
        PairwiseLoss::Rank => {
            if x_rel <= x_irr {
                1.0
            } else {
                0.0
            }
        }
        PairwiseLoss::Hinge => f64::max(0.0, 1.0 + x_irr - x_rel),
        PairwiseLoss::Logistic => (1.0 + (x_irr - x_rel).exp()).ln(),
    }
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn finite_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Mean and standard error of `f(s_a + X_a, s_b + X_b)` over simulated
/// `n`-step walks where each step votes for `a` with probability
/// `(1 - γ)/m + γ`, for `b` with `(1 - γ)/m`, and elsewhere otherwise.
#[allow(clippy::too_many_arguments)]
pub fn mc_lambda(
    kind: PairwiseLoss,
    gamma: f64,
    m: usize,
    n: usize,
    s_a: f64,
    s_b: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_a = (1.0 - gamma) / m as f64 + gamma;
    let p_b = (1.0 - gamma) / m as f64;
    // Accumulate offsets from the first draw so a constant walk is exact.
    let mut first = None;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let (mut xa, mut xb) = (0u32, 0u32);
        for _ in 0..n {
            let u: f64 = rng.gen();
            if u < p_a {
                xa += 1;
            } else if u < p_a + p_b {
                xb += 1;
            }
        }
        let v = brute_atom(kind, s_a + xa as f64, s_b + xb as f64);
        let d = v - *first.get_or_insert(v);
        sum += d;
        sum_sq += d * d;
    }
    let n = samples as f64;
    let shift = sum / n;
    let var = (sum_sq / n - shift * shift).max(0.0) * n / (n - 1.0);
    (first.unwrap_or(0.0) + shift, (var / n).sqrt())
}

/// Random multilabel data: each label fires when a random linear score of
/// the features clears a per-label threshold, and every row keeps at
/// least one relevant label.
pub fn synthetic_dataset(n: usize, m: usize, dim: usize, seed: u64, split: Split) -> MultilabelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let threshold: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..0.8)).collect();
    let scale = (dim as f64 / 3.0).sqrt();
    // Data rows come from their own stream so train and test share labels.
    let mut rows = ChaCha8Rng::seed_from_u64(seed);
    rows.set_stream(if split == Split::Train { 1 } else { 2 });
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rows.gen_range(-1.0..1.0)).collect();
        let scores: Vec<f64> = w
            .iter()
            .map(|wl| wl.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / scale + rows.gen_range(-0.2..0.2))
            .collect();
        let mut mask: Vec<bool> = scores.iter().zip(&threshold).map(|(s, t)| s > t).collect();
        if !mask.contains(&true) {
            let best = (0..m).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap_or(0);
            mask[best] = true;
        }
        features.push(x);
        labels.push(RelevanceSet::from_mask(mask));
    }
    MultilabelDataset::new("synthetic", split, features, labels).expect("well-formed synthetic data")
}

/// `$TOPK_DATA_DIR`, or `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    match env::var_os("TOPK_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Label counts of the benchmark datasets.
pub fn known_label_count(name: &str) -> Option<usize> {
    match name {
        "emotions" | "scene" => Some(6),
        "yeast" => Some(14),
        "mediamill" => Some(101),
        _ => None,
    }
}

/// Loads `<name>-train.arff` and `<name>-test.arff` from [`data_dir`].
/// `Ok(None)` when either file is absent.
pub fn load_benchmark(name: &str) -> Result<Option<(MultilabelDataset, MultilabelDataset)>> {
    let m = known_label_count(name)
        .ok_or_else(|| OracleError::Core(topk_boost::Error::Config(format!("unknown dataset {name}"))))?;
    let dir = data_dir();
    let train = dir.join(format!("{name}-train.arff"));
    let test = dir.join(format!("{name}-test.arff"));
    if !train.exists() || !test.exists() {
        return Ok(None);
    }
    let spec = LabelSpec::Count(m);
    Ok(Some((
        parse_arff(&train, &spec, Split::Train)?,
        parse_arff(&test, &spec, Split::Test)?,
    )))
}
