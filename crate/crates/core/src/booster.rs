//! Online boosting rounds under top-k feedback.
//!
//! Both boosters follow the same round:
//!
//! 1. every weak learner predicts a distribution `h^i`;
//! 2. experts are prefix votes `s^j = Σ_{i<=j} α^i h^i`;
//! 3. one expert is played through the randomization scheme;
//! 4. relevance is revealed for the top-k of the played ranking only;
//! 5. each learner gets an importance-weighted cost vector and updates;
//! 6. booster parameters move.
//!
//! [`TopkBbm`] fixes `α ≡ 1`, always plays the last expert and builds costs
//! from boost-by-majority potentials of the hinge atom. [`TopkAdaptive`]
//! learns `α` by projected SGD on the logistic loss and picks the expert with
//! Hedge on estimated rank losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::{Feedback, Ranking, RelevanceSet, ScoreVector};
use crate::loss::{self, sigmoid, softplus, PairwiseLoss};
use crate::potential::{bbm_cost_vector, PotentialTable};
use crate::randomize::{
    estimate_pairwise_sum, randomize, InclusionModel, PairWeightTable, RandomizationScheme,
};
use crate::weaklearn::{CostVector, WeakLearner, WeakPrediction};

/// Feasible interval for adaptive learner weights.
pub const ALPHA_BOUND: f64 = 2.0;
/// Largest per-round Hedge penalty.
pub const HEDGE_EXPONENT_CAP: f64 = 50.0;
/// Magnitude cap for clipped gradient estimates.
pub const GRAD_CLIP: f64 = 1.0;

/// Source of relevance bits for the current example.
pub trait FeedbackOracle {
    /// Relevance of each requested label, as `(label, relevant)` pairs.
    fn reveal(&mut self, labels: &[usize]) -> Vec<(usize, bool)>;
}

/// Answers from a known relevance set and records every label asked about.
#[derive(Debug, Clone)]
pub struct AuditedOracle {
    relevant: RelevanceSet,
    queried: Vec<usize>,
}

impl AuditedOracle {
    pub fn new(relevant: RelevanceSet) -> Self {
        Self {
            relevant,
            queried: Vec::new(),
        }
    }

    /// Every label queried so far, in query order.
    pub fn queried(&self) -> &[usize] {
        &self.queried
    }

    pub fn relevant(&self) -> &RelevanceSet {
        &self.relevant
    }
}

impl FeedbackOracle for AuditedOracle {
    fn reveal(&mut self, labels: &[usize]) -> Vec<(usize, bool)> {
        self.queried.extend_from_slice(labels);
        labels.iter().map(|&l| (l, self.relevant.contains(l))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoosterConfig {
    pub num_learners: usize,
    pub scheme: RandomizationScheme,
    /// Edge assumed by the potentials. Ignored by the adaptive booster.
    pub gamma: f64,
    pub prob_clip: bool,
    pub grad_clip: bool,
    /// Keep per-learner predictions, prefix scores and costs in each record.
    pub diagnostics: bool,
}

/// Per-learner internals of one round, kept when diagnostics are on.
#[derive(Debug, Clone)]
pub struct RoundDiagnostics {
    pub predictions: Vec<WeakPrediction>,
    /// `s^0 .. s^N`, where `s^0` is the zero vector.
    pub prefix_scores: Vec<ScoreVector>,
    pub costs: Vec<CostVector>,
    pub alphas_before: Vec<f64>,
    pub expert_weights_before: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: usize,
    /// Played expert, 1-based.
    pub expert: usize,
    pub explored: bool,
    pub ranking: Ranking,
    /// The randomized score vector actually played.
    pub played_scores: ScoreVector,
    pub feedback: Feedback,
    /// `ĉ^i · h^i` for every learner.
    pub learner_losses: Vec<f64>,
    /// Estimated rank loss per expert (adaptive booster only).
    pub expert_estimates: Vec<f64>,
    pub diagnostics: Option<RoundDiagnostics>,
}

pub trait OnlineBooster: Send {
    fn m(&self) -> usize;
    fn round(&mut self, x: &[f64], oracle: &mut dyn FeedbackOracle) -> Result<RoundRecord>;
    /// Turns learning on or off. When off, rounds still predict and
    /// randomize but leave learners and booster weights untouched.
    fn set_learning(&mut self, on: bool);
    fn alphas(&self) -> &[f64];
    /// Hedge weights. All ones for boosters without expert selection.
    fn expert_weights(&self) -> &[f64];
}

/// Importance-weighted count of revealed mis-ordered pairs, `1(s[b] >= s[a])`.
pub fn hedge_rank_estimate(s: &[f64], table: &PairWeightTable, feedback: &Feedback) -> Result<f64> {
    estimate_pairwise_sum(|a, b| PairwiseLoss::Rank.atom(s[a], s[b]), table, feedback)
}

/// `η_t = 8 ρ √2 / (m² √t)`. Full feedback (`ρ = 0`) uses the `ρ = 1` rate,
/// the scale at which importance weights are all one.
pub fn learning_rate(rho: f64, m: usize, t: usize) -> f64 {
    let rho = if rho == 0.0 { 1.0 } else { rho };
    8.0 * rho * 2f64.sqrt() / ((m * m) as f64 * (t as f64).sqrt())
}

/// `ĝ(α) = L̂^log(s_prev + α h)` over weighted pairs.
pub fn sgd_objective(s_prev: &[f64], h: &[f64], pairs: &[(usize, usize, f64)], alpha: f64) -> f64 {
    pairs
        .iter()
        .map(|&(a, b, w)| w * softplus(s_prev[b] + alpha * h[b] - s_prev[a] - alpha * h[a]))
        .sum()
}

/// `ĝ'(α)`, the derivative of [`sgd_objective`] in `α`.
pub fn sgd_derivative(s_prev: &[f64], h: &[f64], pairs: &[(usize, usize, f64)], alpha: f64) -> f64 {
    pairs
        .iter()
        .map(|&(a, b, w)| {
            w * (h[b] - h[a]) * sigmoid(s_prev[b] + alpha * h[b] - s_prev[a] - alpha * h[a])
        })
        .sum()
}

/// State shared by both boosters.
struct Ensemble<L> {
    learners: Vec<L>,
    m: usize,
    config: BoosterConfig,
    inclusion: InclusionModel,
    rng: ChaCha8Rng,
    t: usize,
    learning: bool,
}

/// What a round has observed once feedback is in.
struct Observed {
    predictions: Vec<WeakPrediction>,
    prefix: Vec<ScoreVector>,
    prediction: crate::randomize::RandomizedPrediction,
    feedback: Feedback,
    table: PairWeightTable,
}

impl<L: WeakLearner> Ensemble<L> {
    fn new(config: BoosterConfig, learners: Vec<L>, m: usize, seed: u64) -> Result<Self> {
        if learners.len() != config.num_learners || learners.is_empty() {
            return Err(Error::Config(format!(
                "expected {} weak learners, got {}",
                config.num_learners,
                learners.len()
            )));
        }
        // Re-validate against this m; the scheme may have been built for another.
        let scheme = RandomizationScheme::new(config.scheme.kind(), config.scheme.rho(), config.scheme.k(), m)?;
        Ok(Self {
            inclusion: InclusionModel::new(scheme, m),
            learners,
            m,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
            learning: true,
        })
    }

    fn predict_all(&self, x: &[f64]) -> Result<Vec<WeakPrediction>> {
        self.learners.iter().map(|l| l.predict(x)).collect()
    }

    fn prefix_scores(&self, predictions: &[WeakPrediction], alphas: &[f64]) -> Vec<ScoreVector> {
        let mut prefix = Vec::with_capacity(predictions.len() + 1);
        let mut s = ScoreVector::zeros(self.m);
        prefix.push(s.clone());
        for (h, &alpha) in predictions.iter().zip(alphas) {
            s.add_scaled(alpha, h.as_slice());
            prefix.push(s.clone());
        }
        prefix
    }

    /// Plays expert `expert` (1-based) and collects feedback.
    fn play(
        &mut self,
        predictions: Vec<WeakPrediction>,
        prefix: Vec<ScoreVector>,
        expert: usize,
        oracle: &mut dyn FeedbackOracle,
    ) -> Result<Observed> {
        let prediction = randomize(self.inclusion.scheme(), &prefix[expert], &mut self.rng);
        let k = self.inclusion.scheme().k();
        let top = prediction.final_ranking.top_k(k)?.to_vec();
        let answers = oracle.reveal(&top);
        let mut asked = top.clone();
        asked.sort_unstable();
        let mut got: Vec<usize> = answers.iter().map(|a| a.0).collect();
        got.sort_unstable();
        if got != asked {
            return Err(Error::InformationBarrier(format!(
                "oracle answered for labels {:?}, asked {:?}",
                got.iter().map(|l| l + 1).collect::<Vec<_>>(),
                asked.iter().map(|l| l + 1).collect::<Vec<_>>(),
            )));
        }
        let feedback = Feedback::new(answers)?;
        let table = PairWeightTable::build(&self.inclusion, &prediction, self.config.prob_clip)?;
        Ok(Observed {
            predictions,
            prefix,
            prediction,
            feedback,
            table,
        })
    }

    fn feed_learners(&mut self, x: &[f64], costs: &[CostVector]) -> Result<()> {
        if self.learning {
            for (learner, cost) in self.learners.iter_mut().zip(costs) {
                learner.update(x, cost)?;
            }
        }
        Ok(())
    }
}

fn record(
    t: usize,
    expert: usize,
    obs: Observed,
    costs: Vec<CostVector>,
    expert_estimates: Vec<f64>,
    diagnostics: bool,
    (alphas_before, expert_weights_before): (Vec<f64>, Vec<f64>),
) -> RoundRecord {
    let learner_losses = costs.iter().zip(&obs.predictions).map(|(c, h)| c.dot(h)).collect();
    let diagnostics = diagnostics.then_some(RoundDiagnostics {
        predictions: obs.predictions,
        prefix_scores: obs.prefix,
        costs,
        alphas_before,
        expert_weights_before,
    });
    RoundRecord {
        t,
        expert,
        explored: obs.prediction.explored,
        ranking: obs.prediction.final_ranking,
        played_scores: obs.prediction.perturbed_scores,
        feedback: obs.feedback,
        learner_losses,
        expert_estimates,
        diagnostics,
    }
}

/// Boost-by-majority under top-k feedback.
pub struct TopkBbm<L> {
    ensemble: Ensemble<L>,
    potentials: PotentialTable,
    alphas: Vec<f64>,
    ones: Vec<f64>,
}

impl<L: WeakLearner> TopkBbm<L> {
    pub fn new(config: BoosterConfig, learners: Vec<L>, m: usize, seed: u64) -> Result<Self> {
        let n = config.num_learners;
        let potentials = PotentialTable::new(PairwiseLoss::Hinge, config.gamma, m, n.saturating_sub(1))
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            ensemble: Ensemble::new(config, learners, m, seed)?,
            potentials,
            alphas: vec![1.0; n],
            ones: vec![1.0; n],
        })
    }

    pub fn potentials(&self) -> &PotentialTable {
        &self.potentials
    }
}

impl<L: WeakLearner> OnlineBooster for TopkBbm<L> {
    fn m(&self) -> usize {
        self.ensemble.m
    }

    fn round(&mut self, x: &[f64], oracle: &mut dyn FeedbackOracle) -> Result<RoundRecord> {
        let e = &mut self.ensemble;
        e.t += 1;
        let n = e.config.num_learners;
        let predictions = e.predict_all(x)?;
        let prefix = e.prefix_scores(&predictions, &self.alphas);
        let obs = e.play(predictions, prefix, n, oracle)?;
        let costs = (1..=n)
            .map(|i| bbm_cost_vector(&self.potentials, n - i, &obs.prefix[i - 1], &obs.table, &obs.feedback))
            .collect::<Result<Vec<_>>>()?;
        e.feed_learners(x, &costs)?;
        Ok(record(
            e.t,
            n,
            obs,
            costs,
            Vec::new(),
            e.config.diagnostics,
            (self.alphas.clone(), self.ones.clone()),
        ))
    }

    fn set_learning(&mut self, on: bool) {
        self.ensemble.learning = on;
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn expert_weights(&self) -> &[f64] {
        &self.ones
    }
}

/// Adaptive booster: SGD-tuned learner weights, Hedge over experts.
pub struct TopkAdaptive<L> {
    ensemble: Ensemble<L>,
    alphas: Vec<f64>,
    nu: Vec<f64>,
}

impl<L: WeakLearner> TopkAdaptive<L> {
    pub fn new(config: BoosterConfig, learners: Vec<L>, m: usize, seed: u64) -> Result<Self> {
        let n = config.num_learners;
        Ok(Self {
            ensemble: Ensemble::new(config, learners, m, seed)?,
            alphas: vec![0.0; n],
            nu: vec![1.0; n],
        })
    }

    /// Draws a 1-based expert index with probability proportional to `ν`.
    fn draw_expert(&mut self) -> usize {
        let total: f64 = self.nu.iter().sum();
        let u: f64 = self.ensemble.rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (i, w) in self.nu.iter().enumerate() {
            acc += w;
            if u < acc {
                return i + 1;
            }
        }
        self.nu.len()
    }
}

/// Logistic cost vector `∇L̂^log(s_prev)`, optionally clipped entrywise.
pub fn adaptive_cost_vector(s_prev: &[f64], pairs: &[(usize, usize, f64)], clip: bool) -> Result<CostVector> {
    let mut g = loss::logistic_gradient(s_prev, pairs);
    if clip {
        for v in &mut g {
            *v = v.clamp(-GRAD_CLIP, GRAD_CLIP);
        }
    }
    CostVector::new(g)
}

impl<L: WeakLearner> OnlineBooster for TopkAdaptive<L> {
    fn m(&self) -> usize {
        self.ensemble.m
    }

    fn round(&mut self, x: &[f64], oracle: &mut dyn FeedbackOracle) -> Result<RoundRecord> {
        self.ensemble.t += 1;
        let n = self.ensemble.config.num_learners;
        let predictions = self.ensemble.predict_all(x)?;
        let prefix = self.ensemble.prefix_scores(&predictions, &self.alphas);
        let expert = self.draw_expert();
        let obs = self.ensemble.play(predictions, prefix, expert, oracle)?;
        let e = &mut self.ensemble;
        let pairs = obs.table.pairs(&obs.feedback)?;
        let clip = e.config.grad_clip;
        let costs = (1..=n)
            .map(|i| adaptive_cost_vector(obs.prefix[i - 1].as_slice(), &pairs, clip))
            .collect::<Result<Vec<_>>>()?;
        e.feed_learners(x, &costs)?;

        let estimates = (1..=n)
            .map(|i| hedge_rank_estimate(&obs.prefix[i], &obs.table, &obs.feedback))
            .collect::<Result<Vec<_>>>()?;
        let alphas_before = self.alphas.clone();
        let nu_before = self.nu.clone();
        if e.learning {
            let eta = learning_rate(e.config.scheme.rho(), e.m, e.t);
            for i in 0..n {
                let h = obs.predictions[i].as_slice();
                let mut d = sgd_derivative(obs.prefix[i].as_slice(), h, &pairs, self.alphas[i]);
                if clip {
                    d = d.clamp(-GRAD_CLIP, GRAD_CLIP);
                }
                self.alphas[i] = (self.alphas[i] - eta * d).clamp(-ALPHA_BOUND, ALPHA_BOUND);
            }
            for (nu, est) in self.nu.iter_mut().zip(&estimates) {
                *nu *= (-est.min(HEDGE_EXPONENT_CAP)).exp();
            }
            let total: f64 = self.nu.iter().sum();
            for nu in &mut self.nu {
                *nu = (*nu / total).max(f64::MIN_POSITIVE);
            }
        }
        Ok(record(
            e.t,
            expert,
            obs,
            costs,
            estimates,
            e.config.diagnostics,
            (alphas_before, nu_before),
        ))
    }

    fn set_learning(&mut self, on: bool) {
        self.ensemble.learning = on;
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn expert_weights(&self) -> &[f64] {
        &self.nu
    }
}

/// Accumulates the empirical edge of one weak learner from ground truth.
///
/// `γ = -Σ_t c_t · h_t / Σ_t w_t`, where `c_t` is the full-information
/// logistic cost at the learner's prefix score and
/// `w_t = Σ_{a∈R} Σ_{b∉R} 1 / (1 + exp(s[a] - s[b]))`.
#[derive(Debug, Clone, Default)]
pub struct EdgeTracker {
    numerator: f64,
    weight: f64,
}

impl EdgeTracker {
    pub fn push(&mut self, h: &[f64], s_prev: &[f64], relevant: &RelevanceSet) {
        let rel = relevant.indices();
        let irr = relevant.complement().indices();
        let pairs: Vec<(usize, usize, f64)> = rel
            .iter()
            .flat_map(|&a| irr.iter().map(move |&b| (a, b, 1.0)))
            .collect();
        let cost = loss::logistic_gradient(s_prev, &pairs);
        self.numerator += cost.iter().zip(h).map(|(c, p)| c * p).sum::<f64>();
        self.weight += pairs.iter().map(|&(a, b, _)| sigmoid(s_prev[b] - s_prev[a])).sum::<f64>();
    }

    pub fn edge(&self) -> Result<f64> {
        if self.weight == 0.0 {
            return Err(Error::UndefinedEdge);
        }
        Ok(-self.numerator / self.weight)
    }
}

/// Empirical edge over a history of `(h_t, s_prev_t, R_t)` triples.
pub fn empirical_edge<'a, I>(history: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64], &'a RelevanceSet)>,
{
    let mut tracker = EdgeTracker::default();
    for (h, s_prev, relevant) in history {
        tracker.push(h, s_prev, relevant);
    }
    tracker.edge()
}
