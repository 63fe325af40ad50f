//! Boost-by-majority potentials for pairwise atoms.
//!
//! `Λ^{a,b,n}(s)` is the expected atom value after `n` more weak learners
//! each add a unit vote to a label drawn from `u^γ_a`, the near-uniform
//! distribution that favors `a` by `γ`. Only the votes landing on `a` or `b`
//! move the atom, so the walk collapses to a trinomial over
//! `(votes for a, votes for b, votes elsewhere)` and the expectation is an
//! exact `O(n^2)` sum.

use crate::error::{contract, Error, Result};
use crate::label::{Feedback, RelevanceSet};
use crate::loss::{self, PairwiseLoss};
use crate::randomize::PairWeightTable;
use crate::weaklearn::CostVector;

/// `u^γ_R`: probability `(1 - |R| γ)/m + γ` on favored labels, `(1 - |R| γ)/m` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedUniform {
    m: usize,
    gamma: f64,
    favored: RelevanceSet,
}

impl BiasedUniform {
    pub fn new(gamma: f64, favored: RelevanceSet) -> Result<Self> {
        let m = favored.m();
        if m == 0 || !(0.0..1.0).contains(&gamma) {
            return contract(format!("gamma = {gamma} outside [0, 1) or empty label space"));
        }
        if favored.len() as f64 * gamma > 1.0 {
            return contract(format!(
                "|favored| * gamma = {} exceeds 1",
                favored.len() as f64 * gamma
            ));
        }
        Ok(Self { m, gamma, favored })
    }

    pub fn probs(&self) -> Vec<f64> {
        let base = (1.0 - self.favored.len() as f64 * self.gamma) / self.m as f64;
        (0..self.m)
            .map(|l| if self.favored.contains(l) { base + self.gamma } else { base })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub atom: PairwiseLoss,
    pub gamma: f64,
    pub m: usize,
    /// Remaining weak learners, `N - i`.
    pub n: usize,
}

impl PotentialSpec {
    fn validate(&self) -> Result<()> {
        if !self.atom.is_convex() {
            return contract(format!("{:?} atom is not convex; potentials need a convex atom", self.atom));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return contract(format!("gamma = {} outside (0, 1)", self.gamma));
        }
        if self.m < 2 {
            return contract("potentials need m >= 2");
        }
        Ok(())
    }

    /// `(p, q, r)`: per-step probability of a vote for `a`, for `b`, elsewhere.
    fn step_probs(&self) -> (f64, f64, f64) {
        let q = (1.0 - self.gamma) / self.m as f64;
        let p = q + self.gamma;
        (p, q, (1.0 - p - q).max(0.0))
    }
}

/// Non-zero trinomial terms `(i, j, weight)` of an `n`-step walk.
fn trinomial_terms(n: usize, (p, q, r): (f64, f64, f64), log_fact: &[f64]) -> Vec<(u32, u32, f64)> {
    let ln = |x: f64, e: usize| if e == 0 { 0.0 } else { e as f64 * x.ln() };
    let mut terms = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let rest = n - i - j;
            if (r == 0.0 && rest > 0) || (q == 0.0 && j > 0) {
                continue;
            }
            let lw = log_fact[n] - log_fact[i] - log_fact[j] - log_fact[rest]
                + ln(p, i)
                + ln(q, j)
                + ln(r, rest);
            terms.push((i as u32, j as u32, lw.exp()));
        }
    }
    terms
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Exact `Λ^{a,b,n}` at the pair of scores `(s_a, s_b)`.
pub fn lambda_exact(spec: &PotentialSpec, s_a: f64, s_b: f64) -> Result<f64> {
    spec.validate()?;
    let terms = trinomial_terms(spec.n, spec.step_probs(), &log_factorials(spec.n));
    Ok(sum_terms(spec.atom, &terms, s_a, s_b))
}

#[inline]
fn sum_terms(atom: PairwiseLoss, terms: &[(u32, u32, f64)], s_a: f64, s_b: f64) -> f64 {
    terms
        .iter()
        .map(|&(i, j, w)| w * atom.atom(s_a + i as f64, s_b + j as f64))
        .sum()
}

/// Potential evaluator with trinomial weights precomputed for every
/// `n <= max_n`. This is what the boosting loop uses.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    atom: PairwiseLoss,
    gamma: f64,
    m: usize,
    terms: Vec<Vec<(u32, u32, f64)>>,
}

impl PotentialTable {
    pub fn new(atom: PairwiseLoss, gamma: f64, m: usize, max_n: usize) -> Result<Self> {
        let spec = PotentialSpec { atom, gamma, m, n: max_n };
        spec.validate()?;
        let log_fact = log_factorials(max_n);
        let probs = spec.step_probs();
        let terms = (0..=max_n).map(|n| trinomial_terms(n, probs, &log_fact)).collect();
        Ok(Self { atom, gamma, m, terms })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_n(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn lambda(&self, n: usize, s_a: f64, s_b: f64) -> f64 {
        sum_terms(self.atom, &self.terms[n], s_a, s_b)
    }

    /// Full-information `Φ^n(s) = Σ_{a∈R} Σ_{b∉R} Λ^{a,b,n}(s)`.
    pub fn phi(&self, n: usize, s: &[f64], relevant: &RelevanceSet) -> f64 {
        let irr = relevant.complement().indices();
        relevant
            .indices()
            .into_iter()
            .flat_map(|a| irr.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.lambda(n, s[a], s[b]))
            .sum()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.max_n() {
            return contract(format!("n = {n} exceeds precomputed maximum {}", self.max_n()));
        }
        Ok(())
    }
}

/// Importance-weighted estimate `Φ̂^n(s)` over the revealed pairs.
pub fn phi_hat(
    table: &PotentialTable,
    n: usize,
    s: &[f64],
    weights: &PairWeightTable,
    feedback: &Feedback,
) -> Result<f64> {
    table.check_n(n)?;
    crate::randomize::estimate_pairwise_sum(|a, b| table.lambda(n, s[a], s[b]), weights, feedback)
}

/// `ĉ[l] = Φ̂^n(s_prev + e_l)` for every label `l`.
///
/// Adding `e_l` only moves pairs that contain `l`, so each revealed pair
/// needs three potential evaluations: unmoved, `a` bumped, `b` bumped.
/// Labels outside every revealed pair all get the unmoved total.
pub fn bbm_cost_vector(
    table: &PotentialTable,
    n: usize,
    s_prev: &[f64],
    weights: &PairWeightTable,
    feedback: &Feedback,
) -> Result<CostVector> {
    table.check_n(n)?;
    let pairs = weights.pairs(feedback)?;
    let m = s_prev.len();
    // (a, b, w, Λ unmoved, Λ with a bumped, Λ with b bumped)
    let evals: Vec<_> = pairs
        .iter()
        .map(|&(a, b, w)| {
            let (sa, sb) = (s_prev[a], s_prev[b]);
            (
                a,
                b,
                w,
                table.lambda(n, sa, sb),
                table.lambda(n, sa + 1.0, sb),
                table.lambda(n, sa, sb + 1.0),
            )
        })
        .collect();
    let unmoved: f64 = evals.iter().map(|e| e.2 * e.3).sum();
    let mut costs = vec![unmoved; m];
    for l in feedback.labels() {
        costs[l] = evals
            .iter()
            .map(|&(a, b, w, base, bump_a, bump_b)| {
                w * if l == a {
                    bump_a
                } else if l == b {
                    bump_b
                } else {
                    base
                }
            })
            .sum();
    }
    CostVector::new(costs)
}

/// Largest label count and walk length [`upsilon_bruteforce`] will enumerate.
pub const UPSILON_LIMIT: usize = 6;

/// Ground-truth potential `Υ^n(s) = E L(s + X, R)` with `X` the sum of `n`
/// votes drawn from `u^γ_R`, by enumerating every vote-count vector.
pub fn upsilon_bruteforce(
    atom: PairwiseLoss,
    relevant: &RelevanceSet,
    gamma: f64,
    n: usize,
    s: &[f64],
) -> Result<f64> {
    let m = relevant.m();
    if m > UPSILON_LIMIT || n > UPSILON_LIMIT {
        return Err(Error::ScaleGuard(format!(
            "upsilon enumeration limited to m, n <= {UPSILON_LIMIT}; got m = {m}, n = {n}"
        )));
    }
    if s.len() != m {
        return Err(Error::Dimension { expected: m, got: s.len() });
    }
    let u = BiasedUniform::new(gamma, relevant.clone())?.probs();
    let log_fact = log_factorials(n);
    let mut counts = vec![0usize; m];
    let mut total = 0.0;
    enumerate_counts(&mut counts, 0, n, &mut |c| {
        let mut lw = log_fact[n];
        for (l, &cl) in c.iter().enumerate() {
            if cl > 0 {
                lw += cl as f64 * u[l].ln() - log_fact[cl];
            }
        }
        let moved: Vec<f64> = s.iter().zip(c).map(|(x, &cl)| x + cl as f64).collect();
        total += lw.exp() * loss::loss(atom, &moved, relevant);
    });
    Ok(total)
}

fn enumerate_counts(counts: &mut [usize], pos: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        visit(counts);
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        enumerate_counts(counts, pos + 1, left - c, visit);
    }
}
