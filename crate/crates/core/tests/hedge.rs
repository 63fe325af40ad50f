use topk_boost::booster::{AuditedOracle, BoosterConfig, OnlineBooster, TopkAdaptive};
use topk_boost::randomize::{RandomizationScheme, SchemeKind};
use topk_boost::weaklearn::{CostVector, WeakLearner, WeakPrediction};
use topk_boost::{RelevanceSet, Result};

/// Predicts the same distribution forever.
struct Constant(Vec<f64>);

impl WeakLearner for Constant {
    fn predict(&self, _x: &[f64]) -> Result<WeakPrediction> {
        WeakPrediction::from_weights(self.0.clone())
    }

    fn update(&mut self, _x: &[f64], _cost: &CostVector) -> Result<()> {
        Ok(())
    }
}

fn booster(rho: f64, k: usize, seed: u64) -> TopkAdaptive<Constant> {
    let m = 4;
    let config = BoosterConfig {
        num_learners: 3,
        scheme: RandomizationScheme::new(SchemeKind::Uniform, rho, k, m).unwrap(),
        gamma: 0.1,
        prob_clip: true,
        grad_clip: true,
        diagnostics: false,
    };
    let learners = vec![
        Constant(vec![0.1, 0.4, 0.4, 0.1]),
        Constant(vec![0.4, 0.1, 0.1, 0.4]),
        Constant(vec![0.25, 0.3, 0.2, 0.25]),
    ];
    TopkAdaptive::new(config, learners, m, seed).unwrap()
}

#[test]
fn expert_draws_follow_hedge_weights() {
    let relevant = RelevanceSet::from_indices(4, &[1, 2]).unwrap();
    let mut b = booster(0.0, 4, 3);
    for _ in 0..3 {
        b.round(&[0.0], &mut AuditedOracle::new(relevant.clone())).unwrap();
    }
    b.set_learning(false);
    let nu = b.expert_weights().to_vec();
    let total: f64 = nu.iter().sum();
    let draws = 200_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let r = b.round(&[0.0], &mut AuditedOracle::new(relevant.clone())).unwrap();
        counts[r.expert - 1] += 1;
    }
    assert_eq!(b.expert_weights(), nu.as_slice());
    for i in 0..3 {
        let p = nu[i] / total;
        let freq = counts[i] as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() <= 4.0 * se.max(1e-9), "expert {i}: p {p} freq {freq}");
    }
}

#[test]
fn hedge_weights_stay_positive_for_a_million_rounds() {
    let relevant = RelevanceSet::from_indices(4, &[0, 3]).unwrap();
    let mut b = booster(0.01, 2, 9);
    let mut oracle = AuditedOracle::new(relevant);
    for t in 0..1_000_000 {
        b.round(&[0.0], &mut oracle).unwrap();
        if t % 1000 == 0 {
            oracle = AuditedOracle::new(oracle.relevant().clone());
        }
        let nu = b.expert_weights();
        assert!(nu.iter().all(|v| *v > 0.0 && v.is_finite()), "round {t}: {nu:?}");
    }
    for a in b.alphas() {
        assert!(a.abs() <= 2.0);
    }
}
