use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topk_boost::randomize::{pair_inclusion_prob, randomize, RandomizationScheme, SchemeKind};
use topk_boost::{loss, rank_of_scores, LabelId, PairwiseLoss, Ranking, RelevanceSet, ScoreVector};

#[test]
fn single_swap_pair_probabilities_match_sampling() {
    let (m, k, rho) = (5, 3, 0.2);
    let scheme = RandomizationScheme::new(SchemeKind::SingleSwap, rho, k, m).unwrap();
    let s = ScoreVector::new(vec![0.9, 0.1, 0.5, 0.3, 0.7]).unwrap();
    let base = rank_of_scores(&s);
    let draws = 1_000_000;
    let mut hits = vec![vec![0u64; m]; m];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..draws {
        let p = randomize(&scheme, &s, &mut rng);
        let top = p.final_ranking.top_k(k).unwrap();
        for &a in top {
            for &b in top {
                hits[a][b] += 1;
            }
        }
    }
    for (a, row) in hits.iter().enumerate() {
        for (b, &count) in row.iter().enumerate() {
            if a == b {
                continue;
            }
            let exact = pair_inclusion_prob(&scheme, &base, LabelId::from_index(a), LabelId::from_index(b)).unwrap();
            let freq = count as f64 / draws as f64;
            let se = (exact * (1.0 - exact) / draws as f64).sqrt();
            assert!(
                (freq - exact).abs() <= 3.0 * se,
                "pair ({a},{b}): exact {exact} sampled {freq} se {se}"
            );
        }
    }
}

fn misordered(order: &[usize], relevant: &RelevanceSet) -> f64 {
    // Scores that reproduce the ranking exactly: higher rank, higher score.
    let m = order.len();
    let mut s = vec![0.0; m];
    for (pos, &l) in order.iter().enumerate() {
        s[l] = (m - pos) as f64;
    }
    loss(PairwiseLoss::Rank, &s, relevant)
}

#[test]
fn exploration_overhead_is_bounded() {
    for m in 3..=6 {
        let base: Vec<usize> = (0..m).collect();
        let subsets: Vec<RelevanceSet> = (0..1u32 << m)
            .map(|bits| RelevanceSet::from_mask((0..m).map(|l| bits >> l & 1 == 1).collect()))
            .collect();
        let perms: Vec<Vec<usize>> = (0..m).permutations(m).collect();
        for r in &subsets {
            let before = misordered(&base, r);
            for p in &perms {
                assert!(misordered(p, r) - before <= (m * m) as f64);
            }
            for k in 1..m {
                for (i1, j1, i2, j2) in itertools::iproduct!(0..k, k..m, 0..k, k..m) {
                    let mut order = base.clone();
                    order.swap(i1, j1);
                    order.swap(i2, j2);
                    let extra = misordered(&order, r) - before;
                    assert!(extra <= (2 * m) as f64, "m={m} k={k} extra {extra}");
                }
            }
        }
    }
}

#[test]
fn perturbed_scores_follow_the_final_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = ScoreVector::new(vec![0.3, -1.0, 2.5, 0.7, 1.1, -0.2]).unwrap();
    for kind in [SchemeKind::Uniform, SchemeKind::SingleSwap] {
        let scheme = RandomizationScheme::new(kind, 0.2, 3, 6).unwrap();
        let mut explored = 0;
        for _ in 0..2000 {
            let p = randomize(&scheme, &s, &mut rng);
            assert_eq!(rank_of_scores(&p.perturbed_scores), p.final_ranking);
            let mut sorted_in = s.to_vec();
            let mut sorted_out = p.perturbed_scores.to_vec();
            sorted_in.sort_by(f64::total_cmp);
            sorted_out.sort_by(f64::total_cmp);
            assert_eq!(sorted_in, sorted_out);
            if p.explored {
                explored += 1;
            } else {
                assert_eq!(p.final_ranking, p.base_ranking);
            }
        }
        assert!((300..500).contains(&explored), "{explored}");
    }
}

#[test]
fn identity_order_is_the_base_of_equal_scores() {
    let s = ScoreVector::new(vec![1.0; 4]).unwrap();
    assert_eq!(rank_of_scores(&s), Ranking::identity(4));
}
