use proptest::prelude::*;

use gapweight::diagnostics::{eig_sym, random_symmetric, Matrix};
use gapweight::env::{apply_ordering, synth_stream, OrderingMode, SynthKind};
use gapweight::net::{init_params, NetConfig};
use gapweight::policy::{igw_distribution, reweighted_igw_distribution};
use gapweight::regression::{project_ball, BallSpec};
use gapweight::rng::RademacherStream;

fn argmin(s: &[f64]) -> usize {
    (0..s.len()).fold(0, |b, a| if s[a] < s[b] { a } else { b })
}

proptest! {
    #[test]
    fn igw_rules_are_distributions(
        scores in prop::collection::vec(1e-4f64..1.0, 1..20),
        gamma in 1e-2f64..1e5,
        u in 0.0f64..1.0,
    ) {
        let best = argmin(&scores);
        for d in [igw_distribution(&scores, gamma).unwrap(), reweighted_igw_distribution(&scores, gamma).unwrap()] {
            prop_assert!(d.check(best, 1e-12));
            let a = d.sample(u);
            prop_assert!(a < scores.len() && d.probs()[a] > 0.0);
        }
    }

    #[test]
    fn larger_gamma_concentrates_on_the_best_arm(
        scores in prop::collection::vec(0.01f64..1.0, 2..10),
        gamma in 1.0f64..100.0,
    ) {
        let best = argmin(&scores);
        let lo = igw_distribution(&scores, gamma).unwrap().probs()[best];
        let hi = igw_distribution(&scores, 2.0 * gamma).unwrap().probs()[best];
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(seed in 0u64..500, scale in 0.0f64..50.0, rho in 0.1f64..5.0) {
        let cfg = NetConfig::new(3, 8, 2, 1.0);
        let theta0 = init_params(&cfg, seed).unwrap().params();
        let mut p = init_params(&cfg, seed + 1000).unwrap().params();
        p.scale(scale);
        let ball = BallSpec::new(rho, rho / 2.0);
        let q = project_ball(&p, &theta0, &ball).unwrap();
        let dists = q.layer_distances(&theta0).unwrap();
        for (l, d) in dists.iter().enumerate() {
            let r = if l == cfg.depth { rho / 2.0 } else { rho };
            prop_assert!(*d <= r * (1.0 + 1e-12));
        }
        let again = project_ball(&q, &theta0, &ball).unwrap();
        prop_assert!(again.sub(&q).unwrap().norm() <= 1e-12 * (1.0 + q.norm()));
    }

    #[test]
    fn rademacher_stream_is_random_access(seed in any::<u64>(), offset in 0usize..300, len in 0usize..200) {
        let s = RademacherStream::new(seed);
        let block = s.materialize(offset, len);
        for (j, v) in block.iter().enumerate() {
            prop_assert_eq!(*v, s.sign(offset + j));
        }
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric(n in 1usize..12, seed in 0u64..1000) {
        let a = random_symmetric(n, seed);
        let e = eig_sym(&a).unwrap();
        let r = e.reconstruct();
        let mut diff = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                diff.set(i, j, r.get(i, j) - a.get(i, j));
            }
        }
        prop_assert!(diff.frobenius() <= 1e-10 * (1.0 + a.frobenius()));
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn ordering_permutes_rounds(seed in 0u64..200, mode in 0usize..3) {
        let mode = [OrderingMode::IidShuffle, OrderingMode::SortedByLabel, OrderingMode::ClusterBlocks][mode];
        let s = synth_stream(SynthKind::Cosine, 3, 3, 40, 0.1, seed).unwrap();
        let o = apply_ordering(&s, mode, seed);
        let key = |r: &gapweight::env::BanditRound| format!("{:?}", r.losses);
        let mut a: Vec<String> = s.rounds.iter().map(key).collect();
        let mut b: Vec<String> = o.rounds.iter().map(key).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }
}
