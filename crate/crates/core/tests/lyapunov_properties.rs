use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smoothbr_core::game::{JointStrategy, MixedStrategy, Player, ZeroSumGame};
use smoothbr_core::lyapunov::{
    drift_certificate_full, grad_v, hessian_block, hessian_bound, hessian_norm_estimate,
    lyap_lower_bound_certificate, lyap_v, lyap_v_alt, lyap_v_harris, lyap_v_kl,
    smoothness_constant,
};
use smoothbr_core::sampling::{random_game_sized, random_joint};
use smoothbr_core::smoothed::{regularized_best_response_value, softmax};
use smoothbr_core::Temperature;

#[derive(Debug)]
struct Case {
    game: ZeroSumGame,
    joint: JointStrategy,
    tau: Temperature,
}

fn case(n1: usize, n2: usize, seed: u64, log_tau: f64, spread: f64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let game = random_game_sized(&mut rng, n1, n2);
    let joint = random_joint(&mut rng, game.counts(), spread);
    Case {
        game,
        joint,
        tau: Temperature::new(10f64.powf(log_tau)).unwrap(),
    }
}

fn cases() -> impl Strategy<Value = Case> {
    (2usize..=6, 2usize..=5, any::<u64>(), -3.0f64..=1.0, 0.0f64..=4.0)
        .prop_map(|(n1, n2, seed, lt, sp)| case(n1, n2, seed, lt, sp))
}

fn log_a(g: &ZeroSumGame) -> f64 {
    g.counts().log_a_max()
}

/// Symmetric eigen-decomposition oracle for the largest Hessian eigenvalue.
fn exact_block_norm(h: &[Vec<f64>]) -> f64 {
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn perturb(p: &MixedStrategy, d: &[f64], h: f64) -> MixedStrategy {
    MixedStrategy::renormalized(p.probs().iter().zip(d).map(|(x, y)| x + h * y).collect()).unwrap()
}

fn with(joint: &JointStrategy, player: Player, s: MixedStrategy) -> JointStrategy {
    match player {
        Player::One => JointStrategy::new(s, joint.p2.clone()),
        Player::Two => JointStrategy::new(joint.p1.clone(), s),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn gap_is_sandwiched_by_v(c in cases()) {
        let ng = c.game.nash_gap(&c.joint).unwrap();
        let v = lyap_v(&c.game, &c.joint, c.tau).unwrap();
        let vh = lyap_v_harris(&c.game, &c.joint).unwrap();
        prop_assert!(ng <= v + 1e-12);
        prop_assert!(v >= vh - 1e-12);
        prop_assert!(v - vh <= 2.0 * c.tau.value() * log_a(&c.game) + 1e-12);
        prop_assert!((vh - ng).abs() <= 1e-12);
    }

    #[test]
    fn alt_equals_scaled_kl(c in cases()) {
        let alt = lyap_v_alt(&c.game, &c.joint, c.tau).unwrap();
        let kl = lyap_v_kl(&c.game, &c.joint, c.tau).unwrap();
        prop_assert!(kl >= -1e-15);
        prop_assert!((alt - c.tau.value() * kl).abs() <= 1e-9 * alt.abs().max(1.0));
    }

    #[test]
    fn full_drift_certificate_holds(c in cases()) {
        let cert = drift_certificate_full(&c.game, &c.joint, c.tau).unwrap();
        prop_assert!(cert.satisfied, "lhs {} rhs {}", cert.lhs, cert.rhs);
    }

    #[test]
    fn lower_bound_certificate_holds(c in cases()) {
        prop_assert!(lyap_lower_bound_certificate(&c.game, &c.joint, c.tau).unwrap().satisfied);
    }

    #[test]
    fn hessian_estimate_is_bounded_and_matches_eigen_oracle(c in cases()) {
        let est = hessian_norm_estimate(&c.game, &c.joint, c.tau).unwrap();
        let bound = hessian_bound(&c.game, c.tau);
        prop_assert!(est <= bound + 1e-8);
        let exact = Player::BOTH
            .iter()
            .map(|&p| exact_block_norm(&hessian_block(&c.game, &c.joint, c.tau, p).unwrap()))
            .fold(0.0f64, f64::max);
        prop_assert!(exact <= bound + 1e-8);
        // a Rayleigh quotient never exceeds the top eigenvalue
        prop_assert!(est <= exact * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn softmax_and_smoothed_max_bounds(c in cases()) {
        for p in Player::BOTH {
            let q = c.game.local_payoff(p, c.joint.get(p.opponent())).unwrap();
            let s = softmax(&q, c.tau).unwrap();
            prop_assert!((s.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let g = regularized_best_response_value(&q, c.tau).unwrap();
            let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(g >= m - 1e-12);
            prop_assert!(g <= m + c.tau.value() * (q.len() as f64).ln() + 1e-12);
        }
    }
}

fn gradient_cases() -> impl Strategy<Value = (Case, u64)> {
    (2usize..=6, 2usize..=5, any::<u64>(), (0.05f64).log10()..=(5.0f64).log10(), 0.0f64..=2.0, any::<u64>())
        .prop_map(|(n1, n2, seed, lt, sp, dseed)| (case(n1, n2, seed, lt, sp), dseed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_central_differences((c, dseed) in gradient_cases()) {
        let mut rng = ChaCha8Rng::seed_from_u64(dseed);
        let h = 1e-6;
        for p in Player::BOTH {
            let own = c.joint.get(p);
            let target = random_joint(&mut rng, c.game.counts(), 1.0);
            let d: Vec<f64> = target.get(p).probs().iter().zip(own.probs()).map(|(a, b)| a - b).collect();
            let plus = with(&c.joint, p, perturb(own, &d, h));
            let minus = with(&c.joint, p, perturb(own, &d, -h));
            let fd = (lyap_v(&c.game, &plus, c.tau).unwrap() - lyap_v(&c.game, &minus, c.tau).unwrap()) / (2.0 * h);
            let g = grad_v(&c.game, &c.joint, c.tau, p).unwrap();
            let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(fd.abs()) + 1e-9, "fd {fd} analytic {an}");
        }
    }

    #[test]
    fn hessian_vector_products_match_gradient_differences((c, dseed) in gradient_cases()) {
        let mut rng = ChaCha8Rng::seed_from_u64(dseed);
        let h = 1e-6;
        for p in Player::BOTH {
            let own = c.joint.get(p);
            let target = random_joint(&mut rng, c.game.counts(), 1.0);
            let d: Vec<f64> = target.get(p).probs().iter().zip(own.probs()).map(|(a, b)| a - b).collect();
            let gp = grad_v(&c.game, &with(&c.joint, p, perturb(own, &d, h)), c.tau, p).unwrap();
            let gm = grad_v(&c.game, &with(&c.joint, p, perturb(own, &d, -h)), c.tau, p).unwrap();
            let hb = hessian_block(&c.game, &c.joint, c.tau, p).unwrap();
            for (a, row) in hb.iter().enumerate() {
                let hv: f64 = row.iter().zip(&d).map(|(x, y)| x * y).sum();
                let fd = (gp[a] - gm[a]) / (2.0 * h);
                prop_assert!((fd - hv).abs() <= 1e-4 * hv.abs().max(fd.abs()) + 1e-7, "fd {fd} closed form {hv}");
            }
        }
    }

    #[test]
    fn gradient_is_lipschitz((c, dseed) in gradient_cases()) {
        let mut rng = ChaCha8Rng::seed_from_u64(dseed);
        let other = random_joint(&mut rng, c.game.counts(), 3.0);
        for p in Player::BOTH {
            let g1 = grad_v(&c.game, &c.joint, c.tau, p).unwrap();
            let g2 = grad_v(&c.game, &other, c.tau, p).unwrap();
            let dg = g1.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dp = c.joint.get(p).probs().iter().zip(other.get(p).probs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dg <= smoothness_constant(&c.game, c.tau) * dp + 1e-12);
            prop_assert!(dg <= hessian_bound(&c.game, c.tau) * dp + 1e-12);
        }
    }
}
