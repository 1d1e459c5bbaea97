use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smoothbr_core::full::{
    drift_rhs_full, full_info_envelope, run_full, step_full, FullInfoState,
};
use smoothbr_core::game::{JointStrategy, MixedStrategy, Player};
use smoothbr_core::lyapunov::lyap_v;
use smoothbr_core::minimal::{
    conditional_v_drift_certificate, conditional_w_drift_oracle, run_minimal, step_minimal,
    td_expected_increment, td_second_moment, MinimalRunConfig,
};
use smoothbr_core::sampling::{random_game, random_game_sized, random_joint, random_minimal_state};
use smoothbr_core::schedule::StepsizeSchedule;
use smoothbr_core::Temperature;

fn simplex_ok(s: &MixedStrategy) -> bool {
    (s.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12 && s.probs().iter().all(|&p| p >= 0.0)
}

fn schedules() -> impl Strategy<Value = StepsizeSchedule> {
    prop_oneof![
        (0.001f64..0.999).prop_map(|b| StepsizeSchedule::constant(b).unwrap()),
        (1.001f64..=2.0).prop_map(|b| StepsizeSchedule::inverse_linear(b).unwrap()),
        (0.01f64..0.99, 0.05f64..0.95)
            .prop_map(|(b, e)| StepsizeSchedule::inverse_polynomial_min_offset(b, e))
            .prop_filter("offset fits in u64", |s| s.is_ok())
            .prop_map(|s| s.unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn stepsizes_are_nonincreasing_and_in_range(s in schedules(), k in 1u64..100_000) {
        let a = s.beta_at(k).unwrap();
        let b = s.beta_at(k + 1).unwrap();
        prop_assert!(b <= a);
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(s.offset_admissible());
    }

    #[test]
    fn full_step_preserves_simplex_and_drift(seed in any::<u64>(), log_tau in -2.0f64..1.0, beta in 0.0001f64..0.9999, spread in 0.0f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, 6, 6);
        let tau = Temperature::new(10f64.powf(log_tau)).unwrap();
        let s = FullInfoState::new(random_joint(&mut rng, g.counts(), spread));
        let next = step_full(&g, &s, tau, beta).unwrap();
        prop_assert!(simplex_ok(&next.joint.p1) && simplex_ok(&next.joint.p2));
        let v0 = lyap_v(&g, &s.joint, tau).unwrap();
        let v1 = lyap_v(&g, &next.joint, tau).unwrap();
        prop_assert!(v1 <= drift_rhs_full(v0, beta, g.a_max(), tau.value()) + 1e-10);
    }

    #[test]
    fn td_increment_is_unbiased(seed in any::<u64>(), alpha in 0.0f64..=1.0, spread in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, 5, 5);
        let s = random_minimal_state(&mut rng, &g, spread);
        let [e1, e2] = td_expected_increment(&g, &s, alpha).unwrap();
        let l1 = g.local_payoff(Player::One, &s.joint.p2).unwrap();
        let l2 = g.local_payoff(Player::Two, &s.joint.p1).unwrap();
        for (a, e) in e1.iter().enumerate() {
            prop_assert!((e - alpha * (l1[a] - s.q1[a])).abs() <= 1e-12);
        }
        for (a, e) in e2.iter().enumerate() {
            prop_assert!((e - alpha * (l2[a] - s.q2[a])).abs() <= 1e-12);
        }
    }

    #[test]
    fn importance_weighted_second_moment(seed in any::<u64>(), spread in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, 5, 5);
        let s = random_minimal_state(&mut rng, &g, spread);
        let delta = s.joint.min_mass();
        let bound = 4.0 * g.a_max() as f64 / delta;
        for p in Player::BOTH {
            for a_opp in 0..g.counts().of(p.opponent()) {
                prop_assert!(td_second_moment(&g, &s, p, a_opp).unwrap() <= bound);
            }
        }
    }

    #[test]
    fn strategy_mass_contracts_at_most_by_one_minus_beta(seed in any::<u64>(), beta in 0.0001f64..0.9999, spread in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game(&mut rng, 5, 5);
        let s = random_minimal_state(&mut rng, &g, spread);
        let tau = Temperature::new(0.05).unwrap();
        let (next, _) = step_minimal(&g, &s, tau, beta, 0.01, &mut rng).unwrap();
        prop_assert!(next.joint.p1.min_mass() >= (1.0 - beta) * s.joint.p1.min_mass());
        prop_assert!(next.joint.p2.min_mass() >= (1.0 - beta) * s.joint.p2.min_mass());
    }

    #[test]
    fn coupled_drift_certificates(seed in any::<u64>(), n in 2usize..=3, log_tau in -1.3f64..0.0, spread in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_game_sized(&mut rng, n, n);
        let s = random_minimal_state(&mut rng, &g, spread);
        let tau = Temperature::new(10f64.powf(log_tau)).unwrap();
        let alpha = rng.gen_range(0.0..=1.0);
        let beta = alpha * rng.gen_range(0.0..=1.0);
        let w = conditional_w_drift_oracle(&g, &s, tau, beta, alpha, 0.25).unwrap();
        prop_assert!(w.satisfied, "W: lhs {} rhs {}", w.lhs, w.rhs);
        let v = conditional_v_drift_certificate(&g, &s, tau, beta, 0.25).unwrap();
        prop_assert!(v.satisfied, "V: lhs {} rhs {}", v.lhs, v.rhs);
    }
}

#[test]
fn constant_step_envelope_from_corners() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tau = Temperature::new(0.1).unwrap();
    let sched = StepsizeSchedule::constant(0.1).unwrap();
    for _ in 0..50 {
        let g = random_game(&mut rng, 5, 5);
        let c = g.counts();
        let init = JointStrategy::new(
            MixedStrategy::pure(c.n1, rng.gen_range(0..c.n1)),
            MixedStrategy::pure(c.n2, rng.gen_range(0..c.n2)),
        );
        let tr = run_full(&g, &init, tau, &sched, 500, true).unwrap();
        let bound = full_info_envelope(&sched, g.a_max(), tau, tr[0].v, 500);
        assert!(tr[500].ng <= bound + 1e-10);
    }
}

#[test]
fn decaying_step_envelopes_along_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let tau = Temperature::new(0.1).unwrap();
    for i in 0..20 {
        let g = random_game(&mut rng, 5, 5);
        let c = g.counts();
        let init = JointStrategy::new(MixedStrategy::pure(c.n1, 0), MixedStrategy::pure(c.n2, c.n2 - 1));
        let sched = if i % 2 == 0 {
            StepsizeSchedule::inverse_linear(1.0 + 0.05 * (i + 1) as f64).unwrap()
        } else {
            StepsizeSchedule::inverse_polynomial_min_offset(0.5, 0.5).unwrap()
        };
        let tr = run_full(&g, &init, tau, &sched, 300, true).unwrap();
        for r in tr.iter().skip(1) {
            let bound = full_info_envelope(&sched, g.a_max(), tau, tr[0].v, r.k - 1);
            assert!(r.ng <= bound + 1e-10, "k {} ng {} bound {bound}", r.k, r.ng);
        }
    }
}

#[test]
fn boundary_envelope_along_minimal_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..6 {
        let g = random_game(&mut rng, 4, 4);
        let cfg = MinimalRunConfig {
            tau: Temperature::new(0.05 + 0.05 * i as f64).unwrap(),
            c_sep: 0.2,
            schedule: StepsizeSchedule::constant(0.01).unwrap(),
            k_total: 3000,
            seed: i,
            record_every: 1,
            delta: None,
        };
        let run = run_minimal(&g, &cfg).unwrap();
        assert_eq!(run.envelope_violations, 0);
        let a = g.a_max() as f64;
        for r in &run.trace {
            let env = (1.0 / a) * (1.0f64 - 0.01).powi((r.k - 1) as i32);
            assert!(r.min_mass_p1.min(r.min_mass_p2) >= env * (1.0 - 1e-12));
        }
    }
}

#[test]
fn coupled_certificates_along_visited_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let tau = Temperature::new(0.3).unwrap();
    let (beta, alpha) = (0.01, 0.02);
    for n in [2, 3, 2, 3] {
        let g = random_game_sized(&mut rng, n, n);
        let mut s = smoothbr_core::minimal::MinimalInfoState::uniform(&g);
        for _ in 0..2000 {
            let w = conditional_w_drift_oracle(&g, &s, tau, beta, alpha, 0.25).unwrap();
            let v = conditional_v_drift_certificate(&g, &s, tau, beta, 0.25).unwrap();
            assert!(w.satisfied && v.satisfied, "k {} w {w:?} v {v:?}", s.k);
            s = step_minimal(&g, &s, tau, beta, alpha, &mut rng).unwrap().0;
        }
    }
}
