use dualctl_core::istate::{normalize_shift, update_magnitude};
use dualctl_core::oracle::brute_force_r_magnitude;
use dualctl_core::sim::{adversarial_search, simulate, SearchSettings};
use dualctl_core::{CeSignPolicy, InfoState, Integrator, Policy, ProportionalPolicy, SystemModel};
use proptest::prelude::*;

fn state(rp: f64, rm: f64, y: f64) -> InfoState<f64> {
    InfoState::magnitude(rp, rm, y).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn translation_equivariance(
        rp in -50.0..50.0f64, rm in -50.0..50.0f64, c in -100.0..100.0f64,
        y in 0.0..5.0f64, u in -5.0..5.0f64, v in 0.0..10.0f64, gamma in 0.5..5.0f64,
    ) {
        let a = update_magnitude(&state(rp, rm, y), u, v, gamma).unwrap().pair();
        let b = update_magnitude(&state(rp + c, rm + c, y), u, v, gamma).unwrap().pair();
        prop_assert!(close(b[0], a[0] + c, 1e-12));
        prop_assert!(close(b[1], a[1] + c, 1e-12));
    }

    #[test]
    fn monotone_in_r(
        rp in -50.0..50.0f64, rm in -50.0..50.0f64, dp in 0.0..20.0f64, dm in 0.0..20.0f64,
        y in 0.0..5.0f64, u in -5.0..5.0f64, v in 0.0..10.0f64, gamma in 0.5..5.0f64,
    ) {
        let a = update_magnitude(&state(rp, rm, y), u, v, gamma).unwrap().pair();
        let b = update_magnitude(&state(rp + dp, rm + dm, y), u, v, gamma).unwrap().pair();
        prop_assert!(b[0] >= a[0] && b[1] >= a[1]);
    }

    #[test]
    fn mirror_symmetry(
        rp in -50.0..50.0f64, rm in -50.0..50.0f64,
        y in 0.0..5.0f64, u in -5.0..5.0f64, v in 0.0..10.0f64, gamma in 0.5..5.0f64,
    ) {
        let a = update_magnitude(&state(rp, rm, y), u, v, gamma).unwrap().pair();
        let b = update_magnitude(&state(rm, rp, y), -u, v, gamma).unwrap().pair();
        prop_assert_eq!(a[0], b[1]);
        prop_assert_eq!(a[1], b[0]);
    }

    #[test]
    fn normalization_round_trip(rp in -1e3..1e3f64, rm in -1e3..1e3f64, y in 0.0..5.0f64) {
        let s = state(rp, rm, y);
        let (n, shift) = normalize_shift(&s).unwrap();
        prop_assert_eq!(n.max_entry().value(), 0.0);
        let tol = 4.0 * f64::EPSILON * (rp.abs() + rm.abs());
        prop_assert!((n.pair()[0] + shift - rp).abs() <= tol);
        prop_assert!((n.pair()[1] + shift - rm).abs() <= tol);
    }

    #[test]
    fn preimage_is_sound(y in 0.0..100.0f64) {
        for x in Integrator.preimage(&y).unwrap() {
            prop_assert_eq!(Integrator.measurement(&x), y);
        }
    }

    #[test]
    fn recursion_matches_enumeration(
        ys in prop::collection::vec(0.0..3.0f64, 2..7),
        us in prop::collection::vec(-3.0..3.0f64, 6),
        gamma in 0.5..4.0f64,
    ) {
        let n = ys.len() - 1;
        let mut s = InfoState::initial(ys[0]);
        for t in 0..n {
            s = update_magnitude(&s, us[t], ys[t + 1], gamma).unwrap();
        }
        let brute = brute_force_r_magnitude(&ys, &us[..n], gamma).unwrap();
        let rec = s.pair();
        prop_assert!((rec[0] - brute[0]).abs() < 1e-9 * (1.0 + brute[0].abs()));
        prop_assert!((rec[1] - brute[1]).abs() < 1e-9 * (1.0 + brute[1].abs()));
    }

    #[test]
    fn realized_cost_is_a_lower_bound(
        x0 in -3.0..3.0f64,
        w in prop::collection::vec(-2.0..2.0f64, 1..30),
        gain in -1.5..1.5f64,
    ) {
        let gamma = 2.0;
        let policies: [Box<dyn Policy>; 2] = [Box::new(CeSignPolicy::new(0.7)), Box::new(ProportionalPolicy::new(gain))];
        for policy in &policies {
            let traj = simulate(policy, &w, x0, gamma, None).unwrap();
            for t in 0..traj.records.len() {
                let realized = traj.records[t].cum_cost - gamma * gamma * traj.records[t].cum_dist;
                let (x_next, r_next) = match traj.records.get(t + 1) {
                    Some(next) => (next.x, [next.r_plus, next.r_minus]),
                    None => (traj.final_x, traj.final_r),
                };
                let r_true = if x_next > 0.0 {
                    r_next[0]
                } else if x_next < 0.0 {
                    r_next[1]
                } else {
                    r_next[0].max(r_next[1])
                };
                prop_assert!(r_true >= realized - 1e-9 * (1.0 + realized.abs()));
            }
        }
    }

    #[test]
    fn replay_is_deterministic(x0 in -3.0..3.0f64, w in prop::collection::vec(-2.0..2.0f64, 1..40)) {
        let p = CeSignPolicy::new(0.7);
        let a = simulate(&p, &w, x0, 4.0, None).unwrap();
        let b = simulate(&p, &w, x0, 4.0, None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn adversarial_search_is_reproducible() {
    let settings = SearchSettings { budget: 300, seed: 11, ..SearchSettings::default() };
    let p = ProportionalPolicy::new(0.3);
    let a = adversarial_search(&p, 1.0, 4.0, 20, &settings).unwrap();
    let b = adversarial_search(&p, 1.0, 4.0, 20, &settings).unwrap();
    assert_eq!(a, b);
}
