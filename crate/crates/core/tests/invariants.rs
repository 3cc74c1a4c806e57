//! Property tests for the particle dynamics, run on small random
//! admissible states.

use nlftl::particles::{
    empirical_measure, integrate, reconstruct_density, rhs, IntegratorOptions, Reconstruction,
};
use nlftl::{wasserstein1, Kernel, Mobility, ParticleState, Trajectory};
use proptest::prelude::*;

const T_END: f64 = 0.5;

fn arb_state() -> impl Strategy<Value = (ParticleState, Mobility)> {
    (
        proptest::collection::vec(1.0f64..5.0, 2..24),
        0.2f64..2.0,
        0.5f64..2.0,
        -1.0f64..1.0,
    )
        .prop_map(|(stretch, m, big_m, x0)| {
            let n = stretch.len();
            let crit = m / (big_m * n as f64);
            let mut x = vec![x0];
            for s in &stretch {
                x.push(x.last().unwrap() + s * crit);
            }
            let state = ParticleState::new(0.0, x, m / n as f64, big_m).unwrap();
            (state, Mobility::truncated_linear(big_m, 1.0).unwrap())
        })
}

fn evolve(state: &ParticleState, mob: &Mobility) -> Trajectory<ParticleState> {
    let outs: Vec<f64> = (1..10).map(|k| T_END * k as f64 / 10.0).collect();
    integrate(
        state,
        &Kernel::standard_gaussian(),
        mob,
        T_END,
        &outs,
        IntegratorOptions::default(),
    )
    .unwrap()
    .trajectory
}

/// O(N^2) transcription of the particle system, term by term.
fn brute_force_rhs(x: &[f64], pm: f64, mob: &Mobility) -> Vec<f64> {
    let k = Kernel::standard_gaussian();
    let n = x.len() - 1;
    (0..=n)
        .map(|i| {
            let mut v = 0.0;
            if i < n {
                let s: f64 = (i + 1..=n).map(|j| k.first(x[i] - x[j])).sum();
                v -= mob.speed(pm / (x[i + 1] - x[i])) * pm * s;
            }
            if i > 0 {
                let s: f64 = (0..i).map(|j| k.first(x[i] - x[j])).sum();
                v -= mob.speed(pm / (x[i] - x[i - 1])) * pm * s;
            }
            v
        })
        .collect()
}

fn lipschitz(state: &ParticleState) -> f64 {
    let (lo, hi) = state.support();
    let reach = 2.0 * lo.abs().max(hi.abs());
    Kernel::standard_gaussian().lipschitz_bound(-reach, reach)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rhs_matches_brute_force((state, mob) in arb_state()) {
        let got = rhs(&state, &Kernel::standard_gaussian(), &mob).unwrap();
        let want = brute_force_rhs(state.positions(), state.particle_mass(), &mob);
        let scale = want.iter().fold(f64::MIN_POSITIVE, |s, w| s.max(w.abs()));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-14 * scale, "{g} vs {w}");
        }
    }

    #[test]
    fn gaps_stay_above_critical((state, mob) in arb_state()) {
        let crit = state.critical_gap();
        for s in evolve(&state, &mob).snapshots() {
            prop_assert!(s.state.min_gap() >= crit - 1e-6, "t = {}: {} < {}", s.time, s.state.min_gap(), crit);
        }
    }

    #[test]
    fn support_shrinks((state, mob) in arb_state()) {
        let traj = evolve(&state, &mob);
        for w in traj.snapshots().windows(2) {
            let (a, b) = (w[0].state.support(), w[1].state.support());
            prop_assert!(b.0 >= a.0 - 1e-12 && b.1 <= a.1 + 1e-12);
        }
    }

    #[test]
    fn end_particles_move_inward((state, mob) in arb_state()) {
        let v = rhs(&state, &Kernel::standard_gaussian(), &mob).unwrap();
        prop_assert!(v[0] >= 0.0);
        prop_assert!(*v.last().unwrap() <= 0.0);
    }

    #[test]
    fn mass_is_exact((state, mob) in arb_state()) {
        let m = state.total_mass();
        for s in evolve(&state, &mob).snapshots() {
            let rel = (reconstruct_density(&s.state, Reconstruction::Forward).mass() - m).abs() / m;
            prop_assert!(rel <= 1e-12);
        }
    }

    #[test]
    fn symmetric_states_stay_symmetric(
        half in proptest::collection::vec(1.0f64..5.0, 1..12),
        m in 0.2f64..2.0,
    ) {
        let n = 2 * half.len();
        let crit = m / n as f64;
        let mut right = vec![0.0];
        for s in &half {
            right.push(right.last().unwrap() + s * crit);
        }
        let x: Vec<f64> = right.iter().rev().map(|x| -x).chain(right[1..].iter().copied()).collect();
        let state = ParticleState::new(0.0, x, m / n as f64, 1.0).unwrap();
        let tol = 1e-6 * state.support_length();
        for s in evolve(&state, &Mobility::unit()).snapshots() {
            let x = s.state.positions();
            for i in 0..=n {
                prop_assert!((x[i] + x[n - i]).abs() <= tol, "t = {}: x_{i} + x_{} = {}", s.time, n - i, x[i] + x[n - i]);
            }
        }
    }

    #[test]
    fn total_variation_growth_is_bounded((state, mob) in arb_state()) {
        let rate = 4.0 * lipschitz(&state) * mob.v_max();
        let traj = evolve(&state, &mob);
        let tv0 = traj.snapshots()[0].diagnostics.total_variation;
        for s in traj.snapshots() {
            prop_assert!(s.diagnostics.total_variation <= tv0 * (rate * s.time).exp() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn w1_is_lipschitz_in_time((state, mob) in arb_state()) {
        let rate = 12.0 * lipschitz(&state) * mob.v_max() * state.total_mass();
        let slack = 2.0 * IntegratorOptions::default().rtol * state.support_length();
        let snaps: Vec<_> = evolve(&state, &mob)
            .snapshots()
            .iter()
            .map(|s| (s.time, reconstruct_density(&s.state, Reconstruction::Forward)))
            .collect();
        for i in 0..snaps.len() {
            for j in i + 1..snaps.len() {
                let d = wasserstein1(&snaps[i].1, &snaps[j].1).unwrap();
                prop_assert!(d <= rate * (snaps[j].0 - snaps[i].0) + slack);
            }
        }
    }

    #[test]
    fn empirical_measure_is_close((state, _mob) in arb_state()) {
        let forward = reconstruct_density(&state, Reconstruction::Forward);
        let d = wasserstein1(&forward, &empirical_measure(&state)).unwrap();
        let bound = state.total_mass() * state.support_length() / (2.0 * state.cells() as f64);
        prop_assert!(d <= bound + 1e-12);
    }
}
