//! Adaptive Dormand-Prince 5(4) integration of the particle system.

use serde::{Deserialize, Serialize};

use super::{velocities_into, ParticleState};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::mobility::Mobility;
use crate::trajectory::Trajectory;

// Dormand-Prince tableau; the system is autonomous so the nodes are unused.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Per-step relative tolerance.
    pub rtol: f64,
    /// Absolute tolerance, in units of the initial support length.
    pub atol_scale: f64,
    /// Slack of the maximum-principle check in units of `rtol` times the
    /// initial support length.
    pub gap_slack: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-8,
            atol_scale: 1e-10,
            gap_slack: 10.0,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        IntegratorOptions {
            rtol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Smallest gap seen over every accepted step, not only snapshots.
    pub min_gap: f64,
    /// The gap tolerance `eps_gap` used for the maximum-principle check.
    pub gap_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleRun {
    pub trajectory: Trajectory<ParticleState>,
    pub stats: IntegrationStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettledState {
    pub state: ParticleState,
    /// Largest particle speed at the returned state.
    pub max_speed: f64,
    pub settled: bool,
    pub stats: IntegrationStats,
}

struct Stepper<'a> {
    kernel: &'a Kernel,
    mobility: &'a Mobility,
    opts: IntegratorOptions,
    template: ParticleState,
    cell_mass: f64,
    t: f64,
    y: Vec<f64>,
    /// Velocities at `(t, y)` (first-same-as-last).
    k1: Vec<f64>,
    h: f64,
    atol: f64,
    gap_floor: f64,
    stats: IntegrationStats,
    stages: [Vec<f64>; 6],
    scratch: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(
        state: &ParticleState,
        kernel: &'a Kernel,
        mobility: &'a Mobility,
        opts: IntegratorOptions,
    ) -> Result<Self> {
        if !(opts.rtol > 0.0) {
            return Err(Error::domain("integrator tolerance must be positive"));
        }
        let n = state.positions().len();
        let support = state.support_length();
        let gap_tolerance = opts.gap_slack * opts.rtol * support;
        // The maximum principle only propagates from admissible initial data.
        let gap_floor = state.critical_gap().min(state.min_gap()) - gap_tolerance;
        let mut k1 = vec![0.0; n];
        velocities_into(
            state.positions(),
            state.particle_mass(),
            kernel,
            mobility,
            &mut k1,
        );
        let mut stepper = Stepper {
            kernel,
            mobility,
            opts,
            template: state.clone(),
            cell_mass: state.particle_mass(),
            t: state.time,
            y: state.positions().to_vec(),
            k1,
            h: 0.0,
            atol: opts.atol_scale * support,
            gap_floor,
            stats: IntegrationStats {
                rhs_evaluations: 1,
                min_gap: state.min_gap(),
                gap_tolerance,
                ..Default::default()
            },
            stages: Default::default(),
            scratch: vec![0.0; n],
            y_new: vec![0.0; n],
        };
        for s in stepper.stages.iter_mut() {
            *s = vec![0.0; n];
        }
        stepper.h = stepper.initial_step();
        Ok(stepper)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn rms(&self, v: &[f64], reference: &[f64]) -> f64 {
        let sum: f64 = v
            .iter()
            .zip(reference)
            .map(|(&e, &y)| {
                let q = e / self.scale(y, y);
                q * q
            })
            .sum();
        (sum / v.len() as f64).sqrt()
    }

    fn initial_step(&mut self) -> f64 {
        let d0 = self.rms(&self.y, &self.y);
        let d1 = self.rms(&self.k1, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for (s, (&y, &f)) in self.scratch.iter_mut().zip(self.y.iter().zip(&self.k1)) {
            *s = y + h0 * f;
        }
        let mut f1 = vec![0.0; self.y.len()];
        velocities_into(
            &self.scratch,
            self.cell_mass,
            self.kernel,
            self.mobility,
            &mut f1,
        );
        self.stats.rhs_evaluations += 1;
        let diff: Vec<f64> = f1.iter().zip(&self.k1).map(|(a, b)| a - b).collect();
        let d2 = self.rms(&diff, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    fn eval(&mut self, stage: usize, coeffs: &[f64], h: f64) {
        let n = self.y.len();
        for i in 0..n {
            let mut acc = coeffs[0] * self.k1[i];
            for (c, k) in coeffs[1..].iter().zip(&self.stages) {
                acc += c * k[i];
            }
            self.scratch[i] = self.y[i] + h * acc;
        }
        let mut out = std::mem::take(&mut self.stages[stage]);
        velocities_into(
            &self.scratch,
            self.cell_mass,
            self.kernel,
            self.mobility,
            &mut out,
        );
        self.stages[stage] = out;
        self.stats.rhs_evaluations += 1;
    }

    fn max_speed(&self) -> f64 {
        self.k1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Takes one accepted step that does not pass `t_limit`.
    fn step(&mut self, t_limit: f64) -> Result<()> {
        loop {
            if self.stats.accepted_steps + self.stats.rejected_steps >= self.opts.max_steps {
                return Err(Error::Invariant(format!(
                    "integrator exceeded {} steps at t = {}",
                    self.opts.max_steps, self.t
                )));
            }
            let remaining = t_limit - self.t;
            let lands = self.h >= remaining;
            let h = if lands { remaining } else { self.h };
            if !(h > 0.0) || h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "step size underflow (h = {h}) at t = {}",
                    self.t
                )));
            }

            // stages[0..5] hold k2..k7.
            self.eval(0, &A2, h);
            self.eval(1, &A3, h);
            self.eval(2, &A4, h);
            self.eval(3, &A5, h);
            self.eval(4, &A6, h);
            let n = self.y.len();
            for i in 0..n {
                let mut acc = B[0] * self.k1[i];
                for (b, k) in B[1..].iter().zip(&self.stages) {
                    acc += b * k[i];
                }
                self.y_new[i] = self.y[i] + h * acc;
            }
            let mut k7 = std::mem::take(&mut self.stages[5]);
            velocities_into(
                &self.y_new,
                self.cell_mass,
                self.kernel,
                self.mobility,
                &mut k7,
            );
            self.stages[5] = k7;
            self.stats.rhs_evaluations += 1;

            let mut sum = 0.0;
            for i in 0..n {
                let mut e = E[0] * self.k1[i];
                for (c, k) in E[1..].iter().zip(&self.stages) {
                    e += c * k[i];
                }
                let q = h * e / self.scale(self.y[i], self.y_new[i]);
                sum += q * q;
            }
            let err = (sum / n as f64).sqrt();

            if err <= 1.0 {
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                self.t = if lands { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                std::mem::swap(&mut self.k1, &mut self.stages[5]);
                self.stats.accepted_steps += 1;
                if !lands || factor < 1.0 {
                    self.h = h * factor;
                }
                return self.check_gaps();
            }
            self.stats.rejected_steps += 1;
            self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    fn check_gaps(&mut self) -> Result<()> {
        let mut worst = f64::INFINITY;
        let mut at = 0;
        for (i, w) in self.y.windows(2).enumerate() {
            let g = w[1] - w[0];
            if g < worst {
                worst = g;
                at = i;
            }
        }
        self.stats.min_gap = self.stats.min_gap.min(worst);
        if !(worst > 0.0) || worst < self.gap_floor {
            return Err(Error::Invariant(format!(
                "maximum principle breached after step {} (t = {}): gap x[{}] - x[{}] = {} < {}",
                self.stats.accepted_steps,
                self.t,
                at + 1,
                at,
                worst,
                self.gap_floor
            )));
        }
        Ok(())
    }

    fn snapshot(&self) -> ParticleState {
        self.template.with_positions(self.t, self.y.clone())
    }
}

/// Advances `state` to `t_end`, recording snapshots at the initial time, at
/// each requested output time in `(state.time, t_end)` and at `t_end`.
///
/// Steps are shortened to land exactly on output times, so snapshots carry
/// no interpolation error. After every accepted step the gaps are checked
/// against `min(m/(MN), initial gap) - eps_gap` with
/// `eps_gap = gap_slack * rtol * support length`.
pub fn integrate(
    state: &ParticleState,
    kernel: &Kernel,
    mobility: &Mobility,
    t_end: f64,
    output_times: &[f64],
    opts: IntegratorOptions,
) -> Result<ParticleRun> {
    if !(t_end > state.time) {
        return Err(Error::domain(format!(
            "t_end = {t_end} must exceed the initial time {}",
            state.time
        )));
    }
    let mut stops: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&t| t > state.time && t < t_end)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_end);

    let mut stepper = Stepper::new(state, kernel, mobility, opts)?;
    let mut trajectory = Trajectory::new();
    trajectory.push(state.time, state.clone(), state.diagnostics());
    for &stop in &stops {
        while stepper.t < stop {
            stepper.step(stop)?;
        }
        let snap = stepper.snapshot();
        let diag = snap.diagnostics();
        trajectory.push(stop, snap, diag);
    }
    Ok(ParticleRun {
        trajectory,
        stats: stepper.stats,
    })
}

/// Integrates until every particle speed drops below `speed_threshold` or
/// `t_max` is reached.
pub fn integrate_until_settled(
    state: &ParticleState,
    kernel: &Kernel,
    mobility: &Mobility,
    speed_threshold: f64,
    t_max: f64,
    opts: IntegratorOptions,
) -> Result<SettledState> {
    let mut stepper = Stepper::new(state, kernel, mobility, opts)?;
    let t_max = state.time + t_max;
    while stepper.max_speed() >= speed_threshold && stepper.t < t_max {
        stepper.step(t_max)?;
    }
    Ok(SettledState {
        state: stepper.snapshot(),
        max_speed: stepper.max_speed(),
        settled: stepper.max_speed() < speed_threshold,
        stats: stepper.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{init_particles, rhs};
    use crate::profile::DensityProfile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jammed_state_does_not_drift() {
        let (k, mob) = (Kernel::standard_gaussian(), Mobility::unit());
        let s = ParticleState::jammed(100, 1.0, 1.0, 0.0).unwrap();
        let run = integrate(&s, &k, &mob, 3.0, &[1.0, 2.0], IntegratorOptions::default()).unwrap();
        let last = &run.trajectory.last().unwrap().state;
        for (a, b) in last.positions().iter().zip(s.positions()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}, stats {:?}", run.stats);
        }
        assert_eq!(
            run.trajectory.times().collect::<Vec<_>>(),
            vec![0.0, 1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn linear_test_problem_matches_exponential() {
        // Two far-apart particles on a nearly linear part of K': check the
        // integrator against a very fine reference solution of the same ODE.
        let (k, mob) = (
            Kernel::standard_gaussian(),
            Mobility::truncated_linear(100.0, 1.0).unwrap(),
        );
        let s = ParticleState::new(0.0, vec![-0.05, 0.05], 0.01, 100.0).unwrap();
        let run = integrate(&s, &k, &mob, 1.0, &[], IntegratorOptions::with_rtol(1e-11)).unwrap();
        let x = run.trajectory.last().unwrap().state.positions().to_vec();
        // Reference: explicit midpoint with tiny steps.
        let mut y = s.positions().to_vec();
        let dt = 1e-5;
        for _ in 0..100_000 {
            let st = s.with_positions(0.0, y.clone());
            let f = rhs(&st, &k, &mob).unwrap();
            let mid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a + 0.5 * dt * b).collect();
            let f2 = rhs(&s.with_positions(0.0, mid), &k, &mob).unwrap();
            for (a, b) in y.iter_mut().zip(&f2) {
                *a += dt * b;
            }
        }
        assert_abs_diff_eq!(x[0], y[0], epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], y[1], epsilon = 1e-9);
        assert!(x[0] > -0.05 && x[1] < 0.05);
    }

    #[test]
    fn support_shrinks_and_mass_is_kept() {
        let (k, mob) = (Kernel::standard_gaussian(), Mobility::unit());
        let p = DensityProfile::uniform(-1.0, 1.0, 0.3).unwrap();
        let s = init_particles(&p, 60, &mob).unwrap();
        let times: Vec<f64> = (1..10).map(|i| i as f64 * 0.5).collect();
        let run = integrate(&s, &k, &mob, 5.0, &times, IntegratorOptions::default()).unwrap();
        let mut prev = s.support();
        for snap in run.trajectory.snapshots() {
            let (a, b) = snap.state.support();
            assert!(a >= prev.0 && b <= prev.1);
            prev = (a, b);
            assert_abs_diff_eq!(snap.diagnostics.mass, 0.6, epsilon = 1e-12);
        }
        assert!(prev.1 - prev.0 < 2.0);
    }

    #[test]
    fn rejects_bad_horizon() {
        let (k, mob) = (Kernel::standard_gaussian(), Mobility::unit());
        let s = ParticleState::jammed(4, 1.0, 1.0, 0.0).unwrap();
        assert!(integrate(&s, &k, &mob, 0.0, &[], IntegratorOptions::default()).is_err());
    }

    #[test]
    fn settles_to_jam() {
        let (k, mob) = (Kernel::standard_gaussian(), Mobility::unit());
        let p = DensityProfile::uniform(-0.5, 0.5, 0.5).unwrap();
        let s = init_particles(&p, 40, &mob).unwrap();
        let done = integrate_until_settled(&s, &k, &mob, 1e-6, 200.0, IntegratorOptions::default())
            .unwrap();
        assert!(done.settled);
        assert_abs_diff_eq!(done.state.support_length(), 0.5, epsilon = 1e-3);
    }
}
