//! Scenario runs: single methods, the particle/Godunov comparison, the
//! convergence sweep and the entropy audit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AuditMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::godunov::{GodunovOptions, GodunovRun, GodunovSolver, Grid};
use crate::metrics::{self, EntropyReport, TestFunction};
use crate::particles::{self, IntegratorOptions, ParticleRun, ParticleState, Reconstruction};
use crate::profile::DensityProfile;
use crate::trajectory::{Diagnostics, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleOutcome {
    pub initial: ParticleState,
    pub run: ParticleRun,
}

impl ParticleOutcome {
    pub fn densities(&self, mode: Reconstruction) -> Trajectory<DensityProfile> {
        self.run
            .trajectory
            .map(|s| particles::reconstruct_density(s, mode))
    }
}

pub fn run_particles(cfg: &ScenarioConfig) -> Result<ParticleOutcome> {
    cfg.validate()?;
    run_particles_with(cfg, cfg.particles)
}

fn run_particles_with(cfg: &ScenarioConfig, n: usize) -> Result<ParticleOutcome> {
    let profile = cfg.initial_profile()?;
    let initial = particles::init_particles(&profile, n, &cfg.mobility)?;
    let run = particles::integrate(
        &initial,
        &cfg.kernel,
        &cfg.mobility,
        cfg.t_end,
        &cfg.resolved_output_times(),
        IntegratorOptions::with_rtol(cfg.integrator_tol),
    )?;
    Ok(ParticleOutcome { initial, run })
}

fn godunov_solver(cfg: &ScenarioConfig, grid: Grid) -> Result<GodunovSolver> {
    let options = GodunovOptions {
        cfl: cfg.cfl,
        placement: cfg.field_placement,
        ..GodunovOptions::default()
    };
    GodunovSolver::new(grid, cfg.kernel, cfg.mobility, options)
}

pub fn run_godunov(cfg: &ScenarioConfig) -> Result<GodunovRun> {
    cfg.validate()?;
    godunov_solver(cfg, cfg.grid()?)?.run(
        &cfg.initial_profile()?,
        cfg.t_end,
        &cfg.resolved_output_times(),
    )
}

/// Distances between the centred particle density and the Godunov profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub t: f64,
    pub l1: f64,
    /// 1-Wasserstein distance with the Godunov profile rescaled to the
    /// particle mass.
    pub w1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub particles: ParticleOutcome,
    pub godunov: GodunovRun,
    pub rows: Vec<CompareRow>,
}

pub fn compare_trajectories(
    particles: &Trajectory<DensityProfile>,
    godunov: &Trajectory<DensityProfile>,
) -> Result<Vec<CompareRow>> {
    if particles.len() != godunov.len()
        || particles.times().zip(godunov.times()).any(|(a, b)| a != b)
    {
        return Err(Error::domain(
            "trajectories are not sampled at the same times",
        ));
    }
    particles
        .snapshots()
        .iter()
        .zip(godunov.snapshots())
        .map(|(p, g)| {
            Ok(CompareRow {
                t: p.time,
                l1: metrics::l1_distance(&p.state, &g.state),
                w1: metrics::wasserstein1_rescaled(&p.state, &g.state)?,
            })
        })
        .collect()
}

pub fn run_compare(cfg: &ScenarioConfig) -> Result<CompareReport> {
    let particles = run_particles(cfg)?;
    let godunov = run_godunov(cfg)?;
    let rows = compare_trajectories(
        &particles.densities(Reconstruction::Centered),
        &godunov.trajectory,
    )?;
    Ok(CompareReport {
        particles,
        godunov,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// L1 distance at `t_end` between the forward particle density and the
    /// reference Godunov profile.
    pub error: f64,
    /// `e_N / e_{N'}` for the next entry `N'`; absent on the last row.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub reference_cells: usize,
    pub rows: Vec<ConvergenceRow>,
}

pub fn run_convergence(
    cfg: &ScenarioConfig,
    n_list: &[usize],
    reference_cells: usize,
) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(
            "particle counts must be positive and increasing",
        ));
    }
    let largest = n_list[n_list.len() - 1];
    if reference_cells < 4 * largest {
        return Err(Error::config(format!(
            "reference needs at least {} cells, got {reference_cells}",
            4 * largest
        )));
    }
    let grid = Grid::new(cfg.grid.left, cfg.grid.right, reference_cells)?;
    let profile = cfg.initial_profile()?;
    let reference = godunov_solver(cfg, grid)?.run(&profile, cfg.t_end, &[])?;
    let target = &reference
        .trajectory
        .last()
        .expect("run has snapshots")
        .state;
    let errors = n_list
        .par_iter()
        .map(|&n| {
            let initial = particles::init_particles(&profile, n, &cfg.mobility)?;
            let run = particles::integrate(
                &initial,
                &cfg.kernel,
                &cfg.mobility,
                cfg.t_end,
                &[],
                IntegratorOptions::with_rtol(cfg.integrator_tol),
            )?;
            let last = &run.trajectory.last().expect("run has snapshots").state;
            let forward = particles::reconstruct_density(last, Reconstruction::Forward);
            Ok(metrics::l1_distance(&forward, target))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows = n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| ConvergenceRow {
            n,
            error: errors[k],
            ratio: errors.get(k + 1).map(|next| errors[k] / next),
        })
        .collect();
    Ok(ConvergenceTable {
        reference_cells,
        rows,
    })
}

/// One audited `(T, c, phi)` triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    #[serde(flatten)]
    pub report: EntropyReport,
    pub horizon: f64,
}

/// The trajectory an audit inspected.
#[derive(Clone, Debug, PartialEq)]
pub enum AuditSource {
    Particles(ParticleOutcome),
    Godunov(GodunovRun),
    Frozen(DensityProfile),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub mode: AuditMode,
    pub source: AuditSource,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn flagged(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.report.flagged)
    }

    /// Smallest horizon at which any pair is flagged.
    pub fn first_flagged_horizon(&self) -> Option<f64> {
        self.flagged().map(|e| e.horizon).min_by(f64::total_cmp)
    }
}

/// A trajectory holding `profile` fixed on `[0, end]`.
pub fn frozen_trajectory(profile: &DensityProfile, end: f64) -> Trajectory<DensityProfile> {
    let diagnostics = Diagnostics {
        mass: profile.mass(),
        total_variation: metrics::total_variation(profile),
        min_gap: None,
    };
    let mut t = Trajectory::new();
    t.push(0.0, profile.clone(), diagnostics);
    t.push(end, profile.clone(), diagnostics);
    t
}

fn with_horizon(phi: &TestFunction, horizon: f64) -> TestFunction {
    let mut phi = phi.clone();
    phi.plateau.horizon = horizon;
    phi
}

fn audit(
    cfg: &ScenarioConfig,
    traj: &Trajectory<DensityProfile>,
    functions: &[TestFunction],
    horizon: f64,
) -> Result<Vec<AuditEntry>> {
    let constants = cfg.entropy.constants_for(cfg.mobility.max_density());
    let per_phi = functions
        .par_iter()
        .map(|phi| {
            metrics::entropy_residuals(
                traj,
                &cfg.kernel,
                &cfg.mobility,
                phi,
                &constants,
                cfg.entropy.resolution,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_phi
        .into_iter()
        .flatten()
        .map(|report| AuditEntry { report, horizon })
        .collect())
}

/// Evaluates the entropy residual over the configured `(c, phi)` grid.
///
/// Evolving modes use test functions whose plateau ends at `t_end`, so they
/// need `t_end >= 1`. Frozen mode sweeps the configured horizons.
pub fn run_entropy_audit(cfg: &ScenarioConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let es = &cfg.entropy;
    let evolving_horizon = || {
        if cfg.t_end < 1.0 {
            Err(Error::config(format!(
                "entropy audit of an evolving trajectory needs t_end >= 1, got {}",
                cfg.t_end
            )))
        } else {
            Ok(cfg.t_end - 1.0)
        }
    };
    let (source, entries) = match es.mode {
        AuditMode::Particles => {
            let horizon = evolving_horizon()?;
            let outcome = run_particles(cfg)?;
            let traj = outcome.densities(Reconstruction::Forward);
            let entries = audit(cfg, &traj, &es.library(horizon), horizon)?;
            (AuditSource::Particles(outcome), entries)
        }
        AuditMode::Godunov => {
            let horizon = evolving_horizon()?;
            let run = run_godunov(cfg)?;
            let entries = audit(cfg, &run.trajectory, &es.library(horizon), horizon)?;
            (AuditSource::Godunov(run), entries)
        }
        AuditMode::Frozen => {
            let profile = cfg.initial_profile()?;
            let mut entries = Vec::new();
            for &horizon in &es.horizons {
                let functions: Vec<TestFunction> = if es.test_functions.is_empty() {
                    vec![TestFunction::mollifier_pair(horizon)]
                } else {
                    es.test_functions
                        .iter()
                        .map(|f| with_horizon(f, horizon))
                        .collect()
                };
                let traj = frozen_trajectory(&profile, horizon + 1.0);
                entries.extend(audit(cfg, &traj, &functions, horizon)?);
            }
            (AuditSource::Frozen(profile), entries)
        }
    };
    Ok(AuditReport {
        mode: es.mode,
        source,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::builtin_scenario;

    fn small(name: &str) -> ScenarioConfig {
        let mut cfg = builtin_scenario(name).unwrap();
        cfg.particles = 40;
        cfg.grid.cells = 200;
        cfg.convergence.particles = vec![10, 20];
        cfg.convergence.reference_cells = 200;
        cfg
    }

    #[test]
    fn compare_against_itself_is_zero() {
        let report = run_compare(&small("single-step")).unwrap();
        let g = &report.godunov.trajectory;
        for row in compare_trajectories(g, g).unwrap() {
            assert_eq!((row.l1, row.w1), (0.0, 0.0));
        }
        assert_eq!(report.rows.len(), 11);
        assert!(report.rows.iter().all(|r| r.l1 < 0.2));
    }

    #[test]
    fn single_entry_convergence_table() {
        let cfg = small("single-step");
        let table = run_convergence(&cfg, &[20], 200).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].ratio, None);
        assert!(matches!(
            run_convergence(&cfg, &[20, 10], 200),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_convergence(&cfg, &[100], 200),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn frozen_audit_flags_the_weak_steady_state() {
        let mut cfg = small("stationary-weak");
        cfg.entropy.mode = AuditMode::Frozen;
        cfg.entropy.horizons = vec![0.0, 1.0];
        let report = run_entropy_audit(&cfg).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.first_flagged_horizon(), Some(0.0));
    }

    #[test]
    fn audit_needs_unit_horizon() {
        let mut cfg = small("single-step");
        cfg.t_end = 0.5;
        assert!(matches!(run_entropy_audit(&cfg), Err(Error::Config(_))));
    }
}
