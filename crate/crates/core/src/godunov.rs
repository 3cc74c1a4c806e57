//! Godunov finite-volume reference solver.
//!
//! The nonlocal field `K' * rho` is split into `K+` (mass to the left, `>= 0`)
//! and `K-` (mass to the right, `<= 0`), each driving a transport of
//! `f(rho) = rho v(rho)` upwinded with the exact Riemann flux, plus the source
//! `f(rho) K'' * rho`:
//!
//! ```text
//! d rho_j/dt = K+_j (F+_{j+1/2} - F+_{j-1/2}) / dx
//!            + K-_j (F-_{j+1/2} - F-_{j-1/2}) / dx
//!            + rho_j v(rho_j) dK_j
//! ```
//!
//! with `F+_{j+1/2} = G(rho_{j+1}, rho_j)` and `F-_{j+1/2} = G(rho_j, rho_{j+1})`.
//! The flux `-f K+` carries information leftwards, hence the mirrored
//! argument order of `F+`. Time stepping is forward Euler under a CFL bound.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::metrics;
use crate::mobility::Mobility;
use crate::profile::DensityProfile;
use crate::trajectory::{Diagnostics, Trajectory};

/// Overshoot budget above `M` tolerated before clamping is reported.
pub const OVERSHOOT_BUDGET: f64 = 1e-10;

const PARALLEL_THRESHOLD: usize = 64;

/// Uniform grid of `cells` cells on `[left, right]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    left: f64,
    right: f64,
    cells: usize,
}

impl Grid {
    pub fn new(left: f64, right: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::domain("grid needs at least one cell"));
        }
        if !(left.is_finite() && right.is_finite() && right > left) {
            return Err(Error::domain(format!(
                "invalid grid domain [{left}, {right}]"
            )));
        }
        Ok(Grid { left, right, cells })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        (self.right - self.left) / self.cells as f64
    }

    /// Edge `j` for `j in 0..=cells`; computed as `left + L j / J` so that
    /// commensurate breakpoints land exactly on edges.
    pub fn edge(&self, j: usize) -> f64 {
        if j == self.cells {
            return self.right;
        }
        self.left + (self.right - self.left) * j as f64 / self.cells as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells).map(|j| self.edge(j)).collect()
    }

    pub fn center(&self, j: usize) -> f64 {
        self.left + (self.right - self.left) * (j as f64 + 0.5) / self.cells as f64
    }

    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        lo >= self.left && hi <= self.right
    }
}

/// Cell averages at a given time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvState {
    pub time: f64,
    pub values: Vec<f64>,
}

impl FvState {
    /// Exact cell averages of `profile` on `grid`.
    pub fn sample(grid: &Grid, profile: &DensityProfile) -> Self {
        FvState {
            time: 0.0,
            values: profile.cell_averages(&grid.edges()),
        }
    }

    pub fn vacuum(grid: &Grid) -> Self {
        FvState {
            time: 0.0,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        self.values.iter().sum::<f64>() * grid.dx()
    }

    pub fn to_profile(&self, grid: &Grid) -> DensityProfile {
        DensityProfile::new(grid.edges(), self.values.clone())
            .expect("grid edges are increasing and states non-negative")
    }

    /// Indices of the first and last non-zero cells.
    fn occupied(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&r| r != 0.0)?;
        let last = self.values.iter().rposition(|&r| r != 0.0)?;
        Some((first, last))
    }
}

/// The split transport fields `K+_j >= 0` and `K-_j <= 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitFields {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl SplitFields {
    fn max_strength(&self) -> f64 {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| p.abs() + m.abs())
            .fold(0.0, f64::max)
    }
}

/// Where the split fields are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldPlacement {
    /// Fields at cell centres weighting flux differences, plus the `dK`
    /// source term.
    #[default]
    CellCenter,
    /// Experimental: fields at interfaces multiply the Godunov fluxes in
    /// conservation form, `d rho_j/dt = -(G_{j+1/2} - G_{j-1/2}) / dx` with
    /// `G = -K+ F+ - K- F-`; no source term. Conserves mass exactly.
    Interface,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GodunovOptions {
    pub cfl: f64,
    pub placement: FieldPlacement,
    pub max_steps: usize,
}

impl Default for GodunovOptions {
    fn default() -> Self {
        GodunovOptions {
            cfl: 0.45,
            placement: FieldPlacement::CellCenter,
            max_steps: 10_000_000,
        }
    }
}

/// Exact Riemann-solver flux for the unimodal flux `f(u) = u v(u)`.
///
/// Inputs are clamped to `[0, M]`.
pub fn godunov_flux(ul: f64, ur: f64, mobility: &Mobility) -> f64 {
    let m = mobility.max_density();
    let ul = ul.clamp(0.0, m);
    let ur = ur.clamp(0.0, m);
    let (fl, fr) = (mobility.flux(ul), mobility.flux(ur));
    if ul <= ur {
        fl.min(fr)
    } else {
        let sigma = mobility.flux_argmax();
        if ur <= sigma && sigma <= ul {
            mobility.flux(sigma)
        } else {
            fl.max(fr)
        }
    }
}

/// Outcome of one forward-Euler step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: FvState,
    /// Largest correction applied by clamping to `[0, M]`.
    pub clamp_max: f64,
    /// Mass added or removed by clamping.
    pub clamp_mass: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GodunovStats {
    pub steps: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Total clamp mass over the run.
    pub clamp_total: f64,
    /// Steps whose clamp exceeded `1e-6 M`, signalling an aggressive CFL.
    pub clamp_warnings: usize,
}

impl GodunovStats {
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GodunovRun {
    pub grid: Grid,
    pub trajectory: Trajectory<DensityProfile>,
    pub final_state: FvState,
    pub stats: GodunovStats,
}

/// Solver with kernel tables precomputed on the grid.
#[derive(Clone, Debug)]
pub struct GodunovSolver {
    grid: Grid,
    kernel: Kernel,
    mobility: Mobility,
    options: GodunovOptions,
    /// `K'(d dx)` for `d in -(J-1)..=(J-1)`, at index `d + J - 1`.
    first: Vec<f64>,
    /// `K''(d dx)`, same layout.
    second: Vec<f64>,
    /// `K'((d + 1/2) dx)` for `d in -J..=(J-1)`, at index `d + J`.
    first_half: Vec<f64>,
}

impl GodunovSolver {
    pub fn new(
        grid: Grid,
        kernel: Kernel,
        mobility: Mobility,
        options: GodunovOptions,
    ) -> Result<Self> {
        if !(options.cfl > 0.0 && options.cfl < 1.0) {
            return Err(Error::domain(format!(
                "CFL fraction must lie in (0, 1), got {}",
                options.cfl
            )));
        }
        let j = grid.cells() as i64;
        let dx = grid.dx();
        let offsets = -(j - 1)..=(j - 1);
        let first = offsets
            .clone()
            .map(|d| kernel.first(d as f64 * dx))
            .collect();
        let second = offsets.map(|d| kernel.second(d as f64 * dx)).collect();
        let first_half = (-j..j)
            .map(|d| kernel.first((d as f64 + 0.5) * dx))
            .collect();
        Ok(GodunovSolver {
            grid,
            kernel,
            mobility,
            options,
            first,
            second,
            first_half,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mobility(&self) -> &Mobility {
        &self.mobility
    }

    pub fn options(&self) -> &GodunovOptions {
        &self.options
    }

    #[inline]
    fn table(&self, table: &[f64], j: usize, m: usize) -> f64 {
        table[j + self.grid.cells() - 1 - m]
    }

    fn map_cells(&self, targets: Range<usize>, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
        if targets.len() >= PARALLEL_THRESHOLD {
            targets.into_par_iter().map(f).collect()
        } else {
            targets.map(f).collect()
        }
    }

    /// Cell-centred split fields on `targets`, summing over `sources`.
    fn fields_on(
        &self,
        state: &FvState,
        targets: Range<usize>,
        sources: Range<usize>,
    ) -> SplitFields {
        let dx = self.grid.dx();
        let rho = &state.values;
        let plus = self.map_cells(targets.clone(), |j| {
            let mut acc = 0.0;
            for m in sources.start..sources.end.min(j + 1) {
                acc += self.table(&self.first, j, m) * rho[m] * dx;
            }
            acc
        });
        let minus = self.map_cells(targets, |j| {
            let mut acc = 0.0;
            for m in sources.start.max(j + 1)..sources.end {
                acc += self.table(&self.first, j, m) * rho[m] * dx;
            }
            acc
        });
        SplitFields { plus, minus }
    }

    /// Split fields at interfaces `j + 1/2` for `j` in `targets`.
    fn interface_fields_on(
        &self,
        state: &FvState,
        targets: Range<usize>,
        sources: Range<usize>,
    ) -> SplitFields {
        let dx = self.grid.dx();
        let rho = &state.values;
        let cells = self.grid.cells();
        // x_{j+1/2} - x_m = (j - m + 1/2) dx.
        let half = |j: usize, m: usize| self.first_half[j + cells - m];
        let plus = self.map_cells(targets.clone(), |j| {
            let mut acc = 0.0;
            for m in sources.start..sources.end.min(j + 1) {
                acc += half(j, m) * rho[m] * dx;
            }
            acc
        });
        let minus = self.map_cells(targets, |j| {
            let mut acc = 0.0;
            for m in sources.start.max(j + 1)..sources.end {
                acc += half(j, m) * rho[m] * dx;
            }
            acc
        });
        SplitFields { plus, minus }
    }

    /// Midpoint quadrature of `K'' * rho` at the centres of `targets`.
    fn curvature_on(
        &self,
        state: &FvState,
        targets: Range<usize>,
        sources: Range<usize>,
    ) -> Vec<f64> {
        let dx = self.grid.dx();
        let rho = &state.values;
        self.map_cells(targets, |j| {
            let mut acc = 0.0;
            for m in sources.clone() {
                acc += self.table(&self.second, j, m) * rho[m] * dx;
            }
            acc
        })
    }

    fn sources(&self, state: &FvState) -> Range<usize> {
        match state.occupied() {
            Some((a, b)) => a..b + 1,
            None => 0..0,
        }
    }

    fn check_len(&self, state: &FvState) -> Result<()> {
        if state.values.len() != self.grid.cells() {
            return Err(Error::domain(format!(
                "state has {} cells, grid has {}",
                state.values.len(),
                self.grid.cells()
            )));
        }
        Ok(())
    }

    /// `K+_j`, `K-_j` at every cell centre.
    pub fn split_fields(&self, state: &FvState) -> Result<SplitFields> {
        self.check_len(state)?;
        Ok(self.fields_on(state, 0..self.grid.cells(), self.sources(state)))
    }

    /// `s_j = rho_j v(rho_j) dK_j` at every cell.
    pub fn source_term(&self, state: &FvState) -> Result<Vec<f64>> {
        self.check_len(state)?;
        let dk = self.curvature_on(state, 0..self.grid.cells(), self.sources(state));
        Ok(state
            .values
            .iter()
            .zip(&dk)
            .map(|(&r, &d)| self.mobility.flux(r) * d)
            .collect())
    }

    /// Largest stable step, capped at `cap`. `curvature` is `dK` on the same
    /// cells as `fields` (pass `None` to skip the source bound).
    pub fn cfl_dt(
        &self,
        fields: &SplitFields,
        rho: &[f64],
        curvature: Option<&[f64]>,
        cap: f64,
    ) -> f64 {
        let mut dt = cap;
        let speed = fields.max_strength() * self.mobility.max_flux_slope();
        if speed > 0.0 {
            dt = dt.min(self.options.cfl * self.grid.dx() / speed);
        }
        if let Some(dk) = curvature {
            let rate = rho
                .iter()
                .zip(dk)
                .map(|(&r, &d)| (self.mobility.flux_derivative(r) * d).abs())
                .fold(0.0, f64::max);
            if rate > 0.0 {
                dt = dt.min(self.options.cfl / rate);
            }
        }
        dt
    }

    /// Cells that can change during a step: the occupied range widened by
    /// one cell on each side.
    fn window(&self, state: &FvState) -> Result<Option<Range<usize>>> {
        let Some((a, b)) = state.occupied() else {
            return Ok(None);
        };
        if a < 2 || b + 3 > self.grid.cells() {
            return Err(Error::Invariant(format!(
                "density reached the domain boundary [{}, {}]",
                self.grid.left(),
                self.grid.right()
            )));
        }
        Ok(Some(a - 1..b + 2))
    }

    /// Stable time step for `state`, at most `cap`.
    pub fn stable_dt(&self, state: &FvState, cap: f64) -> Result<f64> {
        self.check_len(state)?;
        let Some(window) = self.window(state)? else {
            return Ok(cap);
        };
        let sources = self.sources(state);
        let rho = &state.values[window.clone()];
        Ok(match self.options.placement {
            FieldPlacement::CellCenter => {
                let fields = self.fields_on(state, window.clone(), sources.clone());
                let dk = self.curvature_on(state, window, sources);
                self.cfl_dt(&fields, rho, Some(&dk), cap)
            }
            FieldPlacement::Interface => {
                let fields = self.interface_fields_on(state, window.start - 1..window.end, sources);
                self.cfl_dt(&fields, rho, None, cap)
            }
        })
    }

    /// One forward-Euler step of length `dt`.
    pub fn step(&self, state: &FvState, dt: f64) -> Result<StepOutcome> {
        self.check_len(state)?;
        let mut next = state.values.clone();
        let Some(window) = self.window(state)? else {
            return Ok(StepOutcome {
                state: FvState {
                    time: state.time + dt,
                    values: next,
                },
                clamp_max: 0.0,
                clamp_mass: 0.0,
            });
        };
        let sources = self.sources(state);
        let rho = &state.values;
        let dx = self.grid.dx();
        let mob = &self.mobility;
        let lam = dt / dx;

        match self.options.placement {
            FieldPlacement::CellCenter => {
                let fields = self.fields_on(state, window.clone(), sources.clone());
                let dk = self.curvature_on(state, window.clone(), sources);
                for (k, j) in window.enumerate() {
                    let (l, c, r) = (rho[j - 1], rho[j], rho[j + 1]);
                    let plus = godunov_flux(r, c, mob) - godunov_flux(c, l, mob);
                    let minus = godunov_flux(c, r, mob) - godunov_flux(l, c, mob);
                    next[j] = c
                        + lam * fields.plus[k] * plus
                        + lam * fields.minus[k] * minus
                        + dt * mob.flux(c) * dk[k];
                }
            }
            FieldPlacement::Interface => {
                // Interfaces window.start - 1/2 ..= window.end - 1/2.
                let ifaces = window.start - 1..window.end;
                let fields = self.interface_fields_on(state, ifaces.clone(), sources);
                let flux: Vec<f64> = ifaces
                    .clone()
                    .enumerate()
                    .map(|(k, j)| {
                        let (a, b) = (rho[j], rho[j + 1]);
                        -fields.plus[k] * godunov_flux(b, a, mob)
                            - fields.minus[k] * godunov_flux(a, b, mob)
                    })
                    .collect();
                for (k, j) in window.enumerate() {
                    next[j] = rho[j] - lam * (flux[k + 1] - flux[k]);
                }
            }
        }

        let cap = mob.max_density();
        let mut clamp_max: f64 = 0.0;
        let mut clamp_mass = 0.0;
        for r in next.iter_mut() {
            let clamped = if *r < 0.0 {
                0.0
            } else if *r > cap + OVERSHOOT_BUDGET {
                cap
            } else {
                *r
            };
            let delta = (clamped - *r).abs();
            if delta > 0.0 {
                clamp_max = clamp_max.max(delta);
                clamp_mass += delta * dx;
                *r = clamped;
            }
        }
        Ok(StepOutcome {
            state: FvState {
                time: state.time + dt,
                values: next,
            },
            clamp_max,
            clamp_mass,
        })
    }

    /// Samples `initial` onto the grid and advances to `t_end`, recording
    /// snapshots at time zero, each output time and `t_end`.
    pub fn run(
        &self,
        initial: &DensityProfile,
        t_end: f64,
        output_times: &[f64],
    ) -> Result<GodunovRun> {
        if !(t_end > 0.0) {
            return Err(Error::domain(format!(
                "t_end must be positive, got {t_end}"
            )));
        }
        if let Some((lo, hi)) = initial.support() {
            if !self.grid.contains(lo, hi) {
                return Err(Error::domain(format!(
                    "grid [{}, {}] does not contain the initial support [{lo}, {hi}]",
                    self.grid.left(),
                    self.grid.right()
                )));
            }
        }
        let mut stops: Vec<f64> = output_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < t_end)
            .collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        stops.push(t_end);

        let mut state = FvState::sample(&self.grid, initial);
        let initial_mass = state.mass(&self.grid);
        let mut stats = GodunovStats {
            initial_mass,
            ..Default::default()
        };
        let mut trajectory = Trajectory::new();
        trajectory.push(0.0, state.to_profile(&self.grid), self.diagnostics(&state));
        let warn_level = 1e-6 * self.mobility.max_density();
        for &stop in &stops {
            while state.time < stop {
                if stats.steps >= self.options.max_steps {
                    return Err(Error::Invariant(format!(
                        "Godunov run exceeded {} steps at t = {}",
                        self.options.max_steps, state.time
                    )));
                }
                let remaining = stop - state.time;
                let dt = self.stable_dt(&state, remaining)?;
                let outcome = self.step(&state, dt)?;
                state = outcome.state;
                if dt >= remaining {
                    state.time = stop;
                }
                stats.steps += 1;
                stats.clamp_total += outcome.clamp_mass;
                if outcome.clamp_max > warn_level {
                    stats.clamp_warnings += 1;
                }
            }
            trajectory.push(stop, state.to_profile(&self.grid), self.diagnostics(&state));
        }
        stats.final_mass = state.mass(&self.grid);
        Ok(GodunovRun {
            grid: self.grid,
            trajectory,
            final_state: state,
            stats,
        })
    }

    fn diagnostics(&self, state: &FvState) -> Diagnostics {
        Diagnostics {
            mass: state.mass(&self.grid),
            total_variation: metrics::total_variation_of_values(&state.values),
            min_gap: None,
        }
    }
}

/// `K+_j, K-_j` at every cell centre of `grid`.
pub fn split_fields(grid: &Grid, state: &FvState, kernel: &Kernel) -> Result<SplitFields> {
    GodunovSolver::new(*grid, *kernel, Mobility::unit(), GodunovOptions::default())?
        .split_fields(state)
}

/// `s_j = rho_j v(rho_j) dK_j` with `dK` by midpoint quadrature.
pub fn source_term(
    grid: &Grid,
    state: &FvState,
    kernel: &Kernel,
    mobility: &Mobility,
) -> Result<Vec<f64>> {
    GodunovSolver::new(*grid, *kernel, *mobility, GodunovOptions::default())?.source_term(state)
}

/// CFL-limited step for given fields, with the source bound evaluated from
/// `state`; never larger than `cap`.
pub fn cfl_dt(
    grid: &Grid,
    fields: &SplitFields,
    state: &FvState,
    kernel: &Kernel,
    mobility: &Mobility,
    cfl: f64,
    cap: f64,
) -> Result<f64> {
    let options = GodunovOptions {
        cfl,
        ..Default::default()
    };
    let solver = GodunovSolver::new(*grid, *kernel, *mobility, options)?;
    solver.check_len(state)?;
    let dk = solver.curvature_on(state, 0..grid.cells(), solver.sources(state));
    Ok(solver.cfl_dt(fields, &state.values, Some(&dk), cap))
}

/// One forward-Euler step with the default options.
pub fn gd_step(
    grid: &Grid,
    state: &FvState,
    kernel: &Kernel,
    mobility: &Mobility,
    dt: f64,
) -> Result<StepOutcome> {
    GodunovSolver::new(*grid, *kernel, *mobility, GodunovOptions::default())?.step(state, dt)
}

pub fn gd_run(
    grid: &Grid,
    initial: &DensityProfile,
    kernel: &Kernel,
    mobility: &Mobility,
    t_end: f64,
    output_times: &[f64],
    options: GodunovOptions,
) -> Result<GodunovRun> {
    GodunovSolver::new(*grid, *kernel, *mobility, options)?.run(initial, t_end, output_times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(cells: usize) -> (Grid, Kernel, Mobility) {
        (
            Grid::new(-2.5, 2.5, cells).unwrap(),
            Kernel::standard_gaussian(),
            Mobility::unit(),
        )
    }

    #[test]
    fn flux_examples() {
        let mob = Mobility::unit();
        for c in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert_eq!(godunov_flux(c, c, &mob), mob.flux(c));
        }
        assert_eq!(godunov_flux(0.8, 0.2, &mob), 0.25);
        assert_eq!(godunov_flux(0.0, 1.0, &mob), 0.0);
        assert_eq!(godunov_flux(1.0, 0.0, &mob), 0.25);
        // Clamped inputs.
        assert_eq!(godunov_flux(-0.3, 1.4, &mob), 0.0);
    }

    #[test]
    fn flux_is_monotone() {
        let mob = Mobility::truncated_linear(1.0, 2.0).unwrap();
        let n = 60;
        for a in 0..=n {
            for b in 0..n {
                let (u, w, w2) = (
                    a as f64 / n as f64,
                    b as f64 / n as f64,
                    (b + 1) as f64 / n as f64,
                );
                // Non-decreasing in the left argument, non-increasing in the right.
                assert!(godunov_flux(w2, u, &mob) >= godunov_flux(w, u, &mob) - 1e-15);
                assert!(godunov_flux(u, w2, &mob) <= godunov_flux(u, w, &mob) + 1e-15);
            }
        }
    }

    #[test]
    fn fields_of_single_cell() {
        let (grid, k, _) = setup(50);
        let mut s = FvState::vacuum(&grid);
        let m = 20;
        s.values[m] = 1.0 / grid.dx();
        let f = split_fields(&grid, &s, &k).unwrap();
        for j in 0..50 {
            let expected = k.first(grid.center(j) - grid.center(m));
            if j > m {
                assert_abs_diff_eq!(f.plus[j], expected, epsilon = 1e-14);
                assert_eq!(f.minus[j], 0.0);
            } else if j < m {
                assert_eq!(f.plus[j], 0.0);
                assert_abs_diff_eq!(f.minus[j], expected, epsilon = 1e-14);
            } else {
                assert_eq!(f.plus[j], 0.0);
                assert_eq!(f.minus[j], 0.0);
            }
        }
    }

    #[test]
    fn fields_of_vacuum_and_symmetric_states() {
        let (grid, k, _) = setup(40);
        let f = split_fields(&grid, &FvState::vacuum(&grid), &k).unwrap();
        assert!(f.plus.iter().chain(&f.minus).all(|&v| v == 0.0));

        let p = DensityProfile::new(vec![-1.0, -0.5, 0.5, 1.0], vec![0.4, 0.9, 0.4]).unwrap();
        let s = FvState::sample(&grid, &p);
        let f = split_fields(&grid, &s, &k).unwrap();
        // Cells 19 and 20 straddle the origin; the symmetry centre is edge 20.
        for j in 0..40 {
            assert!(f.plus[j] >= 0.0 && f.minus[j] <= 0.0);
            assert_abs_diff_eq!(f.plus[j], -f.minus[39 - j], epsilon = 1e-14);
        }
    }

    #[test]
    fn source_examples() {
        let (grid, k, mob) = setup(40);
        let mut s = FvState::vacuum(&grid);
        s.values[10] = 0.3;
        let src = source_term(&grid, &s, &k, &mob).unwrap();
        assert_abs_diff_eq!(
            src[10],
            0.3 * mob.speed(0.3) * k.second(0.0) * 0.3 * grid.dx(),
            epsilon = 1e-16
        );
        s.values[11] = 1.0;
        let src = source_term(&grid, &s, &k, &mob).unwrap();
        assert_eq!(src[11], 0.0);
        assert_eq!(src[5], 0.0);

        let p = DensityProfile::new(vec![-1.0, -0.5, 0.5, 1.0], vec![0.4, 0.9, 0.4]).unwrap();
        let s = FvState::sample(&grid, &p);
        let solver = GodunovSolver::new(grid, k, mob, GodunovOptions::default()).unwrap();
        let dk = solver.curvature_on(&s, 0..40, 0..40);
        for j in 0..40 {
            assert_abs_diff_eq!(dk[j], dk[39 - j], epsilon = 1e-14);
        }
    }

    #[test]
    fn cfl_examples() {
        let (grid, k, mob) = setup(100);
        let vac = FvState::vacuum(&grid);
        let f = split_fields(&grid, &vac, &k).unwrap();
        assert_eq!(cfl_dt(&grid, &f, &vac, &k, &mob, 0.45, 0.1).unwrap(), 0.1);

        let p = DensityProfile::uniform(-1.0, 1.0, 0.3).unwrap();
        let s = FvState::sample(&grid, &p);
        let f = split_fields(&grid, &s, &k).unwrap();
        let dt = cfl_dt(&grid, &f, &s, &k, &mob, 0.45, 1.0).unwrap();
        let expected = 0.45 * grid.dx() / f.max_strength();
        assert_abs_diff_eq!(dt, expected, epsilon = 1e-16);

        // Halving dx with the fields held fixed halves the step.
        let fine = Grid::new(-2.5, 2.5, 200).unwrap();
        let solver = GodunovSolver::new(fine, k, mob, GodunovOptions::default()).unwrap();
        let halved = solver.cfl_dt(&f, &[0.0], None, 1.0);
        assert_abs_diff_eq!(halved, 0.5 * dt, epsilon = 1e-16);
    }

    #[test]
    fn step_matches_hand_evaluation() {
        // Occupied cells of a nine-cell grid, evaluated straight from the
        // update formula with direct kernel calls.
        let grid = Grid::new(0.0, 0.9, 9).unwrap();
        let (k, mob) = (Kernel::standard_gaussian(), Mobility::unit());
        let rho = [0.0, 0.0, 0.2, 0.9, 0.55, 0.1, 0.7, 0.0, 0.0];
        let state = FvState {
            time: 0.0,
            values: rho.to_vec(),
        };
        let dt = 0.01;
        let dx = 0.1;
        let x = |j: usize| 0.05 + 0.1 * j as f64;
        let f = |u: f64| u * (1.0 - u);
        let g = |a: f64, b: f64| -> f64 {
            if a <= b {
                f(a).min(f(b))
            } else if b <= 0.5 && 0.5 <= a {
                0.25
            } else {
                f(a).max(f(b))
            }
        };
        let out = gd_step(&grid, &state, &k, &mob, dt).unwrap();
        for j in 1..8 {
            let mut kp = 0.0;
            let mut km = 0.0;
            let mut dk = 0.0;
            for m in 0..9 {
                let d = x(j) - x(m);
                if m <= j {
                    kp += k.first(d) * rho[m] * dx;
                } else {
                    km += k.first(d) * rho[m] * dx;
                }
                dk += k.second(d) * rho[m] * dx;
            }
            let fp = g(rho[j + 1], rho[j]) - g(rho[j], rho[j - 1]);
            let fm = g(rho[j], rho[j + 1]) - g(rho[j - 1], rho[j]);
            let expected = rho[j] + dt * (kp * fp / dx + km * fm / dx + f(rho[j]) * dk);
            assert_abs_diff_eq!(out.state.values[j], expected, epsilon = 1e-14);
        }
        assert_eq!(out.clamp_max, 0.0);
    }

    #[test]
    fn steady_step_is_preserved_exactly() {
        let (grid, k, mob) = setup(400);
        let p = DensityProfile::uniform(-0.5, 0.5, 1.0).unwrap();
        let mut s = FvState::sample(&grid, &p);
        let initial = s.clone();
        let solver = GodunovSolver::new(grid, k, mob, GodunovOptions::default()).unwrap();
        for _ in 0..50 {
            let dt = solver.stable_dt(&s, 0.05).unwrap();
            s = solver.step(&s, dt).unwrap().state;
        }
        assert_eq!(s.values, initial.values);
    }

    #[test]
    fn vacuum_stays_vacuum() {
        let (grid, k, mob) = setup(30);
        let s = FvState::vacuum(&grid);
        let out = gd_step(&grid, &s, &k, &mob, 0.1).unwrap();
        assert!(out.state.values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn interface_placement_conserves_mass() {
        let (grid, k, mob) = setup(300);
        let p = DensityProfile::uniform(-1.0, 1.0, 0.3).unwrap();
        let opts = GodunovOptions {
            placement: FieldPlacement::Interface,
            ..Default::default()
        };
        let run = gd_run(&grid, &p, &k, &mob, 1.0, &[], opts).unwrap();
        assert!(run.stats.mass_drift() < 1e-13);
        let center = run.trajectory.last().unwrap().state.value_at(0.0);
        assert!(center > 0.3);
    }

    #[test]
    fn boundary_contact_is_an_error() {
        let (grid, k, mob) = setup(50);
        let p = DensityProfile::uniform(-2.5, 0.0, 0.3).unwrap();
        let solver = GodunovSolver::new(grid, k, mob, GodunovOptions::default()).unwrap();
        let s = FvState::sample(&grid, &p);
        assert!(matches!(solver.step(&s, 0.01), Err(Error::Invariant(_))));
        let outside = DensityProfile::uniform(-3.0, 0.0, 0.3).unwrap();
        assert!(solver.run(&outside, 1.0, &[]).is_err());
    }

    #[test]
    fn invalid_setup() {
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 0).is_err());
        let (grid, k, mob) = setup(10);
        let bad = GodunovOptions {
            cfl: 1.5,
            ..Default::default()
        };
        assert!(GodunovSolver::new(grid, k, mob, bad).is_err());
    }
}
