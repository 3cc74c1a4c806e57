//! The nonlocal follow-the-leader particle scheme.
//!
//! `N + 1` ordered particles `x_0 < ... < x_N` each bound a cell of mass
//! `m / N`. The discrete density of cell `i` is `R_i = (m / N) / (x_{i+1} - x_i)`
//! and particle `i` moves with
//!
//! ```text
//! dx_i/dt = -v(R_i) (m/N) sum_{j>i} K'(x_i - x_j) - v(R_{i-1}) (m/N) sum_{j<i} K'(x_i - x_j)
//! ```
//!
//! where the first sum is absent for `i = N` and the second for `i = 0`.

mod integrate;

pub use integrate::{
    integrate, integrate_until_settled, IntegrationStats, IntegratorOptions, ParticleRun,
    SettledState,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::mobility::Mobility;
use crate::profile::{AtomicMeasure, DensityProfile};
use crate::trajectory::Diagnostics;

/// Below this many particles the velocity loop stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 128;

/// Relative slack on the critical gap `m / (M N)` below which a cell counts
/// as jammed. Absorbs rounding in positions so that exactly packed
/// configurations have exactly zero velocity.
pub const JAM_TOLERANCE: f64 = 1e-12;

/// Lagrangian state: ordered positions, each inter-particle cell of mass
/// `particle_mass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub time: f64,
    positions: Vec<f64>,
    particle_mass: f64,
    max_density: f64,
}

impl ParticleState {
    pub fn new(
        time: f64,
        positions: Vec<f64>,
        particle_mass: f64,
        max_density: f64,
    ) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::domain("need at least two particles"));
        }
        if !(particle_mass.is_finite() && particle_mass > 0.0) {
            return Err(Error::domain(format!(
                "particle mass must be positive, got {particle_mass}"
            )));
        }
        if !(max_density.is_finite() && max_density > 0.0) {
            return Err(Error::domain("maximal density must be positive"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("particle positions must be finite"));
        }
        if let Some(i) = first_disorder(&positions) {
            return Err(Error::Invariant(format!(
                "particles {i} and {} are not strictly ordered ({} >= {})",
                i + 1,
                positions[i],
                positions[i + 1]
            )));
        }
        Ok(ParticleState {
            time,
            positions,
            particle_mass,
            max_density,
        })
    }

    /// The jammed configuration: `n` cells of width `mass / (M n)` centred at
    /// `center`, i.e. every discrete density equals `M`.
    pub fn jammed(n: usize, mass: f64, max_density: f64, center: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("need at least one cell"));
        }
        let gap = mass / (max_density * n as f64);
        let left = center - 0.5 * gap * n as f64;
        let positions = (0..=n).map(|i| left + gap * i as f64).collect();
        ParticleState::new(0.0, positions, mass / n as f64, max_density)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of cells `N` (one less than the number of particles).
    pub fn cells(&self) -> usize {
        self.positions.len() - 1
    }

    /// Mass `m / N` carried by each cell.
    pub fn particle_mass(&self) -> f64 {
        self.particle_mass
    }

    pub fn max_density(&self) -> f64 {
        self.max_density
    }

    pub fn total_mass(&self) -> f64 {
        self.particle_mass * self.cells() as f64
    }

    pub fn support(&self) -> (f64, f64) {
        (self.positions[0], self.positions[self.positions.len() - 1])
    }

    pub fn support_length(&self) -> f64 {
        let (a, b) = self.support();
        b - a
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().fold(f64::INFINITY, f64::min)
    }

    /// Gap below which the maximum principle `R_i <= M` fails.
    pub fn critical_gap(&self) -> f64 {
        self.particle_mass / self.max_density
    }

    /// Forward discrete densities `R_0, ..., R_{N-1}`.
    pub fn discrete_densities(&self) -> Vec<f64> {
        self.gaps().map(|g| self.particle_mass / g).collect()
    }

    pub(crate) fn with_positions(&self, time: f64, positions: Vec<f64>) -> Self {
        ParticleState {
            time,
            positions,
            particle_mass: self.particle_mass,
            max_density: self.max_density,
        }
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let forward = reconstruct_density(self, Reconstruction::Forward);
        Diagnostics {
            mass: forward.mass(),
            total_variation: crate::metrics::total_variation(&forward),
            min_gap: Some(self.min_gap()),
        }
    }
}

fn first_disorder(x: &[f64]) -> Option<usize> {
    x.windows(2).position(|w| !(w[1] > w[0]))
}

/// Quantile initialisation: `N + 1` particles such that each cell holds
/// exactly `m / N` of the initial density.
pub fn init_particles(
    profile: &DensityProfile,
    n: usize,
    mobility: &Mobility,
) -> Result<ParticleState> {
    if n == 0 {
        return Err(Error::domain("particle count N must be at least 1"));
    }
    let mass = profile.mass();
    if !(mass > 0.0) {
        return Err(Error::domain(
            "cannot place particles on a zero-mass profile",
        ));
    }
    let positions = (0..=n)
        .map(|k| {
            if k == n {
                profile.quantile(mass)
            } else {
                profile.quantile(mass * k as f64 / n as f64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleState::new(0.0, positions, mass / n as f64, mobility.max_density())
}

/// Particle velocities for `state`.
pub fn rhs(state: &ParticleState, kernel: &Kernel, mobility: &Mobility) -> Result<Vec<f64>> {
    if let Some(i) = first_disorder(&state.positions) {
        return Err(Error::Invariant(format!(
            "particles {i} and {} coincide or cross",
            i + 1
        )));
    }
    let mut out = vec![0.0; state.positions.len()];
    velocities_into(
        &state.positions,
        state.particle_mass,
        kernel,
        mobility,
        &mut out,
    );
    Ok(out)
}

/// Unchecked velocity evaluation. Each entry is a fixed-order sum, so the
/// result does not depend on the number of worker threads.
pub(crate) fn velocities_into(
    x: &[f64],
    cell_mass: f64,
    kernel: &Kernel,
    mobility: &Mobility,
    out: &mut [f64],
) {
    let n = x.len() - 1;
    let jam_gap = cell_mass / mobility.max_density() * (1.0 + JAM_TOLERANCE);
    let speed_of = |gap: f64| {
        if gap <= jam_gap {
            0.0
        } else {
            mobility.speed(cell_mass / gap)
        }
    };
    let velocity = |i: usize| -> f64 {
        let xi = x[i];
        let mut v = 0.0;
        if i < n {
            let speed = speed_of(x[i + 1] - xi);
            if speed != 0.0 {
                let mut ahead = 0.0;
                for &xj in &x[i + 1..] {
                    ahead += kernel.first(xi - xj);
                }
                v -= speed * cell_mass * ahead;
            }
        }
        if i > 0 {
            let speed = speed_of(xi - x[i - 1]);
            if speed != 0.0 {
                let mut behind = 0.0;
                for &xj in &x[..i] {
                    behind += kernel.first(xi - xj);
                }
                v -= speed * cell_mass * behind;
            }
        }
        v
    };
    if x.len() >= PARALLEL_THRESHOLD {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = velocity(i));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = velocity(i);
        }
    }
}

/// How to turn particle positions into a piecewise-constant density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// `R_i` on `[x_i, x_{i+1})`; carries mass exactly `m`.
    Forward,
    /// `2 (m/N) / (x_{i+1} - x_{i-1})` on the cell between the midpoints
    /// around particle `i`; the first and last particle get density zero.
    Centered,
}

pub fn reconstruct_density(state: &ParticleState, mode: Reconstruction) -> DensityProfile {
    let x = &state.positions;
    let n = state.cells();
    let (breakpoints, values) = match mode {
        Reconstruction::Forward => (x.clone(), state.discrete_densities()),
        Reconstruction::Centered => {
            let mut bps = Vec::with_capacity(n + 2);
            bps.push(x[0]);
            bps.extend(x.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            bps.push(x[n]);
            let mut values = vec![0.0; n + 1];
            for i in 1..n {
                values[i] = 2.0 * state.particle_mass / (x[i + 1] - x[i - 1]);
            }
            (bps, values)
        }
    };
    DensityProfile::new(breakpoints, values).expect("ordered particles always give a valid profile")
}

/// Atoms of mass `m / N` at `x_0, ..., x_{N-1}`; the last particle is dropped
/// so the measure pairs cell `i` with particle `i` and carries mass `m`.
pub fn empirical_measure(state: &ParticleState) -> AtomicMeasure {
    let n = state.cells();
    AtomicMeasure::new(state.positions[..n].to_vec(), vec![state.particle_mass; n])
        .expect("ordered particles always give a valid measure")
}
