//! Nonlocal follow-the-leader particles for
//! `d_t rho = d_x(rho v(rho) K' * rho)`, a Godunov reference solver and the
//! diagnostics used to compare them.
//!
//! ```
//! use nlftl::{init_particles, DensityProfile, Kernel, Mobility};
//!
//! let rho0 = DensityProfile::uniform(-1.0, 1.0, 0.3)?;
//! let state = init_particles(&rho0, 300, &Mobility::unit())?;
//! let dx = nlftl::rhs(&state, &Kernel::standard_gaussian(), &Mobility::unit())?;
//! // Attraction pulls the left end right and the right end left.
//! assert!(dx[0] > 0.0 && dx[300] < 0.0);
//! # Ok::<(), nlftl::Error>(())
//! ```

pub mod error;
pub mod godunov;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod particles;
pub mod profile;
pub mod scenarios;
pub mod trajectory;

pub use error::{Error, Result};
pub use godunov::{gd_run, FvState, GodunovOptions, GodunovRun, GodunovSolver, Grid};
pub use kernel::{Derivative, Kernel};
pub use metrics::{entropy_residual, l1_distance, total_mass, total_variation, wasserstein1};
pub use mobility::Mobility;
pub use particles::{
    empirical_measure, init_particles, integrate, reconstruct_density, rhs, IntegratorOptions,
    ParticleState, Reconstruction,
};
pub use profile::{AtomicMeasure, DensityProfile, Measure};
pub use trajectory::{Diagnostics, Snapshot, Trajectory};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/particles.md")]
    mod particles {}
    #[doc = include_str!("../../../book/src/godunov.md")]
    mod godunov {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
