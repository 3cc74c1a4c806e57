//! Mass, total variation, L1 and 1-Wasserstein distances, and the Kruzkov
//! entropy residual.

mod entropy;
mod quadrature;

pub use entropy::{
    entropy_residual, entropy_residuals, EntropyReport, Plateau, QuadratureResolution, SpatialBump,
    TestFunction,
};
pub use quadrature::gauss_legendre;

use crate::error::{Error, Result};
use crate::profile::{DensityProfile, Measure};

/// Largest mass mismatch accepted by [`wasserstein1`].
pub const MASS_TOLERANCE: f64 = 1e-12;

pub fn total_mass(profile: &DensityProfile) -> f64 {
    profile.cells().map(|(a, b, r)| r * (b - a)).sum()
}

/// Total variation of a compactly supported piecewise-constant function,
/// counting the jumps from and back to zero at both ends.
pub fn total_variation(profile: &DensityProfile) -> f64 {
    total_variation_of_values(profile.values())
}

/// [`total_variation`] for the cell values alone.
pub fn total_variation_of_values(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(first), Some(last)) => {
            first.abs() + values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() + last.abs()
        }
        _ => 0.0,
    }
}

fn merged_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut knots = Vec::with_capacity(a.len() + b.len());
    knots.extend_from_slice(a);
    knots.extend_from_slice(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

/// Exact `int |a - b| dx`.
pub fn l1_distance(a: &DensityProfile, b: &DensityProfile) -> f64 {
    let knots = merged_knots(a.breakpoints(), b.breakpoints());
    knots
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (a.value_at(mid) - b.value_at(mid)).abs() * (w[1] - w[0])
        })
        .sum()
}

/// Walks a measure's CDF along increasing points, returning right limits
/// `F(x+)` and left limits `F(x-)`.
struct CdfCursor<'a> {
    measure: Measure<'a>,
    next_atom: usize,
    atom_mass: f64,
}

impl<'a> CdfCursor<'a> {
    fn new(measure: Measure<'a>) -> Self {
        CdfCursor {
            measure,
            next_atom: 0,
            atom_mass: 0.0,
        }
    }

    /// `(F(x-), F(x+))`; successive calls must use increasing `x`.
    fn limits(&mut self, x: f64) -> (f64, f64) {
        match self.measure {
            Measure::Density(p) => {
                let f = p.cdf(x);
                (f, f)
            }
            Measure::Atoms(m) => {
                let (atoms, weights) = (m.atoms(), m.weights());
                while self.next_atom < atoms.len() && atoms[self.next_atom] < x {
                    self.atom_mass += weights[self.next_atom];
                    self.next_atom += 1;
                }
                let left = self.atom_mass;
                if self.next_atom < atoms.len() && atoms[self.next_atom] == x {
                    self.atom_mass += weights[self.next_atom];
                    self.next_atom += 1;
                }
                (left, self.atom_mass)
            }
        }
    }
}

/// `int_0^h |l(s)| ds` for the affine `l` with `l(0) = d0`, `l(h) = d1`.
fn abs_affine_integral(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * h * (d0.abs() + d1.abs())
    } else {
        0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

fn cdf_distance(a: Measure<'_>, b: Measure<'_>, scale_b: f64) -> f64 {
    let knots = merged_knots(a.knots(), b.knots());
    let mut ca = CdfCursor::new(a);
    let mut cb = CdfCursor::new(b);
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &x in &knots {
        let (la, ra) = ca.limits(x);
        let (lb, rb) = cb.limits(x);
        if let Some((x0, d0)) = prev {
            total += abs_affine_integral(d0, la - scale_b * lb, x - x0);
        }
        prev = Some((x, ra - scale_b * rb));
    }
    total
}

/// Exact 1-Wasserstein distance `int |F_a - F_b| dx` between two measures
/// of equal mass.
pub fn wasserstein1<'a, 'b>(a: impl Into<Measure<'a>>, b: impl Into<Measure<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    let (ma, mb) = (a.mass(), b.mass());
    if (ma - mb).abs() > MASS_TOLERANCE {
        return Err(Error::domain(format!(
            "Wasserstein distance needs equal masses, got {ma} and {mb}"
        )));
    }
    Ok(cdf_distance(a, b, 1.0))
}

/// 1-Wasserstein distance after rescaling `b` to the mass of `a`; used to
/// compare schemes whose masses differ by discretisation error.
pub fn wasserstein1_rescaled<'a, 'b>(
    a: impl Into<Measure<'a>>,
    b: impl Into<Measure<'b>>,
) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    let (ma, mb) = (a.mass(), b.mass());
    if !(ma > 0.0 && mb > 0.0) {
        return Err(Error::domain(
            "rescaled Wasserstein distance needs positive masses",
        ));
    }
    Ok(cdf_distance(a, b, ma / mb))
}
