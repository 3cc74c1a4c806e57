//! Congestion-limited mobilities `v(rho)` and the associated flux `f(rho) = rho v(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family of the mobility law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityKind {
    /// `v(rho) = v_max (1 - rho / M)_+`.
    TruncatedLinear,
}

/// A decreasing speed law vanishing at the maximal density `M`.
///
/// The law is clamped: `v(rho) = 0` for every `rho >= M`, so that transient
/// overshoots above `M` produce zero flux instead of negative speeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mobility {
    kind: MobilityKind,
    max_density: f64,
    v_max: f64,
}

impl Mobility {
    pub fn truncated_linear(max_density: f64, v_max: f64) -> Result<Self> {
        if !(max_density.is_finite() && max_density > 0.0) {
            return Err(Error::domain(format!(
                "maximal density must be positive, got {max_density}"
            )));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::domain(format!(
                "maximal speed must be positive, got {v_max}"
            )));
        }
        Ok(Mobility {
            kind: MobilityKind::TruncatedLinear,
            max_density,
            v_max,
        })
    }

    /// `v(rho) = (1 - rho)_+`.
    pub fn unit() -> Self {
        Mobility {
            kind: MobilityKind::TruncatedLinear,
            max_density: 1.0,
            v_max: 1.0,
        }
    }

    pub fn kind(&self) -> MobilityKind {
        self.kind
    }

    pub fn max_density(&self) -> f64 {
        self.max_density
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Checked evaluation of `v(rho)`; negative densities are rejected.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::domain(format!("density must be >= 0, got {rho}")));
        }
        Ok(self.speed(rho))
    }

    /// `v(rho)` for `rho >= 0`. Negative input is treated as vacuum.
    #[inline]
    pub fn speed(&self, rho: f64) -> f64 {
        match self.kind {
            MobilityKind::TruncatedLinear => {
                if rho >= self.max_density {
                    0.0
                } else if rho <= 0.0 {
                    self.v_max
                } else {
                    self.v_max * (1.0 - rho / self.max_density)
                }
            }
        }
    }

    /// `v'(rho)`. On `(0, M]` this is `-v_max / M`; above `M` it is zero.
    #[inline]
    pub fn speed_derivative(&self, rho: f64) -> f64 {
        match self.kind {
            MobilityKind::TruncatedLinear => {
                if rho > self.max_density {
                    0.0
                } else {
                    -self.v_max / self.max_density
                }
            }
        }
    }

    /// `f(rho) = rho v(rho)`.
    #[inline]
    pub fn flux(&self, rho: f64) -> f64 {
        rho * self.speed(rho)
    }

    /// `f'(rho) = v(rho) + rho v'(rho)`.
    #[inline]
    pub fn flux_derivative(&self, rho: f64) -> f64 {
        self.speed(rho) + rho * self.speed_derivative(rho)
    }

    /// The maximiser of `f` on `[0, M]`.
    pub fn flux_argmax(&self) -> f64 {
        match self.kind {
            MobilityKind::TruncatedLinear => 0.5 * self.max_density,
        }
    }

    /// `max |f'(u)|` over `u in [0, M]`.
    pub fn max_flux_slope(&self) -> f64 {
        match self.kind {
            // f' = v_max (1 - 2u/M) is extremal at both ends.
            MobilityKind::TruncatedLinear => self.v_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mobility_values() {
        let mob = Mobility::unit();
        assert_eq!(mob.eval(0.0).unwrap(), 1.0);
        assert_eq!(mob.eval(1.7).unwrap(), 0.0);
        assert_eq!(mob.flux(0.5), 0.25);
        assert_eq!(mob.flux(0.0), 0.0);
        assert_eq!(mob.flux(1.0), 0.0);
    }

    #[test]
    fn negative_density_is_rejected() {
        assert!(matches!(
            Mobility::unit().eval(-1e-3),
            Err(Error::Domain(_))
        ));
        assert!(Mobility::unit().eval(f64::NAN).is_err());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(Mobility::truncated_linear(0.0, 1.0).is_err());
        assert!(Mobility::truncated_linear(1.0, -2.0).is_err());
        assert!(Mobility::truncated_linear(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn strictly_decreasing_below_cap_and_continuous_at_cap() {
        let mob = Mobility::truncated_linear(2.0, 3.0).unwrap();
        let mut prev = mob.speed(0.0);
        for k in 1..=200 {
            let rho = 2.0 * k as f64 / 200.0;
            let v = mob.speed(rho);
            assert!(v < prev, "not decreasing at {rho}");
            assert!(mob.speed_derivative(rho) < 0.0);
            prev = v;
        }
        assert_eq!(mob.speed(2.0), 0.0);
        assert!(mob.speed(2.0 - 1e-12) < 1e-10);
    }

    #[test]
    fn flux_positive_inside_and_zero_at_ends() {
        let mob = Mobility::truncated_linear(1.5, 0.7).unwrap();
        assert_eq!(mob.flux(0.0), 0.0);
        assert_eq!(mob.flux(1.5), 0.0);
        for k in 1..150 {
            assert!(mob.flux(1.5 * k as f64 / 150.0) > 0.0);
        }
        let sigma = mob.flux_argmax();
        assert!(mob.flux(sigma) >= mob.flux(sigma + 1e-3));
        assert!(mob.flux(sigma) >= mob.flux(sigma - 1e-3));
        assert_eq!(mob.max_flux_slope(), mob.flux_derivative(0.0).abs());
    }
}
