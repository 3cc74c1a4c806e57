//! Even, attractive interaction kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which derivative of the kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

/// An even interaction kernel `K` with `K'(x) > 0` for `x > 0`.
///
/// Only the Gaussian well `K(x) = -A exp(-B x^2)` is provided; further
/// families plug in as new variants behind the same evaluators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    Gaussian { amplitude: f64, inverse_width: f64 },
}

impl Kernel {
    pub fn gaussian(amplitude: f64, inverse_width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::domain(format!(
                "kernel amplitude must be positive, got {amplitude}"
            )));
        }
        if !(inverse_width.is_finite() && inverse_width > 0.0) {
            return Err(Error::domain(format!(
                "kernel inverse width must be positive, got {inverse_width}"
            )));
        }
        Ok(Kernel::Gaussian {
            amplitude,
            inverse_width,
        })
    }

    /// The normalised Gaussian well `-(2 pi)^{-1/2} exp(-x^2 / 2)`.
    pub fn standard_gaussian() -> Self {
        Kernel::Gaussian {
            amplitude: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            inverse_width: 0.5,
        }
    }

    pub fn eval(&self, x: f64, order: Derivative) -> f64 {
        match order {
            Derivative::Value => self.value(x),
            Derivative::First => self.first(x),
            Derivative::Second => self.second(x),
        }
    }

    /// `K(x)`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Kernel::Gaussian {
                amplitude,
                inverse_width,
            } => -amplitude * (-inverse_width * (x * x)).exp(),
        }
    }

    /// `K'(x) = 2 A B x exp(-B x^2)`.
    #[inline]
    pub fn first(&self, x: f64) -> f64 {
        match *self {
            Kernel::Gaussian {
                amplitude,
                inverse_width,
            } => 2.0 * amplitude * inverse_width * x * (-inverse_width * (x * x)).exp(),
        }
    }

    /// `K''(x) = 2 A B (1 - 2 B x^2) exp(-B x^2)`.
    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        match *self {
            Kernel::Gaussian {
                amplitude,
                inverse_width,
            } => {
                let x2 = x * x;
                2.0 * amplitude
                    * inverse_width
                    * (1.0 - 2.0 * inverse_width * x2)
                    * (-inverse_width * x2).exp()
            }
        }
    }

    /// A standard deviation-like length scale of the kernel.
    pub fn width(&self) -> f64 {
        match *self {
            Kernel::Gaussian { inverse_width, .. } => (0.5 / inverse_width).sqrt(),
        }
    }

    /// Upper bound for the Lipschitz constant of `K'` on `[lo, hi]`, i.e.
    /// `sup |K''|` over the interval (attained exactly for the Gaussian).
    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        match *self {
            Kernel::Gaussian { inverse_width, .. } => {
                // |K''| is extremal at 0 and at x^2 = 3 / (2B).
                let turn = (1.5 / inverse_width).sqrt();
                [lo, hi, 0.0, turn, -turn]
                    .into_iter()
                    .filter(|&x| x >= lo && x <= hi)
                    .map(|x| self.second(x).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::standard_gaussian()
    }
}
