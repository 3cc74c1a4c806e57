//! Piecewise-constant densities and atomic measures on the line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-negative, piecewise-constant density with compact support.
///
/// Cell `i` is `[breakpoints[i], breakpoints[i + 1])` and carries density
/// `values[i]`. Cumulative masses at the breakpoints are cached so that the
/// CDF and its pseudo-inverse cost a binary search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct DensityProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawProfile> for DensityProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        DensityProfile::new(raw.breakpoints, raw.values)
    }
}

impl From<DensityProfile> for RawProfile {
    fn from(p: DensityProfile) -> Self {
        RawProfile {
            breakpoints: p.breakpoints,
            values: p.values,
        }
    }
}

impl DensityProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::domain(format!(
                "profile needs n >= 1 values and n + 1 breakpoints, got {} and {}",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("profile breakpoints must be finite"));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "profile breakpoints must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(r) = values.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::domain(format!(
                "profile values must be finite and non-negative, got {r}"
            )));
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (w, r) in breakpoints.windows(2).zip(&values) {
            acc += r * (w[1] - w[0]);
            cumulative.push(acc);
        }
        Ok(DensityProfile {
            breakpoints,
            values,
            cumulative,
        })
    }

    /// Constant density `value` on `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, value: f64) -> Result<Self> {
        DensityProfile::new(vec![lo, hi], vec![value])
    }

    /// The zero density on `[lo, hi)`.
    pub fn vacuum(lo: f64, hi: f64) -> Result<Self> {
        DensityProfile::uniform(lo, hi, 0.0)
    }

    /// Samples a density onto `cells` equal cells of `[lo, hi]` by exact cell
    /// averages, given an antiderivative `primitive` of the density.
    pub fn from_antiderivative(
        lo: f64,
        hi: f64,
        cells: usize,
        primitive: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if cells == 0 {
            return Err(Error::domain("need at least one cell"));
        }
        let breakpoints: Vec<f64> = (0..=cells)
            .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
            .collect();
        let values = breakpoints
            .windows(2)
            .map(|w| ((primitive(w[1]) - primitive(w[0])) / (w[1] - w[0])).max(0.0))
            .collect();
        DensityProfile::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iterates over `(left, right, value)` per cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &r)| (w[0], w[1], r))
    }

    pub fn left(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn right(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn mass(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest interval containing every cell of positive density.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&r| r > 0.0)?;
        let last = self.values.iter().rposition(|&r| r > 0.0)?;
        Some((self.breakpoints[first], self.breakpoints[last + 1]))
    }

    /// Density at `x` (right-continuous; zero outside the breakpoints).
    pub fn value_at(&self, x: f64) -> f64 {
        match self.cell_index(x) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    fn cell_index(&self, x: f64) -> Option<usize> {
        if x < self.left() || x >= self.right() {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= x) - 1)
    }

    /// `int_{-inf}^x rho`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.left() {
            return 0.0;
        }
        if x >= self.right() {
            return self.mass();
        }
        let i = self.breakpoints.partition_point(|&b| b <= x) - 1;
        self.cumulative[i] + self.values[i] * (x - self.breakpoints[i])
    }

    /// Pseudo-inverse of the CDF.
    ///
    /// For `0 < target < mass` this returns the right end of the level set
    /// `{F = target}`, so quantiles jump across interior vacuum. `target = 0`
    /// maps to the left end of the support and `target = mass` to its right
    /// end.
    pub fn quantile(&self, target: f64) -> Result<f64> {
        let mass = self.mass();
        if !(target >= 0.0 && target <= mass) {
            return Err(Error::domain(format!(
                "quantile target {target} outside [0, {mass}]"
            )));
        }
        let (lo, hi) = self
            .support()
            .ok_or_else(|| Error::domain("quantile of a zero-mass profile"))?;
        if target >= mass {
            return Ok(hi);
        }
        // First cell whose right cumulative mass exceeds the target; it
        // necessarily has positive mass.
        let j = self.cumulative[1..].partition_point(|&c| c <= target);
        if j >= self.values.len() {
            return Ok(hi);
        }
        let x = self.breakpoints[j] + (target - self.cumulative[j]) / self.values[j];
        Ok(x.clamp(lo, self.breakpoints[j + 1]))
    }

    /// Exact cell averages over consecutive `edges`.
    ///
    /// Cells lying inside a single profile cell (or entirely outside the
    /// profile) receive that value bit-exactly; overlaps shorter than
    /// `1e-12` of a cell width are ignored.
    pub fn cell_averages(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| self.average_over(w[0], w[1]))
            .collect()
    }

    fn average_over(&self, a: f64, b: f64) -> f64 {
        let h = b - a;
        let negligible = 1e-12 * h;
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        // Vacuum to the left and right of the profile counts as a zero piece.
        if self.left() - a > negligible {
            pieces.push((self.left().min(b) - a, 0.0));
        }
        if b - self.right() > negligible {
            pieces.push((b - self.right().max(a), 0.0));
        }
        let start = self
            .breakpoints
            .partition_point(|&x| x <= a)
            .saturating_sub(1);
        for i in start..self.values.len() {
            let (l, r) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if l >= b {
                break;
            }
            let len = r.min(b) - l.max(a);
            if len > negligible {
                pieces.push((len, self.values[i]));
            }
        }
        match pieces.first() {
            None => 0.0,
            Some(&(_, r0)) if pieces.iter().all(|&(_, r)| r == r0) => r0,
            Some(_) => pieces.iter().map(|&(len, r)| len * r).sum::<f64>() / h,
        }
    }
}

/// Finitely many point masses at strictly increasing positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::domain(
                "atomic measure needs matching non-empty atoms and weights",
            ));
        }
        if atoms.iter().any(|x| !x.is_finite()) || atoms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain(
                "atoms must be finite and strictly increasing",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::domain("atom weights must be positive"));
        }
        Ok(AtomicMeasure { atoms, weights })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Right-continuous CDF: mass of atoms at positions `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        self.weights[..k].iter().sum()
    }
}

/// A finite measure on the line: either a density or a sum of atoms.
#[derive(Clone, Copy, Debug)]
pub enum Measure<'a> {
    Density(&'a DensityProfile),
    Atoms(&'a AtomicMeasure),
}

impl<'a> From<&'a DensityProfile> for Measure<'a> {
    fn from(p: &'a DensityProfile) -> Self {
        Measure::Density(p)
    }
}

impl<'a> From<&'a AtomicMeasure> for Measure<'a> {
    fn from(a: &'a AtomicMeasure) -> Self {
        Measure::Atoms(a)
    }
}

impl Measure<'_> {
    pub fn mass(&self) -> f64 {
        match self {
            Measure::Density(p) => p.mass(),
            Measure::Atoms(a) => a.mass(),
        }
    }

    /// Points at which the CDF may have a kink or a jump.
    pub(crate) fn knots(&self) -> &[f64] {
        match self {
            Measure::Density(p) => p.breakpoints(),
            Measure::Atoms(a) => a.atoms(),
        }
    }
}
