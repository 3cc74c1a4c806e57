//! Numerical Kruzkov entropy residual.
//!
//! For a trajectory `rho`, a constant `c >= 0` and a test function
//! `phi(t, x) = phi_x(x) xi(t)` the residual is
//!
//! ```text
//! int |rho(0) - c| phi(0) dx
//!   + int int |rho - c| phi_t
//!       - sign(rho - c) [ (f(rho) - f(c)) (K' * rho) phi_x - f(c) (K'' * rho) phi ] dx dt
//! ```
//!
//! Entropy solutions make it non-negative for every admissible pair; a value
//! below the guard band falsifies admissibility.
//!
//! Space integrals use Gauss-Legendre on the cells of the profile refined to
//! the test-function scale, with both convolutions in closed form. The time
//! integral interpolates the spatial integrals linearly between snapshots
//! and integrates the product with `xi`, `xi'` exactly. The error estimate
//! behind the guard band compares against a refined spatial rule and
//! against the residual from every other snapshot.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, integrate};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::mobility::Mobility;
use crate::profile::DensityProfile;
use crate::trajectory::{Snapshot, Trajectory};

/// Smallest guard band below which a negative residual is flagged.
pub const GUARD_FLOOR: f64 = 1e-6;
/// Multiple of the estimated quadrature error added to the guard band.
pub const GUARD_FACTOR: f64 = 10.0;

/// `int_{-1}^{1} exp(-1 / (1 - u^2)) du`.
fn mollifier_normalisation() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let rule = gauss_legendre(20);
        let panels = 400;
        (0..panels)
            .map(|i| {
                let a = -1.0 + 2.0 * i as f64 / panels as f64;
                let b = -1.0 + 2.0 * (i + 1) as f64 / panels as f64;
                integrate(a, b, &rule, unit_mollifier)
            })
            .sum()
    })
}

fn unit_mollifier(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Spatial building block of a test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialBump {
    /// The standard mollifier of unit mass supported on `[center - radius, center + radius]`.
    Mollifier { center: f64, radius: f64 },
    /// `cos^2(pi (x - center) / (2 half_width))` on `|x - center| < half_width`.
    CosineSquared { center: f64, half_width: f64 },
}

impl SpatialBump {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            SpatialBump::Mollifier { center, radius } => (center - radius, center + radius),
            SpatialBump::CosineSquared { center, half_width } => {
                (center - half_width, center + half_width)
            }
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            SpatialBump::Mollifier { center, .. } | SpatialBump::CosineSquared { center, .. } => {
                center
            }
        }
    }

    fn half_width(&self) -> f64 {
        let (a, b) = self.support();
        0.5 * (b - a)
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            SpatialBump::Mollifier { center, radius } => {
                unit_mollifier((x - center) / radius) / (radius * mollifier_normalisation())
            }
            SpatialBump::CosineSquared { center, half_width } => {
                let s = (x - center) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let c = (0.5 * std::f64::consts::PI * s).cos();
                    c * c
                }
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            SpatialBump::Mollifier { center, radius } => {
                let u = (x - center) / radius;
                if u.abs() >= 1.0 {
                    return 0.0;
                }
                let d = 1.0 - u * u;
                self.value(x) * (-2.0 * u / (d * d)) / radius
            }
            SpatialBump::CosineSquared { center, half_width } => {
                let s = (x - center) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let k = std::f64::consts::PI / half_width;
                    -0.5 * k * (std::f64::consts::PI * s).sin()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.support();
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::domain(format!(
                "bump has an empty or infinite support: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `C^1` non-increasing cut-off: `1` on `[0, T]`, a cubic ramp on
/// `[T, T + 1]`, `0` afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub horizon: f64,
}

impl Plateau {
    pub fn value(&self, t: f64) -> f64 {
        let s = t - self.horizon;
        if s <= 0.0 {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            1.0 - s * s * (3.0 - 2.0 * s)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = t - self.horizon;
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            -6.0 * s * (1.0 - s)
        }
    }

    /// End of the time support.
    pub fn end(&self) -> f64 {
        self.horizon + 1.0
    }
}

/// Separable test function `phi(t, x) = (sum_k w_k b_k(x)) xi(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub bumps: Vec<(f64, SpatialBump)>,
    pub plateau: Plateau,
}

impl TestFunction {
    pub fn new(
        id: impl Into<String>,
        bumps: Vec<(f64, SpatialBump)>,
        plateau: Plateau,
    ) -> Result<Self> {
        let f = TestFunction {
            id: id.into(),
            bumps,
            plateau,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bumps.is_empty() {
            return Err(Error::domain("test function needs at least one bump"));
        }
        for (w, b) in &self.bumps {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::domain(format!(
                    "bump weight must be non-negative, got {w}"
                )));
            }
            b.validate()?;
        }
        if !(self.plateau.horizon.is_finite() && self.plateau.horizon >= 0.0) {
            return Err(Error::domain("plateau horizon must be non-negative"));
        }
        Ok(())
    }

    /// Mollifiers of radius `1/4` centred at `-1/2` and `1/2`, held for time
    /// `horizon`: the test function exposing the non-entropic steady state.
    pub fn mollifier_pair(horizon: f64) -> Self {
        TestFunction {
            id: format!("mollifier-pair(T={horizon})"),
            bumps: vec![
                (
                    1.0,
                    SpatialBump::Mollifier {
                        center: -0.5,
                        radius: 0.25,
                    },
                ),
                (
                    1.0,
                    SpatialBump::Mollifier {
                        center: 0.5,
                        radius: 0.25,
                    },
                ),
            ],
            plateau: Plateau { horizon },
        }
    }

    pub fn cosine(center: f64, half_width: f64, horizon: f64) -> Self {
        TestFunction {
            id: format!("cos2(c={center},w={half_width},T={horizon})"),
            bumps: vec![(1.0, SpatialBump::CosineSquared { center, half_width })],
            plateau: Plateau { horizon },
        }
    }

    /// Multiplies the spatial part by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        TestFunction {
            id: format!("{}*{factor}", self.id),
            bumps: self.bumps.iter().map(|&(w, b)| (w * factor, b)).collect(),
            plateau: self.plateau,
        }
    }

    pub fn spatial(&self, x: f64) -> f64 {
        self.bumps.iter().map(|(w, b)| w * b.value(x)).sum()
    }

    pub fn spatial_derivative(&self, x: f64) -> f64 {
        self.bumps.iter().map(|(w, b)| w * b.derivative(x)).sum()
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.spatial(x) * self.plateau.value(t)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.spatial(x) * self.plateau.derivative(t)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.spatial_derivative(x) * self.plateau.value(t)
    }

    fn narrowest(&self) -> f64 {
        self.bumps
            .iter()
            .map(|(_, b)| b.half_width())
            .fold(f64::INFINITY, f64::min)
    }

    fn in_support(&self, x: f64) -> bool {
        self.bumps.iter().any(|(w, b)| {
            let (lo, hi) = b.support();
            *w > 0.0 && lo < x && x < hi
        })
    }
}

/// Spatial quadrature density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureResolution {
    /// Gauss-Legendre points per sub-cell.
    pub gauss_points: usize,
    /// Minimum number of sub-cells across the narrowest bump radius.
    pub subcells: usize,
}

impl Default for QuadratureResolution {
    fn default() -> Self {
        QuadratureResolution {
            gauss_points: 3,
            subcells: 16,
        }
    }
}

impl QuadratureResolution {
    pub fn refined(&self) -> Self {
        QuadratureResolution {
            gauss_points: 2 * self.gauss_points,
            subcells: 2 * self.subcells,
        }
    }
}

/// One `(c, phi)` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub c: f64,
    pub phi: String,
    pub residual: f64,
    pub resolution: QuadratureResolution,
    /// `|R - R(refined resolution)| + |R - R(every other snapshot)|`,
    /// covering the space and the time quadrature.
    pub error_estimate: f64,
    pub guard: f64,
    /// `residual < -guard`.
    pub flagged: bool,
}

/// Spatial quadrature nodes of one snapshot with everything that does not
/// depend on `c`.
struct Nodes {
    weight: Vec<f64>,
    rho: Vec<f64>,
    conv1: Vec<f64>,
    conv2: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

/// Jumps `(b_k, rho(b_k+) - rho(b_k-))` of a profile, zero jumps dropped.
fn jumps(profile: &DensityProfile) -> Vec<(f64, f64)> {
    let b = profile.breakpoints();
    let r = profile.values();
    (0..b.len())
        .map(|k| {
            let right = if k < r.len() { r[k] } else { 0.0 };
            let left = if k > 0 { r[k - 1] } else { 0.0 };
            (b[k], right - left)
        })
        .filter(|&(_, j)| j != 0.0)
        .collect()
}

/// `(K' * rho, K'' * rho)` at `x`. Integrating by parts against the jumps,
/// `K' * rho = sum J_k K(x - b_k)` and `K'' * rho = sum J_k K'(x - b_k)`.
fn convolutions(jumps: &[(f64, f64)], kernel: &Kernel, x: f64) -> (f64, f64) {
    let mut k1 = 0.0;
    let mut k2 = 0.0;
    for &(bk, jk) in jumps {
        k1 += jk * kernel.value(x - bk);
        k2 += jk * kernel.first(x - bk);
    }
    (k1, k2)
}

fn sample(
    profile: &DensityProfile,
    kernel: &Kernel,
    phi: &TestFunction,
    res: QuadratureResolution,
) -> Nodes {
    let mut knots: Vec<f64> = Vec::new();
    for (_, b) in &phi.bumps {
        let (lo, hi) = b.support();
        knots.extend([lo, b.center(), hi]);
    }
    let lo = knots.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = knots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    knots.extend(
        profile
            .breakpoints()
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi),
    );
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let jumps = jumps(profile);
    let rule = gauss_legendre(res.gauss_points);
    let hmax = phi.narrowest() / res.subcells as f64;
    let mut nodes = Nodes {
        weight: Vec::new(),
        rho: Vec::new(),
        conv1: Vec::new(),
        conv2: Vec::new(),
        phi: Vec::new(),
        dphi: Vec::new(),
    };
    for w in knots.windows(2) {
        let (a, z) = (w[0], w[1]);
        let mid = 0.5 * (a + z);
        if !phi.in_support(mid) {
            continue;
        }
        let rho = profile.value_at(mid);
        let pieces = ((z - a) / hmax).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let pa = a + (z - a) * p as f64 / pieces as f64;
            let pz = a + (z - a) * (p + 1) as f64 / pieces as f64;
            let (c, h) = (0.5 * (pa + pz), 0.5 * (pz - pa));
            for (&x, &wt) in rule.0.iter().zip(&rule.1) {
                let x = c + h * x;
                let (k1, k2) = convolutions(&jumps, kernel, x);
                nodes.weight.push(wt * h);
                nodes.rho.push(rho);
                nodes.conv1.push(k1);
                nodes.conv2.push(k2);
                nodes.phi.push(phi.spatial(x));
                nodes.dphi.push(phi.spatial_derivative(x));
            }
        }
    }
    nodes
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Nodes {
    /// `(int |rho - c| phi_x, int -sign(rho - c)[(f(rho) - f(c)) K'*rho phi_x' - f(c) K''*rho phi_x])`.
    fn integrals(&self, c: f64, mobility: &Mobility) -> (f64, f64) {
        let fc = mobility.flux(c);
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..self.weight.len() {
            let rho = self.rho[i];
            let w = self.weight[i];
            a += w * (rho - c).abs() * self.phi[i];
            let flux = (mobility.flux(rho) - fc) * self.conv1[i] * self.dphi[i]
                - fc * self.conv2[i] * self.phi[i];
            b -= w * sign(rho - c) * flux;
        }
        (a, b)
    }
}

/// `int_{t0}^{t1} (a(t) xi'(t) + b(t) xi(t)) dt` with `a`, `b` affine
/// between the given end values; exact since the integrand is a piecewise
/// polynomial of degree at most four.
fn time_slab(
    t0: f64,
    t1: f64,
    a: (f64, f64),
    b: (f64, f64),
    plateau: &Plateau,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let mut cuts = vec![t0];
    for s in [plateau.horizon, plateau.end()] {
        if s > t0 && s < t1 {
            cuts.push(s);
        }
    }
    cuts.push(t1);
    let lerp = |(u0, u1): (f64, f64), t: f64| u0 + (u1 - u0) * (t - t0) / (t1 - t0);
    cuts.windows(2)
        .map(|w| {
            integrate(w[0], w[1], rule, |t| {
                lerp(a, t) * plateau.derivative(t) + lerp(b, t) * plateau.value(t)
            })
        })
        .sum()
}

/// Time integral over the snapshots `picked` (indices into `snaps`, first
/// one zero, increasing).
fn time_integral(
    snaps: &[Snapshot<DensityProfile>],
    ints: &[(f64, f64)],
    picked: &[usize],
    plateau: &Plateau,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let end = plateau.end();
    let mut total = ints[picked[0]].0 * plateau.value(snaps[picked[0]].time);
    for w in picked.windows(2) {
        let (j, k) = (w[0], w[1]);
        let (t0, t1) = (snaps[j].time, snaps[k].time.min(end));
        if t1 <= t0 {
            break;
        }
        // Re-anchor the interpolant when the slab is cut at the support end.
        let frac = (t1 - t0) / (snaps[k].time - t0);
        let a1 = ints[j].0 + frac * (ints[k].0 - ints[j].0);
        let b1 = ints[j].1 + frac * (ints[k].1 - ints[j].1);
        total += time_slab(t0, t1, (ints[j].0, a1), (ints[j].1, b1), plateau, rule);
    }
    total
}

/// Residuals per constant, from all snapshots and from every other one.
fn residuals_at(
    traj: &Trajectory<DensityProfile>,
    kernel: &Kernel,
    mobility: &Mobility,
    phi: &TestFunction,
    cs: &[f64],
    res: QuadratureResolution,
) -> Vec<(f64, f64)> {
    let end = phi.plateau.end();
    let snaps = traj.snapshots();
    // Snapshots up to and including the first one at or past the support end.
    let used = snaps
        .iter()
        .position(|s| s.time >= end)
        .map_or(snaps.len(), |k| k + 1);
    let nodes: Vec<Nodes> = snaps[..used]
        .par_iter()
        .map(|s| sample(&s.state, kernel, phi, res))
        .collect();
    let rule = gauss_legendre(3);
    let all: Vec<usize> = (0..used).collect();
    let mut halved: Vec<usize> = (0..used).step_by(2).collect();
    if halved.last() != Some(&(used - 1)) {
        halved.push(used - 1);
    }
    cs.iter()
        .map(|&c| {
            let ints: Vec<(f64, f64)> = nodes.iter().map(|n| n.integrals(c, mobility)).collect();
            (
                time_integral(snaps, &ints, &all, &phi.plateau, &rule),
                time_integral(snaps, &ints, &halved, &phi.plateau, &rule),
            )
        })
        .collect()
}

fn check(traj: &Trajectory<DensityProfile>, phi: &TestFunction, cs: &[f64]) -> Result<()> {
    phi.validate()?;
    let (Some(first), Some(last)) = (traj.first(), traj.last()) else {
        return Err(Error::domain("entropy residual of an empty trajectory"));
    };
    if first.time != 0.0 {
        return Err(Error::domain(format!(
            "trajectory must start at t = 0, starts at {}",
            first.time
        )));
    }
    if last.time < phi.plateau.end() {
        return Err(Error::domain(format!(
            "trajectory ends at t = {} but the test function is supported up to t = {}",
            last.time,
            phi.plateau.end()
        )));
    }
    if let Some(c) = cs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::domain(format!(
            "entropy constant must be non-negative, got {c}"
        )));
    }
    Ok(())
}

/// Residuals for several constants sharing one test function; the error
/// estimate compares against the refined resolution.
pub fn entropy_residuals(
    traj: &Trajectory<DensityProfile>,
    kernel: &Kernel,
    mobility: &Mobility,
    phi: &TestFunction,
    cs: &[f64],
    res: QuadratureResolution,
) -> Result<Vec<EntropyReport>> {
    check(traj, phi, cs)?;
    let coarse = residuals_at(traj, kernel, mobility, phi, cs, res);
    let fine = residuals_at(traj, kernel, mobility, phi, cs, res.refined());
    Ok(cs
        .iter()
        .zip(coarse.iter().zip(&fine))
        .map(|(&c, (&(r, r_half), &(rf, _)))| {
            let error_estimate = (r - rf).abs() + (r - r_half).abs();
            let guard = GUARD_FLOOR.max(GUARD_FACTOR * error_estimate);
            EntropyReport {
                c,
                phi: phi.id.clone(),
                residual: r,
                resolution: res,
                error_estimate,
                guard,
                flagged: r < -guard,
            }
        })
        .collect())
}

pub fn entropy_residual(
    traj: &Trajectory<DensityProfile>,
    kernel: &Kernel,
    mobility: &Mobility,
    phi: &TestFunction,
    c: f64,
    res: QuadratureResolution,
) -> Result<EntropyReport> {
    Ok(entropy_residuals(traj, kernel, mobility, phi, &[c], res)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Diagnostics;
    use approx::assert_abs_diff_eq;

    fn frozen(profile: DensityProfile, times: &[f64]) -> Trajectory<DensityProfile> {
        let mut t = Trajectory::new();
        for &time in times {
            let d = Diagnostics {
                mass: profile.mass(),
                total_variation: 0.0,
                min_gap: None,
            };
            t.push(time, profile.clone(), d);
        }
        t
    }

    fn steady() -> DensityProfile {
        DensityProfile::new(vec![-1.0, -0.5, 0.5, 1.0], vec![1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn mollifier_has_unit_mass() {
        assert_abs_diff_eq!(
            mollifier_normalisation(),
            0.443_993_816_168_079_4,
            epsilon = 1e-12
        );
        let b = SpatialBump::Mollifier {
            center: 0.3,
            radius: 0.25,
        };
        let rule = gauss_legendre(20);
        let mass: f64 = (0..100)
            .map(|i| {
                integrate(
                    0.05 + 0.005 * i as f64,
                    0.05 + 0.005 * (i + 1) as f64,
                    &rule,
                    |x| b.value(x),
                )
            })
            .sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let bumps = [
            SpatialBump::Mollifier {
                center: -0.5,
                radius: 0.25,
            },
            SpatialBump::CosineSquared {
                center: 0.2,
                half_width: 0.4,
            },
        ];
        let h = 1e-6;
        for b in bumps {
            let (lo, hi) = b.support();
            for i in 1..50 {
                let x = lo + (hi - lo) * i as f64 / 50.0;
                let fd = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
                assert!(
                    (fd - b.derivative(x)).abs() < 1e-6 * (1.0 + fd.abs()),
                    "{b:?} at {x}"
                );
            }
        }
        let p = Plateau { horizon: 2.0 };
        // Smaller step: the ramp is only C^1 at its ends.
        let h = 1e-7;
        for i in 0..40 {
            let t = 1.5 + 0.05 * i as f64;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((fd - p.derivative(t)).abs() < 1e-6);
            assert!(p.derivative(t) <= 0.0);
        }
        assert_eq!(p.value(2.0), 1.0);
        assert_eq!(p.value(3.0), 0.0);
    }

    #[test]
    fn closed_form_convolutions() {
        let k = Kernel::standard_gaussian();
        let p = DensityProfile::new(vec![-0.3, 0.1, 0.6], vec![0.4, 0.9]).unwrap();
        let rule = gauss_legendre(30);
        let x = 0.37;
        let brute1: f64 = p
            .cells()
            .map(|(a, b, r)| r * integrate(a, b, &rule, |y| k.first(x - y)))
            .sum();
        let brute2: f64 = p
            .cells()
            .map(|(a, b, r)| r * integrate(a, b, &rule, |y| k.second(x - y)))
            .sum();
        let jumps = jumps(&p);
        assert_eq!(jumps.len(), 3);
        let (k1, k2) = convolutions(&jumps, &k, x);
        assert_abs_diff_eq!(k1, brute1, epsilon = 1e-13);
        assert_abs_diff_eq!(k2, brute2, epsilon = 1e-13);
    }

    #[test]
    fn vacuum_gives_zero() {
        let (k, m) = (Kernel::standard_gaussian(), Mobility::unit());
        let traj = frozen(
            DensityProfile::vacuum(-2.0, 2.0).unwrap(),
            &[0.0, 0.7, 1.4, 3.0],
        );
        for c in [0.0, 0.3, 1.0] {
            for phi in [
                TestFunction::mollifier_pair(1.5),
                TestFunction::cosine(0.1, 0.7, 0.4),
            ] {
                let r = entropy_residual(&traj, &k, &m, &phi, c, QuadratureResolution::default())
                    .unwrap();
                assert_abs_diff_eq!(r.residual, 0.0, epsilon = 1e-13);
                assert!(!r.flagged);
            }
        }
    }

    #[test]
    fn linear_in_phi() {
        let (k, m) = (Kernel::standard_gaussian(), Mobility::unit());
        let p = DensityProfile::new(vec![-0.8, -0.1, 0.5], vec![0.3, 0.7]).unwrap();
        let traj = frozen(p, &[0.0, 1.0, 2.0]);
        let phi = TestFunction::cosine(0.0, 0.6, 0.5);
        let res = QuadratureResolution::default();
        let r1 = entropy_residual(&traj, &k, &m, &phi, 0.4, res)
            .unwrap()
            .residual;
        let r3 = entropy_residual(&traj, &k, &m, &phi.scaled(3.0), 0.4, res)
            .unwrap()
            .residual;
        assert_abs_diff_eq!(r3, 3.0 * r1, epsilon = 1e-12);
    }

    #[test]
    fn coarse_snapshots_widen_the_guard() {
        let (k, m) = (Kernel::standard_gaussian(), Mobility::unit());
        let d = Diagnostics {
            mass: 0.0,
            total_variation: 0.0,
            min_gap: None,
        };
        let mut traj = Trajectory::new();
        for (t, v) in [(0.0, 0.2), (0.5, 0.9), (1.0, 0.1), (1.5, 0.6), (2.0, 0.3)] {
            traj.push(t, DensityProfile::uniform(-0.5, 0.5, v).unwrap(), d);
        }
        let phi = TestFunction::cosine(0.0, 0.4, 0.5);
        let r =
            entropy_residual(&traj, &k, &m, &phi, 0.5, QuadratureResolution::default()).unwrap();
        let frozen = entropy_residual(
            &frozen(
                DensityProfile::uniform(-0.5, 0.5, 0.2).unwrap(),
                &[0.0, 0.5, 1.0, 1.5, 2.0],
            ),
            &k,
            &m,
            &phi,
            0.5,
            QuadratureResolution::default(),
        )
        .unwrap();
        assert!(r.error_estimate > 1e-3, "{r:?}");
        assert!(frozen.error_estimate < 1e-6, "{frozen:?}");
    }

    #[test]
    fn steady_steps_violate_the_entropy_condition() {
        let (k, m) = (Kernel::standard_gaussian(), Mobility::unit());
        let p = steady();
        // Closed form: -(T + 1/2) 4 f(c) phi(1/2) (K' * rho)(1/2).
        let conv = p
            .cells()
            .map(|(a, b, r)| r * (k.value(0.5 - a) - k.value(0.5 - b)))
            .sum::<f64>();
        assert!(conv > 0.0);
        let peak = SpatialBump::Mollifier {
            center: 0.5,
            radius: 0.25,
        }
        .value(0.5);
        for horizon in [0.5, 2.0, 10.0] {
            let phi = TestFunction::mollifier_pair(horizon);
            let traj = frozen(p.clone(), &[0.0, horizon + 1.0]);
            let expected = -(horizon + 0.5) * 4.0 * 0.25 * peak * conv;
            let r = entropy_residual(&traj, &k, &m, &phi, 0.5, QuadratureResolution::default())
                .unwrap();
            // The guard band covers the actual quadrature error.
            assert!((r.residual - expected).abs() <= r.guard);
            let fine = QuadratureResolution {
                gauss_points: 6,
                subcells: 128,
            };
            let rf = entropy_residual(&traj, &k, &m, &phi, 0.5, fine).unwrap();
            assert_abs_diff_eq!(rf.residual, expected, epsilon = 1e-12 * expected.abs());
            assert!(r.flagged);
        }
    }

    #[test]
    fn support_mismatch_is_rejected() {
        let (k, m) = (Kernel::standard_gaussian(), Mobility::unit());
        let traj = frozen(steady(), &[0.0, 1.0]);
        let phi = TestFunction::mollifier_pair(2.0);
        assert!(
            entropy_residual(&traj, &k, &m, &phi, 0.5, QuadratureResolution::default()).is_err()
        );
        let late = frozen(steady(), &[0.5, 4.0]);
        assert!(
            entropy_residual(&late, &k, &m, &phi, 0.5, QuadratureResolution::default()).is_err()
        );
        let ok = frozen(steady(), &[0.0, 4.0]);
        assert!(
            entropy_residual(&ok, &k, &m, &phi, -0.1, QuadratureResolution::default()).is_err()
        );
    }

    #[test]
    fn report_serialises_as_json_line() {
        let r = EntropyReport {
            c: 0.5,
            phi: "p".into(),
            residual: -1.0,
            resolution: QuadratureResolution::default(),
            error_estimate: 0.0,
            guard: 1e-6,
            flagged: true,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.starts_with(r#"{"c":0.5,"phi":"p","residual":-1.0,"resolution":"#));
        assert_eq!(serde_json::from_str::<EntropyReport>(&line).unwrap(), r);
    }
}
