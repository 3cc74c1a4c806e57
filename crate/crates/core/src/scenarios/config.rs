//! Scenario configuration: one JSON document, optionally overlaid on a
//! builtin via a top-level `"scenario"` key.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::godunov::{FieldPlacement, Grid};
use crate::kernel::Kernel;
use crate::metrics::{QuadratureResolution, TestFunction};
use crate::mobility::Mobility;
use crate::profile::DensityProfile;

/// Names accepted by [`builtin_scenario`].
pub const BUILTIN_NAMES: [&str; 5] = [
    "single-step",
    "parabola",
    "two-step-0206",
    "two-step-11",
    "stationary-weak",
];

/// One constant-density step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub left: f64,
    pub right: f64,
    pub value: f64,
}

/// How the initial density is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    UniformStep {
        left: f64,
        right: f64,
        value: f64,
    },
    /// `3/4 (1 - x^2)` on `[-1, 1]`, averaged exactly over `cells` cells.
    Parabola {
        cells: usize,
    },
    /// Disjoint steps in increasing order with vacuum in between.
    Steps {
        steps: Vec<Step>,
    },
    Explicit {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<DensityProfile> {
        match self {
            ProfileSpec::UniformStep { left, right, value } => {
                DensityProfile::uniform(*left, *right, *value)
            }
            ProfileSpec::Parabola { cells } => {
                DensityProfile::from_antiderivative(-1.0, 1.0, *cells, |x| {
                    0.75 * (x - x * x * x / 3.0)
                })
            }
            ProfileSpec::Steps { steps } => {
                let first = steps
                    .first()
                    .ok_or_else(|| Error::domain("step profile needs a step"))?;
                let mut breakpoints = vec![first.left];
                let mut values = Vec::new();
                for (k, s) in steps.iter().enumerate() {
                    if k > 0 {
                        let prev = breakpoints[breakpoints.len() - 1];
                        if s.left < prev {
                            return Err(Error::domain("steps must be ordered and disjoint"));
                        }
                        if s.left > prev {
                            breakpoints.push(s.left);
                            values.push(0.0);
                        }
                    }
                    breakpoints.push(s.right);
                    values.push(s.value);
                }
                DensityProfile::new(breakpoints, values)
            }
            ProfileSpec::Explicit {
                breakpoints,
                values,
            } => DensityProfile::new(breakpoints.clone(), values.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.left, self.right, self.cells)
    }
}

/// Which trajectory the entropy audit inspects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditMode {
    Particles,
    Godunov,
    /// The initial profile held fixed in time.
    Frozen,
}

impl AuditMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AuditMode::Particles => "particles",
            AuditMode::Godunov => "godunov",
            AuditMode::Frozen => "frozen",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    pub mode: AuditMode,
    /// Entropy constants; empty means `0, 0.1 M, ..., M`.
    #[serde(default)]
    pub constants: Vec<f64>,
    /// Test functions; empty means the default library (see
    /// [`EntropySpec::library`]).
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
    /// Plateau horizons swept in frozen mode.
    pub horizons: Vec<f64>,
    pub resolution: QuadratureResolution,
}

impl Default for EntropySpec {
    fn default() -> Self {
        EntropySpec {
            mode: AuditMode::Godunov,
            constants: Vec::new(),
            test_functions: Vec::new(),
            horizons: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
            resolution: QuadratureResolution::default(),
        }
    }
}

impl EntropySpec {
    pub fn constants_for(&self, max_density: f64) -> Vec<f64> {
        if self.constants.is_empty() {
            (0..=10).map(|k| max_density * k as f64 / 10.0).collect()
        } else {
            self.constants.clone()
        }
    }

    /// Configured test functions, or the mollifier pair plus cosine bumps of
    /// half-width 1/4 centred on a 1/4-spaced lattice in `[-1.5, 1.5]`, all
    /// with plateau horizon `horizon`.
    pub fn library(&self, horizon: f64) -> Vec<TestFunction> {
        if !self.test_functions.is_empty() {
            return self.test_functions.clone();
        }
        let mut lib = vec![TestFunction::mollifier_pair(horizon)];
        lib.extend((-6..=6).map(|k| TestFunction::cosine(0.25 * k as f64, 0.25, horizon)));
        lib
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub particles: Vec<usize>,
    pub reference_cells: usize,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            particles: vec![75, 150, 300, 600],
            reference_cells: 2400,
        }
    }
}

/// A fully resolved scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub profile: ProfileSpec,
    pub kernel: Kernel,
    pub mobility: Mobility,
    pub particles: usize,
    pub grid: GridSpec,
    pub t_end: f64,
    /// Snapshot times in `(0, t_end]`; `None` means every `t_end / 10`.
    pub output_times: Option<Vec<f64>>,
    pub integrator_tol: f64,
    pub cfl: f64,
    pub field_placement: FieldPlacement,
    pub output_dir: String,
    pub entropy: EntropySpec,
    pub convergence: ConvergenceSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "single-step".into(),
            profile: ProfileSpec::UniformStep {
                left: -1.0,
                right: 1.0,
                value: 0.3,
            },
            kernel: Kernel::standard_gaussian(),
            mobility: Mobility::unit(),
            particles: 300,
            grid: GridSpec {
                left: -2.5,
                right: 2.5,
                cells: 1200,
            },
            t_end: 1.0,
            output_times: None,
            integrator_tol: 1e-8,
            cfl: 0.45,
            field_placement: FieldPlacement::CellCenter,
            output_dir: "out".into(),
            entropy: EntropySpec::default(),
            convergence: ConvergenceSpec::default(),
        }
    }
}

fn steps(list: &[(f64, f64, f64)]) -> ProfileSpec {
    ProfileSpec::Steps {
        steps: list
            .iter()
            .map(|&(left, right, value)| Step { left, right, value })
            .collect(),
    }
}

/// The named scenarios with default physics.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        name: name.to_string(),
        ..ScenarioConfig::default()
    };
    let profile = match name {
        "single-step" => base.profile.clone(),
        "parabola" => ProfileSpec::Parabola { cells: 10_000 },
        "two-step-0206" => steps(&[(-0.5, 0.0, 0.2), (0.5, 1.0, 0.6)]),
        "two-step-11" => steps(&[(-0.5, 0.0, 1.0), (0.5, 1.0, 1.0)]),
        "stationary-weak" => steps(&[(-1.0, -0.5, 1.0), (0.5, 1.0, 1.0)]),
        _ => {
            return Err(Error::config(format!(
                "unknown scenario '{name}' (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    let mut cfg = ScenarioConfig { profile, ..base };
    if name == "stationary-weak" {
        cfg.entropy.mode = AuditMode::Particles;
        cfg.entropy.constants = vec![0.5];
    }
    Ok(cfg)
}

/// Recursive merge; objects whose `kind` tag changes are replaced whole.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            let retagged = matches!((b.get("kind"), t.get("kind")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = t;
                return;
            }
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, t) => *slot = t,
    }
}

impl ScenarioConfig {
    /// Parses a config document. A top-level `"scenario": NAME` selects the
    /// builtin to overlay; otherwise the defaults are the base.
    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json_str_on(text, None)
    }

    /// Like [`ScenarioConfig::from_json_str`], with `scenario` naming the
    /// builtin base. A document naming a different builtin is rejected.
    pub fn from_json_str_on(text: &str, scenario: Option<&str>) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid JSON: {e}")))?;
        let Value::Object(map) = &mut doc else {
            return Err(Error::config("config must be a JSON object"));
        };
        let named = match map.remove("scenario") {
            Some(Value::String(name)) => Some(name),
            Some(other) => {
                return Err(Error::config(format!(
                    "\"scenario\" must be a string, got {other}"
                )))
            }
            None => None,
        };
        let base = match (named.as_deref(), scenario) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config(format!(
                    "config names scenario '{a}' but '{b}' was requested"
                )))
            }
            (Some(name), _) | (None, Some(name)) => builtin_scenario(name)?,
            (None, None) => ScenarioConfig::default(),
        };
        let mut merged = serde_json::to_value(&base)?;
        overlay(&mut merged, doc);
        let cfg: ScenarioConfig = serde_json::from_value(merged)
            .map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn initial_profile(&self) -> Result<DensityProfile> {
        self.profile.build()
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    /// Snapshot times after zero, ending with `t_end`.
    pub fn resolved_output_times(&self) -> Vec<f64> {
        match &self.output_times {
            Some(times) => {
                let mut t = times.clone();
                if t.last() != Some(&self.t_end) {
                    t.push(self.t_end);
                }
                t
            }
            None => (1..=10).map(|k| self.t_end * k as f64 / 10.0).collect(),
        }
    }

    /// Checks every admissibility condition, reporting config errors.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.particles == 0 {
            return bad("particle count must be at least 1".into());
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.integrator_tol > 0.0 && self.integrator_tol < 1.0) {
            return bad(format!(
                "integrator tolerance must lie in (0, 1), got {}",
                self.integrator_tol
            ));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("CFL fraction must lie in (0, 1), got {}", self.cfl));
        }
        let Kernel::Gaussian {
            amplitude,
            inverse_width,
        } = self.kernel;
        Kernel::gaussian(amplitude, inverse_width).map_err(|e| Error::Config(e.to_string()))?;
        Mobility::truncated_linear(self.mobility.max_density(), self.mobility.v_max())
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(times) = &self.output_times {
            if times.windows(2).any(|w| w[1] <= w[0])
                || times.iter().any(|&t| !(t > 0.0 && t <= self.t_end))
            {
                return bad("output times must increase strictly within (0, t_end]".into());
            }
        }
        let profile = self
            .initial_profile()
            .map_err(|e| Error::Config(format!("initial profile: {e}")))?;
        if !(profile.mass() > 0.0) {
            return bad("initial profile has zero mass".into());
        }
        let cap = self.mobility.max_density();
        if profile.max_value() > cap {
            return bad(format!(
                "initial profile exceeds the maximal density {cap} (max {})",
                profile.max_value()
            ));
        }
        let grid = self.grid().map_err(|e| Error::Config(e.to_string()))?;
        let (lo, hi) = profile.support().expect("positive mass");
        let margin = 2.0 * grid.dx();
        if lo - margin < grid.left() || hi + margin > grid.right() {
            return bad(format!(
                "Godunov domain [{}, {}] must contain the support [{lo}, {hi}] with two cells to spare",
                grid.left(),
                grid.right()
            ));
        }
        let n_list = &self.convergence.particles;
        if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("convergence particle counts must be positive and increasing".into());
        }
        if self.convergence.reference_cells < 4 * n_list[n_list.len() - 1] {
            return bad(
                "reference cell count must be at least 4 times the largest particle count".into(),
            );
        }
        if self
            .entropy
            .constants
            .iter()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return bad("entropy constants must be non-negative".into());
        }
        if self
            .entropy
            .horizons
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return bad("entropy horizons must be non-negative".into());
        }
        for phi in &self.entropy.test_functions {
            phi.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.entropy.resolution.gauss_points == 0 || self.entropy.resolution.subcells == 0 {
            return bad("quadrature resolution must be positive".into());
        }
        Ok(())
    }
}
