//! Run descriptions: one JSON document per invocation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qdbar_core::element::{BandEntry, LambdaElement};
use qdbar_core::limits::{check_grid, geometric_grid};
use qdbar_core::operators::{Kernel, QtKernelMode, MAX_KERNEL_BAND};
use qdbar_core::weights::{FamilyKind, WeightFamily};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CheckWeights,
    Norms,
    Parametrix,
    Inverse,
    Schur,
    Continuity,
    UniformBound,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckWeights => "check-weights",
            Self::Norms => "norms",
            Self::Parametrix => "parametrix",
            Self::Inverse => "inverse",
            Self::Schur => "schur",
            Self::Continuity => "continuity",
            Self::UniformBound => "uniform-bound",
        }
    }

    fn needs_element(self) -> bool {
        !matches!(self, Self::CheckWeights | Self::Schur | Self::UniformBound)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    UnilateralExample,
    BilateralRational { alpha: f64, beta: f64 },
    BilateralArctan { alpha: f64, beta: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> qdbar_core::Result<WeightFamily> {
        WeightFamily::new(match *self {
            Self::UnilateralExample => FamilyKind::UnilateralExample,
            Self::BilateralRational { alpha, beta } => FamilyKind::BilateralRational { alpha, beta },
            Self::BilateralArctan { alpha, beta } => FamilyKind::BilateralArctan { alpha, beta },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Geometric {
        #[serde(default = "default_head")]
        head: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    /// Sorted into descending order on parse.
    Explicit { values: Vec<f64> },
}

fn default_head() -> f64 {
    0.2
}
fn default_ratio() -> f64 {
    0.5
}
fn default_points() -> usize {
    8
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Geometric { head: default_head(), ratio: default_ratio(), points: default_points() }
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Geometric { head, ratio, points } => geometric_grid(*head, *ratio, *points),
            Self::Explicit { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_k_cap")]
    pub k_cap: u64,
}

fn default_tail_tol() -> f64 {
    1e-5
}
fn default_k_cap() -> u64 {
    20_000_000
}

impl Default for Truncation {
    fn default() -> Self {
        Self { tail_tol: default_tail_tol(), k_cap: default_k_cap() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Index window and tolerance for `check-weights`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    /// Defaults to `0` on the disk and `-k_hi` on the annulus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_lo: Option<i64>,
    #[serde(default = "default_weights_k_hi")]
    pub k_hi: i64,
    /// Defaults to `k_hi / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_index: Option<i64>,
    /// Allowed deviation from the closed-form moduli.
    #[serde(default = "default_closed_form_tol")]
    pub closed_form_tol: f64,
}

fn default_weights_k_hi() -> i64 {
    10_000
}
fn default_closed_form_tol() -> f64 {
    1e-12
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { k_lo: None, k_hi: default_weights_k_hi(), tail_index: None, closed_form_tol: default_closed_form_tol() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuitySection {
    #[serde(default = "default_t_lo")]
    pub t_lo: f64,
    #[serde(default = "default_t_hi")]
    pub t_hi: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_t_lo() -> f64 {
    0.05
}
fn default_t_hi() -> f64 {
    0.9
}
fn default_steps() -> usize {
    100
}

impl Default for ContinuitySection {
    fn default() -> Self {
        Self { t_lo: default_t_lo(), t_hi: default_t_hi(), steps: default_steps() }
    }
}

/// Kernels for `schur`: an explicit list, all kernels up to `max_n`, or
/// (neither given) the kernels the element uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchurSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Kernel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    #[serde(default = "default_schur_window")]
    pub window: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_schur_window() -> usize {
    2000
}
fn default_iterations() -> usize {
    qdbar_core::operators::kernel::POWER_ITERATIONS
}

impl Default for SchurSection {
    fn default() -> Self {
        Self { kernels: None, max_n: None, window: default_schur_window(), iterations: default_iterations() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub element: Vec<BandEntry>,
    /// Element list for `uniform-bound`; defaults to `[element]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<Vec<BandEntry>>>,
    #[serde(default)]
    pub t_grid: GridSpec,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub qt_kernel: QtKernelMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Residual rows above their bound are reported as expected failures.
    #[serde(default)]
    pub expect_failure: bool,
    /// Burn-in points skipped by rate fits.
    #[serde(default)]
    pub drop_head: usize,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub continuity: ContinuitySection,
    #[serde(default)]
    pub schur: SchurSection,
}

/// Built objects of a checked config.
#[derive(Debug, Clone)]
pub struct Validated {
    pub family: WeightFamily,
    pub element: Option<LambdaElement>,
    pub elements: Vec<LambdaElement>,
    pub grid: Vec<f64>,
}

/// Parses, normalizes and validates a run description.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut config: RunConfig = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => CliError::invalid("cli", e),
            _ => CliError::ConfigSyntax(e.to_string()),
        }
    })?;
    config.normalize();
    config.validate(config.experiment)?;
    Ok(config)
}

fn element_of(entries: &[BandEntry]) -> Result<LambdaElement, CliError> {
    let e = LambdaElement::from_entries(entries).map_err(|e| CliError::invalid("elements", e))?;
    if e.top_band() > MAX_KERNEL_BAND {
        return Err(CliError::invalid(
            "operators",
            format!("band {} exceeds the kernel product cap {MAX_KERNEL_BAND}", e.top_band()),
        ));
    }
    Ok(e)
}

impl RunConfig {
    /// Pretty JSON that parses back to the same config.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    fn normalize(&mut self) {
        if let GridSpec::Explicit { values } = &mut self.t_grid {
            values.sort_by(|a, b| b.total_cmp(a));
        }
    }

    /// Checks every spec against its module's invariants; `experiment`
    /// decides which parts are required.
    pub fn validate(&self, experiment: Option<Experiment>) -> Result<Validated, CliError> {
        let family = self.family.build().map_err(|e| CliError::invalid("weights", e))?;
        let element = if self.element.is_empty() { None } else { Some(element_of(&self.element)?) };
        if experiment.is_some_and(Experiment::needs_element) && element.is_none() {
            return Err(CliError::invalid("elements", "this experiment needs a nonempty element"));
        }
        let elements = match &self.elements {
            Some(list) => list.iter().map(|e| element_of(e)).collect::<Result<Vec<_>, _>>()?,
            None => element.iter().cloned().collect(),
        };
        if experiment == Some(Experiment::UniformBound) && elements.is_empty() {
            return Err(CliError::invalid("limits", "uniform-bound needs at least one element"));
        }

        if let GridSpec::Geometric { head, ratio, points } = self.t_grid {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(CliError::invalid("limits", format!("grid ratio {ratio} outside (0, 1)")));
            }
            if points == 0 || !(head > 0.0) {
                return Err(CliError::invalid("limits", "geometric grids need a positive head and at least one point"));
            }
        }
        let grid = self.t_grid.values();
        check_grid(&grid).map_err(|e| CliError::invalid("limits", e))?;

        let Truncation { tail_tol, k_cap } = self.truncation;
        if !(tail_tol > 0.0 && tail_tol.is_finite()) {
            return Err(CliError::invalid("limits", format!("tail_tol = {tail_tol} must be positive")));
        }
        if k_cap < 2 {
            return Err(CliError::invalid("limits", "k_cap must be at least 2"));
        }

        let w = &self.weights;
        let k_lo = w.k_lo.unwrap_or(0);
        if k_lo > w.k_hi {
            return Err(CliError::invalid("weights", format!("empty index window [{k_lo}, {}]", w.k_hi)));
        }
        if !(w.closed_form_tol >= 0.0) {
            return Err(CliError::invalid("weights", "closed_form_tol must be nonnegative"));
        }

        let c = &self.continuity;
        if !(c.t_lo > 0.0 && c.t_lo < c.t_hi && c.t_hi < 1.0) {
            return Err(CliError::invalid("limits", format!("need 0 < t_lo < t_hi < 1, got [{}, {}]", c.t_lo, c.t_hi)));
        }
        if c.steps < 2 {
            return Err(CliError::invalid("limits", "continuity scans need at least two steps"));
        }

        let s = &self.schur;
        if s.window < 2 || s.iterations == 0 {
            return Err(CliError::invalid("operators", "schur needs a window of at least 2 and one iteration"));
        }
        for k in s.kernels.iter().flatten() {
            if matches!(k, Kernel::T2(0)) || k.n() > MAX_KERNEL_BAND {
                return Err(CliError::invalid("operators", format!("kernel {k:?} does not exist")));
            }
        }
        if s.max_n.is_some_and(|n| n == 0 || n > MAX_KERNEL_BAND) {
            return Err(CliError::invalid("operators", format!("max_n must lie in 1..={MAX_KERNEL_BAND}")));
        }
        if experiment == Some(Experiment::Schur) && s.kernels.is_none() && s.max_n.is_none() && element.is_none() {
            return Err(CliError::invalid("operators", "schur needs kernels, max_n or an element"));
        }

        Ok(Validated { family, element, elements, grid })
    }
}
