//! Run configuration: strict JSON parsing, default resolution, and
//! construction of the initial state and force model.
//!
//! Parsing is strict: unknown keys anywhere in the file are errors, and
//! every default the loader fills in is materialized into the resolved
//! config so the manifest echoes the exact run parameters.

// Validation guards use negated comparisons (`!(x > 0.0)`) so NaN fails
// them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use strand_core::{
    BodyGrid, Configuration, ForceKind, ForceModel, ScalarField, Scheme, Section, State,
    SupportMode,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: PresetConfig,
    #[serde(default)]
    pub force: ForceConfig,
    #[serde(default = "default_boundary_mode")]
    pub boundary_mode: BoundaryMode,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_nodes: usize,
    #[serde(default = "default_eps_emb")]
    pub eps_emb: f64,
    #[serde(default = "default_band_width")]
    pub band_width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    Rk4,
    Leapfrog,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Scheme {
        match s {
            SchemeConfig::Rk4 => Scheme::Rk4,
            SchemeConfig::Leapfrog => Scheme::Leapfrog,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Free,
    Compact,
}

impl From<BoundaryMode> for SupportMode {
    fn from(m: BoundaryMode) -> SupportMode {
        match m {
            BoundaryMode::Free => SupportMode::Free,
            BoundaryMode::Compact => SupportMode::Compact,
        }
    }
}

/// A named preset with a parameter object; the parameters are parsed
/// strictly against the preset's own schema and written back resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub preset: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default = "default_force_coefficient")]
    pub force_coefficient: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            kind: "zero".to_string(),
            params: serde_json::Value::Null,
            force_coefficient: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub directory: String,
    /// Snapshot cadence for the trajectory matrices: every k-th step,
    /// plus the first and last states. Zero disables snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    /// Tolerance for the closed-form comparison reported in the manifest
    /// when the initial preset is analytic (translation or scaling).
    #[serde(default)]
    pub analytic_tolerance: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_output_dir(),
            snapshot_every: default_snapshot_every(),
            formats: default_formats(),
            analytic_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: default_suites(),
            trials: default_trials(),
            seed: default_seed(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Per-suite acceptance thresholds. The defaults are calibrated for the
/// default grid scale (201 nodes, dt = 1e-3).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_christoffel")]
    pub christoffel_symmetry: f64,
    #[serde(default = "tol_metric_compat")]
    pub metric_compat: f64,
    #[serde(default = "tol_first_variation")]
    pub first_variation: f64,
    #[serde(default = "tol_motion_residual")]
    pub motion_residual: f64,
    #[serde(default = "tol_energy_conservation")]
    pub energy_conservation: f64,
    #[serde(default = "tol_flux_balance")]
    pub flux_balance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            christoffel_symmetry: tol_christoffel(),
            metric_compat: tol_metric_compat(),
            first_variation: tol_first_variation(),
            motion_residual: tol_motion_residual(),
            energy_conservation: tol_energy_conservation(),
            flux_balance: tol_flux_balance(),
        }
    }
}

fn default_eps_emb() -> f64 {
    1e-8
}
fn default_band_width() -> usize {
    1
}
fn default_scheme() -> SchemeConfig {
    SchemeConfig::Rk4
}
fn default_boundary_mode() -> BoundaryMode {
    BoundaryMode::Free
}
fn default_force_coefficient() -> f64 {
    1.0
}
fn default_output_dir() -> String {
    "out".to_string()
}
fn default_snapshot_every() -> usize {
    0
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string()]
}
pub fn default_suites() -> Vec<String> {
    [
        "christoffel_symmetry",
        "metric_compat",
        "first_variation",
        "motion_residual",
        "energy_conservation",
        "flux_balance",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
fn default_trials() -> u32 {
    20
}
fn default_seed() -> u64 {
    42
}
fn tol_christoffel() -> f64 {
    1e-10
}
fn tol_metric_compat() -> f64 {
    1e-5
}
fn tol_first_variation() -> f64 {
    1e-6
}
fn tol_motion_residual() -> f64 {
    1e-4
}
fn tol_energy_conservation() -> f64 {
    1e-6
}
fn tol_flux_balance() -> f64 {
    1e-6
}

/// Initial-condition presets with resolved parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationParams {
    #[serde(default = "default_translation_velocity")]
    pub velocity: f64,
}
fn default_translation_velocity() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    #[serde(default = "default_scaling_rate")]
    pub rate: f64,
}
fn default_scaling_rate() -> f64 {
    1.0 / 3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpParams {
    #[serde(default = "default_bump_amplitude")]
    pub amplitude: f64,
    /// Defaults to the midpoint of the body interval.
    #[serde(default)]
    pub center: Option<f64>,
    /// Defaults to a tenth of the body length.
    #[serde(default)]
    pub width: Option<f64>,
}
fn default_bump_amplitude() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedParams {
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantDensityParams {
    #[serde(default = "default_force_value")]
    pub value: f64,
}
fn default_force_value() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedForceParams {
    pub t_start: f64,
    pub dt: f64,
    pub fields: Vec<Vec<f64>>,
}

fn field_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn parse_params<T: for<'de> Deserialize<'de>>(
    path: &str,
    params: &serde_json::Value,
) -> Result<T, CliError> {
    let value = if params.is_null() {
        serde_json::json!({})
    } else {
        params.clone()
    };
    serde_json::from_value(value).map_err(|e| field_err(path, e))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("parameter structs serialize")
}

impl RunConfig {
    /// Parses and validates a config file, resolving every default into
    /// the returned value.
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Validates all fields and materializes defaults (preset parameters
    /// included) so that serializing the config reproduces the run
    /// exactly.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let grid = self.build_grid()?;
        if !(self.grid.eps_emb.is_finite() && self.grid.eps_emb > 0.0) {
            return Err(field_err("grid.eps_emb", "must be positive and finite"));
        }
        if self.boundary_mode == BoundaryMode::Compact {
            if self.grid.band_width == 0 {
                return Err(field_err("grid.band_width", "must be at least 1 in compact mode"));
            }
            if 2 * self.grid.band_width >= self.grid.n_nodes {
                return Err(field_err(
                    "grid.band_width",
                    "leaves no interior nodes on this grid",
                ));
            }
        }
        if !(self.time.dt.is_finite() && self.time.dt > 0.0) {
            return Err(field_err("time.dt", "must be positive and finite"));
        }
        if !(self.time.t_end.is_finite()) {
            return Err(field_err("time.t_end", "must be finite"));
        }

        // Resolve initial preset parameters.
        let mid = 0.5 * (grid.x_min() + grid.x_max());
        let tenth = 0.1 * grid.length();
        match self.initial.preset.as_str() {
            "rest" => {
                parse_params::<EmptyParams>("initial.params", &self.initial.params)?;
                self.initial.params = serde_json::json!({});
            }
            "translation" => {
                let p: TranslationParams = parse_params("initial.params", &self.initial.params)?;
                self.initial.params = to_value(&p);
            }
            "scaling" => {
                let p: ScalingParams = parse_params("initial.params", &self.initial.params)?;
                self.initial.params = to_value(&p);
            }
            "gaussian_bump" => {
                let mut p: BumpParams = parse_params("initial.params", &self.initial.params)?;
                p.center.get_or_insert(mid);
                p.width.get_or_insert(tenth);
                if !(p.width.unwrap() > 0.0) {
                    return Err(field_err("initial.params.width", "must be positive"));
                }
                self.initial.params = to_value(&p);
            }
            "tabulated" => {
                let p: TabulatedParams = parse_params("initial.params", &self.initial.params)?;
                if p.phi.len() != grid.n_nodes() {
                    return Err(field_err(
                        "initial.params.phi",
                        format!("needs {} values, got {}", grid.n_nodes(), p.phi.len()),
                    ));
                }
                if p.v.len() != grid.n_nodes() {
                    return Err(field_err(
                        "initial.params.v",
                        format!("needs {} values, got {}", grid.n_nodes(), p.v.len()),
                    ));
                }
            }
            other => {
                return Err(field_err(
                    "initial.preset",
                    format!(
                        "unknown preset `{other}` (expected rest, translation, scaling, \
                         gaussian_bump or tabulated)"
                    ),
                ));
            }
        }

        // Resolve force parameters.
        match self.force.kind.as_str() {
            "zero" => {
                parse_params::<EmptyParams>("force.params", &self.force.params)?;
                self.force.params = serde_json::json!({});
            }
            "constant_density" => {
                let p: ConstantDensityParams = parse_params("force.params", &self.force.params)?;
                self.force.params = to_value(&p);
            }
            "spatial_bump" => {
                let mut p: BumpParams = parse_params("force.params", &self.force.params)?;
                p.amplitude = if self.force.params.get("amplitude").is_some() {
                    p.amplitude
                } else {
                    0.1
                };
                p.center.get_or_insert(mid);
                p.width.get_or_insert(tenth);
                self.force.params = to_value(&p);
            }
            "tabulated" => {
                let p: TabulatedForceParams = parse_params("force.params", &self.force.params)?;
                if p.fields.is_empty() {
                    return Err(field_err("force.params.fields", "needs at least one row"));
                }
                for (i, row) in p.fields.iter().enumerate() {
                    if row.len() != grid.n_nodes() {
                        return Err(field_err(
                            &format!("force.params.fields[{i}]"),
                            format!("needs {} values, got {}", grid.n_nodes(), row.len()),
                        ));
                    }
                }
                if !(p.dt > 0.0) {
                    return Err(field_err("force.params.dt", "must be positive"));
                }
            }
            other => {
                return Err(field_err(
                    "force.kind",
                    format!(
                        "unknown force `{other}` (expected zero, constant_density, \
                         spatial_bump or tabulated)"
                    ),
                ));
            }
        }
        if !self.force.force_coefficient.is_finite() {
            return Err(field_err("force.force_coefficient", "must be finite"));
        }

        for suite in &self.verify.suites {
            if !default_suites().contains(suite) {
                return Err(field_err(
                    "verify.suites",
                    format!("unknown suite `{suite}`"),
                ));
            }
        }
        for fmt in &self.outputs.formats {
            if fmt != "csv" && fmt != "json" {
                return Err(field_err(
                    "outputs.formats",
                    format!("unknown format `{fmt}` (expected csv or json)"),
                ));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<BodyGrid, CliError> {
        BodyGrid::new(self.grid.x_min, self.grid.x_max, self.grid.n_nodes).map_err(|e| {
            let field = match e {
                strand_core::Error::NonFiniteBound { field: "x_min", .. } => "grid.x_min",
                strand_core::Error::TooFewNodes { .. } => "grid.n_nodes",
                _ => "grid.x_max",
            };
            field_err(field, e)
        })
    }

    pub fn support_mode(&self) -> SupportMode {
        self.boundary_mode.into()
    }

    pub fn scheme(&self) -> Scheme {
        self.time.scheme.into()
    }

    /// The initial state built from the resolved preset.
    pub fn build_initial_state(&self) -> Result<State, CliError> {
        let grid = self.build_grid()?;
        let eps = self.grid.eps_emb;
        let identity = || ScalarField::from_fn(grid, |x| x).expect("identity field");
        let (phi, v): (ScalarField, ScalarField) = match self.initial.preset.as_str() {
            "rest" => (identity(), ScalarField::zeros(grid)),
            "translation" => {
                let p: TranslationParams = parse_params("initial.params", &self.initial.params)?;
                (
                    identity(),
                    ScalarField::constant(grid, p.velocity)
                        .map_err(|e| field_err("initial.params.velocity", e))?,
                )
            }
            "scaling" => {
                let p: ScalingParams = parse_params("initial.params", &self.initial.params)?;
                (
                    identity(),
                    ScalarField::from_fn(grid, |x| p.rate * x)
                        .map_err(|e| field_err("initial.params.rate", e))?,
                )
            }
            "gaussian_bump" => {
                let p: BumpParams = parse_params("initial.params", &self.initial.params)?;
                let c = p.center.expect("resolved");
                let w = p.width.expect("resolved");
                (
                    identity(),
                    ScalarField::from_fn(grid, |x| {
                        let z = (x - c) / w;
                        p.amplitude * (-z * z).exp()
                    })
                    .map_err(|e| field_err("initial.params", e))?,
                )
            }
            "tabulated" => {
                let p: TabulatedParams = parse_params("initial.params", &self.initial.params)?;
                (
                    ScalarField::new(grid, p.phi).map_err(|e| field_err("initial.params.phi", e))?,
                    ScalarField::new(grid, p.v).map_err(|e| field_err("initial.params.v", e))?,
                )
            }
            other => unreachable!("presets validated in resolve(): {other}"),
        };
        let config = Configuration::new(phi, eps).map_err(|e| field_err("grid.eps_emb", e))?;
        config
            .require_embedding()
            .map_err(|e| field_err("initial", e))?;
        let velocity = match self.support_mode() {
            SupportMode::Free => Section::free(v),
            SupportMode::Compact => Section::compact(v, self.grid.band_width)
                .map_err(|e| field_err("grid.band_width", e))?,
        };
        State::new(0.0, config, velocity).map_err(|e| field_err("initial", e))
    }

    /// The force model built from the resolved force section.
    pub fn build_force(&self) -> Result<ForceModel, CliError> {
        let grid = self.build_grid()?;
        let kind = match self.force.kind.as_str() {
            "zero" => ForceKind::Zero,
            "constant_density" => {
                let p: ConstantDensityParams = parse_params("force.params", &self.force.params)?;
                ForceKind::ConstantDensity { value: p.value }
            }
            "spatial_bump" => {
                let p: BumpParams = parse_params("force.params", &self.force.params)?;
                ForceKind::SpatialBump {
                    amplitude: p.amplitude,
                    center: p.center.expect("resolved"),
                    width: p.width.expect("resolved"),
                }
            }
            "tabulated" => {
                let p: TabulatedForceParams = parse_params("force.params", &self.force.params)?;
                let fields = p
                    .fields
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        ScalarField::new(grid, row)
                            .map_err(|e| field_err(&format!("force.params.fields[{i}]"), e))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ForceKind::Tabulated {
                    t_start: p.t_start,
                    dt: p.dt,
                    fields,
                }
            }
            other => unreachable!("force kinds validated in resolve(): {other}"),
        };
        Ok(ForceModel::new(kind, self.force.force_coefficient))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}
