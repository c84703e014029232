//! Run configuration: a versioned TOML schema with defaults for every
//! optional key.
//!
//! ```toml
//! schema_version = 1
//! output_dir = "abreu-out"
//! seed = 0
//!
//! [domain]
//! outer_radius = 1.0
//! outer_center = [0.0, 0.0]
//!
//! [domain.inner]
//! shape = "disk"          # or "square"
//! radius = 0.5            # disk
//! half_width = 0.3        # square
//! center = [0.0, 0.0]
//!
//! [boundary]              # phi(x) = (curvature/2)|x|^2 + slope . x + offset
//! curvature = 1.0
//! slope = [0.0, 0.0]
//! offset = 0.0
//!
//! [grid]
//! n_per_axis = 33
//!
//! [model]
//! kind = "quadratic_test" # or "rochet_chone", "exp"
//! q = 2.0                 # rochet_chone only
//! gamma = 1.0             # constant weight, or a [model.gamma_table]
//!
//! [schedule]
//! eps0 = 0.0625
//! ratio = 0.5
//! count = 8
//! start = "warm"          # or "cold"
//!
//! [solver]                # Newton settings
//! [baseline]              # mu0, mu_ratio, mu_min
//! [audit]                 # compact_margin, g_samples, g_range
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use abreu_core::geometry::{build_grid, Disk, QuadraticData};
use abreu_core::model::{exp_lagrangian, quadratic_lagrangian, rochet_chone, BilinearTable, Gamma};
use abreu_core::solver::StartPolicy;
use abreu_core::{DomainSpec, EpsSchedule, Grid, InnerShape, Lagrangian, MuSchedule, NewtonConfig, Problem};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub audit: AuditConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("abreu-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub outer_radius: f64,
    pub outer_center: [f64; 2],
    pub inner: InnerConfig,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            outer_radius: 1.0,
            outer_center: [0.0, 0.0],
            inner: InnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerConfig {
    pub shape: ShapeKind,
    pub center: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            shape: ShapeKind::Disk,
            center: [0.0, 0.0],
            radius: Some(0.5),
            half_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub curvature: f64,
    pub slope: [f64; 2],
    pub offset: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            curvature: 1.0,
            slope: [0.0, 0.0],
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_per_axis: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_per_axis: 33 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    QuadraticTest,
    RochetChone,
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_table: Option<GammaTableConfig>,
}

fn default_q() -> f64 {
    2.0
}

fn default_gamma() -> f64 {
    1.0
}

/// `gamma` on a regular grid, row-major with x varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaTableConfig {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Warm,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
    pub start: StartKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = EpsSchedule::default();
        Self {
            eps0: s.eps0,
            ratio: s.ratio,
            count: s.count,
            start: StartKind::Warm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_grad: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let c = NewtonConfig::default();
        Self {
            tol_grad: c.tol_grad,
            max_iters: c.max_iters,
            armijo: c.armijo,
            backtrack: c.backtrack,
            cg_tol: c.cg_tol,
            cg_max: c.cg_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub mu0: f64,
    pub mu_ratio: f64,
    pub mu_min: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let m = MuSchedule::default();
        Self {
            mu0: m.mu0,
            mu_ratio: m.ratio,
            mu_min: m.mu_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Distance of the compact set `K` from the outer boundary.
    pub compact_margin: f64,
    /// Number of random points for the penalty identity and envelope checks.
    pub g_samples: usize,
    /// Penalty identity samples are drawn from `[-g_range, g_range]`.
    pub g_range: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            compact_margin: 0.25,
            g_samples: 1000,
            g_range: 10.0,
        }
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        CliError::Parse {
            origin: origin.to_string(),
            line,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn validation(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(validation(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.model.kind == ModelKind::RochetChone && !(self.model.q > 1.0 && self.model.q.is_finite()) {
            return Err(validation("model.q", format!("must satisfy q > 1, got {}", self.model.q)));
        }
        if !(self.model.gamma >= 0.0 && self.model.gamma.is_finite()) {
            return Err(validation("model.gamma", "must be finite and >= 0"));
        }
        if !(self.boundary.curvature >= 0.0) {
            return Err(validation("boundary.curvature", "must be >= 0 for convex data"));
        }
        if self.schedule.count == 0 {
            return Err(validation("schedule.count", "must be at least 1"));
        }
        if !(self.audit.compact_margin > 0.0) {
            return Err(validation("audit.compact_margin", "must be positive"));
        }
        if self.audit.g_samples == 0 || !(self.audit.g_range > 0.0) {
            return Err(validation("audit.g_samples", "sample count and range must be positive"));
        }
        self.eps_schedule()
            .validate()
            .map_err(|e| validation("schedule", e.to_string()))?;
        self.newton()
            .validate()
            .map_err(|e| validation("solver", e.to_string()))?;
        self.mu_schedule()
            .validate()
            .map_err(|e| validation("baseline", e.to_string()))?;
        self.domain_spec()?;
        self.model()?;
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, CliError> {
        let d = &self.domain;
        let inner = match d.inner.shape {
            ShapeKind::Disk => InnerShape::Disk {
                center: d.inner.center,
                radius: d
                    .inner
                    .radius
                    .ok_or_else(|| validation("domain.inner.radius", "required for a disk"))?,
            },
            ShapeKind::Square => InnerShape::Square {
                center: d.inner.center,
                half_width: d
                    .inner
                    .half_width
                    .ok_or_else(|| validation("domain.inner.half_width", "required for a square"))?,
            },
        };
        let b = &self.boundary;
        DomainSpec::new(
            Disk {
                center: d.outer_center,
                radius: d.outer_radius,
            },
            inner,
            Arc::new(QuadraticData::new(b.curvature, b.slope, b.offset)),
        )
        .map_err(|e| validation("domain", e.to_string()))
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        let spec = self.domain_spec()?;
        build_grid(&spec, self.grid.n_per_axis)
            .map(Arc::new)
            .map_err(|e| validation("grid.n_per_axis", e.to_string()))
    }

    pub fn model(&self) -> Result<Arc<dyn Lagrangian>, CliError> {
        let m = &self.model;
        Ok(match m.kind {
            ModelKind::QuadraticTest => Arc::new(quadratic_lagrangian()),
            ModelKind::Exp => Arc::new(exp_lagrangian()),
            ModelKind::RochetChone => {
                let gamma = match &m.gamma_table {
                    None => Gamma::Constant(m.gamma),
                    Some(t) => Gamma::Table(
                        BilinearTable::new(t.origin, t.spacing, t.shape, t.values.clone())
                            .map_err(|e| validation("model.gamma_table", e.to_string()))?,
                    ),
                };
                let d = &self.domain;
                let x_bound = d.outer_center[0].hypot(d.outer_center[1]) + d.outer_radius;
                Arc::new(rochet_chone(m.q, gamma, x_bound).map_err(|e| validation("model", e.to_string()))?)
            }
        })
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Problem::new(self.grid()?, self.model()?).map_err(|e| validation("model", e.to_string()))
    }

    pub fn eps_schedule(&self) -> EpsSchedule {
        EpsSchedule {
            eps0: self.schedule.eps0,
            ratio: self.schedule.ratio,
            count: self.schedule.count,
        }
    }

    pub fn start_policy(&self) -> StartPolicy {
        match self.schedule.start {
            StartKind::Warm => StartPolicy::Warm,
            StartKind::Cold => StartPolicy::Cold,
        }
    }

    pub fn newton(&self) -> NewtonConfig {
        let s = &self.solver;
        NewtonConfig {
            tol_grad: s.tol_grad,
            max_iters: s.max_iters,
            armijo: s.armijo,
            backtrack: s.backtrack,
            cg_tol: s.cg_tol,
            cg_max: s.cg_max,
        }
    }

    pub fn mu_schedule(&self) -> MuSchedule {
        MuSchedule {
            mu0: self.baseline.mu0,
            ratio: self.baseline.mu_ratio,
            mu_min: self.baseline.mu_min,
        }
    }

    /// The configuration with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
