//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CoefficientModel, InitialLaw, SpaceGrid, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Constant { alpha: f64, beta: f64 },
    XFree { alpha: f64, beta: f64 },
    Gbm { alpha: f64, beta: f64 },
    Burgers { alpha: f64, beta: f64 },
}

impl ModelSpec {
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Constant { alpha, .. } | Self::XFree { alpha, .. } | Self::Gbm { alpha, .. } | Self::Burgers { alpha, .. } => alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Self::Constant { beta, .. } | Self::XFree { beta, .. } | Self::Gbm { beta, .. } | Self::Burgers { beta, .. } => beta,
        }
    }

    pub fn build(&self) -> Result<CoefficientModel> {
        let m = match *self {
            Self::Constant { alpha, beta } => CoefficientModel::constant(alpha, beta),
            Self::XFree { alpha, beta } => CoefficientModel::x_free(alpha, beta),
            Self::Gbm { alpha, beta } => CoefficientModel::gbm(alpha, beta),
            Self::Burgers { alpha, beta } => CoefficientModel::burgers(alpha, beta)?,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Dirac { x0: f64 },
    Gaussian { mean: f64, variance: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl InitialSpec {
    pub fn build(&self) -> Result<InitialLaw> {
        match *self {
            Self::Dirac { x0 } => Ok(InitialLaw::Dirac { x0 }),
            Self::Gaussian { mean, variance } => InitialLaw::gaussian(mean, variance),
            Self::LogNormal { mu, sigma } => InitialLaw::log_normal(mu, sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverToggles {
    pub fp: bool,
    pub particle: bool,
    pub closedform: bool,
    pub volterra: bool,
    pub localtime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// L1 bound between a solver field and the closed-form oracle at T.
    pub l1: f64,
    /// Sup bound, same comparison.
    pub sup: f64,
    /// Bound on |mass - 1| of closed-form slices and on the solver mass drift.
    pub mass: f64,
    /// L1 bound for particle kernel estimates against the oracle.
    pub particle_l1: f64,
    /// Relative gap allowed between the two local-time estimators at T.
    pub local_time_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { l1: 1e-2, sup: 2e-2, mass: 1e-6, particle_l1: 5e-2, local_time_rel: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolterraSpec {
    pub drift_sign: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for VolterraSpec {
    fn default() -> Self {
        Self { drift_sign: 1.0, max_iter: 20, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalTimeSpec {
    /// Level; defaults to the initial mean.
    pub x: Option<f64>,
    /// Band half-width; defaults to max(2√dt, 4 dx).
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub space: SpaceSpec,
    pub time: TimeSpec,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub solvers: SolverToggles,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Standard deviation of the mollifier applied to a point-mass initial law.
    #[serde(default)]
    pub mollifier: Option<f64>,
    /// Kernel bandwidth; `None` applies the Silverman rule.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub volterra: VolterraSpec,
    #[serde(default)]
    pub local_time: LocalTimeSpec,
    /// Keep every `output_stride`-th time slice in field CSV files.
    #[serde(default)]
    pub output_stride: Option<usize>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Also write SVG overlays of compared slices.
    #[serde(default)]
    pub plots: bool,
}

fn default_particles() -> usize {
    10_000
}

fn default_paths() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite, got {v}")))
            }
        };
        finite("model.alpha", self.model.alpha())?;
        finite("model.beta", self.model.beta())?;
        if self.model.beta() < 0.0 {
            return Err(invalid(format!("model.beta must be >= 0, got {}", self.model.beta())));
        }
        if let ModelSpec::Burgers { alpha, beta } = self.model {
            if alpha == 0.0 || beta == 0.0 {
                return Err(invalid("model.alpha and model.beta must be nonzero for the burgers model"));
            }
        }
        if self.space.n_cells == 0 {
            return Err(invalid("space.n_cells must be >= 1"));
        }
        finite("space.x_min", self.space.x_min)?;
        finite("space.x_max", self.space.x_max)?;
        if !(self.space.x_max > self.space.x_min) {
            return Err(invalid("space.x_max must exceed space.x_min"));
        }
        if self.space.n_cells > 1 << 22 {
            return Err(invalid("space.n_cells must be <= 4194304"));
        }
        if self.time.n_steps == 0 {
            return Err(invalid("time.n_steps must be >= 1"));
        }
        if !(self.time.horizon > 0.0 && self.time.horizon.is_finite()) {
            return Err(invalid("time.horizon must be > 0"));
        }
        if self.particles < 2 {
            return Err(invalid("particles must be >= 2"));
        }
        if self.paths == 0 {
            return Err(invalid("paths must be >= 1"));
        }
        let t = &self.tolerances;
        for (name, v) in [("tolerances.l1", t.l1), ("tolerances.sup", t.sup), ("tolerances.mass", t.mass), ("tolerances.particle_l1", t.particle_l1), ("tolerances.local_time_rel", t.local_time_rel)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(e) = self.mollifier {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("mollifier must be > 0, got {e}")));
            }
        }
        if let Some(h) = self.bandwidth {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(invalid(format!("bandwidth must be >= 0, got {h}")));
            }
        }
        let v = &self.volterra;
        if v.drift_sign != 1.0 && v.drift_sign != -1.0 {
            return Err(invalid("volterra.drift_sign must be 1 or -1"));
        }
        if v.max_iter == 0 || !(v.tol > 0.0) {
            return Err(invalid("volterra.max_iter must be >= 1 and volterra.tol > 0"));
        }
        if let Some(e) = self.local_time.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("local_time.epsilon must be > 0, got {e}")));
            }
        }
        if let Some(s) = self.output_stride {
            if s == 0 {
                return Err(invalid("output_stride must be >= 1"));
            }
        }
        if self.solvers.volterra && !matches!(self.model, ModelSpec::Constant { .. } | ModelSpec::XFree { .. }) {
            return Err(invalid("solvers.volterra needs a constant or x_free model"));
        }
        if self.solvers.volterra && self.model.beta() == 0.0 {
            return Err(invalid("solvers.volterra needs model.beta != 0"));
        }
        if matches!(self.model, ModelSpec::Gbm { .. }) && !(self.space.x_min > 0.0) {
            return Err(invalid("space.x_min must be > 0 for the gbm model"));
        }
        if matches!(self.model, ModelSpec::Burgers { .. }) && matches!(self.initial, InitialSpec::Dirac { .. }) && self.mollifier.is_none() {
            return Err(invalid("the burgers model needs a density initial law (set mollifier)"));
        }
        self.initial.build()?;
        self.model.build()?;
        Ok(())
    }

    pub fn space_grid(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.space.x_min, self.space.x_max, self.space.n_cells)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.horizon, self.time.n_steps)
    }

    /// Initial law with the mollifier applied to a point mass.
    pub fn initial_law(&self) -> Result<InitialLaw> {
        let law = self.initial.build()?;
        match (self.mollifier, law.is_dirac()) {
            (Some(eps), true) => law.mollify(eps),
            _ => Ok(law),
        }
    }
}
