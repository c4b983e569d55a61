//! TOML run configuration.

use std::path::{Path, PathBuf};

use cspi::models::{HilbertConfig, ModelSpec};
use cspi::numdiff::FdScheme;
use cspi::semiclassics::{Discretization, DEFAULT_FD};
use cspi::spectral::QuadConfig;
use cspi::validate::Tolerances;
use serde::Deserialize;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CSPI_OUT";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub hilbert: Option<HilbertConfig>,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub quadrature: QuadConfig,
    /// Validation tolerances; `contour_im` also bounds `correction` reports.
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub validate: ValidateConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub beta: f64,
    pub n_t: Vec<usize>,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            n_t: vec![101],
        }
    }
}

/// A list of values or an inclusive `start, stop, step` range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match *self {
            Self::Values(ref v) => Ok(v.clone()),
            Self::Range { start, stop, step } => {
                if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::Config(format!(
                        "{key}: need finite bounds and step > 0"
                    )));
                }
                // tolerate rounding of the last point
                let count = ((stop - start) / step + 1e-9).floor();
                if count < 0.0 {
                    return Ok(Vec::new());
                }
                Ok((0..=count as usize)
                    .map(|i| start + step * i as f64)
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    /// Defaults to `discretization.beta`.
    pub beta: Option<f64>,
    /// Staircase grid in units of `mu/U`; bosonic models only.
    pub staircase: Option<Grid>,
    /// Cutoff for exact diagonalization; defaults to `[hilbert]`, then to a
    /// converged search.
    pub n_max: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub grid: Grid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub fd_step: f64,
    pub fd_levels: usize,
    pub param_step: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            fd_step: DEFAULT_FD.step,
            fd_levels: DEFAULT_FD.levels,
            param_step: 2e-2,
        }
    }
}

impl Numerics {
    pub fn fd(&self) -> FdScheme {
        FdScheme::new(self.fd_step, self.fd_levels)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// `blocks.json` written by `correction`, used by the block-circulant check.
    pub fixture: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Structural checks that need no computation.
    pub fn check(&self) -> Result<(), CliError> {
        let d = &self.discretization;
        if d.n_t.is_empty() {
            return Err(CliError::Config("discretization.n_t: empty list".into()));
        }
        for &n in &d.n_t {
            if n.is_multiple_of(2) {
                return Err(CliError::Config(format!(
                    "discretization.n_t: {n} is even, N_t must be odd"
                )));
            }
        }
        Discretization::new(d.beta, d.n_t[0])
            .map_err(|e| CliError::Config(format!("discretization: {e}")))?;
        if let Some(m) = &self.model {
            m.validate()
                .map_err(|e| CliError::Config(format!("model: {e}")))?;
        }
        if let Some(h) = &self.hilbert {
            h.validate()
                .map_err(|e| CliError::Config(format!("hilbert: {e}")))?;
        }
        self.quadrature
            .validate()
            .map_err(|e| CliError::Config(format!("quadrature: {e}")))?;
        self.numerics
            .fd()
            .validate()
            .map_err(|e| CliError::Config(format!("numerics: {e}")))?;
        if !(self.numerics.param_step > 0.0 && self.numerics.param_step < 0.5) {
            return Err(CliError::Config(
                "numerics.param_step must lie in (0, 0.5)".into(),
            ));
        }
        if let (Some(s), Some(m)) = (&self.sweep, &self.model) {
            if m.param(&s.param).is_none() {
                return Err(CliError::Config(format!(
                    "sweep.param: model {} has no parameter {:?}",
                    m.name(),
                    s.param
                )));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key `model`: add a [model] section".into()))
    }

    pub fn sweep(&self) -> Result<(&SweepConfig, Vec<f64>), CliError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key `sweep`: add a [sweep] section".into()))?;
        let grid = s.grid.values("sweep.grid")?;
        if grid.is_empty() {
            return Err(CliError::Config("sweep.grid: empty".into()));
        }
        Ok((s, grid))
    }

    pub fn discretizations(&self) -> Result<Vec<Discretization>, CliError> {
        self.discretization
            .n_t
            .iter()
            .map(|&n| {
                Discretization::new(self.discretization.beta, n)
                    .map_err(|e| CliError::Config(format!("discretization: {e}")))
            })
            .collect()
    }
}
