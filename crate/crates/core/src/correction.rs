//! Model-level finite-step corrections `F - F_cpi` and their parameter slopes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{CoherentPoint, HilbertConfig, ModelSpec};
use crate::numdiff::{self, FdScheme};
use crate::semiclassics::{self, det_ratio, Discretization, HessianBlocks, DEFAULT_FD};
use crate::spectral::{self, CorrectionReport, QuadConfig};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionOptions {
    pub fd: FdScheme,
    pub quad: QuadConfig,
    /// Fixed cutoff; `None` sizes it from the saddle occupation.
    pub hilbert: Option<HilbertConfig>,
    /// Relative step for continuous parameter derivatives.
    pub param_step: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            fd: DEFAULT_FD,
            quad: QuadConfig::default(),
            hilbert: None,
            param_step: 2e-2,
        }
    }
}

/// One fluctuation mode: `k = None` for single-mode models.
#[derive(Clone, Debug)]
pub struct Mode {
    pub k: Option<Vec<f64>>,
    pub blocks: HessianBlocks,
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub saddle: CoherentPoint,
    pub hilbert: HilbertConfig,
    pub modes: Vec<Mode>,
}

/// Saddle and fluctuation blocks of `model` at step `dt`.
pub fn expand_model(model: &ModelSpec, dt: f64, opts: &CorrectionOptions) -> Result<Expansion> {
    model.validate()?;
    let search_h = opts.hilbert.unwrap_or_else(|| match *model {
        ModelSpec::BoseHubbardSite { u, mu } | ModelSpec::BoseHubbardLattice { u, mu, .. } => {
            HilbertConfig::for_occupation(2.0 * (mu / u).max(0.0) + 2.0)
        }
        ModelSpec::UniaxialSpin { .. } => HilbertConfig::default(),
    });
    let saddle = semiclassics::find_saddle(model, &search_h)?;
    let hilbert = opts.hilbert.unwrap_or_else(|| {
        if model.is_bosonic() {
            HilbertConfig::for_occupation(saddle.max_occupation() * (1.0 + 2.0 * opts.fd.step))
        } else {
            search_h
        }
    });
    let modes = match model {
        ModelSpec::BoseHubbardLattice { .. } => {
            semiclassics::mode_blocks(model, &saddle, dt, &hilbert, opts.fd)?
                .into_iter()
                .map(|(k, blocks)| Mode { k: Some(k), blocks })
                .collect()
        }
        _ => vec![Mode {
            k: None,
            blocks: semiclassics::hessian_blocks(model, &saddle, dt, &hilbert, opts.fd)?,
        }],
    };
    Ok(Expansion {
        saddle,
        hilbert,
        modes,
    })
}

/// `F - F_cpi` from the Matsubara sum, summed over modes.
pub fn delta_f(model: &ModelSpec, d: &Discretization, opts: &CorrectionOptions) -> Result<f64> {
    d.check_model(model)?;
    let e = expand_model(model, d.dt(), opts)?;
    e.modes
        .iter()
        .map(|m| spectral::delta_f_sum(|w| det_ratio(&m.blocks, C64::new(w, 0.0), d), d))
        .sum()
}

/// Per-mode reports (sum and contour) in mode order.
pub fn mode_reports(
    model: &ModelSpec,
    d: &Discretization,
    opts: &CorrectionOptions,
) -> Result<Vec<(Option<Vec<f64>>, CorrectionReport)>> {
    d.check_model(model)?;
    let e = expand_model(model, d.dt(), opts)?;
    e.modes
        .par_iter()
        .map(|m| {
            let r = spectral::delta_f_contour(|w| det_ratio(&m.blocks, w, d), d, &opts.quad)?;
            Ok((m.k.clone(), r))
        })
        .collect()
}

/// Combined report over all modes of the model.
pub fn correction_report(
    model: &ModelSpec,
    d: &Discretization,
    opts: &CorrectionOptions,
) -> Result<CorrectionReport> {
    let reports: Vec<CorrectionReport> = mode_reports(model, d, opts)?
        .into_iter()
        .map(|r| r.1)
        .collect();
    CorrectionReport::combine(&reports).ok_or_else(|| Error::Domain("model has no modes".into()))
}

/// `d(F - F_cpi)/d param` at fixed discretization.
///
/// Continuous parameters use Richardson-extrapolated central differences
/// with step `param_step * max(|x|, 0.1)`; the spin length uses the central
/// difference over `S +- 1/2`, or the forward one at `S = 1/2`.
pub fn parameter_derivative(
    model: &ModelSpec,
    param: &str,
    d: &Discretization,
    opts: &CorrectionOptions,
) -> Result<f64> {
    let x = model.param(param).ok_or_else(|| {
        Error::Domain(format!("model {} has no parameter {param:?}", model.name()))
    })?;
    let at = |v: f64| delta_f(&model.with_param(param, v)?, d, opts);
    if param == "S" {
        return if x >= 1.0 {
            Ok(at(x + 0.5)? - at(x - 0.5)?)
        } else {
            Ok((at(x + 0.5)? - at(x)?) / 0.5)
        };
    }
    let step = opts.param_step * x.abs().max(0.1);
    let lower_bound = match param {
        "J" => Some(0.0),
        "U" | "a0" => Some(0.0),
        _ => None,
    };
    if let Some(lb) = lower_bound {
        if x - step <= lb {
            return Err(Error::Domain(format!(
                "{param} = {x} too close to its bound for a central difference with step {step}"
            )));
        }
    }
    numdiff::derivative(at, x, FdScheme::new(step, 2))
}

/// Polynomial (Neville) extrapolation of `(x, y)` samples to `x = 0`.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut p: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    Some(p[0])
}

/// Derivative at each `N_t` and its extrapolation to `dt -> 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeStudy {
    pub param: String,
    pub beta: f64,
    /// `(N_t, dt, slope)`
    pub samples: Vec<(usize, f64, f64)>,
    pub extrapolated: f64,
}

pub fn slope_study(
    model: &ModelSpec,
    param: &str,
    beta: f64,
    n_ts: &[usize],
    opts: &CorrectionOptions,
) -> Result<SlopeStudy> {
    let samples = n_ts
        .iter()
        .map(|&n_t| {
            let d = Discretization::new(beta, n_t)?;
            Ok((n_t, d.dt(), parameter_derivative(model, param, &d, opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.1, s.2)).collect();
    let extrapolated =
        extrapolate_to_zero(&pts).ok_or_else(|| Error::Domain("no N_t values given".into()))?;
    Ok(SlopeStudy {
        param: param.to_string(),
        beta,
        samples,
        extrapolated,
    })
}
