use rayon::prelude::*;

use super::saddle::saddle_residual;
use super::HessianBlocks;
use crate::error::{Error, Result};
use crate::models::{self, CoherentPoint, HilbertConfig, ModelSpec};
use crate::numdiff::{self, FdScheme};
use crate::{CMatrix, C64};

/// Step `5e-2` in scaled coordinates with two Richardson levels.
pub const DEFAULT_FD: FdScheme = FdScheme {
    step: 5e-2,
    levels: 2,
};

/// Largest accepted ratio of estimated roundoff to Hessian scale.
pub const MAX_FD_CONDITION: f64 = 1e-6;

/// Largest accepted projected energy gradient at the expansion point.
const SADDLE_CHECK: f64 = 1e-6;

/// Fluctuation coordinates about a saddle.
///
/// Bosons use `(dn, phi)`, spin `(sqrt(S) dtheta, sqrt(S) sin(theta) dphi)`,
/// lattice modes the amplitudes of the plane-wave pattern `cos(k.r_i)`
/// applied to `(dn_i, phi_i)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    Boson {
        n_bar: f64,
        phi_bar: f64,
    },
    Spin {
        theta_bar: f64,
        phi_bar: f64,
        s: f64,
    },
    Mode {
        n_bar: f64,
        phi_bar: f64,
        weights: Vec<f64>,
    },
}

impl Chart {
    /// Chart of the uniform mode (`k = 0` for the lattice).
    pub fn for_saddle(model: &ModelSpec, saddle: &CoherentPoint) -> Result<Self> {
        match *model {
            ModelSpec::BoseHubbardSite { .. } => {
                let (n_bar, phi_bar) = (saddle.params[0], saddle.params[1]);
                check_occupation(n_bar)?;
                Ok(Self::Boson { n_bar, phi_bar })
            }
            ModelSpec::UniaxialSpin { s } => {
                let (theta_bar, phi_bar) = (saddle.params[0], saddle.params[1]);
                if !(theta_bar.sin() > 1e-8) {
                    return Err(Error::Domain(format!(
                        "spin chart is singular at the pole theta = {theta_bar}"
                    )));
                }
                Ok(Self::Spin {
                    theta_bar,
                    phi_bar,
                    s,
                })
            }
            ModelSpec::BoseHubbardLattice { d, .. } => Self::for_mode(model, saddle, &vec![0.0; d]),
        }
    }

    pub fn for_mode(model: &ModelSpec, saddle: &CoherentPoint, k: &[f64]) -> Result<Self> {
        let geometry = model.geometry()?;
        let m = geometry.grid_index(k)?;
        let n_bar = saddle.params[0];
        let phi_bar = saddle.params[1];
        let uniform = saddle.params.chunks(2).all(|c| {
            (c[0] - n_bar).abs() <= 1e-12 * n_bar.max(1.0) && (c[1] - phi_bar).abs() <= 1e-12
        });
        if !uniform {
            return Err(Error::Domain(
                "lattice expansion needs a uniform saddle".into(),
            ));
        }
        check_occupation(n_bar)?;
        let step = 2.0 * std::f64::consts::PI / geometry.side as f64;
        let weights = (0..geometry.n_sites())
            .map(|i| {
                let phase: f64 = geometry
                    .coords(i)
                    .iter()
                    .zip(&m)
                    .map(|(&c, &mj)| (c * mj) as f64 * step)
                    .sum();
                phase.cos()
            })
            .collect();
        Ok(Self::Mode {
            n_bar,
            phi_bar,
            weights,
        })
    }

    /// Finite-difference step multipliers per fluctuation coordinate.
    ///
    /// The boson `dn` step is `min(2 n_bar, 1)`; below that the overlap
    /// varies on the scale of `n_bar`.
    pub fn scales(&self) -> [f64; 2] {
        match *self {
            Self::Boson { n_bar, .. } | Self::Mode { n_bar, .. } => [dn_step(n_bar), 1.0],
            Self::Spin { theta_bar, s, .. } => [s.sqrt(), s.sqrt() * theta_bar.sin()],
        }
    }

    pub fn point(&self, psi: &[f64]) -> CoherentPoint {
        match self {
            Self::Boson { n_bar, phi_bar } => {
                CoherentPoint::boson(n_bar + dn_step(*n_bar) * psi[0], phi_bar + psi[1])
            }
            Self::Spin {
                theta_bar,
                phi_bar,
                s,
            } => CoherentPoint::spin(
                theta_bar + psi[0] / s.sqrt(),
                phi_bar + psi[1] / (s.sqrt() * theta_bar.sin()),
            ),
            Self::Mode {
                n_bar,
                phi_bar,
                weights,
            } => CoherentPoint::new(
                weights
                    .iter()
                    .flat_map(|w| [n_bar + dn_step(*n_bar) * psi[0] * w, phi_bar + psi[1] * w])
                    .collect(),
            ),
        }
    }

    /// `sum_i w_i^2`, the normalization of a plane-wave pattern.
    pub fn weight(&self) -> f64 {
        match self {
            Self::Mode { weights, .. } => weights.iter().map(|w| w * w).sum(),
            _ => 1.0,
        }
    }
}

fn dn_step(n_bar: f64) -> f64 {
    (2.0 * n_bar).min(1.0)
}

fn check_occupation(n_bar: f64) -> Result<()> {
    if !(n_bar > 0.0) {
        return Err(Error::Domain(format!(
            "fluctuation chart (dn, phi) is singular at n = {n_bar}; needs mu > 0"
        )));
    }
    Ok(())
}

fn check_saddle(model: &ModelSpec, saddle: &CoherentPoint, h: &HilbertConfig) -> Result<()> {
    let residual = saddle_residual(model, saddle, h)?;
    if residual > SADDLE_CHECK {
        return Err(Error::Domain(format!(
            "expansion point is not stationary: projected gradient {residual:.3e}"
        )));
    }
    Ok(())
}

fn expand(
    model: &ModelSpec,
    chart: &Chart,
    saddle: &CoherentPoint,
    dt: f64,
    h: &HilbertConfig,
    scheme: FdScheme,
) -> Result<HessianBlocks> {
    let [s0, s1] = chart.scales();
    let f = |x: &[f64]| -> Result<[C64; 2]> {
        let p = chart.point(&x[..2]);
        let q = chart.point(&x[2..]);
        let (b, e) = models::lagrangian_parts(model, &p, &q, h)?;
        Ok([b, e])
    };
    let ([hb, he], diagnostics) = numdiff::hessian(f, &[s0, s1, s0, s1], scheme)?;
    if diagnostics.condition() > MAX_FD_CONDITION {
        return Err(Error::NumericalDerivative(format!(
            "roundoff estimate {:.2e} relative to Hessian scale {:.2e} exceeds {MAX_FD_CONDITION:.0e}; increase fd step",
            diagnostics.roundoff, diagnostics.scale
        )));
    }
    let w = C64::new(chart.weight(), 0.0);
    let block = |m: &CMatrix, r: usize, c: usize| m.view((r, c), (2, 2)).into_owned() / w;
    let (ab, bb, cb) = (block(&hb, 0, 0), block(&hb, 0, 2), block(&hb, 2, 2));
    let (ae, be, ce) = (block(&he, 0, 0), block(&he, 0, 2), block(&he, 2, 2));
    let dtc = C64::new(dt, 0.0);
    let (berry0, energy0) = models::lagrangian_parts(model, saddle, saddle, h)?;
    Ok(HessianBlocks {
        l0: (berry0 + energy0 * dt).re,
        dt,
        l2: ((&ab + &cb) + (&ae + &ce) * dtc) * C64::new(0.5, 0.0),
        l2d: &bb + &be * dtc,
        stiffness: &ae + &ce + &be + be.transpose(),
        berry: &bb - bb.transpose(),
    })
}

/// Quadratic expansion about `saddle`; lattice models give the `k = 0` mode.
///
/// `L2` is the time-local part `(d2L/dpsi_t^2 + d2L/dpsi_{t+1}^2)/2` and
/// `L2d` the mixed block `d2L/dpsi_t dpsi_{t+1}`.
pub fn hessian_blocks(
    model: &ModelSpec,
    saddle: &CoherentPoint,
    dt: f64,
    h: &HilbertConfig,
    scheme: FdScheme,
) -> Result<HessianBlocks> {
    model.validate()?;
    check_saddle(model, saddle, h)?;
    let chart = Chart::for_saddle(model, saddle)?;
    expand(model, &chart, saddle, dt, h, scheme)
}

/// Blocks of the lattice fluctuation mode with wave vector `k`.
pub fn bloch_blocks(
    model: &ModelSpec,
    saddle: &CoherentPoint,
    k: &[f64],
    dt: f64,
    h: &HilbertConfig,
    scheme: FdScheme,
) -> Result<HessianBlocks> {
    model.validate()?;
    check_saddle(model, saddle, h)?;
    let chart = Chart::for_mode(model, saddle, k)?;
    expand(model, &chart, saddle, dt, h, scheme)
}

/// Blocks for every wave vector of the reciprocal grid, in grid order.
pub fn mode_blocks(
    model: &ModelSpec,
    saddle: &CoherentPoint,
    dt: f64,
    h: &HilbertConfig,
    scheme: FdScheme,
) -> Result<Vec<(Vec<f64>, HessianBlocks)>> {
    model.validate()?;
    check_saddle(model, saddle, h)?;
    let grid = model.geometry()?.reciprocal_grid();
    grid.into_par_iter()
        .map(|k| {
            let chart = Chart::for_mode(model, saddle, &k)?;
            let b = expand(model, &chart, saddle, dt, h, scheme)?;
            Ok((k, b))
        })
        .collect()
}

/// Hessian of the periodic action `sum_t L(psi_t, psi_{t+1})` over all
/// `2 N_t` fluctuation coordinates, by direct finite differences.
pub fn full_action_form(
    model: &ModelSpec,
    saddle: &CoherentPoint,
    dt: f64,
    n_t: usize,
    h: &HilbertConfig,
    scheme: FdScheme,
) -> Result<CMatrix> {
    model.validate()?;
    if n_t == 0 {
        return Err(Error::Domain("N_t must be positive".into()));
    }
    let chart = Chart::for_saddle(model, saddle)?;
    let [s0, s1] = chart.scales();
    let scales: Vec<f64> = (0..n_t).flat_map(|_| [s0, s1]).collect();
    let f = |x: &[f64]| -> Result<[C64; 1]> {
        let points: Vec<CoherentPoint> = x.chunks(2).map(|c| chart.point(c)).collect();
        let mut total = C64::new(0.0, 0.0);
        for t in 0..n_t {
            let (b, e) = models::lagrangian_parts(model, &points[t], &points[(t + 1) % n_t], h)?;
            total += b + e * dt;
        }
        Ok([total])
    };
    let ([form], _) = numdiff::hessian(f, &scales, scheme)?;
    Ok(form / C64::new(chart.weight(), 0.0))
}

/// The `m N_t` quadratic form rebuilt from blocks: `L2 + L2^T` on the
/// diagonal, `L2d` coupling `t` to `t+1` and `L2d^T` back, periodic in `t`.
pub fn block_circulant_form(b: &HessianBlocks, n_t: usize) -> CMatrix {
    let m = b.m();
    let diag = &b.l2 + b.l2.transpose();
    let l2dt = b.l2d.transpose();
    let mut out = CMatrix::zeros(m * n_t, m * n_t);
    for t in 0..n_t {
        let next = (t + 1) % n_t;
        let mut add = |r: usize, c: usize, blk: &CMatrix| {
            let mut v = out.view_mut((r * m, c * m), (m, m));
            v += blk;
        };
        add(t, t, &diag);
        add(t, next, &b.l2d);
        add(next, t, &l2dt);
    }
    out
}
