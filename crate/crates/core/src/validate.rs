//! Invariant checks run by the command-line `validate` command.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::correction::{self, CorrectionOptions};
use crate::error::Result;
use crate::models::{self, HilbertConfig, ModelSpec};
use crate::numdiff::FdScheme;
use crate::oracle;
use crate::semiclassics::{
    self, assemble_kernel, det_ratio, BlocksReport, Discretization, HessianBlocks,
};
use crate::spectral::{self, QuadConfig};
use crate::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub analytic_det: f64,
    pub block_circulant: f64,
    pub gauge: f64,
    pub sum_rule: f64,
    pub sum_rule_log: f64,
    pub contour_vs_sum: f64,
    pub contour_im: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            analytic_det: 1e-6,
            block_circulant: 1e-10,
            gauge: 1e-10,
            sum_rule: 1e-6,
            sum_rule_log: 1e-4,
            contour_vs_sum: 1e-2,
            contour_im: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidateContext {
    pub model: ModelSpec,
    pub d: Discretization,
    pub fd: FdScheme,
    pub quad: QuadConfig,
    pub tolerances: Tolerances,
    /// Blocks used instead of recomputed ones in the block-circulant check.
    pub fixture: Option<BlocksReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail,
        }
    }

    fn error(name: &str, tolerance: f64, e: crate::Error) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            value: f64::NAN,
            tolerance,
            detail: e.to_string(),
        }
    }
}

type Check = fn(&ValidateContext) -> Result<CheckOutcome>;

/// Names and tolerances of the registered checks, in run order.
pub fn registry() -> Vec<(&'static str, Check)> {
    vec![
        ("analytic_determinant", analytic_determinant),
        ("gauge_zero_mode", gauge_zero_mode),
        ("kernel_periodicity", kernel_periodicity),
        ("block_circulant", block_circulant),
        ("sum_rule_constant", sum_rule_constant),
        ("sum_rule_exponential", sum_rule_exponential),
        ("sum_rule_log_ratio", sum_rule_log_ratio),
        ("contour_vs_sum", contour_vs_sum),
        ("staircase", staircase),
    ]
}

pub fn run_checks(ctx: &ValidateContext) -> Vec<CheckOutcome> {
    registry()
        .into_iter()
        .map(|(name, check)| check(ctx).unwrap_or_else(|e| CheckOutcome::error(name, f64::NAN, e)))
        .collect()
}

fn options(ctx: &ValidateContext) -> CorrectionOptions {
    CorrectionOptions {
        fd: ctx.fd,
        quad: ctx.quad,
        ..Default::default()
    }
}

/// Blocks of the context model (the `k = 0` mode for lattices).
fn model_blocks(
    ctx: &ValidateContext,
    model: &ModelSpec,
    dt: f64,
) -> Result<(HessianBlocks, HilbertConfig)> {
    let e = correction::expand_model(model, dt, &options(ctx))?;
    let zero = e
        .modes
        .iter()
        .find(|m| m.k.as_ref().is_none_or(|k| k.iter().all(|&x| x == 0.0)))
        .expect("every expansion has a uniform mode");
    Ok((zero.blocks.clone(), e.hilbert))
}

fn analytic_determinant(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let d = &ctx.d;
    d.check_model(&ctx.model)?;
    let e = correction::expand_model(&ctx.model, d.dt(), &options(ctx))?;
    let freqs = [
        2.0 * PI / d.beta(),
        6.0 * PI / d.beta(),
        0.5 * PI / d.dt(),
        0.99 * PI / d.dt(),
    ];
    let mut worst: f64 = 0.0;
    for mode in &e.modes {
        for &w in &freqs {
            let omega = C64::new(w, 0.0);
            let want = match &mode.k {
                Some(k) => models::lattice_mode_ratio(&ctx.model, omega, d, k)?,
                None => models::reference_det_ratio(&ctx.model, omega, d, None),
            };
            let got = det_ratio(&mode.blocks, omega, d);
            worst = worst.max(((got - want) / want).norm());
        }
    }
    Ok(CheckOutcome::new(
        "analytic_determinant",
        worst,
        ctx.tolerances.analytic_det,
        format!(
            "{} modes x {} frequencies vs closed form",
            e.modes.len(),
            freqs.len()
        ),
    ))
}

fn gauge_zero_mode(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let (b, _) = model_blocks(ctx, &ctx.model, ctx.d.dt())?;
    let det = assemble_kernel(&b, C64::new(0.0, 0.0)).determinant().norm();
    let (value, detail) = if ctx.model.is_bosonic() {
        (det, "|det G(0)| for the global phase".to_string())
    } else {
        (
            0.0,
            format!("spin model, |det G(0)| = {det:.3e} not constrained"),
        )
    };
    Ok(CheckOutcome::new(
        "gauge_zero_mode",
        value,
        ctx.tolerances.gauge,
        detail,
    ))
}

fn kernel_periodicity(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let (b, _) = model_blocks(ctx, &ctx.model, ctx.d.dt())?;
    let shift = 2.0 * PI / ctx.d.dt();
    let mut worst: f64 = 0.0;
    for w in [0.3, 1.7, 11.0] {
        let a = assemble_kernel(&b, C64::new(w, 0.0));
        let c = assemble_kernel(&b, C64::new(w + shift, 0.0));
        worst = worst.max((a - c).camax());
    }
    Ok(CheckOutcome::new(
        "kernel_periodicity",
        worst,
        1e-12,
        "G(omega + 2 pi/dt) - G(omega)".into(),
    ))
}

/// `det(A + eps I)` and `prod_n det(G(omega_n) + eps I)`; `eps = 1` lifts the
/// zero modes so both sides are O(1).
fn circulant_dets(full: &CMatrix, b: &HessianBlocks, n_t: usize, beta: f64) -> Result<(C64, C64)> {
    let eps = C64::new(1.0, 0.0);
    let lhs = (full + CMatrix::identity(full.nrows(), full.ncols()) * eps).determinant();
    let d = Discretization::new(beta, n_t)?;
    let m = b.m();
    let rhs = spectral::matsubara_grid(&d)
        .iter()
        .map(|&w| {
            (assemble_kernel(b, C64::new(w, 0.0)) + CMatrix::identity(m, m) * eps).determinant()
        })
        .product();
    Ok((lhs, rhs))
}

fn block_circulant(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let (model, b) = match &ctx.fixture {
        Some(f) => (f.model.clone(), f.blocks()?),
        None => (
            ctx.model.clone(),
            model_blocks(ctx, &ctx.model, ctx.d.dt())?.0,
        ),
    };
    let opts = options(ctx);
    let e = correction::expand_model(&model, b.dt, &opts)?;
    let mut worst: f64 = 0.0;
    for n_t in [3, 5, 7] {
        let full =
            semiclassics::full_action_form(&model, &e.saddle, b.dt, n_t, &e.hilbert, ctx.fd)?;
        let (lhs, rhs) = circulant_dets(&full, &b, n_t, b.dt * n_t as f64)?;
        worst = worst.max(((lhs - rhs) / lhs).norm());
    }
    let source = if ctx.fixture.is_some() {
        "fixture"
    } else {
        "computed"
    };
    Ok(CheckOutcome::new(
        "block_circulant",
        worst,
        ctx.tolerances.block_circulant,
        format!("{source} blocks vs direct action Hessian, N_t in 3,5,7"),
    ))
}

fn sum_rule_constant(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let r = spectral::sum_rule_residual(|_| C64::new(1.0, 0.0), &ctx.d, &ctx.quad, &[])?;
    Ok(CheckOutcome::new(
        "sum_rule_constant",
        r.residual,
        ctx.tolerances.sum_rule,
        format!("f = 1, grid sum {:.6}", r.grid_sum.re),
    ))
}

fn sum_rule_exponential(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let dt = ctx.d.dt();
    let r = spectral::sum_rule_residual(|w| (C64::i() * w * dt).exp(), &ctx.d, &ctx.quad, &[])?;
    Ok(CheckOutcome::new(
        "sum_rule_exponential",
        r.residual,
        ctx.tolerances.sum_rule,
        "f = exp(i omega dt)".into(),
    ))
}

fn site_model(ctx: &ValidateContext) -> ModelSpec {
    match ctx.model {
        ModelSpec::BoseHubbardSite { .. } => ctx.model.clone(),
        _ => ModelSpec::site(1.0, 0.5),
    }
}

fn sum_rule_log_ratio(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let model = site_model(ctx);
    ctx.d.check_model(&model)?;
    let (b, _) = model_blocks(ctx, &model, ctx.d.dt())?;
    let d = ctx.d;
    let r = spectral::sum_rule_residual_log(|w| det_ratio(&b, w, &d), &d, &ctx.quad)?;
    Ok(CheckOutcome::new(
        "sum_rule_log_ratio",
        r.residual,
        ctx.tolerances.sum_rule_log,
        format!(
            "site U = {}, mu = {}",
            model.param("U").unwrap_or_default(),
            model.param("mu").unwrap_or_default()
        ),
    ))
}

fn contour_vs_sum(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let r = correction::correction_report(&ctx.model, &ctx.d, &options(ctx))?;
    let gap = (r.delta_f_contour.re - r.delta_f_sum).abs() / r.delta_f_sum.abs().max(1.0);
    let im = r.im_residual / r.delta_f_contour.re.abs().max(1.0);
    let mut out = CheckOutcome::new(
        "contour_vs_sum",
        gap,
        ctx.tolerances.contour_vs_sum,
        format!(
            "sum {:.8}, contour {:.8}, im {:.2e}",
            r.delta_f_sum, r.delta_f_contour.re, r.im_residual
        ),
    );
    out.passed &= im <= ctx.tolerances.contour_im;
    Ok(out)
}

fn staircase(ctx: &ValidateContext) -> Result<CheckOutcome> {
    let u = ctx.model.param("U").unwrap_or(1.0);
    let model = ModelSpec::site(u, 0.0);
    let grid: Vec<f64> = (0..15).map(|i| (0.1 + 0.2 * i as f64) * u).collect();
    let table = oracle::staircase(&model, &grid, 50.0 / u, &HilbertConfig::new(16))?;
    let mismatches = table
        .rows
        .iter()
        .filter(|r| r.n_exact.round() != r.n_round_half)
        .count();
    Ok(CheckOutcome::new(
        "staircase",
        mismatches as f64,
        0.0,
        format!(
            "{} rows at beta U = 50, exact vs round(mu/U + 1/2)",
            table.rows.len()
        ),
    ))
}
