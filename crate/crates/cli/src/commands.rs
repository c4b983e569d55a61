//! The four subcommands.

use std::path::Path;

use cspi::correction::{self, CorrectionOptions};
use cspi::models::{HilbertConfig, ModelSpec};
use cspi::oracle::{self, ThermalResult};
use cspi::semiclassics::{BlocksReport, Discretization};
use cspi::validate::{self, ValidateContext};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, Grid, RunConfig};
use crate::output::{write_json, Cell, Table};
use crate::CliError;

/// Relative tolerance used to size the cutoff when `[hilbert]` is absent.
const CUTOFF_TOL: f64 = 1e-12;

/// Run settings resolved from the config and the command line.
pub struct Run {
    pub config: RunConfig,
    pub out: std::path::PathBuf,
    pub format: Format,
    /// Directory relative paths inside the config refer to.
    pub base: std::path::PathBuf,
}

fn options(c: &RunConfig) -> CorrectionOptions {
    CorrectionOptions {
        fd: c.numerics.fd(),
        quad: c.quadrature,
        hilbert: c.hilbert,
        param_step: c.numerics.param_step,
    }
}

#[derive(Serialize)]
struct ExactReport<'a> {
    model: &'a ModelSpec,
    n_max: usize,
    #[serde(flatten)]
    thermal: ThermalResult,
}

pub fn exact(run: &Run) -> Result<(), CliError> {
    let c = &run.config;
    let model = c.model()?;
    let beta = c.exact.beta.unwrap_or(c.discretization.beta);
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(CliError::Config(format!(
            "exact.beta must be finite and > 0, got {beta}"
        )));
    }
    let grid = if model.is_bosonic() {
        let g = c.exact.staircase.clone().unwrap_or(Grid::Range {
            start: 0.1,
            stop: 3.0,
            step: 0.2,
        });
        Some(g.values("exact.staircase")?)
    } else {
        None
    };
    let configured = c.exact.n_max.map(|n| HilbertConfig {
        n_max: n,
        ..c.hilbert.unwrap_or_default()
    });
    let h = match configured.or(c.hilbert) {
        Some(h) => h,
        None if model.is_bosonic() => {
            // size for the largest chemical potential the run touches
            let u = model.param("U").expect("bosonic models carry U");
            let top = grid
                .iter()
                .flatten()
                .fold(f64::NEG_INFINITY, |a, &x| a.max(x * u));
            let mut h = oracle::converge_cutoff(model, beta, CUTOFF_TOL)?;
            if top > model.param("mu").unwrap_or(0.0) {
                let hi = oracle::converge_cutoff(&model.with_param("mu", top)?, beta, CUTOFF_TOL)?;
                h.n_max = h.n_max.max(hi.n_max);
            }
            h
        }
        None => HilbertConfig::default(),
    };
    let thermal = oracle::exact_thermal(model, beta, &h)?;
    println!("model {}  beta {beta}  n_max {}", model.name(), h.n_max);
    println!("F = {:.16e}", thermal.f);
    println!("ln Z = {:.16e}", thermal.ln_z);
    for (k, v) in &thermal.observables {
        println!("<{k}> = {v:.16e}");
    }
    let path = write_json(
        &run.out,
        "thermal.json",
        &ExactReport {
            model,
            n_max: h.n_max,
            thermal,
        },
    )?;
    println!("wrote {}", path.display());

    if let Some(grid) = grid {
        let u = model.param("U").expect("bosonic models carry U");
        let mus: Vec<f64> = grid.iter().map(|x| x * u).collect();
        let stairs = oracle::staircase(model, &mus, beta, &h)?;
        for w in &stairs.warnings {
            eprintln!("warning: {w}");
        }
        let mut table = Table::new(&["mu", "n_exact", "n_round_half", "n_round"]);
        for r in &stairs.rows {
            table.push(vec![
                Cell::Real(r.mu),
                Cell::Real(r.n_exact),
                Cell::Real(r.n_round_half),
                Cell::Real(r.n_round),
            ]);
        }
        let path = table.write(&run.out, "staircase", run.format)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn check_bounds(model: &ModelSpec, ds: &[Discretization]) -> Result<(), CliError> {
    for d in ds {
        d.check_model(model)
            .map_err(|e| CliError::Constraint(format!("N_t = {}: {e}", d.n_t())))?;
    }
    Ok(())
}

pub fn correction(run: &Run) -> Result<(), CliError> {
    let c = &run.config;
    let model = c.model()?;
    let ds = c.discretizations()?;
    check_bounds(model, &ds)?;
    let opts = options(c);

    let expansion = correction::expand_model(model, ds[0].dt(), &opts)?;
    let uniform = expansion
        .modes
        .iter()
        .find(|m| m.k.as_ref().is_none_or(|k| k.iter().all(|&x| x == 0.0)))
        .expect("every expansion has a uniform mode");
    let path = write_json(
        &run.out,
        "blocks.json",
        &BlocksReport::new(model, &uniform.blocks),
    )?;
    println!("wrote {}", path.display());

    let reports: Vec<_> = ds
        .par_iter()
        .map(|d| correction::correction_report(model, d, &opts))
        .collect::<Result<_, _>>()?;
    println!(
        "{:>7} {:>24} {:>24} {:>10} {:>8}",
        "N_t", "delta_f_sum", "delta_f_contour", "im", "nodes"
    );
    let mut bad = Vec::new();
    for r in &reports {
        let name = format!("correction_{}_nt{}.json", model.name(), r.d.n_t());
        let path = write_json(&run.out, &name, r)?;
        println!(
            "{:>7} {:>24.16e} {:>24.16e} {:>10.2e} {:>8}   {}",
            r.d.n_t(),
            r.delta_f_sum,
            r.delta_f_contour.re,
            r.im_residual,
            r.quad_points,
            path.display()
        );
        let limit = c.tolerances.contour_im * r.delta_f_contour.re.abs().max(1.0);
        if r.im_residual > limit {
            bad.push(format!(
                "N_t = {}: im_residual {:.2e} > {limit:.2e}",
                r.d.n_t(),
                r.im_residual
            ));
        }
    }
    if c.sweep.is_some() {
        sweep(run)?;
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(bad.join("; ")))
    }
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let c = &run.config;
    let model = c.model()?;
    let (s, grid) = c.sweep()?;
    let ds = c.discretizations()?;
    let models: Vec<ModelSpec> = grid
        .iter()
        .map(|&v| {
            model
                .with_param(&s.param, v)
                .map_err(|e| CliError::Config(format!("sweep.grid: {e}")))
        })
        .collect::<Result<_, _>>()?;
    for m in &models {
        check_bounds(m, &ds)?;
    }
    let opts = options(c);
    let beta = c.discretization.beta;
    let n_ts: Vec<usize> = ds.iter().map(|d| d.n_t()).collect();

    // Each point is independent; collecting keeps grid order.
    let points: Vec<_> = models
        .par_iter()
        .map(|m| -> cspi::Result<_> {
            let study = correction::slope_study(m, &s.param, beta, &n_ts, &opts)?;
            let delta_f = ds
                .iter()
                .map(|d| correction::delta_f(m, d, &opts))
                .collect::<cspi::Result<Vec<f64>>>()?;
            Ok((study, delta_f))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(&[
        "param",
        "value",
        "n_t",
        "dt",
        "delta_f",
        "derivative",
        "derivative_per_site",
    ]);
    let mut extrapolated = Table::new(&["param", "value", "derivative", "derivative_per_site"]);
    for ((m, value), (study, delta_f)) in models.iter().zip(&grid).zip(&points) {
        let ns = m.n_sites() as f64;
        for (&(n_t, dt, slope), &f) in study.samples.iter().zip(delta_f) {
            table.push(vec![
                Cell::Text(s.param.clone()),
                Cell::Real(*value),
                Cell::Int(n_t as u64),
                Cell::Real(dt),
                Cell::Real(f),
                Cell::Real(slope),
                Cell::Real(slope / ns),
            ]);
        }
        extrapolated.push(vec![
            Cell::Text(s.param.clone()),
            Cell::Real(*value),
            Cell::Real(study.extrapolated),
            Cell::Real(study.extrapolated / ns),
        ]);
        println!(
            "{} = {value}: d(F - F_cpi)/d{} -> {:.10} ({:.10} per site)",
            s.param,
            s.param,
            study.extrapolated,
            study.extrapolated / ns
        );
    }
    let p1 = table.write(&run.out, "sweep", run.format)?;
    let p2 = extrapolated.write(&run.out, "sweep_extrapolated", run.format)?;
    println!("wrote {}", p1.display());
    println!("wrote {}", p2.display());
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> std::path::PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn validate(run: &Run) -> Result<(), CliError> {
    let c = &run.config;
    let model = c.model.clone().unwrap_or_else(|| ModelSpec::site(1.0, 0.5));
    let d = c.discretizations()?[0];
    let fixture = match &c.validate.fixture {
        Some(p) => {
            let path = resolve(&run.base, p);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("validate.fixture {}: {e}", path.display()))
            })?;
            let report: BlocksReport = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("validate.fixture {}: {e}", path.display()))
            })?;
            Some(report)
        }
        None => None,
    };
    let ctx = ValidateContext {
        model,
        d,
        fd: c.numerics.fd(),
        quad: c.quadrature,
        tolerances: c.tolerances,
        fixture,
    };
    let outcomes = validate::run_checks(&ctx);
    println!(
        "model {}  beta {}  N_t {}",
        ctx.model.name(),
        d.beta(),
        d.n_t()
    );
    for o in &outcomes {
        println!(
            "{:<4} {:<22} {:>10.3e} <= {:<8.1e} {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.value,
            o.tolerance,
            o.detail
        );
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name.as_str())
        .collect();
    if failed.is_empty() {
        println!("{} checks passed", outcomes.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}
