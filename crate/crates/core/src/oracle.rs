//! Exact-diagonalization reference thermodynamics.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{self, HilbertConfig, ModelSpec};
use crate::CMatrix;

/// Largest single-mode cutoff tried by [`converge_cutoff`].
pub const MAX_CUTOFF: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermalResult {
    pub beta: f64,
    /// `Tr e^{-beta H}`; may overflow to infinity, `ln_z` stays finite.
    pub z: f64,
    pub ln_z: f64,
    /// `-ln_z / beta`
    pub f: f64,
    /// `energy`, plus `n` and `n_per_site` for bosons or `sz2` for spin.
    pub observables: BTreeMap<String, f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "beta must be finite and > 0, got {beta}"
        )))
    }
}

/// Diagonal of the number operator in the product occupation basis.
fn number_diagonal(model: &ModelSpec, h: &HilbertConfig, dim: usize) -> Vec<f64> {
    let base = h.n_max + 1;
    let sites = model.n_sites();
    (0..dim)
        .map(|mut state| {
            let mut n = 0;
            for _ in 0..sites {
                n += state % base;
                state /= base;
            }
            n as f64
        })
        .collect()
}

pub fn exact_thermal(model: &ModelSpec, beta: f64, h: &HilbertConfig) -> Result<ThermalResult> {
    check_beta(beta)?;
    let ham: CMatrix = models::hamiltonian_matrix(model, h)?;
    let dim = ham.nrows();
    let eig = SymmetricEigen::new(ham);
    let e_min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| (-beta * (e - e_min)).exp())
        .collect();
    let z_shifted: f64 = weights.iter().sum();
    let ln_z = z_shifted.ln() - beta * e_min;
    let average = |values: &dyn Fn(usize) -> f64| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * values(i))
            .sum::<f64>()
            / z_shifted
    };
    let mut observables = BTreeMap::new();
    observables.insert("energy".to_string(), average(&|i| eig.eigenvalues[i]));
    if model.is_bosonic() {
        let number = number_diagonal(model, h, dim);
        let n = average(&|i| {
            let v = eig.eigenvectors.column(i);
            v.iter().zip(&number).map(|(c, n)| c.norm_sqr() * n).sum()
        });
        observables.insert("n".to_string(), n);
        observables.insert("n_per_site".to_string(), n / model.n_sites() as f64);
    } else {
        observables.insert("sz2".to_string(), average(&|i| eig.eigenvalues[i]));
    }
    Ok(ThermalResult {
        beta,
        z: ln_z.exp(),
        ln_z,
        f: -ln_z / beta,
        observables,
    })
}

/// Thermal occupation per site.
pub fn exact_occupation(model: &ModelSpec, beta: f64, h: &HilbertConfig) -> Result<f64> {
    if !model.is_bosonic() {
        return Err(Error::Domain(format!(
            "{} has no particle number",
            model.name()
        )));
    }
    Ok(exact_thermal(model, beta, h)?.observables["n_per_site"])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StairRow {
    pub mu: f64,
    pub n_exact: f64,
    pub n_round_half: f64,
    pub n_round: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Staircase {
    pub rows: Vec<StairRow>,
    /// Grid points within `10/(beta U)` of an integer `mu/U`.
    pub warnings: Vec<String>,
}

/// Exact occupation against `round(mu/U + 1/2)` and `round(mu/U)` over `mu_grid`.
pub fn staircase(
    model: &ModelSpec,
    mu_grid: &[f64],
    beta: f64,
    h: &HilbertConfig,
) -> Result<Staircase> {
    let u = model
        .param("U")
        .ok_or_else(|| Error::Domain(format!("{} has no staircase", model.name())))?;
    let mut out = Staircase::default();
    for &mu in mu_grid {
        let x = mu / u;
        let width = 10.0 / (beta * u);
        if (x - x.round()).abs() < width {
            out.warnings.push(format!(
                "mu/U = {x} lies within the thermal width {width:.3} of a step"
            ));
        }
        out.rows.push(StairRow {
            mu,
            n_exact: exact_occupation(&model.with_param("mu", mu)?, beta, h)?,
            n_round_half: (x + 0.5).round(),
            n_round: x.round(),
        });
    }
    Ok(out)
}

/// Smallest cutoff in `1, 2, 4, ...` with `|F(n) - F(2n)| <= tol |F| + tol`.
pub fn converge_cutoff(model: &ModelSpec, beta: f64, tol: f64) -> Result<HilbertConfig> {
    if !model.is_bosonic() {
        return Err(Error::Domain(format!("{} needs no cutoff", model.name())));
    }
    if !(tol > 0.0) {
        return Err(Error::Capacity(format!(
            "tolerance {tol} cannot be reached"
        )));
    }
    let mut n = 1;
    let mut f = exact_thermal(model, beta, &HilbertConfig::new(n))?.f;
    while 2 * n <= MAX_CUTOFF {
        let f2 = exact_thermal(model, beta, &HilbertConfig::new(2 * n))?.f;
        if (f - f2).abs() <= tol * f.abs() + tol {
            return Ok(HilbertConfig::new(n));
        }
        n *= 2;
        f = f2;
    }
    Err(Error::Capacity(format!(
        "free energy not converged to {tol:.1e} below n_max = {MAX_CUTOFF}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_half_is_degenerate() {
        let r = exact_thermal(&ModelSpec::spin(0.5), 3.0, &HilbertConfig::default()).unwrap();
        assert!((r.z - 2.0 * (-0.75f64).exp()).abs() < 1e-14);
        assert!((r.f - (0.25 - 2f64.ln() / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn site_ground_state_dominates() {
        let r = exact_thermal(&ModelSpec::site(1.0, 0.3), 50.0, &HilbertConfig::new(12)).unwrap();
        assert!((r.f + 0.3).abs() < 1e-3);
        // at mu = 0 the levels n = 0 and n = 1 are degenerate
        let vac = exact_thermal(&ModelSpec::site(1.0, 0.0), 200.0, &HilbertConfig::new(8)).unwrap();
        assert!((vac.f + 2f64.ln() / 200.0).abs() < 1e-12);
        assert!((vac.observables["n"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn occupation_steps() {
        let h = HilbertConfig::new(12);
        let n = |mu| exact_occupation(&ModelSpec::site(1.0, mu), 50.0, &h).unwrap();
        assert_eq!(n(0.3).round(), 1.0);
        assert_eq!(n(2.6).round(), 3.0);
        assert!(n(-0.5) < 1e-10);
    }

    #[test]
    fn cutoff_search() {
        let h = converge_cutoff(&ModelSpec::site(1.0, 0.3), 50.0, 1e-10).unwrap();
        assert!(h.n_max <= 10);
        assert!(matches!(
            converge_cutoff(&ModelSpec::site(1.0, 0.3), 50.0, 0.0),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn lattice_capacity() {
        let m = ModelSpec::lattice(1.0, 0.5, 0.1, 1, 4);
        assert!(matches!(
            exact_thermal(&m, 1.0, &HilbertConfig::new(6)),
            Err(Error::Capacity(_))
        ));
        let two = ModelSpec::lattice(1.0, 0.5, 0.1, 1, 2);
        let r = exact_thermal(&two, 1.0, &HilbertConfig::new(6)).unwrap();
        assert!(r.f.is_finite());
    }
}
