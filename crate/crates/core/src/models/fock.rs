//! Truncated single-mode Fock space.

use crate::error::{Error, Result};
use crate::{CVector, C64};

/// Largest discarded Poisson weight accepted when truncating a coherent state.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Normalized coherent state `|sqrt(n) e^{i phi}>` on `0..=n_max`.
///
/// Amplitudes are built in log space so large occupations do not overflow
/// before normalization.
pub fn coherent_vector(n: f64, phi: f64, n_max: usize) -> Result<CVector> {
    check_occupation(n)?;
    if !phi.is_finite() {
        return Err(Error::Domain(format!("phase must be finite, got {phi}")));
    }
    let dim = n_max + 1;
    if n == 0.0 {
        let mut v = CVector::zeros(dim);
        v[0] = C64::new(1.0, 0.0);
        return Ok(v);
    }
    let half_log_n = 0.5 * n.ln();
    let mut log_fact = 0.0;
    let mut v = CVector::zeros(dim);
    for k in 0..dim {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let log_mag = -0.5 * n + k as f64 * half_log_n - 0.5 * log_fact;
        v[k] = C64::from_polar(log_mag.exp(), k as f64 * phi);
    }
    let norm_sq = v.norm_squared();
    let weight = 1.0 - norm_sq;
    if weight > TRUNCATION_TOL {
        return Err(Error::Truncation {
            n_max,
            weight,
            tolerance: TRUNCATION_TOL,
        });
    }
    Ok(v.unscale(norm_sq.sqrt()))
}

pub fn check_occupation(n: f64) -> Result<()> {
    if !n.is_finite() || n < 0.0 {
        return Err(Error::Domain(format!(
            "occupation must be finite and >= 0, got {n}"
        )));
    }
    Ok(())
}

/// Diagonal of `(U/2) n(n-1) - mu n` on `0..=n_max`.
pub fn site_energies(u: f64, mu: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|k| {
            let n = k as f64;
            0.5 * u * n * (n - 1.0) - mu * n
        })
        .collect()
}

/// Normalized one-site matrix elements between two truncated coherent states.
#[derive(Clone, Copy, Debug)]
pub struct SiteElements {
    pub overlap: C64,
    pub energy: C64,
    pub number: C64,
    /// `<v|a|w>/<v|w>`
    pub lower: C64,
    /// `<v|a^dag|w>/<v|w>`
    pub raise: C64,
}

pub fn site_elements(v: &CVector, w: &CVector, energies: &[f64]) -> Result<SiteElements> {
    let overlap = v.dotc(w);
    let mag = overlap.norm();
    if !(mag > crate::models::SINGULAR_OVERLAP) {
        return Err(Error::SingularOverlap(mag));
    }
    let dim = v.len();
    let mut energy = C64::new(0.0, 0.0);
    let mut number = C64::new(0.0, 0.0);
    let mut lower = C64::new(0.0, 0.0);
    let mut raise = C64::new(0.0, 0.0);
    for k in 0..dim {
        let vw = v[k].conj() * w[k];
        energy += vw * energies[k];
        number += vw * k as f64;
        if k + 1 < dim {
            let s = ((k + 1) as f64).sqrt();
            lower += v[k].conj() * w[k + 1] * s;
            raise += v[k + 1].conj() * w[k] * s;
        }
    }
    Ok(SiteElements {
        overlap,
        energy: energy / overlap,
        number: number / overlap,
        lower: lower / overlap,
        raise: raise / overlap,
    })
}
