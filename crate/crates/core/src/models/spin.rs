//! Spin-S representation in the ascending `m = -S..=S` basis.

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

pub fn two_s(s: f64) -> Result<usize> {
    let t = 2.0 * s;
    if !t.is_finite() || t < 1.0 - 1e-12 || (t - t.round()).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "spin must be a positive multiple of 1/2, got {s}"
        )));
    }
    Ok(t.round() as usize)
}

pub fn sz(two_s: usize) -> CMatrix {
    let s = two_s as f64 / 2.0;
    CMatrix::from_fn(two_s + 1, two_s + 1, |i, j| {
        if i == j {
            C64::new(i as f64 - s, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Raising operator: `S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>`.
pub fn splus(two_s: usize) -> CMatrix {
    let s = two_s as f64 / 2.0;
    let mut out = CMatrix::zeros(two_s + 1, two_s + 1);
    for j in 0..two_s {
        let m = j as f64 - s;
        out[(j + 1, j)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    out
}

/// `exp((theta/2)(e^{i phi} S- - e^{-i phi} S+)) |S,S>`.
pub fn coherent_vector(two_s: usize, theta: f64, phi: f64) -> Result<CVector> {
    if !theta.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "theta must lie in [0, pi], got {theta}"
        )));
    }
    if !phi.is_finite() {
        return Err(Error::Domain(format!("phase must be finite, got {phi}")));
    }
    let up = splus(two_s);
    let down = up.adjoint();
    let gen = (down * C64::from_polar(1.0, phi) - up * C64::from_polar(1.0, -phi))
        * C64::new(0.5 * theta, 0.0);
    let rot = gen.exp();
    let v = rot.column(two_s).into_owned();
    let norm = v.norm();
    Ok(v.unscale(norm))
}

/// Closed-form amplitudes of the same state:
/// `sqrt(C(2S, S+m)) cos(theta/2)^{S+m} sin(theta/2)^{S-m} e^{i(S-m)phi}`.
pub fn coherent_amplitudes(two_s: usize, theta: f64, phi: f64) -> CVector {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let mut log_binom = 0.0;
    CVector::from_fn(two_s + 1, |i, _| {
        // i = S + m, so S - m = two_s - i
        let down = two_s - i;
        if i > 0 {
            log_binom += ((two_s + 1 - i) as f64).ln() - (i as f64).ln();
        }
        let mag = (0.5 * log_binom).exp() * c.powi(i as i32) * s.powi(down as i32);
        C64::from_polar(mag, down as f64 * phi)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_matches_closed_form() {
        for two_s in 1..8 {
            for (theta, phi) in [
                (0.0, 0.0),
                (0.7, -1.2),
                (1.9, 2.5),
                (std::f64::consts::PI, 0.3),
            ] {
                let a = coherent_vector(two_s, theta, phi).unwrap();
                let b = coherent_amplitudes(two_s, theta, phi);
                assert!((a - b).norm() < 1e-12, "2S={two_s} theta={theta}");
            }
        }
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(coherent_vector(2, -0.1, 0.0).is_err());
        assert!(coherent_vector(2, 1.0, f64::NAN).is_err());
        assert!(two_s(0.7).is_err());
    }
}
