use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::{self, CoherentPoint, HilbertConfig, ModelSpec};

/// Projected-gradient tolerance of the saddle search, in scaled coordinates.
pub const SADDLE_TOL: f64 = 1e-10;

const MAX_ITER: usize = 500;
const GRAD_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleSearch {
    pub point: CoherentPoint,
    /// Classical energy per site.
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `<p|H|p>` for a normalized coherent state.
pub fn classical_energy(model: &ModelSpec, p: &CoherentPoint, h: &HilbertConfig) -> Result<f64> {
    Ok(models::normalized_matrix_element(model, p, p, h)?.re)
}

/// The search runs in one reduced coordinate: the uniform occupation for
/// bosons and the polar angle for spin, with the phase gauge-fixed to zero.
struct Reduced<'a> {
    model: &'a ModelSpec,
    h: &'a HilbertConfig,
    scale: f64,
    lo: f64,
    hi: f64,
}

impl<'a> Reduced<'a> {
    fn new(model: &'a ModelSpec, h: &'a HilbertConfig) -> Self {
        match *model {
            ModelSpec::UniaxialSpin { s } => Self {
                model,
                h,
                scale: s.sqrt(),
                lo: 0.0,
                hi: PI * s.sqrt(),
            },
            _ => Self {
                model,
                h,
                scale: 1.0,
                lo: 0.0,
                hi: f64::INFINITY,
            },
        }
    }

    fn point(&self, y: f64) -> CoherentPoint {
        let x = y / self.scale;
        match self.model {
            ModelSpec::BoseHubbardLattice { .. } => {
                CoherentPoint::uniform(self.model.n_sites(), x, 0.0)
            }
            _ => CoherentPoint::new(vec![x, 0.0]),
        }
    }

    fn energy(&self, y: f64) -> Result<f64> {
        let e = classical_energy(self.model, &self.point(y), self.h)?;
        Ok(e / self.model.n_sites() as f64)
    }

    fn clamp(&self, y: f64) -> f64 {
        y.clamp(self.lo, self.hi)
    }

    fn gradient(&self, y: f64) -> Result<f64> {
        let d = GRAD_STEP;
        if y - d >= self.lo && y + d <= self.hi {
            let c = |s: f64| -> Result<f64> {
                Ok((self.energy(y + s)? - self.energy(y - s)?) / (2.0 * s))
            };
            return Ok((4.0 * c(0.5 * d)? - c(d)?) / 3.0);
        }
        // second-order one-sided difference pointing into the domain
        let s = if y - d < self.lo { d } else { -d };
        let e0 = self.energy(y)?;
        Ok((-3.0 * e0 + 4.0 * self.energy(y + s)? - self.energy(y + 2.0 * s)?) / (2.0 * s))
    }
}

/// Minimum of the classical energy from the default starting point
/// (`n = 1` for bosons, `theta = pi/2` for spin).
pub fn find_saddle(model: &ModelSpec, h: &HilbertConfig) -> Result<CoherentPoint> {
    let guess = match model {
        ModelSpec::UniaxialSpin { .. } => PI / 2.0,
        _ => 1.0,
    };
    search_saddle(model, h, guess).map(|s| s.point)
}

/// Projected gradient descent with Barzilai-Borwein trial steps and
/// backtracking, started from `guess` in the reduced coordinate.
pub fn search_saddle(model: &ModelSpec, h: &HilbertConfig, guess: f64) -> Result<SaddleSearch> {
    model.validate()?;
    let r = Reduced::new(model, h);
    let mut y = r.clamp(guess * r.scale);
    let mut e = r.energy(y)?;
    let mut g = r.gradient(y)?;
    let mut t = 1.0;
    let mut prev: Option<(f64, f64)> = None;
    for iteration in 0..MAX_ITER {
        let residual = (y - r.clamp(y - g)).abs();
        if residual < SADDLE_TOL {
            return Ok(SaddleSearch {
                point: r.point(y),
                energy: e,
                residual,
                iterations: iteration,
            });
        }
        if let Some((y0, g0)) = prev {
            let (s, q) = (y - y0, g - g0);
            if s * q > 0.0 {
                t = (s * s / (s * q)).clamp(1e-10, 1e10);
            }
        }
        let mut accepted = None;
        for _ in 0..80 {
            let y_new = r.clamp(y - t * g);
            let e_new = r.energy(y_new)?;
            if e_new <= e - 1e-4 * g * (y - y_new) + 1e-13 * (1.0 + e.abs()) {
                accepted = Some((y_new, e_new));
                break;
            }
            t *= 0.5;
        }
        let Some((y_new, e_new)) = accepted else {
            return Err(Error::Optimization {
                best: r.point(y).params,
                residual,
                iterations: iteration,
            });
        };
        prev = Some((y, g));
        y = y_new;
        e = e_new;
        g = r.gradient(y)?;
    }
    Err(Error::Optimization {
        best: r.point(y).params,
        residual: (y - r.clamp(y - g)).abs(),
        iterations: MAX_ITER,
    })
}

/// Projected gradient of the reduced energy at `p` (scaled coordinates).
pub(crate) fn saddle_residual(
    model: &ModelSpec,
    p: &CoherentPoint,
    h: &HilbertConfig,
) -> Result<f64> {
    let r = Reduced::new(model, h);
    let y = p.params[0] * r.scale;
    let g = r.gradient(y)?;
    Ok((y - r.clamp(y - g)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_minimum() {
        let h = HilbertConfig::for_occupation(4.0);
        let p = find_saddle(&ModelSpec::site(1.0, 2.0), &h).unwrap();
        assert!((p.params[0] - 2.0).abs() < 1e-9);
        let p = find_saddle(&ModelSpec::site(1.0, -0.5), &h).unwrap();
        assert_eq!(p.params[0], 0.0);
    }

    #[test]
    fn spin_minimum_from_off_equator() {
        let h = HilbertConfig::default();
        let s = search_saddle(&ModelSpec::spin(2.0), &h, 1.0).unwrap();
        assert!((s.point.params[0] - PI / 2.0).abs() < 1e-9);
        assert!((s.energy - 1.0).abs() < 1e-12);
        let half = find_saddle(&ModelSpec::spin(0.5), &h).unwrap();
        assert_eq!(half.params[0], PI / 2.0);
    }

    #[test]
    fn lattice_minimum_is_uniform() {
        let h = HilbertConfig::for_occupation(2.0);
        let m = ModelSpec::lattice(1.0, 0.7, 0.2, 1, 3);
        let p = find_saddle(&m, &h).unwrap();
        assert_eq!(p.params.len(), 6);
        assert!((p.params[0] - 0.7).abs() < 1e-9);
        assert!((p.params[4] - 0.7).abs() < 1e-9);
    }
}
