//! Matsubara sums, the contour form of the finite-step correction, branch
//! tracking of complex logarithms and the sum-rule diagnostic.

pub mod quadrature;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassics::Discretization;
use crate::C64;

pub use quadrature::QuadConfig;

/// Phase step above which the contour routines refine instead of unwrapping.
const REFINE_STEP: f64 = PI / 2.0;

/// `omega_n = 2 pi n / beta` for `n = -(N_t-1)/2 ..= (N_t-1)/2`.
pub fn matsubara_grid(d: &Discretization) -> Vec<f64> {
    let half = (d.n_t() / 2) as i64;
    (-half..=half)
        .map(|n| 2.0 * PI * n as f64 / d.beta())
        .collect()
}

/// Relative imaginary part tolerated when a ratio is declared real.
const REAL_TOL: f64 = 1e-8;

fn real_log(r: C64, omega: f64) -> Result<f64> {
    if !(r.re > 0.0) || r.im.abs() > REAL_TOL * r.re || !r.re.is_finite() {
        return Err(Error::Branch {
            omega,
            re: r.re,
            im: r.im,
        });
    }
    Ok(r.re.ln())
}

/// `(1/beta) sum_n (1/2) log ratio(omega_n)`, pairing `+omega_n` with `-omega_n`.
pub fn delta_f_sum<F>(ratio: F, d: &Discretization) -> Result<f64>
where
    F: Fn(f64) -> C64,
{
    let mut total = 0.5 * real_log(ratio(0.0), 0.0)?;
    for n in 1..=(d.n_t() / 2) {
        let w = 2.0 * PI * n as f64 / d.beta();
        total += 0.5 * (real_log(ratio(w), w)? + real_log(ratio(-w), -w)?);
    }
    Ok(total / d.beta())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unwrapped {
    pub logs: Vec<C64>,
    /// Number of branch-cut crossings, i.e. changes of the `2 pi` offset
    /// from the principal value between neighbours.
    pub jumps: usize,
    /// Largest phase step between neighbours after unwrapping.
    pub max_step: f64,
}

/// Logarithms with continuously unwrapped phases; the first is principal.
pub fn unwrapped_log(values: &[C64]) -> Result<Vec<C64>> {
    unwrap_log(values, PI).map(|u| u.logs)
}

/// As [`unwrapped_log`], failing on any phase step of at least `limit`.
pub fn unwrap_log(values: &[C64], limit: f64) -> Result<Unwrapped> {
    let mut logs: Vec<C64> = Vec::with_capacity(values.len());
    let mut jumps = 0usize;
    let mut branch = 0i64;
    let mut max_step: f64 = 0.0;
    for (index, &v) in values.iter().enumerate() {
        if !(v.norm() > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "cannot take log of {v} at index {index}"
            )));
        }
        let principal = v.ln();
        let Some(&prev) = logs.last() else {
            logs.push(principal);
            continue;
        };
        let raw = principal.im - prev.im;
        let step = raw - 2.0 * PI * (raw / (2.0 * PI)).round();
        if step.abs() >= limit {
            return Err(Error::Unwrap {
                index,
                step: step.abs(),
                limit,
            });
        }
        let next = ((prev.im + step - principal.im) / (2.0 * PI)).round() as i64;
        jumps += next.abs_diff(branch) as usize;
        branch = next;
        max_step = max_step.max(step.abs());
        logs.push(C64::new(
            principal.re,
            principal.im + 2.0 * PI * next as f64,
        ));
    }
    Ok(Unwrapped {
        logs,
        jumps,
        max_step,
    })
}

/// Correction to the continuum free energy by sum and by contour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionReport {
    pub delta_f_sum: f64,
    pub delta_f_contour: C64,
    pub im_residual: f64,
    pub quad_points: usize,
    pub unwrap_jumps: usize,
    pub d: Discretization,
}

#[derive(Serialize, Deserialize)]
struct CorrectionReportJson {
    delta_f_sum: f64,
    delta_f_contour_re: f64,
    delta_f_contour_im: f64,
    im_residual: f64,
    quad_points: usize,
    unwrap_jumps: usize,
    beta: f64,
    n_t: usize,
}

impl Serialize for CorrectionReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CorrectionReportJson {
            delta_f_sum: self.delta_f_sum,
            delta_f_contour_re: self.delta_f_contour.re,
            delta_f_contour_im: self.delta_f_contour.im,
            im_residual: self.im_residual,
            quad_points: self.quad_points,
            unwrap_jumps: self.unwrap_jumps,
            beta: self.d.beta(),
            n_t: self.d.n_t(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrectionReport {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = CorrectionReportJson::deserialize(de)?;
        let d = Discretization::new(j.beta, j.n_t).map_err(serde::de::Error::custom)?;
        Ok(Self {
            delta_f_sum: j.delta_f_sum,
            delta_f_contour: C64::new(j.delta_f_contour_re, j.delta_f_contour_im),
            im_residual: j.im_residual,
            quad_points: j.quad_points,
            unwrap_jumps: j.unwrap_jumps,
            d,
        })
    }
}

impl CorrectionReport {
    /// Sum of independent contributions, e.g. lattice modes.
    pub fn combine(reports: &[CorrectionReport]) -> Option<CorrectionReport> {
        let first = reports.first()?;
        let mut out = CorrectionReport {
            delta_f_sum: 0.0,
            delta_f_contour: C64::new(0.0, 0.0),
            im_residual: 0.0,
            quad_points: 0,
            unwrap_jumps: 0,
            d: first.d,
        };
        for r in reports {
            out.delta_f_sum += r.delta_f_sum;
            out.delta_f_contour += r.delta_f_contour;
            out.quad_points += r.quad_points;
            out.unwrap_jumps += r.unwrap_jumps;
        }
        out.im_residual = out.delta_f_contour.im.abs();
        Some(out)
    }
}

/// Outcome of one adaptive circle/arc integration.
struct ArcIntegral {
    value: C64,
    nodes: usize,
    jumps: usize,
}

/// Integrates `g(chi, log-or-value)` over `[0, chi_max]`, refining until two
/// consecutive levels agree. With `track_log`, `sample` returns the argument
/// of a logarithm which is branch-tracked from the anchor at `chi = 0`.
fn integrate_arc<S, G>(
    chi_max: f64,
    quad: &QuadConfig,
    track_log: bool,
    sample: S,
    weight: G,
) -> Result<ArcIntegral>
where
    S: Fn(f64) -> C64 + Sync,
    G: Fn(f64, C64) -> C64 + Sync,
{
    quad.validate()?;
    let anchor = sample(0.0);
    let mut prev: Option<C64> = None;
    let mut last_error = None;
    for level in 0..=quad.max_levels {
        let breaks = if chi_max > PI + 1e-12 {
            let mut b = quad.breakpoints(0.0, PI, level);
            b.pop();
            b.extend(quad.breakpoints(PI, chi_max, level));
            b
        } else {
            quad.breakpoints(0.0, chi_max, level)
        };
        let rule = quad.rule(&breaks)?;
        let values: Vec<C64> = rule.par_iter().map(|&(chi, _)| sample(chi)).collect();
        let (terms, jumps) = if track_log {
            let mut seq = Vec::with_capacity(values.len() + 1);
            seq.push(anchor);
            seq.extend_from_slice(&values);
            match unwrap_log(&seq, REFINE_STEP) {
                Ok(u) => (u.logs[1..].to_vec(), u.jumps),
                Err(e) => {
                    last_error = Some(e);
                    prev = None;
                    continue;
                }
            }
        } else {
            (values, 0)
        };
        let mut value = C64::new(0.0, 0.0);
        let mut scale: f64 = 0.0;
        for (&(chi, w), &t) in rule.iter().zip(&terms) {
            let g = weight(chi, t);
            scale = scale.max(g.norm());
            value += g * w;
        }
        if let Some(p) = prev {
            if (value - p).norm() <= quad.rtol * value.norm() + 1e-14 * scale * chi_max {
                return Ok(ArcIntegral {
                    value,
                    nodes: rule.len(),
                    jumps,
                });
            }
        }
        prev = Some(value);
        last_error = None;
    }
    Err(last_error.unwrap_or_else(|| {
        Error::Quadrature(format!(
            "no convergence to rtol {:.1e} within {} refinement levels",
            quad.rtol, quad.max_levels
        ))
    }))
}

/// `-(i / 4 dt) int_0^pi e^{i chi} log ratio(pi e^{i chi} / dt) d chi`, with
/// the logarithm continued from the real positive value at `chi = 0`.
/// The report also carries the grid sum for comparison.
pub fn delta_f_contour<F>(
    ratio: F,
    d: &Discretization,
    quad: &QuadConfig,
) -> Result<CorrectionReport>
where
    F: Fn(C64) -> C64 + Sync,
{
    let delta_f_sum = delta_f_sum(|w| ratio(C64::new(w, 0.0)), d)?;
    let radius = PI / d.dt();
    real_log(ratio(C64::new(radius, 0.0)), radius)?;
    let arc = integrate_arc(
        PI,
        quad,
        true,
        |chi| ratio(C64::from_polar(radius, chi)),
        |chi, log| C64::from_polar(1.0, chi) * log,
    )?;
    let value = arc.value * C64::new(0.0, -1.0 / (4.0 * d.dt()));
    Ok(CorrectionReport {
        delta_f_sum,
        delta_f_contour: value,
        im_residual: value.im.abs(),
        quad_points: arc.nodes,
        unwrap_jumps: arc.jumps,
        d: *d,
    })
}

/// A pole of `f` inside the circle with its residue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub omega: C64,
    pub residue: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SumRuleReport {
    pub residual: f64,
    /// `(1/2 pi) oint f(w) / (e^{i beta w} - 1) dw`
    pub contour: C64,
    /// `(1/beta) sum_n f(omega_n)`
    pub grid_sum: C64,
    /// `i sum_f Res f / (e^{i beta w_f} - 1)`
    pub pole_terms: C64,
    pub quad_points: usize,
    pub unwrap_jumps: usize,
}

/// `1/(e^{i beta w} - 1)` evaluated without overflow in either half plane.
pub fn bose_factor(beta: f64, w: C64) -> C64 {
    let z = C64::i() * w * beta;
    if w.im >= 0.0 {
        (z.exp() - 1.0).inv()
    } else {
        let e = (-z).exp();
        e / (C64::new(1.0, 0.0) - e)
    }
}

fn circle_report<S>(
    sample: S,
    track_log: bool,
    d: &Discretization,
    quad: &QuadConfig,
    grid_sum: C64,
    pole_terms: C64,
) -> Result<SumRuleReport>
where
    S: Fn(f64) -> C64 + Sync,
{
    let radius = PI / d.dt();
    let beta = d.beta();
    let scale = if track_log { 0.5 } else { 1.0 };
    let arc = integrate_arc(2.0 * PI, quad, track_log, sample, |chi, f| {
        let w = C64::from_polar(radius, chi);
        f * scale * bose_factor(beta, w) * C64::i() * w / (2.0 * PI)
    })?;
    Ok(SumRuleReport {
        residual: (arc.value - grid_sum - pole_terms).norm(),
        contour: arc.value,
        grid_sum,
        pole_terms,
        quad_points: arc.nodes,
        unwrap_jumps: arc.jumps,
    })
}

/// Residual of the identity between the circle integral of
/// `f / (e^{i beta w} - 1)` and the Matsubara sum plus extra pole terms.
pub fn sum_rule_residual<F>(
    f: F,
    d: &Discretization,
    quad: &QuadConfig,
    poles: &[Pole],
) -> Result<SumRuleReport>
where
    F: Fn(C64) -> C64 + Sync,
{
    let radius = PI / d.dt();
    let grid_sum = matsubara_grid(d)
        .iter()
        .map(|&w| f(C64::new(w, 0.0)))
        .sum::<C64>()
        / d.beta();
    let pole_terms = poles
        .iter()
        .map(|p| p.residue * bose_factor(d.beta(), p.omega))
        .sum::<C64>()
        * C64::i();
    circle_report(
        |chi| f(C64::from_polar(radius, chi)),
        false,
        d,
        quad,
        grid_sum,
        pole_terms,
    )
}

/// [`sum_rule_residual`] for `f = (1/2) log ratio`, with the logarithm
/// branch-tracked around the full circle and real on the grid.
pub fn sum_rule_residual_log<F>(
    ratio: F,
    d: &Discretization,
    quad: &QuadConfig,
) -> Result<SumRuleReport>
where
    F: Fn(C64) -> C64 + Sync,
{
    let radius = PI / d.dt();
    let grid_sum = C64::new(delta_f_sum(|w| ratio(C64::new(w, 0.0)), d)?, 0.0);
    real_log(ratio(C64::new(radius, 0.0)), radius)?;
    circle_report(
        |chi| ratio(C64::from_polar(radius, chi)),
        true,
        d,
        quad,
        grid_sum,
        C64::new(0.0, 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{reference_det_ratio, ModelSpec};
    use approx::assert_relative_eq;

    fn disc(beta: f64, n_t: usize) -> Discretization {
        Discretization::new(beta, n_t).unwrap()
    }

    #[test]
    fn grid_three_points() {
        let g = matsubara_grid(&disc(1.0, 3));
        assert_eq!(g.len(), 3);
        assert_relative_eq!(g[0], -2.0 * PI);
        assert_eq!(g[1], 0.0);
        assert_relative_eq!(g[2], 2.0 * PI);
        assert_eq!(matsubara_grid(&disc(1.0, 1)), vec![0.0]);
    }

    #[test]
    fn grid_inside_circle() {
        let d = disc(3.0, 41);
        let g = matsubara_grid(&d);
        assert!(g.iter().all(|w| w.abs() < PI / d.dt()));
        for (a, b) in g.iter().zip(g.iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn sum_of_unit_ratio_is_zero() {
        assert_eq!(
            delta_f_sum(|_| C64::new(1.0, 0.0), &disc(2.0, 11)).unwrap(),
            0.0
        );
    }

    #[test]
    fn sum_of_constant_ratio() {
        let d = disc(2.0, 11);
        let got = delta_f_sum(|_| C64::new(3.0, 0.0), &d).unwrap();
        assert_relative_eq!(got, 11.0 / 4.0 * 3f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn three_point_site_sum() {
        let model = ModelSpec::site(1.0, 0.5);
        let d = disc(0.3, 3);
        let got = delta_f_sum(
            |w| reference_det_ratio(&model, C64::new(w, 0.0), &d, None),
            &d,
        )
        .unwrap();
        // ratio(0) = (1 - mu dt)/N_t^2, ratio(+-2 pi/beta) = 2(1 - cos(2 pi/3))(1 - mu dt)/(2 pi)^2
        let r0: f64 = 0.95 / 9.0;
        let r1: f64 = 3.0 * 0.95 / (4.0 * PI * PI);
        let want = (0.5 * r0.ln() + r1.ln()) / 0.3;
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn negative_ratio_is_branch_error() {
        let err = delta_f_sum(
            |w| C64::new(if w > 0.0 { -1.0 } else { 1.0 }, 0.0),
            &disc(1.0, 5),
        );
        assert!(matches!(err, Err(Error::Branch { omega, .. }) if omega > 0.0));
    }

    #[test]
    fn unwrap_constant_reals() {
        let logs = unwrapped_log(&[C64::new(2.0, 0.0); 4]).unwrap();
        assert!(logs.iter().all(|l| l.im == 0.0));
    }

    #[test]
    fn unwrap_full_winding() {
        let vals: Vec<C64> = (0..4)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / 3.0))
            .collect();
        let u = unwrap_log(&vals, PI).unwrap();
        assert_relative_eq!(u.logs[3].im, 2.0 * PI, epsilon = 1e-12);
        assert_eq!(u.jumps, 1);
    }

    #[test]
    fn unwrap_rejects_half_turn() {
        let vals = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        assert!(matches!(
            unwrapped_log(&vals),
            Err(Error::Unwrap { index: 1, .. })
        ));
        assert!(unwrapped_log(&[C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn contour_of_unit_ratio_is_zero() {
        let r = delta_f_contour(
            |_| C64::new(1.0, 0.0),
            &disc(5.0, 21),
            &QuadConfig::default(),
        )
        .unwrap();
        assert_eq!(r.delta_f_contour, C64::new(0.0, 0.0));
        assert_eq!(r.delta_f_sum, 0.0);
    }

    #[test]
    fn contour_approaches_sum() {
        let model = ModelSpec::site(1.0, 0.5);
        let quad = QuadConfig::default();
        let gap = |n_t| {
            let d = disc(10.0, n_t);
            let r =
                delta_f_contour(|w| reference_det_ratio(&model, w, &d, None), &d, &quad).unwrap();
            assert!(r.im_residual <= 1e-6 * r.delta_f_contour.re.abs().max(1.0));
            (r.delta_f_contour.re - r.delta_f_sum).abs()
        };
        let (a, b) = (gap(201), gap(401));
        assert!(b < a, "{a} {b}");
    }

    #[test]
    fn im_residual_shrinks_with_tolerance() {
        let model = ModelSpec::spin(2.0);
        let d = disc(10.0, 101);
        let run = |rtol| {
            let quad = QuadConfig {
                rtol,
                ..Default::default()
            };
            delta_f_contour(|w| reference_det_ratio(&model, w, &d, None), &d, &quad).unwrap()
        };
        let (coarse, fine) = (run(1e-4), run(1e-12));
        assert!(fine.quad_points >= coarse.quad_points);
        assert!(fine.im_residual <= coarse.im_residual.max(1e-15));
    }

    #[test]
    fn sum_rule_constant_and_exponential() {
        let d = disc(2.0, 15);
        let quad = QuadConfig::default();
        let r = sum_rule_residual(|_| C64::new(1.0, 0.0), &d, &quad, &[]).unwrap();
        assert_relative_eq!(r.grid_sum.re, 15.0 / 2.0, max_relative = 1e-14);
        assert!(r.residual <= 1e-8, "{}", r.residual);
        let dt = d.dt();
        let r = sum_rule_residual(|w| (C64::i() * w * dt).exp(), &d, &quad, &[]).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);
    }

    #[test]
    fn sum_rule_with_pole() {
        let d = disc(2.0, 15);
        let w0 = C64::new(0.7, 0.4);
        let poles = [Pole {
            omega: w0,
            residue: C64::new(1.0, 0.0),
        }];
        let f = |w: C64| (w - w0).inv();
        let with = sum_rule_residual(f, &d, &QuadConfig::default(), &poles).unwrap();
        let without = sum_rule_residual(f, &d, &QuadConfig::default(), &[]).unwrap();
        assert!(with.residual <= 1e-8, "{}", with.residual);
        assert!(without.residual > 1e-3);
    }

    #[test]
    fn bose_factor_is_finite_far_from_axis() {
        for w in [C64::new(1.0, 300.0), C64::new(1.0, -300.0)] {
            let b = bose_factor(50.0, w);
            assert!(b.is_finite());
        }
        assert_relative_eq!(
            bose_factor(50.0, C64::new(1.0, 300.0)).re,
            -1.0,
            epsilon = 1e-12
        );
        assert!(bose_factor(50.0, C64::new(1.0, -300.0)).norm() < 1e-300);
    }

    #[test]
    fn report_json_keys() {
        let d = disc(5.0, 21);
        let r = delta_f_contour(|_| C64::new(2.0, 0.0), &d, &QuadConfig::default()).unwrap();
        let v = serde_json::to_value(r).unwrap();
        for key in [
            "delta_f_sum",
            "delta_f_contour_re",
            "delta_f_contour_im",
            "im_residual",
            "quad_points",
            "unwrap_jumps",
            "beta",
            "n_t",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: CorrectionReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
