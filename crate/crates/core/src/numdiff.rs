//! Central finite differences with Richardson extrapolation.

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Step size and number of Richardson levels (each level halves the step).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdScheme {
    pub step: f64,
    pub levels: usize,
}

impl FdScheme {
    pub fn new(step: f64, levels: usize) -> Self {
        Self { step, levels }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 1e-7 && self.step <= 0.25) {
            return Err(Error::NumericalDerivative(format!(
                "fd step {} outside the accepted range (1e-7, 0.25]",
                self.step
            )));
        }
        if self.levels > 4 {
            return Err(Error::NumericalDerivative(format!(
                "{} Richardson levels requested, at most 4 supported",
                self.levels
            )));
        }
        Ok(())
    }

    fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.levels).map(move |j| self.step / f64::powi(2.0, j as i32))
    }

    /// Amplification of function roundoff into the extrapolated second derivative.
    fn noise_gain(&self) -> f64 {
        let finest = self.step / f64::powi(2.0, self.levels as i32);
        4.0 * (1.0 + self.levels as f64) / (finest * finest)
    }
}

/// Error estimates attached to a finite-difference Hessian.
#[derive(Clone, Copy, Debug, Default)]
pub struct FdDiagnostics {
    /// Largest change between the extrapolated value and the finest raw one.
    pub truncation: f64,
    /// Roundoff bound `eps * max|f| * gain`.
    pub roundoff: f64,
    /// Largest entry of the extrapolated Hessian.
    pub scale: f64,
}

impl FdDiagnostics {
    pub fn condition(&self) -> f64 {
        self.roundoff / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Richardson tableau for a quantity with error series in `h^2, h^4, ...`
/// sampled at `h, h/2, h/4, ...`.
pub fn richardson(samples: &[C64]) -> C64 {
    let mut row = samples.to_vec();
    let mut factor = 4.0;
    for level in 1..samples.len() {
        for i in (level..samples.len()).rev() {
            row[i] = (row[i] * factor - row[i - 1]) / (factor - 1.0);
        }
        factor *= 4.0;
    }
    row[samples.len() - 1]
}

/// Hessians of the `K` outputs of `f` at the origin of `u`-space, returned in
/// `x = scale * u` coordinates.
///
/// Mixed entries use the polarization identity on the directional second
/// differences, `f_ij = (D_{i+j} - D_i - D_j)/2`, so any direction `e_i + e_j`
/// along which `f` is flat yields an exactly vanishing quadratic form.
pub fn hessian<const K: usize, F>(
    f: F,
    scales: &[f64],
    scheme: FdScheme,
) -> Result<([CMatrix; K], FdDiagnostics)>
where
    F: Fn(&[f64]) -> Result<[C64; K]>,
{
    scheme.validate()?;
    let n = scales.len();
    let f0 = f(&vec![0.0; n])?;
    let mut f_max = f0.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let mut second_diff = |dir: &[f64], h: f64| -> Result<[C64; K]> {
        let plus: Vec<f64> = dir.iter().map(|&d| d * h).collect();
        let minus: Vec<f64> = dir.iter().map(|&d| -d * h).collect();
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        let mut out = [C64::new(0.0, 0.0); K];
        for c in 0..K {
            f_max = f_max.max(fp[c].norm()).max(fm[c].norm());
            out[c] = (fp[c] - f0[c] * 2.0 + fm[c]) / (h * h);
        }
        Ok(out)
    };

    // directional second derivatives d[c][(i,j)] along e_i + e_j (i <= j)
    let mut table: Vec<Vec<[C64; K]>> = vec![Vec::new(); n * n];
    for h in scheme.steps() {
        for i in 0..n {
            for j in i..n {
                let mut dir = vec![0.0; n];
                dir[i] += 1.0;
                dir[j] += 1.0;
                if i == j {
                    dir[i] = 1.0;
                }
                table[i * n + j].push(second_diff(&dir, h)?);
            }
        }
    }

    let mut extrapolated = vec![[C64::new(0.0, 0.0); K]; n * n];
    let mut truncation: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let samples = &table[i * n + j];
            for c in 0..K {
                let seq: Vec<C64> = samples.iter().map(|s| s[c]).collect();
                let r = richardson(&seq);
                truncation = truncation.max((r - seq[seq.len() - 1]).norm());
                extrapolated[i * n + j][c] = r;
            }
        }
    }

    let mut out: [CMatrix; K] = std::array::from_fn(|_| CMatrix::zeros(n, n));
    let mut scale: f64 = 0.0;
    for c in 0..K {
        for i in 0..n {
            out[c][(i, i)] = extrapolated[i * n + i][c] / (scales[i] * scales[i]);
            for j in (i + 1)..n {
                let mixed = (extrapolated[i * n + j][c]
                    - extrapolated[i * n + i][c]
                    - extrapolated[j * n + j][c])
                    * 0.5
                    / (scales[i] * scales[j]);
                out[c][(i, j)] = mixed;
                out[c][(j, i)] = mixed;
            }
        }
        scale = scale.max(out[c].iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let min_scale = scales.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let diagnostics = FdDiagnostics {
        truncation: truncation / (min_scale * min_scale),
        roundoff: f64::EPSILON * f_max * scheme.noise_gain() / (min_scale * min_scale),
        scale,
    };
    Ok((out, diagnostics))
}

/// First derivative of a real function by central differences with Richardson.
pub fn derivative<F>(f: F, x: f64, scheme: FdScheme) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let samples = scheme
        .steps()
        .map(|h| Ok(C64::new((f(x + h)? - f(x - h)?) / (2.0 * h), 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(richardson(&samples).re)
}
