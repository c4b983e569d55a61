//! Saddle points, the quadratic expansion of the discrete Lagrangian and the
//! discrete and continuum fluctuation kernels built from it.

mod expansion;
mod saddle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{self, CoherentPoint, HilbertConfig, ModelSpec};
use crate::{CMatrix, C64};

pub use expansion::{
    bloch_blocks, block_circulant_form, full_action_form, hessian_blocks, mode_blocks, Chart,
    DEFAULT_FD, MAX_FD_CONDITION,
};
pub use saddle::{classical_energy, find_saddle, search_saddle, SaddleSearch, SADDLE_TOL};

/// Inverse temperature and an odd number of imaginary-time steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    beta: f64,
    n_t: usize,
}

impl Discretization {
    pub fn new(beta: f64, n_t: usize) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!(
                "beta must be finite and > 0, got {beta}"
            )));
        }
        if n_t.is_multiple_of(2) {
            return Err(Error::Domain(format!("N_t must be odd, got {n_t}")));
        }
        Ok(Self { beta, n_t })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.beta / self.n_t as f64
    }

    /// Rejects steps for which a determinant factor can turn non-positive.
    pub fn check_model(&self, model: &ModelSpec) -> Result<()> {
        let bound = self.dt() * model.step_bound();
        if bound >= 1.0 {
            let what = match model {
                ModelSpec::BoseHubbardSite { .. } => "dt*|mu|",
                ModelSpec::BoseHubbardLattice { .. } => "dt*(|mu| + 4JD)",
                ModelSpec::UniaxialSpin { .. } => "dt*(S - 1/2)",
            };
            return Err(Error::Domain(format!(
                "{what} = {bound:.6} must be < 1 (beta = {}, N_t = {})",
                self.beta, self.n_t
            )));
        }
        Ok(())
    }
}

/// Quadratic expansion `L_t = L0 + psi_t L2 psi_t + psi_t L2d psi_{t+1}`.
///
/// `stiffness` is the Hessian of the classical energy and `berry` the
/// antisymmetric part `B - B^T` of the overlap's mixed block; together they
/// define the continuum kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianBlocks {
    pub l0: f64,
    pub dt: f64,
    pub l2: CMatrix,
    pub l2d: CMatrix,
    pub stiffness: CMatrix,
    pub berry: CMatrix,
}

impl HessianBlocks {
    pub fn m(&self) -> usize {
        self.l2.nrows()
    }
}

/// `-log<p|q> + dt <p|H|q>/<p|q>` on the principal branch.
pub fn discrete_lagrangian(
    model: &ModelSpec,
    p: &CoherentPoint,
    q: &CoherentPoint,
    dt: f64,
    h: &HilbertConfig,
) -> Result<C64> {
    model.validate()?;
    let (berry, energy) = models::lagrangian_parts(model, p, q, h)?;
    Ok(berry + energy * dt)
}

/// `G(omega) = (L2 + L2^T) + L2d e^{i omega dt} + L2d^T e^{-i omega dt}`.
pub fn assemble_kernel(b: &HessianBlocks, omega: C64) -> CMatrix {
    let phase = (C64::i() * omega * b.dt).exp();
    let l2dt = b.l2d.transpose();
    &b.l2 + b.l2.transpose() + &b.l2d * phase + l2dt * phase.inv()
}

/// `beta (stiffness + i omega berry)`; the per-entry factor `beta` makes the
/// single-site determinant exactly `(beta omega)^2`.
pub fn cpi_kernel(b: &HessianBlocks, omega: C64, d: &Discretization) -> CMatrix {
    (&b.stiffness + &b.berry * (C64::i() * omega)) * C64::new(d.beta(), 0.0)
}

/// Coefficient of `x^2` in `det(a + x b + x^2 c)` for 2x2 matrices.
fn det2_quadratic(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> C64 {
    b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)] + a[(0, 0)] * c[(1, 1)] + c[(0, 0)] * a[(1, 1)]
        - a[(0, 1)] * c[(1, 0)]
        - c[(0, 1)] * a[(1, 0)]
}

/// `det G(omega) / det G_cpi(omega)`.
///
/// When the continuum kernel has a zero mode at `omega = 0`, the removable
/// singularity for `|omega dt| < 1e-4` is replaced by its limit: the ratio of
/// the `omega^2` Taylor coefficients of both determinants, taken from the
/// blocks directly (a Richardson limit in `omega` for `m != 2`).
pub fn det_ratio(b: &HessianBlocks, omega: C64, d: &Discretization) -> C64 {
    let raw = |w: C64| assemble_kernel(b, w).determinant() / cpi_kernel(b, w, d).determinant();
    if (omega * d.dt()).norm() >= 1e-4 {
        return raw(omega);
    }
    let reference = cpi_kernel(b, C64::new(2.0 * std::f64::consts::PI / d.beta(), 0.0), d)
        .determinant()
        .norm();
    let zero = C64::new(0.0, 0.0);
    if cpi_kernel(b, zero, d).determinant().norm() > 1e-9 * reference {
        return raw(omega);
    }
    if b.m() == 2 {
        let l2dt = b.l2d.transpose();
        let a = assemble_kernel(b, zero);
        let lin = (&b.l2d - &l2dt) * C64::i();
        let quad = (&b.l2d + &l2dt) * C64::new(-0.5, 0.0);
        let k = &b.berry * C64::i();
        let num = det2_quadratic(&a, &lin, &quad) * (b.dt * b.dt);
        let den = (k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)]) * (d.beta() * d.beta());
        return num / den;
    }
    let w = C64::new(1e-3 / d.dt(), 0.0);
    (raw(w) * 4.0 - raw(w * 2.0)) / 3.0
}

/// JSON form of [`HessianBlocks`] with the model echo, for fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocksReport {
    pub model: ModelSpec,
    pub l0: f64,
    pub dt: f64,
    pub l2_re: Vec<Vec<f64>>,
    pub l2_im: Vec<Vec<f64>>,
    pub l2d_re: Vec<Vec<f64>>,
    pub l2d_im: Vec<Vec<f64>>,
    pub stiffness_re: Vec<Vec<f64>>,
    pub stiffness_im: Vec<Vec<f64>>,
    pub berry_re: Vec<Vec<f64>>,
    pub berry_im: Vec<Vec<f64>>,
}

fn split(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&C64) -> f64| {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

fn join(re: &[Vec<f64>], im: &[Vec<f64>], name: &str) -> Result<CMatrix> {
    let n = re.len();
    let shape_ok = im.len() == n && re.iter().chain(im).all(|r| r.len() == n);
    if !shape_ok || n == 0 {
        return Err(Error::Domain(format!(
            "{name}: expected matching square real/imag arrays"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])))
}

impl BlocksReport {
    pub fn new(model: &ModelSpec, b: &HessianBlocks) -> Self {
        let (l2_re, l2_im) = split(&b.l2);
        let (l2d_re, l2d_im) = split(&b.l2d);
        let (stiffness_re, stiffness_im) = split(&b.stiffness);
        let (berry_re, berry_im) = split(&b.berry);
        Self {
            model: model.clone(),
            l0: b.l0,
            dt: b.dt,
            l2_re,
            l2_im,
            l2d_re,
            l2d_im,
            stiffness_re,
            stiffness_im,
            berry_re,
            berry_im,
        }
    }

    pub fn blocks(&self) -> Result<HessianBlocks> {
        let l2 = join(&self.l2_re, &self.l2_im, "l2")?;
        let l2d = join(&self.l2d_re, &self.l2d_im, "l2d")?;
        let stiffness = join(&self.stiffness_re, &self.stiffness_im, "stiffness")?;
        let berry = join(&self.berry_re, &self.berry_im, "berry")?;
        let m = l2.nrows();
        if [l2d.nrows(), stiffness.nrows(), berry.nrows()]
            .iter()
            .any(|&k| k != m)
        {
            return Err(Error::Domain("block dimensions disagree".into()));
        }
        Ok(HessianBlocks {
            l0: self.l0,
            dt: self.dt,
            l2,
            l2d,
            stiffness,
            berry,
        })
    }
}
