//! Physical models, their coherent-state families and closed-form references.

pub mod fock;
pub mod lattice;
pub mod spin;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassics::Discretization;
use crate::{CMatrix, CVector, C64};

pub use lattice::Geometry;

/// Overlaps smaller than this are treated as vanishing.
pub const SINGULAR_OVERLAP: f64 = 1e-12;

/// Default bound on the lattice exact-diagonalization dimension; a dense
/// complex matrix of this size takes 64 MiB.
pub const DEFAULT_MAX_LATTICE_DIM: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelSpec {
    /// `H = (U/2) n(n-1) - mu n`.
    #[serde(rename = "bose_hubbard_site", alias = "BoseHubbardSite")]
    BoseHubbardSite {
        #[serde(rename = "U")]
        u: f64,
        mu: f64,
    },
    /// Periodic `L^D` cubic lattice of sites with nearest-neighbour hopping `J`.
    #[serde(rename = "bose_hubbard_lattice", alias = "BoseHubbardLattice")]
    BoseHubbardLattice {
        #[serde(rename = "U")]
        u: f64,
        mu: f64,
        #[serde(rename = "J")]
        j: f64,
        #[serde(rename = "D")]
        d: usize,
        #[serde(rename = "L")]
        l: usize,
        #[serde(default = "unit_spacing")]
        a0: f64,
    },
    /// `H = S_z^2`.
    #[serde(rename = "uniaxial_spin", alias = "UniaxialSpin")]
    UniaxialSpin {
        #[serde(rename = "S")]
        s: f64,
    },
}

fn unit_spacing() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    BoseHubbardSite,
    BoseHubbardLattice,
    UniaxialSpin,
}

impl ModelSpec {
    pub fn site(u: f64, mu: f64) -> Self {
        Self::BoseHubbardSite { u, mu }
    }

    pub fn lattice(u: f64, mu: f64, j: f64, d: usize, l: usize) -> Self {
        Self::BoseHubbardLattice {
            u,
            mu,
            j,
            d,
            l,
            a0: 1.0,
        }
    }

    pub fn spin(s: f64) -> Self {
        Self::UniaxialSpin { s }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::BoseHubbardSite { .. } => ModelKind::BoseHubbardSite,
            Self::BoseHubbardLattice { .. } => ModelKind::BoseHubbardLattice,
            Self::UniaxialSpin { .. } => ModelKind::UniaxialSpin,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BoseHubbardSite { .. } => "bose_hubbard_site",
            Self::BoseHubbardLattice { .. } => "bose_hubbard_lattice",
            Self::UniaxialSpin { .. } => "uniaxial_spin",
        }
    }

    pub fn is_bosonic(&self) -> bool {
        !matches!(self, Self::UniaxialSpin { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be finite, got {x}")))
            }
        };
        match *self {
            Self::BoseHubbardSite { u, mu } => {
                finite("mu", mu)?;
                check_u(u)
            }
            Self::BoseHubbardLattice { u, mu, j, d, l, a0 } => {
                finite("mu", mu)?;
                check_u(u)?;
                if !(j.is_finite() && j >= 0.0) {
                    return Err(Error::Domain(format!("J must be finite and >= 0, got {j}")));
                }
                if d == 0 || l == 0 {
                    return Err(Error::Domain("lattice needs D >= 1 and L >= 1".into()));
                }
                if !(a0.is_finite() && a0 > 0.0) {
                    return Err(Error::Domain(format!("a0 must be positive, got {a0}")));
                }
                Geometry::new(d, l, a0).map(|_| ())
            }
            Self::UniaxialSpin { s } => spin::two_s(s).map(|_| ()),
        }
    }

    pub fn n_sites(&self) -> usize {
        match *self {
            Self::BoseHubbardLattice { d, l, .. } => l.pow(d as u32),
            _ => 1,
        }
    }

    /// Number of real coherent-state parameters.
    pub fn point_dim(&self) -> usize {
        2 * self.n_sites()
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match *self {
            Self::BoseHubbardLattice { d, l, a0, .. } => Geometry::new(d, l, a0),
            _ => Err(Error::Domain(format!(
                "{} has no lattice geometry",
                self.name()
            ))),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        match (self, name) {
            (Self::BoseHubbardSite { u, .. } | Self::BoseHubbardLattice { u, .. }, "U") => Some(*u),
            (Self::BoseHubbardSite { mu, .. } | Self::BoseHubbardLattice { mu, .. }, "mu") => {
                Some(*mu)
            }
            (Self::BoseHubbardLattice { j, .. }, "J") => Some(*j),
            (Self::BoseHubbardLattice { a0, .. }, "a0") => Some(*a0),
            (Self::UniaxialSpin { s }, "S") => Some(*s),
            _ => None,
        }
    }

    /// Copy with one continuous parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let slot = match (&mut out, name) {
            (Self::BoseHubbardSite { u, .. } | Self::BoseHubbardLattice { u, .. }, "U") => u,
            (Self::BoseHubbardSite { mu, .. } | Self::BoseHubbardLattice { mu, .. }, "mu") => mu,
            (Self::BoseHubbardLattice { j, .. }, "J") => j,
            (Self::BoseHubbardLattice { a0, .. }, "a0") => a0,
            (Self::UniaxialSpin { s }, "S") => s,
            _ => {
                return Err(Error::Domain(format!(
                    "model {} has no parameter {name:?}",
                    self.name()
                )))
            }
        };
        *slot = value;
        Ok(out)
    }

    /// `dt * max(...)` bound keeping every determinant factor positive.
    pub fn step_bound(&self) -> f64 {
        match *self {
            Self::BoseHubbardSite { mu, .. } => mu.abs(),
            Self::BoseHubbardLattice { mu, j, d, .. } => mu.abs() + 4.0 * j * d as f64,
            Self::UniaxialSpin { s } => (s - 0.5).abs(),
        }
    }
}

fn check_u(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("U must be finite and > 0, got {u}")))
    }
}

/// Coherent-state label: `(n, phi)` per site for bosons, `(theta, phi)` for spin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoherentPoint {
    pub params: Vec<f64>,
}

impl CoherentPoint {
    pub fn new(params: Vec<f64>) -> Self {
        Self { params }
    }

    pub fn boson(n: f64, phi: f64) -> Self {
        Self::new(vec![n, phi])
    }

    pub fn spin(theta: f64, phi: f64) -> Self {
        Self::new(vec![theta, phi])
    }

    pub fn uniform(n_sites: usize, n: f64, phi: f64) -> Self {
        Self::new((0..n_sites).flat_map(|_| [n, phi]).collect())
    }

    fn check_dim(&self, model: &ModelSpec) -> Result<()> {
        if self.params.len() != model.point_dim() {
            return Err(Error::Domain(format!(
                "point has {} parameters, model {} needs {}",
                self.params.len(),
                model.name(),
                model.point_dim()
            )));
        }
        Ok(())
    }

    /// Largest occupation over sites (bosons only).
    pub fn max_occupation(&self) -> f64 {
        self.params.chunks(2).map(|c| c[0]).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertConfig {
    pub n_max: usize,
    #[serde(default = "default_max_lattice_dim")]
    pub max_lattice_dim: usize,
}

fn default_max_lattice_dim() -> usize {
    DEFAULT_MAX_LATTICE_DIM
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self::for_occupation(0.0)
    }
}

impl HilbertConfig {
    pub fn new(n_max: usize) -> Self {
        Self {
            n_max,
            max_lattice_dim: DEFAULT_MAX_LATTICE_DIM,
        }
    }

    /// `n_max = ceil(n + 10 sqrt(n) + 20)` for occupations up to `n`.
    pub fn for_occupation(n: f64) -> Self {
        let n = n.max(0.0);
        Self::new((n + 10.0 * n.sqrt() + 20.0).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::Domain("n_max must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn coherent_vector(model: &ModelSpec, p: &CoherentPoint, h: &HilbertConfig) -> Result<CVector> {
    model.validate()?;
    p.check_dim(model)?;
    let x = &p.params;
    match *model {
        ModelSpec::BoseHubbardSite { .. } => fock::coherent_vector(x[0], x[1], h.n_max),
        ModelSpec::UniaxialSpin { s } => spin::coherent_vector(spin::two_s(s)?, x[0], x[1]),
        ModelSpec::BoseHubbardLattice { .. } => {
            let base = (h.n_max + 1) as u128;
            let dim = base
                .checked_pow(model.n_sites() as u32)
                .unwrap_or(u128::MAX);
            if dim > h.max_lattice_dim as u128 {
                return Err(Error::Capacity(format!(
                    "product vector of dimension {dim} exceeds the bound {}",
                    h.max_lattice_dim
                )));
            }
            let mut out = CVector::from_element(1, C64::new(1.0, 0.0));
            // site 0 is the fastest-running index of the product basis
            for c in x.chunks(2).rev() {
                out = out.kronecker(&fock::coherent_vector(c[0], c[1], h.n_max)?);
            }
            Ok(out)
        }
    }
}

pub fn overlap(
    model: &ModelSpec,
    p: &CoherentPoint,
    q: &CoherentPoint,
    h: &HilbertConfig,
) -> Result<C64> {
    model.validate()?;
    p.check_dim(model)?;
    q.check_dim(model)?;
    if let ModelSpec::BoseHubbardLattice { .. } = model {
        let mut out = C64::new(1.0, 0.0);
        for (a, b) in p.params.chunks(2).zip(q.params.chunks(2)) {
            let v = fock::coherent_vector(a[0], a[1], h.n_max)?;
            let w = fock::coherent_vector(b[0], b[1], h.n_max)?;
            out *= v.dotc(&w);
        }
        return Ok(out);
    }
    Ok(coherent_vector(model, p, h)?.dotc(&coherent_vector(model, q, h)?))
}

pub fn hamiltonian_matrix(model: &ModelSpec, h: &HilbertConfig) -> Result<CMatrix> {
    model.validate()?;
    h.validate()?;
    match *model {
        ModelSpec::BoseHubbardSite { u, mu } => {
            let e = fock::site_energies(u, mu, h.n_max);
            Ok(CMatrix::from_diagonal(&CVector::from_iterator(
                e.len(),
                e.iter().map(|&x| C64::new(x, 0.0)),
            )))
        }
        ModelSpec::UniaxialSpin { s } => {
            let z = spin::sz(spin::two_s(s)?);
            Ok(&z * &z)
        }
        ModelSpec::BoseHubbardLattice { u, mu, j, .. } => {
            lattice::hamiltonian(&model.geometry()?, u, mu, j, h.n_max, h.max_lattice_dim)
        }
    }
}

/// Berry and energy parts of the discrete Lagrangian between two points:
/// `(-log<p|q>, <p|H|q>/<p|q>)`.
pub(crate) fn lagrangian_parts(
    model: &ModelSpec,
    p: &CoherentPoint,
    q: &CoherentPoint,
    h: &HilbertConfig,
) -> Result<(C64, C64)> {
    p.check_dim(model)?;
    q.check_dim(model)?;
    match *model {
        ModelSpec::BoseHubbardSite { u, mu } => {
            let energies = fock::site_energies(u, mu, h.n_max);
            let v = fock::coherent_vector(p.params[0], p.params[1], h.n_max)?;
            let w = fock::coherent_vector(q.params[0], q.params[1], h.n_max)?;
            let e = fock::site_elements(&v, &w, &energies)?;
            Ok((-e.overlap.ln(), e.energy))
        }
        ModelSpec::UniaxialSpin { s } => {
            let two_s = spin::two_s(s)?;
            let v = spin::coherent_vector(two_s, p.params[0], p.params[1])?;
            let w = spin::coherent_vector(two_s, q.params[0], q.params[1])?;
            let o = v.dotc(&w);
            if !(o.norm() > SINGULAR_OVERLAP) {
                return Err(Error::SingularOverlap(o.norm()));
            }
            // S_z^2 is diagonal in this basis
            let s_half = two_s as f64 / 2.0;
            let num: C64 = (0..=two_s)
                .map(|i| {
                    let m = i as f64 - s_half;
                    v[i].conj() * w[i] * (m * m)
                })
                .sum();
            Ok((-o.ln(), num / o))
        }
        ModelSpec::BoseHubbardLattice { u, mu, j, .. } => {
            let geometry = model.geometry()?;
            let energies = fock::site_energies(u, mu, h.n_max);
            let sites = p
                .params
                .chunks(2)
                .zip(q.params.chunks(2))
                .map(|(a, b)| {
                    let v = fock::coherent_vector(a[0], a[1], h.n_max)?;
                    let w = fock::coherent_vector(b[0], b[1], h.n_max)?;
                    fock::site_elements(&v, &w, &energies)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(lattice::product_elements(&geometry, j, &sites))
        }
    }
}

pub fn normalized_matrix_element(
    model: &ModelSpec,
    p: &CoherentPoint,
    q: &CoherentPoint,
    h: &HilbertConfig,
) -> Result<C64> {
    model.validate()?;
    lagrangian_parts(model, p, q, h).map(|(_, e)| e)
}

/// `2(1 - cos x) / (beta omega)^2` with `x = omega dt`, continued through `x = 0`.
pub fn free_ratio(omega: C64, d: &Discretization) -> C64 {
    let x = omega * d.dt();
    if x.norm() < 1e-4 {
        let x2 = x * x;
        let s = C64::new(1.0, 0.0) - x2 / 12.0 + x2 * x2 / 360.0;
        return s * (d.dt() / d.beta()).powi(2);
    }
    (C64::new(1.0, 0.0) - x.cos()) * 2.0 / (omega * d.beta()).powi(2)
}

/// Closed-form `det G / det G_cpi` of the three reference models.
///
/// Site: factor `1 - mu dt`. Spin: `1 - (S - 1/2) dt`. Lattice: `1 + eps_k dt`
/// with `eps_k = 4J sum_j sin^2(k_j a0/2) - mu`; `k = None` means `k = 0`.
pub fn reference_det_ratio(
    model: &ModelSpec,
    omega: C64,
    d: &Discretization,
    k: Option<&[f64]>,
) -> C64 {
    let dt = d.dt();
    let factor = match *model {
        ModelSpec::BoseHubbardSite { mu, .. } => 1.0 - mu * dt,
        ModelSpec::UniaxialSpin { s } => 1.0 - (s - 0.5) * dt,
        ModelSpec::BoseHubbardLattice { mu, j, a0, .. } => {
            let band: f64 = k
                .unwrap_or(&[])
                .iter()
                .map(|&kj| (0.5 * kj * a0).sin().powi(2))
                .sum::<f64>()
                * 4.0
                * j;
            1.0 + (band - mu) * dt
        }
    };
    free_ratio(omega, d) * factor
}

/// Per-mode ratio realized by the lattice expansion with the band-shifted
/// hopping, `e_k = 4J sum_j sin^2(k_j a0/2)`:
///
/// `[2(1 - cos x)(1 - (e_k + mu) dt) + dt^2 e_k (e_k + 2 mu)] / [beta^2 (omega^2 + e_k (e_k + 2 mu))]`.
///
/// It equals [`reference_det_ratio`] at `k = 0` only.
pub fn lattice_mode_ratio(
    model: &ModelSpec,
    omega: C64,
    d: &Discretization,
    k: &[f64],
) -> Result<C64> {
    let ModelSpec::BoseHubbardLattice { mu, j, .. } = *model else {
        return Err(Error::Domain(format!(
            "{} has no Bloch modes",
            model.name()
        )));
    };
    let geometry = model.geometry()?;
    geometry.grid_index(k)?;
    let e = geometry.band(j, k);
    let dt = d.dt();
    let gap = e * (e + 2.0 * mu);
    if gap == 0.0 {
        return Ok(free_ratio(omega, d) * (1.0 - (e + mu) * dt));
    }
    let x = omega * dt;
    let num = (C64::new(1.0, 0.0) - x.cos()) * 2.0 * (1.0 - (e + mu) * dt) + dt * dt * gap;
    Ok(num / ((omega * omega + gap) * d.beta().powi(2)))
}

/// Parameter slopes of `F - F_cpi` as stated in closed form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CorrectionSlopes {
    pub d_mu: Option<f64>,
    pub d_j: Option<f64>,
    pub d_s: Option<f64>,
}

/// Site `-mu/2`; lattice `(mu - 2JD) N_s / 2`; spin `-(S/2 - 1/4)`.
pub fn reference_correction_slopes(model: &ModelSpec) -> CorrectionSlopes {
    match *model {
        ModelSpec::BoseHubbardSite { .. } => CorrectionSlopes {
            d_mu: Some(-0.5),
            ..Default::default()
        },
        ModelSpec::BoseHubbardLattice { d, .. } => {
            let ns = model.n_sites() as f64;
            CorrectionSlopes {
                d_mu: Some(0.5 * ns),
                d_j: Some(-(d as f64) * ns),
                d_s: None,
            }
        }
        ModelSpec::UniaxialSpin { .. } => CorrectionSlopes {
            d_s: Some(-0.5),
            ..Default::default()
        },
    }
}
