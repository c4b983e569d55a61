//! Periodic hypercubic lattice geometry and product-state matrix elements.
//!
//! The hopping is written as `J sum_bonds (a_i^dag - a_j^dag)(a_i - a_j)`,
//! i.e. the usual `-J sum (a_i^dag a_j + h.c.)` plus `2 D J N`, so the
//! free band is `4J sum_j sin^2(k_j a0 / 2)` with its minimum at zero.

use super::fock::{self, SiteElements};
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

#[derive(Clone, Debug)]
pub struct Geometry {
    pub dim: usize,
    pub side: usize,
    pub a0: f64,
    /// One bond per site and direction, to the `+e_j` neighbour.
    pub bonds: Vec<(usize, usize)>,
}

impl Geometry {
    pub fn new(dim: usize, side: usize, a0: f64) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::Domain("lattice needs D >= 1 and L >= 1".into()));
        }
        let n_sites = side
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Capacity(format!("L^D overflows for L={side}, D={dim}")))?;
        let mut bonds = Vec::with_capacity(n_sites * dim);
        for site in 0..n_sites {
            let coords = coords_of(site, side, dim);
            for j in 0..dim {
                let mut c = coords.clone();
                c[j] = (c[j] + 1) % side;
                bonds.push((site, index_of(&c, side)));
            }
        }
        Ok(Self {
            dim,
            side,
            a0,
            bonds,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        coords_of(site, self.side, self.dim)
    }

    /// Physical positions `a0 * coords`.
    pub fn position(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .iter()
            .map(|&c| c as f64 * self.a0)
            .collect()
    }

    /// All allowed wave vectors `2 pi m_j / (L a0)`.
    pub fn reciprocal_grid(&self) -> Vec<Vec<f64>> {
        let step = 2.0 * std::f64::consts::PI / (self.side as f64 * self.a0);
        (0..self.n_sites())
            .map(|i| self.coords(i).iter().map(|&m| m as f64 * step).collect())
            .collect()
    }

    /// Reduces `k` to grid integers, rejecting off-grid vectors.
    pub fn grid_index(&self, k: &[f64]) -> Result<Vec<usize>> {
        if k.len() != self.dim {
            return Err(Error::Domain(format!(
                "wave vector has {} components, lattice has D = {}",
                k.len(),
                self.dim
            )));
        }
        let scale = self.side as f64 * self.a0 / (2.0 * std::f64::consts::PI);
        k.iter()
            .map(|&kj| {
                let m = kj * scale;
                if !m.is_finite() || (m - m.round()).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "k = {kj} is not on the reciprocal grid"
                    )));
                }
                Ok((m.round() as i64).rem_euclid(self.side as i64) as usize)
            })
            .collect()
    }

    /// Free dispersion `4J sum_j sin^2(k_j a0 / 2)` of the shifted hopping.
    pub fn band(&self, j: f64, k: &[f64]) -> f64 {
        4.0 * j
            * k.iter()
                .map(|&kj| (0.5 * kj * self.a0).sin().powi(2))
                .sum::<f64>()
    }
}

fn coords_of(mut site: usize, side: usize, dim: usize) -> Vec<usize> {
    let mut c = vec![0; dim];
    for cj in c.iter_mut() {
        *cj = site % side;
        site /= side;
    }
    c
}

fn index_of(coords: &[usize], side: usize) -> usize {
    coords.iter().rev().fold(0, |acc, &c| acc * side + c)
}

/// Berry and energy parts of the product-state Lagrangian,
/// `(-sum log o_i, <H>_norm)`.
pub fn product_elements(geometry: &Geometry, hopping: f64, sites: &[SiteElements]) -> (C64, C64) {
    let mut log_overlap = C64::new(0.0, 0.0);
    let mut energy = C64::new(0.0, 0.0);
    for s in sites {
        log_overlap += s.overlap.ln();
        energy += s.energy;
    }
    for &(i, j) in &geometry.bonds {
        if i == j {
            continue;
        }
        let (a, b) = (&sites[i], &sites[j]);
        energy += hopping * (a.number + b.number - a.raise * b.lower - b.raise * a.lower);
    }
    (-log_overlap, energy)
}

/// Exact many-body Hamiltonian in the occupation basis `0..=n_max` per site.
pub fn hamiltonian(
    geometry: &Geometry,
    u: f64,
    mu: f64,
    hopping: f64,
    n_max: usize,
    max_dim: usize,
) -> Result<CMatrix> {
    let n_sites = geometry.n_sites();
    let base = n_max + 1;
    let dim = (base as u128)
        .checked_pow(n_sites as u32)
        .unwrap_or(u128::MAX);
    if dim > max_dim as u128 {
        return Err(Error::Capacity(format!(
            "lattice Hilbert space (n_max+1)^N_s = {dim} exceeds the bound {max_dim}"
        )));
    }
    let dim = dim as usize;
    let onsite = fock::site_energies(u, mu, n_max);
    let mut h = CMatrix::zeros(dim, dim);
    for state in 0..dim {
        let occ = coords_of(state, base, n_sites);
        let mut diag: f64 = occ.iter().map(|&n| onsite[n]).sum();
        for &(i, j) in &geometry.bonds {
            if i == j {
                continue;
            }
            diag += hopping * (occ[i] + occ[j]) as f64;
            for (from, to) in [(j, i), (i, j)] {
                if occ[from] == 0 || occ[to] == n_max {
                    continue;
                }
                let amp = ((occ[to] + 1) as f64 * occ[from] as f64).sqrt();
                let mut next = occ.clone();
                next[from] -= 1;
                next[to] += 1;
                let target = index_of(&next, base);
                h[(target, state)] -= C64::new(hopping * amp, 0.0);
            }
        }
        h[(state, state)] += C64::new(diag, 0.0);
    }
    Ok(h)
}
