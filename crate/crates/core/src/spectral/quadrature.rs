//! Composite Gauss-Legendre rules graded toward interval endpoints.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Dyadic grading depth toward each endpoint at the first level.
    pub min_depth: usize,
    /// Refinement levels tried before giving up.
    pub max_levels: usize,
    /// Relative change between levels accepted as converged.
    pub rtol: f64,
    pub max_nodes: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            order: 16,
            min_depth: 4,
            max_levels: 12,
            rtol: 1e-10,
            max_nodes: 400_000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.max_nodes == 0 || !(self.rtol > 0.0) {
            return Err(Error::Quadrature(
                "quadrature needs order > 0, max_nodes > 0 and rtol > 0".into(),
            ));
        }
        Ok(())
    }

    /// Panel breakpoints on `[a, b]` at refinement `level`: dyadic grading of
    /// depth `min_depth + 2 level` toward both ends, each graded panel split
    /// into `level + 1` equal parts.
    pub fn breakpoints(&self, a: f64, b: f64, level: usize) -> Vec<f64> {
        let depth = self.min_depth + 2 * level;
        let half = 0.5 * (b - a);
        let mut coarse = vec![a];
        for j in (1..=depth).rev() {
            coarse.push(a + half * f64::powi(0.5, j as i32));
        }
        coarse.push(a + half);
        for j in 1..=depth {
            coarse.push(b - half * f64::powi(0.5, j as i32));
        }
        coarse.push(b);
        let split = level + 1;
        let mut out = vec![a];
        for w in coarse.windows(2) {
            for s in 1..=split {
                out.push(w[0] + (w[1] - w[0]) * s as f64 / split as f64);
            }
        }
        out
    }

    /// Nodes and weights, ascending, for the given breakpoints.
    pub fn rule(&self, breaks: &[f64]) -> Result<Vec<(f64, f64)>> {
        let order = NonZeroUsize::new(self.order)
            .ok_or_else(|| Error::Quadrature("order must be positive".into()))?;
        let gl = GaussLegendre::new(order);
        let mut base: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
        base.sort_by(|x, y| x.0.total_cmp(&y.0));
        let n = base.len() * (breaks.len() - 1);
        if n > self.max_nodes {
            return Err(Error::Quadrature(format!(
                "{n} nodes exceed the budget of {}",
                self.max_nodes
            )));
        }
        let mut out = Vec::with_capacity(n);
        for w in breaks.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            out.extend(base.iter().map(|&(x, wt)| (mid + half * x, half * wt)));
        }
        Ok(out)
    }
}
