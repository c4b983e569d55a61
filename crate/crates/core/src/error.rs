use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or point lies outside the domain of the model or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock cutoff discards more weight than tolerated.
    #[error("truncation error: cutoff n_max = {n_max} discards weight {weight:.3e} (tolerance {tolerance:.1e})")]
    Truncation {
        n_max: usize,
        weight: f64,
        tolerance: f64,
    },

    #[error("singular overlap: |<psi|psi'>| = {0:.3e}")]
    SingularOverlap(f64),

    #[error("capacity error: {0}")]
    Capacity(String),

    /// The saddle search stopped without meeting its gradient tolerance.
    #[error("optimization error after {iterations} iterations: best point {best:?}, residual {residual:.3e}")]
    Optimization {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("numerical derivative error: {0}")]
    NumericalDerivative(String),

    /// A determinant ratio on the Matsubara grid is not real and positive.
    #[error("branch error at omega = {omega}: ratio = {re} + {im}i is not real positive")]
    Branch { omega: f64, re: f64, im: f64 },

    #[error("unwrap error at node {index}: phase step {step:.3} exceeds {limit:.3}")]
    Unwrap { index: usize, step: f64, limit: f64 },

    #[error("quadrature error: {0}")]
    Quadrature(String),
}
