use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inner domain is not strictly inside the outer domain (margin {margin:.3e})")]
    NotContained { margin: f64 },

    #[error("boundary data is not convex at ({x:.4}, {y:.4}): min eigenvalue {min_eig:.3e}")]
    NonConvexData { x: f64, y: f64, min_eig: f64 },

    #[error("grid resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("node mask is empty: {0}")]
    EmptyMask(String),

    #[error("field leaves the barrier domain at node {node} (det {det:.3e}, trace {trace:.3e})")]
    OutOfDomain { node: usize, det: f64, trace: f64 },

    #[error("adaptive quadrature did not reach tolerance {tol:.1e} (estimated error {err:.3e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("no feasible starting field for alpha in [1e-3, 10]")]
    StartFailure,

    #[error("Newton did not converge in {iters} iterations (gradient norm {grad_norm:.3e})")]
    MaxIters { iters: usize, grad_norm: f64 },

    #[error("line search stalled at iteration {iter} (gradient norm {grad_norm:.3e})")]
    LineSearchStall { iter: usize, grad_norm: f64 },

    #[error("solve failed at eps = {eps:.6e}: {source}")]
    AtEps {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
