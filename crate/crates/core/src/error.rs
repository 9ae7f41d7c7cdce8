//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by state, operator and dynamics operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModalError {
    /// Operands act on spaces of different dimension.
    #[error("dimension mismatch: expected {expected}, got {got}{}", context_suffix(.context))]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A matrix required to be Hermitian is not.
    #[error("matrix is not Hermitian: max |A - A†| = {residual:.3e}")]
    Hermiticity { residual: f64 },

    /// The truncation dimension cannot hold the requested state.
    #[error("truncation too small: dim {dim} leaves tail mass {tail:.3e} (limit {limit:.3e})")]
    Truncation { dim: usize, tail: f64, limit: f64 },

    /// An operation restricted to projective measures received a POM.
    #[error("operation requires a projective measure, got a POM")]
    MeasureKind,

    /// A nonzero current flows out of an outcome with vanishing occupation
    /// probability.
    #[error(
        "current {current:.3e} out of outcome {index} with probability {prob:.3e} below floor"
    )]
    StarvedSource {
        index: usize,
        current: f64,
        prob: f64,
    },

    /// Step refinement hit its cap without satisfying the jump-probability
    /// bound.
    #[error(
        "step size too coarse at t = {t:.6e}: rate {rate:.3e} after {refinements} refinements"
    )]
    StepSize { t: f64, rate: f64, refinements: u32 },

    /// A trajectory reached a node of the position density.
    #[error("node encountered at x = {x:.6e}, t = {t:.6e} (density {density:.3e})")]
    Node { x: f64, t: f64, density: f64 },

    /// The Husimi amplitude vanished at the evaluation point.
    #[error("Husimi amplitude zero at alpha = {re:.6e} + {im:.6e}i")]
    HusimiZero { re: f64, im: f64 },

    /// Rejection sampling acceptance fell below the usability floor.
    #[error("envelope acceptance {acceptance:.4} below 1% after {draws} draws")]
    Envelope { acceptance: f64, draws: u64 },

    /// No closed-form solution exists for the requested combination.
    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    /// A measure invariant failed validation.
    #[error("measure invariant violated: {0}")]
    MeasureInvariant(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical routine did not converge: {0}")]
    NoConvergence(String),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

impl ModalError {
    pub(crate) fn dimension(expected: usize, got: usize, context: &'static str) -> Self {
        ModalError::Dimension {
            expected,
            got,
            context,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ModalError>;
