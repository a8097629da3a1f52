//! Error type shared by all modules of the crate.
//!
//! Every fallible operation returns [`crate::Result`]. Variants are grouped by
//! failure family rather than by module, so callers can match on the kind of
//! problem (bad argument, violated hypothesis, missing input, failed
//! estimation, I/O) without caring which operation raised it.

use crate::cert::{BoundQuantity, DerivativeLevel, Order};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Weakening can only lower an accuracy order, never raise it.
    #[error("cannot weaken a certificate of order {from} to the higher order {to}")]
    OrderViolation {
        /// Order carried by the certificate.
        from: Order,
        /// Requested (higher) target order.
        to: Order,
    },

    /// A certificate level was paired with a uniform bound of the wrong
    /// quantity (function ↔ |f|, gradient ↔ ‖∇f‖, Hessian ↔ ‖∇²f‖).
    #[error("certificate level {level} does not match bound quantity {quantity}")]
    QuantityMismatch {
        /// Level of the certificate.
        level: DerivativeLevel,
        /// Quantity of the bound it was paired with.
        quantity: BoundQuantity,
    },

    /// Inputs that must agree (base point, locality, radius cap, dimensions)
    /// do not.
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    /// An operation that needs a non-empty collection received an empty one.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A malformed argument outside the other categories.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A combination rule needed a uniform bound that was not supplied and
    /// could not be derived from the available certificates.
    #[error("missing uniform bound {symbol} required by {context}")]
    MissingBound {
        /// Conventional name of the missing quantity, e.g. `M_f~[2] (near)`.
        symbol: String,
        /// Rule that needed it.
        context: String,
    },

    /// A combination rule needed an accuracy certificate that the sub-model
    /// does not carry.
    #[error("missing certificate {symbol} required by {context}")]
    MissingCertificate {
        /// Conventional name, e.g. `gradient/near certificate of part 1`.
        symbol: String,
        /// Rule that needed it.
        context: String,
    },

    /// A standing hypothesis of a combination rule is violated (for example
    /// the exact-at-base requirement on function certificates, or the
    /// positive-order requirement on a quotient denominator).
    #[error("hypothesis of {rule} violated: {detail}")]
    Precondition {
        /// Rule whose hypothesis failed.
        rule: String,
        /// What exactly is violated.
        detail: String,
    },

    /// An oracle does not expose derivatives of the requested order.
    #[error("insufficient smoothness: {0}")]
    Smoothness(String),

    /// Evaluation of an oracle failed (e.g. division by zero in a quotient).
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// A sampled or derived estimate came out non-finite or did not converge.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Configuration text could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse {
        /// 1-based line number in the config text.
        line: usize,
        /// Description of the problem.
        message: String,
    },

    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
