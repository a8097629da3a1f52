//! Accuracy certificates and an error-bound calculus for derivative-free
//! surrogate models.
//!
//! Derivative-free optimization replaces an expensive function `f` with a
//! family of cheap surrogate models `{f̃_Δ}`, one per trust-region radius
//! `Δ ∈ (0, Δ̄]`. The family is *order-`N` accurate* when the modeling
//! error obeys `‖error‖ ≤ κ·Δᴺ` — at the base point, or uniformly over the
//! closed radius-`Δ` ball — for the function value, the gradient, or the
//! Hessian. This crate makes those guarantees first-class values
//! ([`AccuracyCertificate`]) and provides the calculus that propagates them
//! through arithmetic: given certified model families for parts, it derives
//! a certificate (an explicit constant, order, and a term-by-term trace) for
//! their product, quotient, power, or composition.
//!
//! The derived constants are fully explicit — they are computable from the
//! parts' certificates plus uniform bounds on the parts and their models
//! ([`UniformBound`]), with no hidden factors. The verification module
//! closes the loop empirically: it measures true model errors over a radius
//! grid, fits the observed convergence order, and checks the measured errors
//! against the derived bound at every radius.
//!
//! # Example
//!
//! Two certified model families with unit bounds combine into a product
//! certificate with constant `M₂κ₁ + M₁κ₂ = 2` plus a cross term, evaluated
//! here at unit radius cap:
//!
//! ```
//! use modelcalc::{
//!     product2_bound, AccuracyCertificate, Ball, BoundInputs, BoundQuantity,
//!     DerivativeLevel, Locality, Order, PartInputs, Point, Provenance, UniformBound,
//! };
//!
//! let base = Point::from_vec(vec![0.0]);
//! let part = |name: &str| -> modelcalc::Result<PartInputs> {
//!     let cert = AccuracyCertificate::new(
//!         DerivativeLevel::Function,
//!         Locality::Near,
//!         Order::finite(1.0)?,
//!         1.0,
//!         base.clone(),
//!         1.0,
//!     )?;
//!     let truth = UniformBound::new(
//!         BoundQuantity::AbsF,
//!         1.0,
//!         Locality::Near,
//!         base.clone(),
//!         1.0,
//!         Provenance::Analytic,
//!     )?;
//!     Ok(PartInputs::new(name, vec![cert], vec![truth], vec![]))
//! };
//!
//! let inputs = BoundInputs::new(vec![part("f1")?, part("f2")?], 1.0, base);
//! let bound = product2_bound(&inputs, DerivativeLevel::Function, Locality::Near)?;
//! assert_eq!(bound.order, Order::finite(1.0)?);
//! assert_eq!(bound.constant, 3.0);
//! # Ok::<(), modelcalc::Error>(())
//! ```

pub mod calculus;
pub mod cert;
pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod runner;
pub mod sample;
pub mod verify;

pub use calculus::{
    composition_bound, image_gradient_bound, power_bound, product2_bound, product_n_bound,
    quotient_bound, reciprocal_model_bound, zero_factor_refinement, BoundInputs, PartInputs,
};
pub use cert::{
    bound_from_certificate, matrix_norm, min_order, stacked_matrix_norm, weaken_order,
    AccuracyCertificate, Ball, BoundQuantity, CombinedBound, DerivativeLevel, Locality, Matrix,
    Order, Point, Provenance, TraceTerm, UniformBound,
};
pub use config::{
    parse_config, serialize_config, BoundOverride, BoundSide, CheckSpec, Config, Expectation,
    GridSpec, LeafModel, TreeNode,
};
pub use error::{Error, Result};
pub use model::{
    combine_model_classes, make_exact_class, make_interpolation_class, make_synthetic_class,
    shift_to_interpolate, CombineKind, ModelClass, SyntheticTerm,
};
pub use oracle::{combine_oracles, make_test_suite, oracle_by_name, oracle_names, SmoothOracle,
    Smoothness};
pub use runner::{
    run_experiment, write_reports, CheckOutcome, ExperimentResult, Verdict, EXACT_ERROR_CEILING,
    ORDER_SLOPE_HIGH, ORDER_SLOPE_LOW,
};
pub use sample::{ball_points, halton_points, BallSampler};
pub use verify::{
    annotate_bounds, check_bound, estimate_order, finite_difference_check, measure_errors,
    run_counterexamples, sample_uniform_bound, BoundCheck, CounterexampleCase,
    CounterexampleReport, DeltaGrid, ErrorPoint, ErrorSeries, FdCheck, OrderEstimate,
    OrderVerdict,
};
