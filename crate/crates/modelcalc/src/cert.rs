//! Core vocabulary: accuracy certificates, uniform bounds, and the little
//! algebra that connects them.
//!
//! A *model class* is a family of surrogate models `{f̃_Δ}` indexed by a
//! radius parameter `Δ ∈ (0, Δ̄]`. Its quality is described by
//! [`AccuracyCertificate`]s: a certificate of order `N` with constant `κ` at
//! derivative level ℓ promises
//!
//! ```text
//!     ‖D^ℓ f(x) − D^ℓ f̃_Δ(x)‖ ≤ κ · Δ^N      for all Δ ∈ (0, Δ̄],
//! ```
//!
//! either only at the base point `x₀` ([`Locality::At`]) or at every point of
//! the closed ball of radius `Δ` around `x₀` ([`Locality::Near`]). A `Near`
//! certificate implies the corresponding `At` certificate because the ball
//! contains its own center.
//!
//! [`UniformBound`]s are the companion notion: a single constant `M` that
//! dominates `|f|`, `‖∇f‖`, … over every radius in the family (equivalently,
//! order-0 accuracy). The four operations here are the primitive moves used
//! by every combination rule:
//!
//! * [`weaken_order`] — trade order for constant: an order-`N` certificate is
//!   also an order-`N′` certificate (`N′ ≤ N`) with constant `κ·Δ̄^(N−N′)`,
//!   because `κΔ^N = κΔ^{N−N′}·Δ^{N′} ≤ κΔ̄^{N−N′}·Δ^{N′}`.
//! * [`bound_from_certificate`] — a model-side uniform bound from a
//!   truth-side one: `M_f̃ = Δ̄^N·κ + M_f` by the triangle inequality.
//! * [`min_order`] — the "weakest link" rule shared by all combinations.
//! * [`matrix_norm`] — the Frobenius norm, fixed once for all Hessian
//!   comparisons. It is compatible with the Euclidean vector norm
//!   (`‖uvᵀ‖_F = ‖u‖₂‖v‖₂`) and submultiplicative, which is exactly what the
//!   bound derivations need.
//!
//! The special value [`Order::Infinite`] means the model is exact at that
//! level; it is legal only together with `κ = 0`, and every constructor here
//! enforces that.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point in `R^d` (column vector, `f64` entries).
pub type Point = DVector<f64>;

/// A dense real matrix (Jacobians, Hessians).
pub type Matrix = DMatrix<f64>;

/// A closed Euclidean ball `B̄_r(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    /// Center of the ball.
    pub center: Point,
    /// Radius (non-negative, finite).
    pub radius: f64,
}

impl Ball {
    /// Creates a closed ball, validating the radius.
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be finite and non-negative, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Derivative level an accuracy statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeLevel {
    /// Function values.
    Function,
    /// Gradients (Jacobians for vector-valued functions).
    Gradient,
    /// Hessians.
    Hessian,
}

impl DerivativeLevel {
    /// All three levels, in increasing derivative order.
    pub const ALL: [DerivativeLevel; 3] = [
        DerivativeLevel::Function,
        DerivativeLevel::Gradient,
        DerivativeLevel::Hessian,
    ];

    /// The uniform-bound quantity measuring the same object as this level.
    pub fn matching_quantity(self) -> BoundQuantity {
        match self {
            DerivativeLevel::Function => BoundQuantity::AbsF,
            DerivativeLevel::Gradient => BoundQuantity::NormGrad,
            DerivativeLevel::Hessian => BoundQuantity::NormHess,
        }
    }
}

impl fmt::Display for DerivativeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DerivativeLevel::Function => "function",
            DerivativeLevel::Gradient => "gradient",
            DerivativeLevel::Hessian => "hessian",
        };
        f.write_str(s)
    }
}

/// Whether an accuracy statement holds only at the base point or on the whole
/// radius-`Δ` ball around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Locality {
    /// Only at the base point `x₀`.
    At,
    /// At every point of the closed ball `B̄_Δ(x₀)`; implies [`Locality::At`].
    Near,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Locality::At => "at",
            Locality::Near => "near",
        })
    }
}

/// An accuracy order: a finite exponent `N ≥ 0` or infinity (exactness).
///
/// `Infinite` compares greater than every finite order. It is only legal in a
/// certificate whose constant is zero; [`AccuracyCertificate::new`] enforces
/// this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// Finite order `N ≥ 0`.
    Finite(f64),
    /// Exact at this level for every `Δ`; requires `κ = 0`.
    Infinite,
}

impl Order {
    /// Convenience constructor for a finite order.
    ///
    /// Returns an error if `n` is negative, NaN, or (float) infinity — use
    /// [`Order::Infinite`] for the exact case.
    pub fn finite(n: f64) -> Result<Self> {
        if !n.is_finite() || n < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "finite order must be a non-negative real, got {n}"
            )));
        }
        Ok(Order::Finite(n))
    }

    /// True if this is [`Order::Infinite`].
    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinite)
    }

    /// The order as an `f64`, mapping `Infinite` to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            Order::Finite(n) => n,
            Order::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Order {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(n) => write!(f, "{n}"),
            Order::Infinite => f.write_str("inf"),
        }
    }
}

/// Per-level accuracy certificate of a model class.
///
/// States that the family `{f̃_Δ}_{(0, delta_bar]}` satisfies
/// `‖D f − D f̃_Δ‖ ≤ kappa · Δ^order` at [`level`](Self::level), with
/// [`locality`](Self::locality) deciding whether the inequality holds at the
/// base point only or uniformly on `B̄_Δ(base)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCertificate {
    /// Derivative level the inequality refers to.
    pub level: DerivativeLevel,
    /// Accuracy order `N`.
    pub order: Order,
    /// Accuracy constant `κ ≥ 0`.
    pub kappa: f64,
    /// Where the inequality holds.
    pub locality: Locality,
    /// Base point `x₀`.
    pub base: Point,
    /// Radius cap `Δ̄ > 0` of the family.
    pub delta_bar: f64,
}

impl AccuracyCertificate {
    /// Creates a certificate, validating all invariants:
    /// `κ ≥ 0` finite, `Δ̄ > 0` finite, and `order = Infinite ⇒ κ = 0`.
    pub fn new(
        level: DerivativeLevel,
        locality: Locality,
        order: Order,
        kappa: f64,
        base: Point,
        delta_bar: f64,
    ) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "certificate constant must be finite and non-negative, got {kappa}"
            )));
        }
        if !delta_bar.is_finite() || delta_bar <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radius cap must be finite and positive, got {delta_bar}"
            )));
        }
        if order.is_infinite() && kappa != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "infinite order requires a zero constant, got kappa = {kappa}"
            )));
        }
        if let Order::Finite(n) = order {
            if !n.is_finite() || n < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "finite order must be a non-negative real, got {n}"
                )));
            }
        }
        Ok(Self {
            level,
            order,
            kappa,
            locality,
            base,
            delta_bar,
        })
    }

    /// The certified error bound `κ·Δ^N` at a given radius.
    ///
    /// For `order = Infinite` the bound is 0 (the constant is 0 by invariant).
    pub fn error_bound(&self, delta: f64) -> f64 {
        match self.order {
            _ if self.kappa == 0.0 => 0.0,
            Order::Finite(n) => self.kappa * delta.powf(n),
            Order::Infinite => 0.0,
        }
    }
}

/// What a uniform bound measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundQuantity {
    /// `|f|` (Euclidean norm for vector-valued functions).
    AbsF,
    /// `‖∇f‖` (Frobenius norm of the Jacobian for mappings).
    NormGrad,
    /// `‖∇²f‖` in the Frobenius sense (stacked over components for mappings).
    NormHess,
    /// `‖∇³f‖`: a Lipschitz constant of the Hessian in the Frobenius norm.
    NormThird,
    /// `|1/f|` for a scalar denominator.
    AbsRecip,
    /// Image-gradient constant `M̄ = ‖(M_{∇g_1}, …, M_{∇g_m})‖₂` of a mapping,
    /// which confines the image: `g(B_Δ(x₀)) ⊆ B̄_{M̄Δ}(g(x₀))`.
    ImageGrad,
}

impl fmt::Display for BoundQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundQuantity::AbsF => "abs_f",
            BoundQuantity::NormGrad => "norm_grad",
            BoundQuantity::NormHess => "norm_hess",
            BoundQuantity::NormThird => "norm_third",
            BoundQuantity::AbsRecip => "abs_recip",
            BoundQuantity::ImageGrad => "image_grad",
        })
    }
}

impl BoundQuantity {
    /// Parses the lowercase tag used in configs and reports.
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "abs_f" => BoundQuantity::AbsF,
            "norm_grad" => BoundQuantity::NormGrad,
            "norm_hess" => BoundQuantity::NormHess,
            "norm_third" => BoundQuantity::NormThird,
            "abs_recip" => BoundQuantity::AbsRecip,
            "image_grad" => BoundQuantity::ImageGrad,
            _ => return None,
        })
    }
}

/// How a uniform bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Supplied in closed form (e.g. from a catalogue function's structure).
    Analytic,
    /// Maximum over a deterministic ball sample; a lower bound on the true
    /// supremum, so verdicts using it are labelled.
    Sampled,
    /// Model-side bound derived by [`bound_from_certificate`].
    DerivedFromCertificate,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Sampled => "sampled",
            Provenance::DerivedFromCertificate => "derived_from_certificate",
        })
    }
}

/// A uniform bound `M` on some quantity of a function or model family.
///
/// With [`Locality::At`] the bound holds at the base point (for a model
/// family: for every `Δ`); with [`Locality::Near`] it holds on the whole ball
/// `B̄_{delta_bar}(base)`. For a plain (non-family) function an `At` bound is
/// simply the value at the base point, in which case `delta_bar` may be 0.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBound {
    /// What is bounded.
    pub quantity: BoundQuantity,
    /// The bound `M ≥ 0`.
    pub value: f64,
    /// Pointwise or ball-wide.
    pub locality: Locality,
    /// Base point.
    pub base: Point,
    /// Radius `Δ̄` the bound refers to (0 for a purely pointwise bound).
    pub delta_bar: f64,
    /// How the bound was obtained.
    pub provenance: Provenance,
}

impl UniformBound {
    /// Creates a uniform bound, validating `value ≥ 0` and `Δ̄ ≥ 0`.
    pub fn new(
        quantity: BoundQuantity,
        value: f64,
        locality: Locality,
        base: Point,
        delta_bar: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "uniform bound must be finite and non-negative, got {value}"
            )));
        }
        if !delta_bar.is_finite() || delta_bar < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radius cap must be finite and non-negative, got {delta_bar}"
            )));
        }
        Ok(Self {
            quantity,
            value,
            locality,
            base,
            delta_bar,
            provenance,
        })
    }
}

/// One contribution to a combined constant, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTerm {
    /// Name of the combination rule that produced the term, e.g.
    /// `product2/gradient/at`.
    pub rule: String,
    /// Human-readable description of the term.
    pub description: String,
    /// Numeric value of the term (its share of the constant).
    pub value: f64,
}

/// A derived accuracy statement `(N_F, K_F)` for a combined model class,
/// together with the terms that built the constant.
///
/// For additive formulas the trace terms sum to `constant`; for the
/// permutation-minimum product formula the trace records the winning
/// ordering's terms. Zero-valued annotation entries may be appended (e.g. to
/// flag a heuristic search); they do not disturb the sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedBound {
    /// Derivative level of the statement.
    pub level: DerivativeLevel,
    /// Locality of the statement.
    pub locality: Locality,
    /// Combined order `N_F`.
    pub order: Order,
    /// Combined constant `K_F ≥ 0`.
    pub constant: f64,
    /// Contributing terms.
    pub trace: Vec<TraceTerm>,
    /// Radius cap the statement is valid for. Combination rules may shrink
    /// this below the inputs' cap (reciprocal bounds, composition radius
    /// transfer).
    pub delta_bar: f64,
}

impl CombinedBound {
    /// The bound value `K_F · Δ^{N_F}` at a given radius.
    pub fn bound_at(&self, delta: f64) -> f64 {
        match self.order {
            _ if self.constant == 0.0 => 0.0,
            Order::Finite(n) => self.constant * delta.powf(n),
            Order::Infinite => 0.0,
        }
    }

    /// The dominant rule tag (first trace entry).
    pub fn rule(&self) -> &str {
        self.trace.first().map(|t| t.rule.as_str()).unwrap_or("")
    }
}

/// Weakens a certificate to a lower (or equal) order.
///
/// The returned certificate keeps level, locality, base, and radius cap, and
/// carries `κ′ = κ·Δ̄^(N−N′)`. For an infinite-order certificate the constant
/// stays 0 at any target. Weakening is transitive: going `N → N′ → N″` yields
/// the same constant as `N → N″`.
///
/// # Errors
///
/// [`Error::OrderViolation`] if `target` exceeds the certificate's order.
///
/// # Examples
///
/// ```
/// use modelcalc::{weaken_order, AccuracyCertificate, DerivativeLevel, Locality, Order, Point};
///
/// let cert = AccuracyCertificate::new(
///     DerivativeLevel::Function,
///     Locality::At,
///     Order::Finite(2.0),
///     3.0,
///     Point::zeros(1),
///     0.5,
/// )
/// .unwrap();
/// let weaker = weaken_order(&cert, Order::Finite(1.0)).unwrap();
/// assert_eq!(weaker.kappa, 1.5);
/// ```
pub fn weaken_order(cert: &AccuracyCertificate, target: Order) -> Result<AccuracyCertificate> {
    if target > cert.order {
        return Err(Error::OrderViolation {
            from: cert.order,
            to: target,
        });
    }
    let kappa = match (cert.order, target) {
        _ if cert.kappa == 0.0 => 0.0,
        (Order::Finite(n), Order::Finite(t)) => cert.kappa * cert.delta_bar.powf(n - t),
        // kappa > 0 with infinite order is ruled out by the constructor, and
        // target = Infinite with a finite certificate order is caught above.
        _ => 0.0,
    };
    AccuracyCertificate::new(
        cert.level,
        cert.locality,
        target,
        kappa,
        cert.base.clone(),
        cert.delta_bar,
    )
}

/// Derives a model-side uniform bound from a certificate and the matching
/// truth-side bound: `M_f̃ = Δ̄^N·κ + M_f` (and `M_f̃ = M_f` for an exact,
/// infinite-order certificate).
///
/// # Errors
///
/// * [`Error::QuantityMismatch`] if the certificate level and the bound
///   quantity measure different objects.
/// * [`Error::Incompatible`] if base point (bitwise), locality, or radius cap
///   differ.
///
/// # Examples
///
/// ```
/// use modelcalc::{
///     bound_from_certificate, AccuracyCertificate, BoundQuantity, DerivativeLevel, Locality,
///     Order, Point, Provenance, UniformBound,
/// };
///
/// let base = Point::zeros(1);
/// let cert = AccuracyCertificate::new(
///     DerivativeLevel::Gradient,
///     Locality::Near,
///     Order::Finite(2.0),
///     4.0,
///     base.clone(),
///     0.5,
/// )
/// .unwrap();
/// let truth = UniformBound::new(
///     BoundQuantity::NormGrad,
///     3.0,
///     Locality::Near,
///     base,
///     0.5,
///     Provenance::Analytic,
/// )
/// .unwrap();
/// let model = bound_from_certificate(&cert, &truth).unwrap();
/// assert_eq!(model.value, 4.0); // 0.5² · 4 + 3
/// ```
pub fn bound_from_certificate(
    cert: &AccuracyCertificate,
    truth_bound: &UniformBound,
) -> Result<UniformBound> {
    if cert.level.matching_quantity() != truth_bound.quantity {
        return Err(Error::QuantityMismatch {
            level: cert.level,
            quantity: truth_bound.quantity,
        });
    }
    if cert.base != truth_bound.base {
        return Err(Error::Incompatible(
            "certificate and truth bound have different base points".into(),
        ));
    }
    if cert.locality != truth_bound.locality {
        return Err(Error::Incompatible(format!(
            "certificate locality ({}) and truth bound locality ({}) differ",
            cert.locality, truth_bound.locality
        )));
    }
    if cert.delta_bar != truth_bound.delta_bar {
        return Err(Error::Incompatible(format!(
            "certificate radius cap ({}) and truth bound radius cap ({}) differ",
            cert.delta_bar, truth_bound.delta_bar
        )));
    }
    let value = match cert.order {
        _ if cert.kappa == 0.0 => truth_bound.value,
        Order::Finite(n) => cert.delta_bar.powf(n) * cert.kappa + truth_bound.value,
        Order::Infinite => truth_bound.value,
    };
    UniformBound::new(
        truth_bound.quantity,
        value,
        truth_bound.locality,
        truth_bound.base.clone(),
        truth_bound.delta_bar,
        Provenance::DerivedFromCertificate,
    )
}

/// Minimum of a non-empty list of orders, treating `Infinite` as larger than
/// every finite order. This is the "weakest link" rule every combination
/// formula uses for its combined order.
///
/// # Errors
///
/// [`Error::EmptyInput`] on an empty list.
pub fn min_order(orders: &[Order]) -> Result<Order> {
    let mut best = *orders.first().ok_or(Error::EmptyInput("list of orders"))?;
    for &o in &orders[1..] {
        if o < best {
            best = o;
        }
    }
    Ok(best)
}

/// Frobenius norm of a square matrix: `√(Σ h_ij²)`.
///
/// This is the matrix norm used throughout the crate for Hessians. It pairs
/// with the Euclidean vector norm via `‖uvᵀ‖_F = ‖u‖₂‖v‖₂` and is
/// submultiplicative, so all derived constants remain valid.
///
/// # Errors
///
/// [`Error::InvalidArgument`] if the matrix is not square or has non-finite
/// entries.
pub fn matrix_norm(h: &Matrix) -> Result<f64> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix norm expects a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix norm expects finite entries".into(),
        ));
    }
    Ok(h.norm())
}

/// Frobenius norm of a stack of Hessians (one per output component of a
/// mapping): `√(Σ_i ‖H_i‖_F²)`.
///
/// Used wherever a vector-valued function's second derivative is compared.
pub fn stacked_matrix_norm(hs: &[Matrix]) -> Result<f64> {
    let mut sum = 0.0;
    for h in hs {
        let n = matrix_norm(h)?;
        sum += n * n;
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Point {
        Point::zeros(2)
    }

    fn cert(order: Order, kappa: f64, delta_bar: f64) -> AccuracyCertificate {
        AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::At,
            order,
            kappa,
            base(),
            delta_bar,
        )
        .unwrap()
    }

    #[test]
    fn weaken_trades_order_for_constant() {
        let c = cert(Order::Finite(2.0), 3.0, 0.5);
        let w = weaken_order(&c, Order::Finite(1.0)).unwrap();
        assert_eq!(w.order, Order::Finite(1.0));
        assert_eq!(w.kappa, 1.5);
        assert_eq!(w.level, c.level);
        assert_eq!(w.locality, c.locality);
        assert_eq!(w.delta_bar, c.delta_bar);
    }

    #[test]
    fn weaken_to_same_order_is_identity() {
        let c = cert(Order::Finite(2.0), 3.0, 0.5);
        let w = weaken_order(&c, Order::Finite(2.0)).unwrap();
        assert_eq!(w, c);
    }

    #[test]
    fn weaken_infinite_order_keeps_zero_constant() {
        let c = cert(Order::Infinite, 0.0, 0.5);
        let w = weaken_order(&c, Order::Finite(3.0)).unwrap();
        assert_eq!(w.order, Order::Finite(3.0));
        assert_eq!(w.kappa, 0.0);
    }

    #[test]
    fn weaken_rejects_higher_target() {
        let c = cert(Order::Finite(1.0), 3.0, 0.5);
        let err = weaken_order(&c, Order::Finite(2.0)).unwrap_err();
        assert!(matches!(err, Error::OrderViolation { .. }));
        let err = weaken_order(&c, Order::Infinite).unwrap_err();
        assert!(matches!(err, Error::OrderViolation { .. }));
    }

    #[test]
    fn weaken_is_transitive() {
        let c = cert(Order::Finite(3.0), 2.0, 0.7);
        let two_steps =
            weaken_order(&weaken_order(&c, Order::Finite(2.0)).unwrap(), Order::Finite(0.5))
                .unwrap();
        let one_step = weaken_order(&c, Order::Finite(0.5)).unwrap();
        let rel = (two_steps.kappa - one_step.kappa).abs() / one_step.kappa;
        assert!(rel < 1e-12, "relative gap {rel}");
    }

    fn truth(quantity: BoundQuantity, value: f64, delta_bar: f64) -> UniformBound {
        UniformBound::new(
            quantity,
            value,
            Locality::At,
            base(),
            delta_bar,
            Provenance::Analytic,
        )
        .unwrap()
    }

    #[test]
    fn bound_from_certificate_first_order() {
        let c = cert(Order::Finite(1.0), 1.0, 1.0);
        let m = bound_from_certificate(&c, &truth(BoundQuantity::AbsF, 1.0, 1.0)).unwrap();
        assert_eq!(m.value, 2.0);
        assert_eq!(m.provenance, Provenance::DerivedFromCertificate);
    }

    #[test]
    fn bound_from_certificate_exact_model_adds_nothing() {
        let c = cert(Order::Infinite, 0.0, 1.0);
        let m = bound_from_certificate(&c, &truth(BoundQuantity::AbsF, 7.0, 1.0)).unwrap();
        assert_eq!(m.value, 7.0);
    }

    #[test]
    fn bound_from_certificate_second_order_gradient() {
        let c = AccuracyCertificate::new(
            DerivativeLevel::Gradient,
            Locality::At,
            Order::Finite(2.0),
            4.0,
            base(),
            0.5,
        )
        .unwrap();
        let m = bound_from_certificate(&c, &truth(BoundQuantity::NormGrad, 3.0, 0.5)).unwrap();
        assert_eq!(m.value, 4.0);
    }

    #[test]
    fn bound_from_certificate_rejects_mismatched_quantity() {
        let c = cert(Order::Finite(1.0), 1.0, 1.0);
        let err =
            bound_from_certificate(&c, &truth(BoundQuantity::NormGrad, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::QuantityMismatch { .. }));
    }

    #[test]
    fn bound_from_certificate_is_monotone() {
        let c1 = cert(Order::Finite(1.0), 1.0, 1.0);
        let c2 = cert(Order::Finite(1.0), 2.0, 1.0);
        let m1 = bound_from_certificate(&c1, &truth(BoundQuantity::AbsF, 1.0, 1.0)).unwrap();
        let m2 = bound_from_certificate(&c2, &truth(BoundQuantity::AbsF, 1.0, 1.0)).unwrap();
        let m3 = bound_from_certificate(&c1, &truth(BoundQuantity::AbsF, 2.0, 1.0)).unwrap();
        assert!(m2.value > m1.value);
        assert!(m3.value > m1.value);
    }

    #[test]
    fn min_order_picks_weakest() {
        assert_eq!(
            min_order(&[Order::Finite(2.0), Order::Finite(1.0)]).unwrap(),
            Order::Finite(1.0)
        );
        assert_eq!(
            min_order(&[Order::Infinite, Order::Finite(3.0)]).unwrap(),
            Order::Finite(3.0)
        );
        assert_eq!(
            min_order(&[Order::Finite(2.0), Order::Finite(2.0), Order::Finite(2.0)]).unwrap(),
            Order::Finite(2.0)
        );
        assert_eq!(min_order(&[Order::Infinite]).unwrap(), Order::Infinite);
        assert!(matches!(min_order(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn matrix_norm_frozen_values() {
        assert!((matrix_norm(&Matrix::identity(2, 2)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(matrix_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let diag = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        assert_eq!(matrix_norm(&diag).unwrap(), 5.0);
    }

    #[test]
    fn matrix_norm_rejects_bad_inputs() {
        assert!(matrix_norm(&Matrix::zeros(2, 3)).is_err());
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(matrix_norm(&m).is_err());
    }

    #[test]
    fn infinite_order_requires_zero_kappa() {
        let err = AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::At,
            Order::Infinite,
            1.0,
            base(),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn stacked_norm_matches_single() {
        let h = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        let single = matrix_norm(&h).unwrap();
        let stacked = stacked_matrix_norm(&[h.clone(), h]).unwrap();
        assert!((stacked - single * 2f64.sqrt()).abs() < 1e-12);
    }
}
