//! Evaluable smooth functions with exact derivatives.
//!
//! A [`SmoothOracle`] bundles a function `R^d → R^m` with its analytic
//! Jacobian and Hessians, tagged by a smoothness class. Oracles play two
//! roles: *truth* functions that model classes approximate, and the *models*
//! themselves (a model class is a family of oracles indexed by a radius).
//!
//! The module provides:
//!
//! * [`make_test_suite`] / [`oracle_by_name`] — a fixed catalogue of C³
//!   functions in dimensions 1–3 (affine, quadratic with cross terms,
//!   exponential of an inner product, sin/cos composites, a positive function
//!   bounded away from zero for quotient denominators, a function with a root
//!   at the origin, the constant one) and three C³ mappings `R² → R²` for
//!   composition experiments. Each entry carries analytic suprema of `|f|`,
//!   `‖∇f‖`, `‖∇²f‖`, and a Hessian Lipschitz constant over any queried
//!   ball, so bound computations can use rigorous constants instead of
//!   sampled estimates.
//! * [`combine_oracles`] — exact structural combination: product, quotient,
//!   integer power, and composition, with gradients and Hessians propagated
//!   by the exact product, quotient, and chain rules. The Hessian of a
//!   composition `f₂ ∘ f₁` is `J₁ᵀ ∇²f₂|_{f₁} J₁ + Σ_k (∂_k f₂)|_{f₁} ∇²(f₁)_k`.
//!
//! Derivatives here are analytic, never numeric: the finite-difference
//! checker in the verification module exists to confirm them, not to supply
//! them. Quotient oracles do not guard against the denominator changing sign
//! inside a ball — that safety is a precondition of the bound calculus, where
//! the denominator's reciprocal must be certified bounded.
//!
//! All oracles are immutable and their closures are pure; concurrent
//! evaluation is safe.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::cert::{Ball, BoundQuantity, Matrix, Point};
use crate::error::{Error, Result};

/// Smoothness class of an oracle: how many continuous derivatives it has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Smoothness {
    /// Continuous, no derivatives exposed.
    C0,
    /// Continuously differentiable.
    C1,
    /// Twice continuously differentiable.
    C2,
    /// Three times continuously differentiable.
    C3,
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothness::C0 => "C0",
            Smoothness::C1 => "C1",
            Smoothness::C2 => "C2",
            Smoothness::C3 => "C3",
        })
    }
}

type EvalFn = Arc<dyn Fn(&Point) -> Result<DVector<f64>> + Send + Sync>;
type GradFn = Arc<dyn Fn(&Point) -> Result<Matrix> + Send + Sync>;
type HessFn = Arc<dyn Fn(&Point) -> Result<Vec<Matrix>> + Send + Sync>;
type BoundFn = Arc<dyn Fn(&Ball, BoundQuantity) -> Option<f64> + Send + Sync>;

/// An evaluable function `R^d → R^m` with analytic derivatives.
///
/// The Jacobian is an `m×d` matrix (the gradient as a row when `m = 1`); the
/// Hessian is a list of `m` symmetric `d×d` matrices, one per output
/// component. Derivative accessors respect the smoothness tag: asking a `C1`
/// oracle for a Hessian is an error, not a panic.
///
/// An oracle may carry an analytic bound provider: given a closed ball and a
/// [`BoundQuantity`], it returns a rigorous upper bound for the supremum of
/// that quantity over the ball (`None` when no closed form is available). A
/// zero-radius ball asks for the value at the center, so the same provider
/// serves both pointwise and ball-wide bounds.
#[derive(Clone)]
pub struct SmoothOracle {
    /// Display name (catalogue key or combination expression).
    pub name: String,
    /// Input dimension `d`.
    pub dim_in: usize,
    /// Output dimension `m` (1 for scalar functions).
    pub dim_out: usize,
    /// Smoothness class; gates the derivative accessors.
    pub smoothness: Smoothness,
    eval_fn: EvalFn,
    grad_fn: Option<GradFn>,
    hess_fn: Option<HessFn>,
    bound_fn: Option<BoundFn>,
}

impl fmt::Debug for SmoothOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothOracle")
            .field("name", &self.name)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("smoothness", &self.smoothness)
            .field("has_bounds", &self.bound_fn.is_some())
            .finish()
    }
}

impl SmoothOracle {
    /// Creates an oracle from raw closures.
    ///
    /// The gradient closure must be present iff smoothness ≥ C1 and the
    /// Hessian closure iff smoothness ≥ C2.
    pub fn new(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        smoothness: Smoothness,
        eval_fn: EvalFn,
        grad_fn: Option<GradFn>,
        hess_fn: Option<HessFn>,
    ) -> Result<Self> {
        if (smoothness >= Smoothness::C1) != grad_fn.is_some() {
            return Err(Error::Smoothness(format!(
                "oracle must provide a gradient exactly when smoothness >= C1 (got {smoothness})"
            )));
        }
        if (smoothness >= Smoothness::C2) != hess_fn.is_some() {
            return Err(Error::Smoothness(format!(
                "oracle must provide a Hessian exactly when smoothness >= C2 (got {smoothness})"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim_in,
            dim_out,
            smoothness,
            eval_fn,
            grad_fn,
            hess_fn,
            bound_fn: None,
        })
    }

    /// Convenience constructor for a C³ scalar function from infallible
    /// closures for value, gradient (length-`d` vector), and Hessian.
    pub fn scalar_c3(
        name: impl Into<String>,
        dim_in: usize,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        g: impl Fn(&Point) -> Point + Send + Sync + 'static,
        h: impl Fn(&Point) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        let dim = dim_in;
        Self {
            name: name.into(),
            dim_in,
            dim_out: 1,
            smoothness: Smoothness::C3,
            eval_fn: Arc::new(move |x| Ok(DVector::from_element(1, f(x)))),
            grad_fn: Some(Arc::new(move |x| Ok(Matrix::from_rows(&[g(x).transpose()])))),
            hess_fn: Some(Arc::new(move |x| {
                let h = h(x);
                debug_assert_eq!(h.nrows(), dim);
                Ok(vec![h])
            })),
            bound_fn: None,
        }
    }

    /// Convenience constructor for a C³ mapping from infallible closures for
    /// value, Jacobian (`m×d`), and per-component Hessians.
    pub fn mapping_c3(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&Point) -> Matrix + Send + Sync + 'static,
        hess: impl Fn(&Point) -> Vec<Matrix> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim_in,
            dim_out,
            smoothness: Smoothness::C3,
            eval_fn: Arc::new(move |x| Ok(f(x))),
            grad_fn: Some(Arc::new(move |x| Ok(jac(x)))),
            hess_fn: Some(Arc::new(move |x| Ok(hess(x)))),
            bound_fn: None,
        }
    }

    /// Attaches an analytic bound provider.
    pub fn with_bounds(
        mut self,
        bounds: impl Fn(&Ball, BoundQuantity) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.bound_fn = Some(Arc::new(bounds));
        self
    }

    /// True for scalar-valued oracles (`m = 1`).
    pub fn is_scalar(&self) -> bool {
        self.dim_out == 1
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim_in {
            return Err(Error::Incompatible(format!(
                "oracle '{}' expects dimension {}, got a point of dimension {}",
                self.name,
                self.dim_in,
                x.len()
            )));
        }
        Ok(())
    }

    /// Evaluates the function (length-`m` vector).
    pub fn eval(&self, x: &Point) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let v = (self.eval_fn)(x)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!(
                "oracle '{}' produced a non-finite value at {:?}",
                self.name,
                x.as_slice()
            )));
        }
        Ok(v)
    }

    /// Evaluates a scalar oracle.
    pub fn eval_scalar(&self, x: &Point) -> Result<f64> {
        if !self.is_scalar() {
            return Err(Error::Incompatible(format!(
                "oracle '{}' is vector-valued (m = {})",
                self.name, self.dim_out
            )));
        }
        Ok(self.eval(x)?[0])
    }

    /// The `m×d` Jacobian (gradient as a row when `m = 1`).
    pub fn grad(&self, x: &Point) -> Result<Matrix> {
        self.check_dim(x)?;
        let f = self.grad_fn.as_ref().ok_or_else(|| {
            Error::Smoothness(format!(
                "oracle '{}' has smoothness {} and exposes no gradient",
                self.name, self.smoothness
            ))
        })?;
        f(x)
    }

    /// The gradient of a scalar oracle as a length-`d` vector.
    pub fn gradient(&self, x: &Point) -> Result<Point> {
        if !self.is_scalar() {
            return Err(Error::Incompatible(format!(
                "oracle '{}' is vector-valued; use grad() for its Jacobian",
                self.name
            )));
        }
        Ok(self.grad(x)?.row(0).transpose())
    }

    /// The list of `m` Hessians, one `d×d` matrix per output component.
    pub fn hess(&self, x: &Point) -> Result<Vec<Matrix>> {
        self.check_dim(x)?;
        let f = self.hess_fn.as_ref().ok_or_else(|| {
            Error::Smoothness(format!(
                "oracle '{}' has smoothness {} and exposes no Hessian",
                self.name, self.smoothness
            ))
        })?;
        f(x)
    }

    /// The Hessian of a scalar oracle.
    pub fn hessian(&self, x: &Point) -> Result<Matrix> {
        if !self.is_scalar() {
            return Err(Error::Incompatible(format!(
                "oracle '{}' is vector-valued; use hess() for its Hessian list",
                self.name
            )));
        }
        Ok(self.hess(x)?.remove(0))
    }

    /// A rigorous analytic upper bound for the supremum of `quantity` over
    /// the ball, when a closed form is known. A zero-radius ball yields the
    /// value at the center.
    pub fn analytic_bound(&self, ball: &Ball, quantity: BoundQuantity) -> Option<f64> {
        self.bound_fn.as_ref().and_then(|f| f(ball, quantity))
    }
}

// ---------------------------------------------------------------------------
// Interval helpers for trigonometric suprema.
// ---------------------------------------------------------------------------

/// True if `[lo, hi]` contains a point of the form `offset + k·π`.
fn interval_hits(lo: f64, hi: f64, offset: f64, period: f64) -> bool {
    let k = ((lo - offset) / period).ceil();
    offset + k * period <= hi
}

/// `max |sin t|` over `t ∈ [lo, hi]`.
fn max_abs_sin(lo: f64, hi: f64) -> f64 {
    if interval_hits(lo, hi, PI / 2.0, PI) {
        1.0
    } else {
        lo.sin().abs().max(hi.sin().abs())
    }
}

/// `max |cos t|` over `t ∈ [lo, hi]`.
fn max_abs_cos(lo: f64, hi: f64) -> f64 {
    if interval_hits(lo, hi, 0.0, PI) {
        1.0
    } else {
        lo.cos().abs().max(hi.cos().abs())
    }
}

/// `min cos t` over `t ∈ [lo, hi]`.
fn min_cos(lo: f64, hi: f64) -> f64 {
    if interval_hits(lo, hi, PI, 2.0 * PI) {
        -1.0
    } else {
        lo.cos().min(hi.cos())
    }
}

/// `max cos t` over `t ∈ [lo, hi]`.
fn max_cos(lo: f64, hi: f64) -> f64 {
    if interval_hits(lo, hi, 0.0, 2.0 * PI) {
        1.0
    } else {
        lo.cos().max(hi.cos())
    }
}

// ---------------------------------------------------------------------------
// Catalogue.
// ---------------------------------------------------------------------------

/// The unit direction `a` used by catalogue functions of dimension `d`.
fn dir_a(d: usize) -> Point {
    match d {
        1 => Point::from_vec(vec![1.0]),
        2 => Point::from_vec(vec![0.6, 0.8]),
        3 => Point::from_vec(vec![2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0]),
        _ => unreachable!("catalogue dimensions are 1..=3"),
    }
}

/// A second unit direction `b`, linearly independent of `a` for `d ≥ 2`.
fn dir_b(d: usize) -> Point {
    match d {
        1 => Point::from_vec(vec![1.0]),
        2 => Point::from_vec(vec![0.8, -0.6]),
        3 => Point::from_vec(vec![1.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0]),
        _ => unreachable!("catalogue dimensions are 1..=3"),
    }
}

/// The symmetric matrix with cross terms used by `quad{d}`.
fn quad_matrix(d: usize) -> Matrix {
    match d {
        1 => Matrix::from_row_slice(1, 1, &[1.5]),
        2 => Matrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 0.75]),
        3 => Matrix::from_row_slice(
            3,
            3,
            &[1.0, 0.25, 0.0, 0.25, 0.75, 0.2, 0.0, 0.2, 1.25],
        ),
        _ => unreachable!("catalogue dimensions are 1..=3"),
    }
}

/// Range of `aᵀx` for `x` in the ball (`‖a‖ = 1` for all catalogue
/// directions, so the range has half-width `radius`).
fn inner_range(a: &Point, ball: &Ball) -> (f64, f64) {
    let t = a.dot(&ball.center);
    (t - ball.radius * a.norm(), t + ball.radius * a.norm())
}

fn affine_oracle(d: usize) -> SmoothOracle {
    let a = dir_a(d);
    let a2 = a.clone();
    let a3 = a.clone();
    let ab = a.clone();
    SmoothOracle::scalar_c3(
        format!("affine{d}"),
        d,
        move |x| 0.5 + a.dot(x),
        move |_| a2.clone(),
        move |_| Matrix::zeros(d, d),
    )
    .with_bounds(move |ball, q| {
        let val = 0.5 + ab.dot(&ball.center);
        match q {
            BoundQuantity::AbsF => Some(val.abs() + ball.radius * a3.norm()),
            BoundQuantity::NormGrad => Some(a3.norm()),
            BoundQuantity::NormHess | BoundQuantity::NormThird => Some(0.0),
            _ => None,
        }
    })
}

fn quad_oracle(d: usize) -> SmoothOracle {
    let a = quad_matrix(d);
    let a2 = a.clone();
    let a3 = a.clone();
    let ab = a.clone();
    SmoothOracle::scalar_c3(
        format!("quad{d}"),
        d,
        move |x| (x.transpose() * &a * x)[0],
        move |x| 2.0 * (&a2 * x),
        move |_| 2.0 * a3.clone(),
    )
    .with_bounds(move |ball, q| {
        let c = &ball.center;
        let r = ball.radius;
        let an = ab.norm();
        match q {
            BoundQuantity::AbsF => {
                let val = (c.transpose() * &ab * c)[0];
                Some(val.abs() + 2.0 * (&ab * c).norm() * r + an * r * r)
            }
            BoundQuantity::NormGrad => Some(2.0 * (&ab * c).norm() + 2.0 * an * r),
            BoundQuantity::NormHess => Some(2.0 * an),
            BoundQuantity::NormThird => Some(0.0),
            _ => None,
        }
    })
}

fn exp_oracle(d: usize) -> SmoothOracle {
    let a = dir_a(d);
    let a2 = a.clone();
    let a3 = a.clone();
    let ab = a.clone();
    SmoothOracle::scalar_c3(
        format!("exp{d}"),
        d,
        move |x| a.dot(x).exp(),
        move |x| a2.dot(x).exp() * a2.clone(),
        move |x| a3.dot(x).exp() * (&a3 * a3.transpose()),
    )
    .with_bounds(move |ball, q| {
        let (_, hi) = inner_range(&ab, ball);
        let peak = hi.exp();
        // ‖a‖ = 1, so value, gradient norm, Hessian norm, and the Hessian
        // Lipschitz constant all share the same exponential envelope.
        match q {
            BoundQuantity::AbsF
            | BoundQuantity::NormGrad
            | BoundQuantity::NormHess
            | BoundQuantity::NormThird => Some(peak),
            _ => None,
        }
    })
}

fn sincos_oracle(d: usize) -> SmoothOracle {
    let a = dir_a(d);
    let b = dir_b(d);
    let (a2, b2) = (a.clone(), b.clone());
    let (a3, b3) = (a.clone(), b.clone());
    let (ab, bb) = (a.clone(), b.clone());
    SmoothOracle::scalar_c3(
        format!("sincos{d}"),
        d,
        move |x| a.dot(x).sin() + b.dot(x).cos(),
        move |x| a2.dot(x).cos() * a2.clone() - b2.dot(x).sin() * b2.clone(),
        move |x| {
            -a3.dot(x).sin() * (&a3 * a3.transpose()) - b3.dot(x).cos() * (&b3 * b3.transpose())
        },
    )
    .with_bounds(move |ball, q| {
        let (alo, ahi) = inner_range(&ab, ball);
        let (blo, bhi) = inner_range(&bb, ball);
        // Separable envelopes; each direction has unit norm.
        match q {
            BoundQuantity::AbsF => Some(max_abs_sin(alo, ahi) + max_abs_cos(blo, bhi)),
            BoundQuantity::NormGrad => Some(max_abs_cos(alo, ahi) + max_abs_sin(blo, bhi)),
            BoundQuantity::NormHess => Some(max_abs_sin(alo, ahi) + max_abs_cos(blo, bhi)),
            BoundQuantity::NormThird => Some(max_abs_cos(alo, ahi) + max_abs_sin(blo, bhi)),
            _ => None,
        }
    })
}

fn pos_oracle(d: usize) -> SmoothOracle {
    let a = dir_a(d);
    let a2 = a.clone();
    let a3 = a.clone();
    let ab = a.clone();
    SmoothOracle::scalar_c3(
        format!("pos{d}"),
        d,
        move |x| 2.0 + a.dot(x).cos(),
        move |x| -a2.dot(x).sin() * a2.clone(),
        move |x| -a3.dot(x).cos() * (&a3 * a3.transpose()),
    )
    .with_bounds(move |ball, q| {
        let (lo, hi) = inner_range(&ab, ball);
        match q {
            BoundQuantity::AbsF => Some(2.0 + max_cos(lo, hi)),
            BoundQuantity::NormGrad => Some(max_abs_sin(lo, hi)),
            BoundQuantity::NormHess => Some(max_abs_cos(lo, hi)),
            BoundQuantity::NormThird => Some(max_abs_sin(lo, hi)),
            // 2 + cos ≥ 1 everywhere, so the reciprocal is bounded by the
            // reciprocal of the interval minimum.
            BoundQuantity::AbsRecip => Some(1.0 / (2.0 + min_cos(lo, hi))),
            _ => None,
        }
    })
}

fn root_oracle(d: usize) -> SmoothOracle {
    let a = dir_a(d);
    let a2 = a.clone();
    let ab = a.clone();
    SmoothOracle::scalar_c3(
        format!("root{d}"),
        d,
        move |x| a.dot(x) + x.dot(x),
        move |x| a2.clone() + 2.0 * x,
        move |_| 2.0 * Matrix::identity(d, d),
    )
    .with_bounds(move |ball, q| {
        let c = &ball.center;
        let r = ball.radius;
        let g0 = (&ab + 2.0 * c).norm();
        match q {
            BoundQuantity::AbsF => Some((ab.dot(c) + c.dot(c)).abs() + g0 * r + r * r),
            BoundQuantity::NormGrad => Some(g0 + 2.0 * r),
            BoundQuantity::NormHess => Some(2.0 * (d as f64).sqrt()),
            BoundQuantity::NormThird => Some(0.0),
            _ => None,
        }
    })
}

fn one_oracle(d: usize) -> SmoothOracle {
    SmoothOracle::scalar_c3(
        format!("one{d}"),
        d,
        |_| 1.0,
        move |_| Point::zeros(d),
        move |_| Matrix::zeros(d, d),
    )
    .with_bounds(|_, q| match q {
        BoundQuantity::AbsF | BoundQuantity::AbsRecip => Some(1.0),
        BoundQuantity::NormGrad | BoundQuantity::NormHess | BoundQuantity::NormThird => Some(0.0),
        _ => None,
    })
}

/// Linear mapping bounds shared by `idmap2` and `linmap2`: the Jacobian is a
/// constant matrix, so every bound is exact.
fn linear_map_oracle(name: &str, m: Matrix) -> SmoothOracle {
    let m2 = m.clone();
    let m3 = m.clone();
    let mb = m.clone();
    SmoothOracle::mapping_c3(
        name,
        m.ncols(),
        m.nrows(),
        move |x| &m * x,
        move |_| m2.clone(),
        move |x| vec![Matrix::zeros(x.len(), x.len()); m3.nrows()],
    )
    .with_bounds(move |ball, q| {
        let rows: Vec<f64> = (0..mb.nrows()).map(|i| mb.row(i).norm()).collect();
        match q {
            BoundQuantity::AbsF => Some((&mb * &ball.center).norm() + mb.norm() * ball.radius),
            // For a constant Jacobian the image-gradient constant and the
            // Frobenius supremum coincide: √(Σ ‖row_i‖²) = ‖M‖_F.
            BoundQuantity::NormGrad | BoundQuantity::ImageGrad => {
                Some(rows.iter().map(|r| r * r).sum::<f64>().sqrt())
            }
            BoundQuantity::NormHess | BoundQuantity::NormThird => Some(0.0),
            _ => None,
        }
    })
}

/// The curved mapping `g(x) = (x₁ − ½ cos x₂, x₂ + ½ sin x₁)`.
///
/// Component gradients depend on a single coordinate each, so their suprema
/// over a ball are attained at the center or at an axis sample point; the
/// deterministic ball sample therefore recovers the analytic image-gradient
/// constant exactly.
fn curve_oracle() -> SmoothOracle {
    SmoothOracle::mapping_c3(
        "curve2",
        2,
        2,
        |x| DVector::from_vec(vec![x[0] - 0.5 * x[1].cos(), x[1] + 0.5 * x[0].sin()]),
        |x| Matrix::from_row_slice(2, 2, &[1.0, 0.5 * x[1].sin(), 0.5 * x[0].cos(), 1.0]),
        |x| {
            vec![
                Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.5 * x[1].cos()]),
                Matrix::from_row_slice(2, 2, &[-0.5 * x[0].sin(), 0.0, 0.0, 0.0]),
            ]
        },
    )
    .with_bounds(|ball, q| {
        let (c1, c2) = (ball.center[0], ball.center[1]);
        let r = ball.radius;
        // ∇g₁ = (1, ½ sin x₂) and ∇g₂ = (½ cos x₁, 1): each depends on one
        // coordinate, whose range over the ball is an interval.
        let s = max_abs_sin(c2 - r, c2 + r);
        let c = max_abs_cos(c1 - r, c1 + r);
        let m1 = (1.0 + 0.25 * s * s).sqrt();
        let m2 = (1.0 + 0.25 * c * c).sqrt();
        let mbar = m1.hypot(m2);
        match q {
            BoundQuantity::AbsF => {
                let g1 = c1 - 0.5 * c2.cos();
                let g2 = c2 + 0.5 * c1.sin();
                Some(g1.hypot(g2) + mbar * r)
            }
            BoundQuantity::NormGrad | BoundQuantity::ImageGrad => Some(mbar),
            BoundQuantity::NormHess => Some(0.5 * (c * c + s * s).sqrt()),
            // Component Hessians are ½cos x₂ and −½sin x₁ in single entries;
            // each is 1-Lipschitz in its coordinate with slope ≤ ½.
            BoundQuantity::NormThird => Some(0.5 * std::f64::consts::SQRT_2),
            _ => None,
        }
    })
}

/// The fixed catalogue of test oracles: seven scalar families in dimensions
/// 1–3 and three C³ mappings `R² → R²`.
pub fn make_test_suite() -> Vec<SmoothOracle> {
    let mut suite = Vec::new();
    for d in 1..=3 {
        suite.push(affine_oracle(d));
        suite.push(quad_oracle(d));
        suite.push(exp_oracle(d));
        suite.push(sincos_oracle(d));
        suite.push(pos_oracle(d));
        suite.push(root_oracle(d));
        suite.push(one_oracle(d));
    }
    suite.push(linear_map_oracle("idmap2", Matrix::identity(2, 2)));
    suite.push(linear_map_oracle(
        "linmap2",
        Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]),
    ));
    suite.push(curve_oracle());
    suite
}

/// Names of all catalogue oracles, in suite order.
pub fn oracle_names() -> Vec<String> {
    make_test_suite().into_iter().map(|o| o.name).collect()
}

/// Looks up a catalogue oracle by name.
pub fn oracle_by_name(name: &str) -> Result<SmoothOracle> {
    make_test_suite()
        .into_iter()
        .find(|o| o.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown oracle name '{name}'")))
}

// ---------------------------------------------------------------------------
// Combination.
// ---------------------------------------------------------------------------

fn min_smoothness(parts: &[SmoothOracle]) -> Smoothness {
    parts
        .iter()
        .map(|p| p.smoothness)
        .min()
        .unwrap_or(Smoothness::C3)
}

fn require_scalar_same_dim(parts: &[SmoothOracle]) -> Result<usize> {
    let first = parts.first().ok_or(Error::EmptyInput("oracle parts"))?;
    let d = first.dim_in;
    for p in parts {
        if !p.is_scalar() {
            return Err(Error::Incompatible(format!(
                "part '{}' is vector-valued; this combination needs scalar parts",
                p.name
            )));
        }
        if p.dim_in != d {
            return Err(Error::Incompatible(format!(
                "part '{}' has input dimension {}, expected {}",
                p.name, p.dim_in, d
            )));
        }
    }
    Ok(d)
}

/// Binary product bound propagation: rigorous upper bounds for the product
/// from rigorous upper bounds of the factors (Leibniz envelopes).
fn product_bound_fn(p1: &SmoothOracle, p2: &SmoothOracle) -> Option<BoundFn> {
    let b1 = p1.bound_fn.clone()?;
    let b2 = p2.bound_fn.clone()?;
    Some(Arc::new(move |ball, q| {
        use BoundQuantity::*;
        let g1 = |q| b1(ball, q);
        let g2 = |q| b2(ball, q);
        match q {
            AbsF => Some(g1(AbsF)? * g2(AbsF)?),
            NormGrad => Some(g1(NormGrad)? * g2(AbsF)? + g1(AbsF)? * g2(NormGrad)?),
            NormHess => Some(
                g1(NormHess)? * g2(AbsF)?
                    + 2.0 * g1(NormGrad)? * g2(NormGrad)?
                    + g1(AbsF)? * g2(NormHess)?,
            ),
            NormThird => Some(
                g1(NormThird)? * g2(AbsF)?
                    + 3.0 * g1(NormHess)? * g2(NormGrad)?
                    + 3.0 * g1(NormGrad)? * g2(NormHess)?
                    + g1(AbsF)? * g2(NormThird)?,
            ),
            _ => None,
        }
    }))
}

fn combine_product(parts: &[SmoothOracle]) -> Result<SmoothOracle> {
    let d = require_scalar_same_dim(parts)?;
    if parts.len() < 2 {
        return Err(Error::InvalidArgument(
            "product needs at least two parts".into(),
        ));
    }
    let name = parts
        .iter()
        .map(|p| p.name.clone())
        .collect::<Vec<_>>()
        .join("*");
    let smooth = min_smoothness(parts);
    let owned: Arc<[SmoothOracle]> = parts.to_vec().into();

    let values = |ps: &[SmoothOracle], x: &Point| -> Result<Vec<f64>> {
        ps.iter().map(|p| p.eval_scalar(x)).collect()
    };
    let prod_except = |vals: &[f64], skip: &[usize]| -> f64 {
        vals.iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, v)| v)
            .product()
    };

    let ps = owned.clone();
    let eval_fn: EvalFn = Arc::new(move |x| {
        let vals = values(&ps, x)?;
        Ok(DVector::from_element(1, vals.iter().product()))
    });

    let ps = owned.clone();
    let grad_fn: Option<GradFn> = (smooth >= Smoothness::C1).then(|| {
        let f: GradFn = Arc::new(move |x: &Point| {
            let vals = values(&ps, x)?;
            let mut g = Point::zeros(x.len());
            for (i, p) in ps.iter().enumerate() {
                g += prod_except(&vals, &[i]) * p.gradient(x)?;
            }
            Ok(Matrix::from_rows(&[g.transpose()]))
        });
        f
    });

    let ps = owned.clone();
    let hess_fn: Option<HessFn> = (smooth >= Smoothness::C2).then(|| {
        let f: HessFn = Arc::new(move |x: &Point| {
            let vals = values(&ps, x)?;
            let grads: Vec<Point> = ps.iter().map(|p| p.gradient(x)).collect::<Result<_>>()?;
            let mut h = Matrix::zeros(x.len(), x.len());
            for (i, p) in ps.iter().enumerate() {
                h += prod_except(&vals, &[i]) * p.hessian(x)?;
            }
            for i in 0..ps.len() {
                for j in (i + 1)..ps.len() {
                    let coeff = prod_except(&vals, &[i, j]);
                    let cross = &grads[i] * grads[j].transpose();
                    h += coeff * (&cross + cross.transpose());
                }
            }
            Ok(vec![h])
        });
        f
    });

    let mut oracle = SmoothOracle::new(name, d, 1, smooth, eval_fn, grad_fn, hess_fn)?;
    // Fold binary Leibniz envelopes left-to-right for an n-ary bound provider.
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        let bf = product_bound_fn(&acc, p);
        acc = SmoothOracle {
            bound_fn: bf,
            ..acc.clone()
        };
    }
    oracle.bound_fn = acc.bound_fn;
    Ok(oracle)
}

fn combine_quotient(parts: &[SmoothOracle]) -> Result<SmoothOracle> {
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "quotient needs exactly two parts, got {}",
            parts.len()
        )));
    }
    let d = require_scalar_same_dim(parts)?;
    let name = format!("{}/{}", parts[0].name, parts[1].name);
    let smooth = min_smoothness(parts);
    let (num, den) = (parts[0].clone(), parts[1].clone());

    let check_den = |v: f64, x: &Point, name: &str| -> Result<f64> {
        if v == 0.0 {
            return Err(Error::Evaluation(format!(
                "denominator '{name}' vanishes at {:?}",
                x.as_slice()
            )));
        }
        Ok(v)
    };

    let (n0, d0) = (num.clone(), den.clone());
    let dn = den.name.clone();
    let eval_fn: EvalFn = Arc::new(move |x| {
        let v2 = check_den(d0.eval_scalar(x)?, x, &dn)?;
        Ok(DVector::from_element(1, n0.eval_scalar(x)? / v2))
    });

    let (n1, d1) = (num.clone(), den.clone());
    let dn = den.name.clone();
    let grad_fn: Option<GradFn> = (smooth >= Smoothness::C1).then(|| {
        let f: GradFn = Arc::new(move |x: &Point| {
            let v1 = n1.eval_scalar(x)?;
            let v2 = check_den(d1.eval_scalar(x)?, x, &dn)?;
            let g = n1.gradient(x)? / v2 - (v1 / (v2 * v2)) * d1.gradient(x)?;
            Ok(Matrix::from_rows(&[g.transpose()]))
        });
        f
    });

    let (n2, d2) = (num, den.clone());
    let dn = den.name.clone();
    let hess_fn: Option<HessFn> = (smooth >= Smoothness::C2).then(|| {
        let f: HessFn = Arc::new(move |x: &Point| {
            let v1 = n2.eval_scalar(x)?;
            let v2 = check_den(d2.eval_scalar(x)?, x, &dn)?;
            let (g1, g2) = (n2.gradient(x)?, d2.gradient(x)?);
            let cross = &g1 * g2.transpose();
            let h = n2.hessian(x)? / v2 - (&cross + cross.transpose()) / (v2 * v2)
                - (v1 / (v2 * v2)) * d2.hessian(x)?
                + (2.0 * v1 / (v2 * v2 * v2)) * (&g2 * g2.transpose());
            Ok(vec![h])
        });
        f
    });

    SmoothOracle::new(name, d, 1, smooth, eval_fn, grad_fn, hess_fn)
}

fn combine_power(part: &SmoothOracle, n: u32) -> Result<SmoothOracle> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "power exponent must be at least 1".into(),
        ));
    }
    if !part.is_scalar() {
        return Err(Error::Incompatible(format!(
            "power needs a scalar part, '{}' is vector-valued",
            part.name
        )));
    }
    let d = part.dim_in;
    let name = format!("{}^{n}", part.name);
    let smooth = part.smoothness;
    let ni = n as i32;
    let nf = f64::from(n);

    let p0 = part.clone();
    let eval_fn: EvalFn = Arc::new(move |x| {
        Ok(DVector::from_element(1, p0.eval_scalar(x)?.powi(ni)))
    });

    let p1 = part.clone();
    let grad_fn: Option<GradFn> = (smooth >= Smoothness::C1).then(|| {
        let f: GradFn = Arc::new(move |x: &Point| {
            let v = p1.eval_scalar(x)?;
            let g = nf * v.powi(ni - 1) * p1.gradient(x)?;
            Ok(Matrix::from_rows(&[g.transpose()]))
        });
        f
    });

    let p2 = part.clone();
    let hess_fn: Option<HessFn> = (smooth >= Smoothness::C2).then(|| {
        let f: HessFn = Arc::new(move |x: &Point| {
            let v = p2.eval_scalar(x)?;
            let g = p2.gradient(x)?;
            let mut h = nf * v.powi(ni - 1) * p2.hessian(x)?;
            if n >= 2 {
                h += nf * (nf - 1.0) * v.powi(ni - 2) * (&g * g.transpose());
            }
            Ok(vec![h])
        });
        f
    });

    let mut oracle = SmoothOracle::new(name, d, 1, smooth, eval_fn, grad_fn, hess_fn)?;
    let mut acc = part.clone();
    for _ in 1..n {
        let bf = product_bound_fn(&acc, part);
        acc = SmoothOracle {
            bound_fn: bf,
            ..acc.clone()
        };
    }
    oracle.bound_fn = acc.bound_fn;
    Ok(oracle)
}

fn combine_composition(parts: &[SmoothOracle]) -> Result<SmoothOracle> {
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "composition needs exactly two parts (inner, outer), got {}",
            parts.len()
        )));
    }
    let (inner, outer) = (parts[0].clone(), parts[1].clone());
    if outer.dim_in != inner.dim_out {
        return Err(Error::Incompatible(format!(
            "outer part '{}' expects dimension {}, inner part '{}' produces {}",
            outer.name, outer.dim_in, inner.name, inner.dim_out
        )));
    }
    let d = inner.dim_in;
    let m_out = outer.dim_out;
    let name = format!("{}({})", outer.name, inner.name);
    let smooth = min_smoothness(parts);

    let (i0, o0) = (inner.clone(), outer.clone());
    let eval_fn: EvalFn = Arc::new(move |x| o0.eval(&i0.eval(x)?));

    let (i1, o1) = (inner.clone(), outer.clone());
    let grad_fn: Option<GradFn> = (smooth >= Smoothness::C1).then(|| {
        let f: GradFn = Arc::new(move |x: &Point| {
            let y = i1.eval(x)?;
            Ok(o1.grad(&y)? * i1.grad(x)?)
        });
        f
    });

    let (i2, o2) = (inner, outer);
    let hess_fn: Option<HessFn> = (smooth >= Smoothness::C2).then(|| {
        let f: HessFn = Arc::new(move |x: &Point| {
            let y = i2.eval(x)?;
            let j1 = i2.grad(x)?;
            let j2 = o2.grad(&y)?;
            let h1 = i2.hess(x)?;
            let h2 = o2.hess(&y)?;
            // Per output component i of the outer function:
            //   H_i = J₁ᵀ ∇²(f₂)_i J₁ + Σ_k (∂_k (f₂)_i) ∇²(f₁)_k.
            let mut out = Vec::with_capacity(h2.len());
            for (i, h2i) in h2.iter().enumerate() {
                let mut h = j1.transpose() * h2i * &j1;
                for (k, h1k) in h1.iter().enumerate() {
                    h += j2[(i, k)] * h1k;
                }
                out.push(h);
            }
            Ok(out)
        });
        f
    });

    SmoothOracle::new(name, d, m_out, smooth, eval_fn, grad_fn, hess_fn)
}

/// Combines oracles structurally with exact derivative propagation.
///
/// * `Product`: `n ≥ 2` scalar parts with a common input dimension.
/// * `Quotient`: exactly two scalar parts (numerator, denominator);
///   evaluating where the denominator vanishes is an evaluation error
///   carrying the point.
/// * `Power(n)`: one scalar part, `n ≥ 1`.
/// * `Composition`: `[f₁, f₂]` with `f₁: R^d → R^m` and `f₂` taking
///   `m`-dimensional inputs.
///
/// The result's smoothness is the minimum of the parts'. Product and power
/// results keep an analytic bound provider (Leibniz envelopes) when all parts
/// have one; quotient and composition bounds have no general closed form and
/// are left to sampling or explicit overrides.
///
/// # Examples
///
/// ```
/// use modelcalc::{combine_oracles, oracle_by_name, CombineKind, Point};
///
/// let p = oracle_by_name("pos1").unwrap();
/// let sq = combine_oracles(CombineKind::Power(2), &[p.clone()]).unwrap();
/// let x = Point::from_vec(vec![0.3]);
/// let v = p.eval_scalar(&x).unwrap();
/// assert!((sq.eval_scalar(&x).unwrap() - v * v).abs() < 1e-15);
/// ```
pub fn combine_oracles(
    kind: crate::model::CombineKind,
    parts: &[SmoothOracle],
) -> Result<SmoothOracle> {
    use crate::model::CombineKind;
    match kind {
        CombineKind::Product => combine_product(parts),
        CombineKind::Quotient => combine_quotient(parts),
        CombineKind::Power(n) => {
            let part = parts.first().ok_or(Error::EmptyInput("oracle parts"))?;
            if parts.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "power takes exactly one part, got {}",
                    parts.len()
                )));
            }
            combine_power(part, n)
        }
        CombineKind::Composition => combine_composition(parts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CombineKind;

    fn identity1() -> SmoothOracle {
        SmoothOracle::scalar_c3(
            "x",
            1,
            |x| x[0],
            |_| Point::from_vec(vec![1.0]),
            |_| Matrix::zeros(1, 1),
        )
    }

    #[test]
    fn catalogue_has_expected_entries() {
        let names = oracle_names();
        for d in 1..=3 {
            for stem in ["affine", "quad", "exp", "sincos", "pos", "root", "one"] {
                assert!(names.contains(&format!("{stem}{d}")), "missing {stem}{d}");
            }
        }
        for name in ["idmap2", "linmap2", "curve2"] {
            assert!(names.contains(&name.to_string()), "missing {name}");
        }
        assert!(oracle_by_name("nope").is_err());
    }

    #[test]
    fn quadratic_vanishes_at_origin() {
        for d in 1..=3 {
            let q = oracle_by_name(&format!("quad{d}")).unwrap();
            let zero = Point::zeros(d);
            assert_eq!(q.eval_scalar(&zero).unwrap(), 0.0);
            assert_eq!(q.gradient(&zero).unwrap(), Point::zeros(d));
        }
    }

    #[test]
    fn exp_is_one_at_origin() {
        for d in 1..=3 {
            let e = oracle_by_name(&format!("exp{d}")).unwrap();
            assert_eq!(e.eval_scalar(&Point::zeros(d)).unwrap(), 1.0);
        }
    }

    #[test]
    fn root_vanishes_at_origin() {
        for d in 1..=3 {
            let r = oracle_by_name(&format!("root{d}")).unwrap();
            assert_eq!(r.eval_scalar(&Point::zeros(d)).unwrap(), 0.0);
        }
    }

    #[test]
    fn pos_stays_above_one() {
        let p = oracle_by_name("pos2").unwrap();
        for t in 0..100 {
            let x = Point::from_vec(vec![t as f64 * 0.37, t as f64 * -0.21]);
            assert!(p.eval_scalar(&x).unwrap() >= 1.0);
        }
    }

    #[test]
    fn product_of_identities_is_square() {
        let sq = combine_oracles(CombineKind::Product, &[identity1(), identity1()]).unwrap();
        let x = Point::from_vec(vec![3.0]);
        assert_eq!(sq.eval_scalar(&x).unwrap(), 9.0);
        assert_eq!(sq.gradient(&x).unwrap()[0], 6.0);
        assert_eq!(sq.hessian(&x).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn quotient_matches_reciprocal() {
        let q =
            combine_oracles(CombineKind::Quotient, &[one_oracle(1), identity1()]).unwrap();
        let x = Point::from_vec(vec![2.0]);
        assert_eq!(q.eval_scalar(&x).unwrap(), 0.5);
        assert_eq!(q.gradient(&x).unwrap()[0], -0.25);
        assert_eq!(q.hessian(&x).unwrap()[(0, 0)], 0.25);
    }

    #[test]
    fn quotient_reports_vanishing_denominator() {
        let q =
            combine_oracles(CombineKind::Quotient, &[one_oracle(1), identity1()]).unwrap();
        let err = q.eval_scalar(&Point::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::Evaluation(_)));
        assert!(err.to_string().contains("0.0"));
    }

    #[test]
    fn composition_norm_squared_of_identity() {
        let norm_sq = SmoothOracle::scalar_c3(
            "normsq",
            2,
            |y| y.dot(y),
            |y| 2.0 * y,
            |_| 2.0 * Matrix::identity(2, 2),
        );
        let id = oracle_by_name("idmap2").unwrap();
        let c = combine_oracles(CombineKind::Composition, &[id, norm_sq]).unwrap();
        let x = Point::from_vec(vec![1.0, 1.0]);
        assert_eq!(c.eval_scalar(&x).unwrap(), 2.0);
        assert_eq!(c.gradient(&x).unwrap(), Point::from_vec(vec![2.0, 2.0]));
        assert_eq!(c.hessian(&x).unwrap(), 2.0 * Matrix::identity(2, 2));
    }

    #[test]
    fn power_matches_repeated_product() {
        let p = oracle_by_name("pos2").unwrap();
        let cube = combine_oracles(CombineKind::Power(3), &[p.clone()]).unwrap();
        let prod =
            combine_oracles(CombineKind::Product, &[p.clone(), p.clone(), p]).unwrap();
        let x = Point::from_vec(vec![0.4, -0.3]);
        let (a, b) = (cube.eval_scalar(&x).unwrap(), prod.eval_scalar(&x).unwrap());
        assert!((a - b).abs() <= 1e-12 * b.abs());
        let (ga, gb) = (cube.gradient(&x).unwrap(), prod.gradient(&x).unwrap());
        assert!((&ga - &gb).norm() <= 1e-12 * gb.norm());
        let (ha, hb) = (cube.hessian(&x).unwrap(), prod.hessian(&x).unwrap());
        assert!((&ha - &hb).norm() <= 1e-12 * hb.norm());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = combine_oracles(
            CombineKind::Product,
            &[oracle_by_name("affine1").unwrap(), oracle_by_name("affine2").unwrap()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
    }

    #[test]
    fn analytic_bounds_dominate_samples() {
        use crate::sample::ball_points;
        // Every analytic bound must dominate the corresponding sampled
        // maximum; for this catalogue and centered balls most are equalities
        // at center or axis points.
        let ball = Ball::new(Point::from_vec(vec![0.2, -0.1]), 0.5).unwrap();
        for name in ["affine2", "quad2", "exp2", "sincos2", "pos2", "root2", "one2"] {
            let o = oracle_by_name(name).unwrap();
            for q in [
                BoundQuantity::AbsF,
                BoundQuantity::NormGrad,
                BoundQuantity::NormHess,
            ] {
                let bound = o.analytic_bound(&ball, q).unwrap();
                let mut seen: f64 = 0.0;
                for p in ball_points(&ball, 64) {
                    let v = match q {
                        BoundQuantity::AbsF => o.eval(&p).unwrap().norm(),
                        BoundQuantity::NormGrad => o.grad(&p).unwrap().norm(),
                        BoundQuantity::NormHess => {
                            crate::cert::stacked_matrix_norm(&o.hess(&p).unwrap()).unwrap()
                        }
                        _ => unreachable!(),
                    };
                    seen = seen.max(v);
                }
                assert!(
                    bound >= seen - 1e-12,
                    "{name}/{q}: analytic {bound} below sampled {seen}"
                );
            }
        }
    }

    #[test]
    fn image_gradient_constants_for_linear_maps() {
        let ball = Ball::new(Point::zeros(2), 1.0).unwrap();
        let id = oracle_by_name("idmap2").unwrap();
        let lin = oracle_by_name("linmap2").unwrap();
        let a = id.analytic_bound(&ball, BoundQuantity::ImageGrad).unwrap();
        assert!((a - 2f64.sqrt()).abs() < 1e-15);
        let b = lin.analytic_bound(&ball, BoundQuantity::ImageGrad).unwrap();
        assert!((b - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_radius_ball_gives_pointwise_bounds() {
        let at = Ball::new(Point::zeros(2), 0.0).unwrap();
        let e = oracle_by_name("exp2").unwrap();
        assert_eq!(e.analytic_bound(&at, BoundQuantity::AbsF).unwrap(), 1.0);
        let p = oracle_by_name("pos2").unwrap();
        assert_eq!(p.analytic_bound(&at, BoundQuantity::AbsF).unwrap(), 3.0);
        assert_eq!(p.analytic_bound(&at, BoundQuantity::AbsRecip).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn smoothness_gates_derivatives() {
        let c1 = SmoothOracle::new(
            "c1",
            1,
            1,
            Smoothness::C1,
            Arc::new(|x: &Point| Ok(DVector::from_element(1, x[0].abs() * x[0]))),
            Some(Arc::new(|x: &Point| {
                Ok(Matrix::from_element(1, 1, 2.0 * x[0].abs()))
            })),
            None,
        )
        .unwrap();
        assert!(c1.grad(&Point::zeros(1)).is_ok());
        assert!(matches!(
            c1.hess(&Point::zeros(1)).unwrap_err(),
            Error::Smoothness(_)
        ));
    }

    #[test]
    fn trig_interval_maxima() {
        assert_eq!(max_abs_sin(0.0, PI), 1.0);
        assert!((max_abs_sin(0.1, 0.2) - 0.2f64.sin()).abs() < 1e-15);
        assert_eq!(max_abs_cos(-0.1, 0.1), 1.0);
        assert_eq!(min_cos(0.0, 2.0 * PI), -1.0);
        assert!((min_cos(0.1, 0.2) - 0.2f64.cos()).abs() < 1e-15);
    }
}
