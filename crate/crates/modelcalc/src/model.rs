//! Certified model classes: families `{f̃_Δ}` with accuracy certificates.
//!
//! A [`ModelClass`] packages a truth oracle, a base point, a radius cap `Δ̄`,
//! a factory producing the model `f̃_Δ` for each `Δ ∈ (0, Δ̄]`, and the
//! accuracy certificates the family satisfies. Four builders are provided:
//!
//! * [`make_exact_class`] — the model *is* the truth; every certificate is
//!   infinite-order.
//! * [`make_synthetic_class`] — dial-a-rate error injection. Per derivative
//!   level an independent perturbation term with known magnitude is added:
//!   `κ_f Δ^{N_f} cos(aᵀ(x−x₀))` at the function level,
//!   `κ_g Δ^{N_g} qᵀ(x−x₀)` at the gradient level, and
//!   `½ κ_h Δ^{N_h} (x−x₀)ᵀR(x−x₀)` at the Hessian level, with `‖a‖ = ‖q‖ =
//!   ‖R‖_F = 1` chosen deterministically from a seed. Each term's own
//!   contribution is exactly `κΔ^N` at the point where it peaks, so issued
//!   certificates are tight; contributions leaking across levels (the cosine
//!   term has nonzero Hessian, the quadratic term perturbs nearby values)
//!   are folded into the effective constants and noted on the class.
//! * [`make_interpolation_class`] — the affine model interpolating the truth
//!   on the coordinate simplex `{x₀, x₀+Δe₁, …, x₀+Δe_d}`. A fully linear
//!   class: order-2 function and order-1 gradient accuracy on the ball, with
//!   constants proportional to a sampled Hessian bound of the truth.
//! * [`shift_to_interpolate`] — value recentering `f̂_Δ = f̃_Δ − f̃_Δ(x₀) +
//!   f(x₀)`, which upgrades the at-the-point function certificate to exact
//!   without touching gradients or Hessians (the shift is a constant), at the
//!   cost of doubling the ball-wide function constant.
//!
//! [`combine_model_classes`] combines classes structurally (product,
//! quotient, power, composition), pairing each radius `Δ` with the matching
//! combination of part models. For a composition the outer model cannot be
//! used at the same parameter: the inner function moves the ball `B_Δ(x₀)`
//! into a ball of radius up to `M̄Δ` around `f₁(x₀)`, where `M̄` is the
//! image-gradient constant, so the combined factory evaluates the outer model
//! at `M̄Δ` and the combined radius cap shrinks to `min(Δ̄₁, Δ̄₂/M̄)`. This
//! is exactly the coupling under which the composition bound rules hold.
//! Combined classes carry no certificates — the bound calculus derives them.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cert::{
    AccuracyCertificate, Ball, BoundQuantity, DerivativeLevel, Locality, Matrix, Order, Point,
    Provenance, UniformBound,
};
use crate::error::{Error, Result};
use crate::oracle::{combine_oracles, SmoothOracle, Smoothness};
use crate::verify::sample_uniform_bound;

/// Structural combination kinds for oracles and model classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineKind {
    /// Pointwise product of scalar parts.
    Product,
    /// Quotient of exactly two scalar parts.
    Quotient,
    /// Integer power `f^n` of one scalar part, `n ≥ 1`.
    Power(u32),
    /// Outer scalar function after an inner mapping: parts `[f₁, f₂]`.
    Composition,
}

impl fmt::Display for CombineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombineKind::Product => f.write_str("product"),
            CombineKind::Quotient => f.write_str("quotient"),
            CombineKind::Power(n) => write!(f, "power({n})"),
            CombineKind::Composition => f.write_str("composition"),
        }
    }
}

type FactoryFn = Arc<dyn Fn(f64) -> Result<SmoothOracle> + Send + Sync>;
type ModelBoundFn = Arc<dyn Fn(&Ball, BoundQuantity) -> Option<f64> + Send + Sync>;

/// A family of models `{f̃_Δ}_{Δ ∈ (0, Δ̄]}` of a reference function, with
/// the accuracy certificates the family is known to satisfy.
#[derive(Clone)]
pub struct ModelClass {
    /// Display name.
    pub name: String,
    /// The truth function being modeled.
    pub reference: SmoothOracle,
    /// Base point `x₀` all certificates refer to.
    pub base: Point,
    /// Radius cap `Δ̄` of the family.
    pub delta_bar: f64,
    factory: FactoryFn,
    /// Accuracy certificates; all have `delta_bar ≤ self.delta_bar`.
    pub certificates: Vec<AccuracyCertificate>,
    /// Analytic bounds on model-family quantities (supremum over all
    /// `Δ ∈ (0, Δ̄]` and the queried ball), when known in closed form.
    /// Quantities without certificates — chiefly the third-derivative bound
    /// a composition's outer model needs — can only come from here or from
    /// explicit configuration.
    model_bounds: Option<ModelBoundFn>,
    /// Image-gradient bound of the inner mapping, recorded on classes built
    /// by composition (the constant that rescaled the outer factory).
    pub image_bound: Option<UniformBound>,
    /// Human-readable notes: construction details, sampled constants,
    /// effective-κ accounting.
    pub notes: Vec<String>,
}

impl fmt::Debug for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelClass")
            .field("name", &self.name)
            .field("reference", &self.reference.name)
            .field("base", &self.base.as_slice())
            .field("delta_bar", &self.delta_bar)
            .field("certificates", &self.certificates.len())
            .finish()
    }
}

impl ModelClass {
    /// Assembles a model class from explicit parts, validating that every
    /// certificate sits at the base point with a radius cap not exceeding the
    /// class's.
    pub fn from_parts(
        name: impl Into<String>,
        reference: SmoothOracle,
        base: Point,
        delta_bar: f64,
        factory: impl Fn(f64) -> Result<SmoothOracle> + Send + Sync + 'static,
        certificates: Vec<AccuracyCertificate>,
    ) -> Result<Self> {
        if !(delta_bar.is_finite() && delta_bar > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius cap must be finite and positive, got {delta_bar}"
            )));
        }
        let mut mc = Self {
            name: name.into(),
            reference,
            base,
            delta_bar,
            factory: Arc::new(factory),
            certificates: Vec::new(),
            model_bounds: None,
            image_bound: None,
            notes: Vec::new(),
        };
        for cert in certificates {
            mc.attach_certificate(cert)?;
        }
        Ok(mc)
    }

    /// Attaches an analytic model-family bound provider.
    pub fn with_model_bounds(
        mut self,
        bounds: impl Fn(&Ball, BoundQuantity) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model_bounds = Some(Arc::new(bounds));
        self
    }

    /// Instantiates the model at radius `Δ ∈ (0, Δ̄]`.
    pub fn model(&self, delta: f64) -> Result<SmoothOracle> {
        if !(delta > 0.0 && delta <= self.delta_bar * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "model radius {delta} outside (0, {}]",
                self.delta_bar
            )));
        }
        let m = (self.factory)(delta.min(self.delta_bar))?;
        if m.dim_in != self.reference.dim_in || m.dim_out != self.reference.dim_out {
            return Err(Error::Incompatible(format!(
                "factory of '{}' changed dimensions ({}→{} vs {}→{})",
                self.name, m.dim_in, m.dim_out, self.reference.dim_in, self.reference.dim_out
            )));
        }
        Ok(m)
    }

    /// The certificate at exactly this level and locality, if present.
    pub fn certificate(
        &self,
        level: DerivativeLevel,
        locality: Locality,
    ) -> Option<&AccuracyCertificate> {
        self.certificates
            .iter()
            .find(|c| c.level == level && c.locality == locality)
    }

    /// The certificate usable for a request at this level and locality:
    /// a ball-wide certificate also covers the base point, so an `At` request
    /// accepts a `Near` certificate when no dedicated `At` one exists. A
    /// `Near` request accepts only `Near`.
    pub fn certificate_for(
        &self,
        level: DerivativeLevel,
        locality: Locality,
    ) -> Option<&AccuracyCertificate> {
        match locality {
            Locality::Near => self.certificate(level, Locality::Near),
            Locality::At => self
                .certificate(level, Locality::At)
                .or_else(|| self.certificate(level, Locality::Near)),
        }
    }

    /// Adds a certificate, enforcing the class invariants (matching base,
    /// radius cap not exceeding the class's).
    pub fn attach_certificate(&mut self, cert: AccuracyCertificate) -> Result<()> {
        if cert.base != self.base {
            return Err(Error::Incompatible(format!(
                "certificate base point differs from class '{}' base",
                self.name
            )));
        }
        if cert.delta_bar > self.delta_bar * (1.0 + 1e-12) {
            return Err(Error::Incompatible(format!(
                "certificate radius cap {} exceeds class cap {}",
                cert.delta_bar, self.delta_bar
            )));
        }
        self.certificates.push(cert);
        Ok(())
    }

    /// Analytic model-family bound for a quantity over a ball, when known.
    pub fn model_bound(&self, ball: &Ball, quantity: BoundQuantity) -> Option<f64> {
        self.model_bounds.as_ref().and_then(|f| f(ball, quantity))
    }
}

/// A model class whose models all equal the reference: every available
/// derivative level gets an exact (infinite-order) certificate at both
/// localities.
pub fn make_exact_class(
    reference: SmoothOracle,
    base: Point,
    delta_bar: f64,
) -> Result<ModelClass> {
    if base.len() != reference.dim_in {
        return Err(Error::Incompatible(format!(
            "base point dimension {} does not match oracle '{}' dimension {}",
            base.len(),
            reference.name,
            reference.dim_in
        )));
    }
    let mut certificates = Vec::new();
    for level in DerivativeLevel::ALL {
        let available = match level {
            DerivativeLevel::Function => true,
            DerivativeLevel::Gradient => reference.smoothness >= Smoothness::C1,
            DerivativeLevel::Hessian => reference.smoothness >= Smoothness::C2,
        };
        if available {
            for locality in [Locality::At, Locality::Near] {
                certificates.push(AccuracyCertificate::new(
                    level,
                    locality,
                    Order::Infinite,
                    0.0,
                    base.clone(),
                    delta_bar,
                )?);
            }
        }
    }
    let model = reference.clone();
    let ref_for_bounds = reference.clone();
    Ok(ModelClass {
        name: format!("{}~exact", reference.name),
        reference,
        base,
        delta_bar,
        factory: Arc::new(move |_| Ok(model.clone())),
        certificates,
        model_bounds: Some(Arc::new(move |ball, q| {
            ref_for_bounds.analytic_bound(ball, q)
        })),
        image_bound: None,
        notes: vec!["exact class: every model equals the reference".into()],
    })
}

/// One dial of a synthetic model class: at `level`, inject an error term of
/// magnitude `κ·Δ^order`. The locality tag records which certificate the dial
/// targets; the construction makes the term tight for both localities.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTerm {
    /// Level the error is injected at.
    pub level: DerivativeLevel,
    /// Decay order of the injected error.
    pub order: Order,
    /// Magnitude constant `κ ≥ 0`.
    pub kappa: f64,
    /// Targeted locality (informational; certificates for both localities
    /// are issued with effective constants).
    pub locality: Locality,
}

/// A `(κ, N)` pair: one additive contribution to a level's error envelope.
#[derive(Debug, Clone, Copy)]
struct EnvelopeTerm {
    kappa: f64,
    order: f64,
}

/// Folds additive `κᵢΔ^{Nᵢ}` contributions into a single certificate
/// `(N, κ_eff)` with `N = min Nᵢ` over the nonzero terms and
/// `κ_eff = Σ κᵢ Δ̄^{Nᵢ−N}` (each term weakened to the common order).
fn fold_envelope(terms: &[EnvelopeTerm], delta_bar: f64) -> (Order, f64) {
    let live: Vec<&EnvelopeTerm> = terms.iter().filter(|t| t.kappa > 0.0).collect();
    let Some(min) = live
        .iter()
        .map(|t| t.order)
        .min_by(|a, b| a.partial_cmp(b).expect("orders are finite"))
    else {
        return (Order::Infinite, 0.0);
    };
    let kappa = live
        .iter()
        .map(|t| t.kappa * delta_bar.powf(t.order - min))
        .sum();
    (Order::Finite(min), kappa)
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Point {
    loop {
        let v = Point::from_iterator(d, (0..d).map(|_| rng.gen_range(-1.0f64..1.0)));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

fn symmetric_unit_matrix(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    loop {
        let raw = Matrix::from_fn(d, d, |_, _| rng.gen_range(-1.0f64..1.0));
        let sym = (&raw + raw.transpose()) * 0.5;
        let n = sym.norm();
        if n > 1e-3 {
            return sym / n;
        }
    }
}

/// Builds a model class with independently dialed error rates per derivative
/// level (see the module docs for the perturbation shapes).
///
/// Per level at most one term may be supplied. A term at the gradient level
/// requires a C1 reference; at the Hessian level a C2 reference. The
/// construction is deterministic in `seed`, which selects the perturbation
/// directions.
///
/// Issued certificates (both localities, every level the reference's
/// smoothness supports) carry *effective* constants: a level's envelope sums
/// its own dial with the spill-over of the other dials, e.g. the ball-wide
/// function envelope is `κ_f Δ^{N_f} + κ_g Δ^{N_g+1} + ½κ_h Δ^{N_h+2}`. With
/// a single dial active the corresponding certificate is exactly tight at the
/// base point.
pub fn make_synthetic_class(
    reference: SmoothOracle,
    spec: &[SyntheticTerm],
    x0: Point,
    delta_bar: f64,
    seed: u64,
) -> Result<ModelClass> {
    if !reference.is_scalar() {
        return Err(Error::Incompatible(format!(
            "synthetic classes need a scalar reference, '{}' is vector-valued",
            reference.name
        )));
    }
    if x0.len() != reference.dim_in {
        return Err(Error::Incompatible(format!(
            "base point dimension {} does not match oracle '{}' dimension {}",
            x0.len(),
            reference.name,
            reference.dim_in
        )));
    }
    if !(delta_bar.is_finite() && delta_bar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius cap must be finite and positive, got {delta_bar}"
        )));
    }
    let mut dials: [Option<(f64, f64)>; 3] = [None, None, None]; // (kappa, order) per level
    for term in spec {
        if !(term.kappa.is_finite() && term.kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "synthetic constant must be finite and non-negative, got {}",
                term.kappa
            )));
        }
        let order = match term.order {
            Order::Finite(n) if n >= 0.0 => n,
            Order::Infinite if term.kappa == 0.0 => f64::INFINITY,
            Order::Infinite => {
                return Err(Error::InvalidArgument(
                    "infinite order requires a zero constant".into(),
                ))
            }
            Order::Finite(n) => {
                return Err(Error::InvalidArgument(format!(
                    "synthetic order must be non-negative, got {n}"
                )))
            }
        };
        let idx = match term.level {
            DerivativeLevel::Function => 0,
            DerivativeLevel::Gradient => {
                if reference.smoothness < Smoothness::C1 {
                    return Err(Error::Smoothness(format!(
                        "gradient-level term needs a C1 reference, '{}' is {}",
                        reference.name, reference.smoothness
                    )));
                }
                1
            }
            DerivativeLevel::Hessian => {
                if reference.smoothness < Smoothness::C2 {
                    return Err(Error::Smoothness(format!(
                        "hessian-level term needs a C2 reference, '{}' is {}",
                        reference.name, reference.smoothness
                    )));
                }
                2
            }
        };
        if dials[idx].is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate synthetic term at the {} level",
                term.level
            )));
        }
        dials[idx] = Some((term.kappa, order));
    }
    let (kf, nf) = dials[0].unwrap_or((0.0, f64::INFINITY));
    let (kg, ng) = dials[1].unwrap_or((0.0, f64::INFINITY));
    let (kh, nh) = dials[2].unwrap_or((0.0, f64::INFINITY));

    let d = reference.dim_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = unit_vector(&mut rng, d);
    let q = unit_vector(&mut rng, d);
    let r = symmetric_unit_matrix(&mut rng, d);

    // Certificates per level and locality from the envelope terms worked out
    // in the module docs. powf with an infinite exponent never runs: a dial
    // with κ = 0 is filtered before weakening.
    let term = |k: f64, n: f64| EnvelopeTerm { kappa: k, order: n };
    let envelopes: Vec<(DerivativeLevel, Locality, Vec<EnvelopeTerm>)> = vec![
        (
            DerivativeLevel::Function,
            Locality::At,
            vec![term(kf, nf)],
        ),
        (
            DerivativeLevel::Function,
            Locality::Near,
            vec![term(kf, nf), term(kg, ng + 1.0), term(kh / 2.0, nh + 2.0)],
        ),
        (
            DerivativeLevel::Gradient,
            Locality::At,
            vec![term(kg, ng)],
        ),
        (
            DerivativeLevel::Gradient,
            Locality::Near,
            vec![term(kg, ng), term(kf, nf + 1.0), term(kh, nh + 1.0)],
        ),
        (
            DerivativeLevel::Hessian,
            Locality::At,
            vec![term(kh, nh), term(kf, nf)],
        ),
        (
            DerivativeLevel::Hessian,
            Locality::Near,
            vec![term(kh, nh), term(kf, nf)],
        ),
    ];
    let mut certificates = Vec::new();
    let mut notes = vec![format!(
        "synthetic dials: function (kappa={kf}, order={nf}), gradient (kappa={kg}, order={ng}), \
         hessian (kappa={kh}, order={nh}); seed {seed}"
    )];
    for (level, locality, terms) in envelopes {
        let available = match level {
            DerivativeLevel::Function => true,
            DerivativeLevel::Gradient => reference.smoothness >= Smoothness::C1,
            DerivativeLevel::Hessian => reference.smoothness >= Smoothness::C2,
        };
        if !available {
            continue;
        }
        let (order, kappa) = fold_envelope(&terms, delta_bar);
        if kappa > 0.0 && terms.iter().filter(|t| t.kappa > 0.0).count() > 1 {
            notes.push(format!(
                "{level}/{locality} certificate folds {} envelope terms into kappa={kappa}",
                terms.iter().filter(|t| t.kappa > 0.0).count()
            ));
        }
        certificates.push(AccuracyCertificate::new(
            level,
            locality,
            order,
            kappa,
            x0.clone(),
            delta_bar,
        )?);
    }

    let base = x0.clone();
    let reference_for_factory = reference.clone();
    let (fa, fq, fr) = (a, q, r);
    let factory: FactoryFn = Arc::new(move |delta: f64| {
        let sf = if kf > 0.0 { kf * delta.powf(nf) } else { 0.0 };
        let sg = if kg > 0.0 { kg * delta.powf(ng) } else { 0.0 };
        let sh = if kh > 0.0 { kh * delta.powf(nh) } else { 0.0 };
        let rf = reference_for_factory.clone();
        let (a, q, r) = (fa.clone(), fq.clone(), fr.clone());
        let x0 = base.clone();
        let name = format!("{}~synthetic@{delta}", rf.name);

        let (rf0, a0, q0, r0, c0) = (rf.clone(), a.clone(), q.clone(), r.clone(), x0.clone());
        let eval = Arc::new(move |x: &Point| {
            let u = x - &c0;
            let pert = sf * a0.dot(&u).cos()
                + sg * q0.dot(&u)
                + 0.5 * sh * (u.transpose() * &r0 * &u)[0];
            Ok(DVector::from_element(1, rf0.eval_scalar(x)? + pert))
        });

        let has_grad = rf.smoothness >= Smoothness::C1;
        let (rf1, a1, q1, r1, c1) = (rf.clone(), a.clone(), q.clone(), r.clone(), x0.clone());
        let grad = has_grad.then(|| {
            let f: Arc<dyn Fn(&Point) -> Result<Matrix> + Send + Sync> =
                Arc::new(move |x: &Point| {
                    let u = x - &c1;
                    let pert =
                        -sf * a1.dot(&u).sin() * &a1 + sg * &q1 + sh * (&r1 * &u);
                    let g = rf1.gradient(x)? + pert;
                    Ok(Matrix::from_rows(&[g.transpose()]))
                });
            f
        });

        let has_hess = rf.smoothness >= Smoothness::C2;
        let (rf2, a2, r2, c2) = (rf.clone(), a.clone(), r.clone(), x0.clone());
        let hess = has_hess.then(|| {
            let f: Arc<dyn Fn(&Point) -> Result<Vec<Matrix>> + Send + Sync> =
                Arc::new(move |x: &Point| {
                    let u = x - &c2;
                    let pert = -sf * a2.dot(&u).cos() * (&a2 * a2.transpose()) + sh * &r2;
                    Ok(vec![rf2.hessian(x)? + pert])
                });
            f
        });

        SmoothOracle::new(name, rf.dim_in, 1, rf.smoothness, eval, grad, hess)
    });

    // The only family bound with no certificate to derive it from: the
    // third-derivative envelope. Only the cosine term has one (its third
    // derivative has norm ≤ κ_f Δ^{N_f}); linear and quadratic terms vanish.
    let ref_for_bounds = reference.clone();
    let third_margin = if kf > 0.0 { kf * delta_bar.powf(nf) } else { 0.0 };
    let model_bounds: ModelBoundFn = Arc::new(move |ball, q| match q {
        BoundQuantity::NormThird => ref_for_bounds
            .analytic_bound(ball, BoundQuantity::NormThird)
            .map(|t| t + third_margin),
        _ => None,
    });

    Ok(ModelClass {
        name: format!("{}~synthetic", reference.name),
        reference,
        base: x0,
        delta_bar,
        factory,
        certificates,
        model_bounds: Some(model_bounds),
        image_bound: None,
        notes,
    })
}

/// Builds the fully linear interpolation class of a scalar reference: the
/// factory returns the affine model through `{x₀, x₀+Δe₁, …, x₀+Δe_d}` with
/// forward-difference slopes.
///
/// With `L` a bound on the reference's Hessian norm over `B̄_Δ̄(x₀)`, the
/// class satisfies ball-wide certificates
/// `(FUNCTION, order 2, κ = ½(1+√d)·L)` and
/// `(GRADIENT, order 1, κ = (1+½√d)·L)`. `L` is estimated by deterministic
/// sampling and its provenance recorded in the class notes.
pub fn make_interpolation_class(
    reference: SmoothOracle,
    x0: Point,
    delta_bar: f64,
) -> Result<ModelClass> {
    if !reference.is_scalar() {
        return Err(Error::Incompatible(format!(
            "interpolation needs a scalar reference, '{}' is vector-valued",
            reference.name
        )));
    }
    if reference.smoothness < Smoothness::C2 {
        return Err(Error::Smoothness(format!(
            "interpolation constants need a C2 reference, '{}' is {}",
            reference.name, reference.smoothness
        )));
    }
    if x0.len() != reference.dim_in {
        return Err(Error::Incompatible(format!(
            "base point dimension {} does not match oracle '{}' dimension {}",
            x0.len(),
            reference.name,
            reference.dim_in
        )));
    }
    let d = reference.dim_in;
    let ball = Ball::new(x0.clone(), delta_bar)?;
    let hess_bound = sample_uniform_bound(&reference, BoundQuantity::NormHess, &ball)
        .map_err(|e| Error::Estimation(format!("hessian bound estimation failed: {e}")))?;
    let l = hess_bound.value;
    if !l.is_finite() {
        return Err(Error::Estimation(format!(
            "sampled hessian bound over radius {delta_bar} is not finite"
        )));
    }
    let sqrt_d = (d as f64).sqrt();
    let kappa_f = 0.5 * (1.0 + sqrt_d) * l;
    let kappa_g = (1.0 + 0.5 * sqrt_d) * l;
    let certificates = vec![
        AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::Near,
            Order::Finite(2.0),
            kappa_f,
            x0.clone(),
            delta_bar,
        )?,
        AccuracyCertificate::new(
            DerivativeLevel::Gradient,
            Locality::Near,
            Order::Finite(1.0),
            kappa_g,
            x0.clone(),
            delta_bar,
        )?,
    ];
    let notes = vec![format!(
        "interpolation constants from {} hessian bound L={l} over radius {delta_bar}: \
         function kappa = (1+sqrt(d))/2*L = {kappa_f}, gradient kappa = (1+sqrt(d)/2)*L = {kappa_g}",
        hess_bound.provenance
    )];

    let base = x0.clone();
    let rf = reference.clone();
    let factory: FactoryFn = Arc::new(move |delta: f64| {
        let c = rf.eval_scalar(&base)?;
        let mut g = Point::zeros(d);
        for i in 0..d {
            let mut xi = base.clone();
            xi[i] += delta;
            g[i] = (rf.eval_scalar(&xi)? - c) / delta;
        }
        let x0 = base.clone();
        let g2 = g.clone();
        Ok(SmoothOracle::scalar_c3(
            format!("{}~interp@{delta}", rf.name),
            d,
            move |x| c + g.dot(&(x - &x0)),
            move |_| g2.clone(),
            move |_| Matrix::zeros(d, d),
        ))
    });

    Ok(ModelClass {
        name: format!("{}~interp", reference.name),
        reference,
        base: x0,
        delta_bar,
        factory,
        certificates,
        // The models are affine: second and third derivatives vanish.
        model_bounds: Some(Arc::new(|_, q| match q {
            BoundQuantity::NormHess | BoundQuantity::NormThird => Some(0.0),
            _ => None,
        })),
        image_bound: None,
        notes,
    })
}

/// Recenters every model of a scalar class to match the truth value at the
/// base point: `f̂_Δ = f̃_Δ − f̃_Δ(x₀) + f(x₀)`.
///
/// The shift is a constant, so gradients and Hessians of the models are
/// untouched (bitwise: the shifted model delegates to the original's
/// derivative closures). The at-the-point function certificate becomes exact
/// (infinite order); the ball-wide function constant doubles (triangle
/// inequality across the shift); gradient and Hessian certificates are copied
/// unchanged.
pub fn shift_to_interpolate(mc: &ModelClass) -> Result<ModelClass> {
    if !mc.reference.is_scalar() {
        return Err(Error::Incompatible(format!(
            "value recentering needs a scalar class, '{}' is vector-valued",
            mc.name
        )));
    }
    let truth_at_base = mc.reference.eval_scalar(&mc.base)?;
    let mut certificates = Vec::new();
    let mut notes = mc.notes.clone();
    for cert in &mc.certificates {
        match (cert.level, cert.locality) {
            (DerivativeLevel::Function, Locality::At) => {
                certificates.push(AccuracyCertificate::new(
                    DerivativeLevel::Function,
                    Locality::At,
                    Order::Infinite,
                    0.0,
                    cert.base.clone(),
                    cert.delta_bar,
                )?);
            }
            (DerivativeLevel::Function, Locality::Near) => {
                certificates.push(AccuracyCertificate::new(
                    DerivativeLevel::Function,
                    Locality::Near,
                    cert.order,
                    2.0 * cert.kappa,
                    cert.base.clone(),
                    cert.delta_bar,
                )?);
                notes.push(format!(
                    "recentering doubled the ball-wide function constant: {} -> {}",
                    cert.kappa,
                    2.0 * cert.kappa
                ));
            }
            _ => certificates.push(cert.clone()),
        }
    }
    // A class with no at-the-point function certificate still gains exactness
    // at the base point from the shift.
    if !certificates
        .iter()
        .any(|c| c.level == DerivativeLevel::Function && c.locality == Locality::At)
    {
        certificates.push(AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::At,
            Order::Infinite,
            0.0,
            mc.base.clone(),
            mc.delta_bar,
        )?);
    }
    notes.push("recentered to interpolate the truth value at the base point".into());

    let inner_factory = mc.factory.clone();
    let base = mc.base.clone();
    let factory: FactoryFn = Arc::new(move |delta: f64| {
        let m = inner_factory(delta)?;
        let model_at_base = m.eval_scalar(&base)?;
        let name = format!("{}~shifted", m.name);
        let m_eval = m.clone();
        // Associated as (m(x) − m(x₀)) + f(x₀) so the base-point value is
        // reproduced exactly, not merely up to rounding.
        let eval = Arc::new(move |x: &Point| {
            Ok(DVector::from_element(
                1,
                (m_eval.eval_scalar(x)? - model_at_base) + truth_at_base,
            ))
        });
        let m_grad = m.clone();
        let grad = (m.smoothness >= Smoothness::C1).then(|| {
            let f: Arc<dyn Fn(&Point) -> Result<Matrix> + Send + Sync> =
                Arc::new(move |x: &Point| m_grad.grad(x));
            f
        });
        let m_hess = m.clone();
        let hess = (m.smoothness >= Smoothness::C2).then(|| {
            let f: Arc<dyn Fn(&Point) -> Result<Vec<Matrix>> + Send + Sync> =
                Arc::new(move |x: &Point| m_hess.hess(x));
            f
        });
        SmoothOracle::new(name, m.dim_in, 1, m.smoothness, eval, grad, hess)
    });

    // Derivative bounds survive the constant shift; value bounds do not.
    let inner_bounds = mc.model_bounds.clone();
    let model_bounds: Option<ModelBoundFn> = inner_bounds.map(|f| {
        let g: ModelBoundFn = Arc::new(move |ball: &Ball, q: BoundQuantity| match q {
            BoundQuantity::AbsF => None,
            _ => f(ball, q),
        });
        g
    });

    Ok(ModelClass {
        name: format!("{}~shifted", mc.name),
        reference: mc.reference.clone(),
        base: mc.base.clone(),
        delta_bar: mc.delta_bar,
        factory,
        certificates,
        model_bounds,
        image_bound: None,
        notes,
    })
}

/// Combines model classes structurally. Every part must live at the same
/// base point (for a composition, the outer part's base must equal the inner
/// reference's value there). The combined class carries no certificates —
/// those are derived by the bound calculus and attached by the caller.
///
/// For products, quotients, and powers the combined model at radius `Δ` is
/// the combination of the part models at the same `Δ`, and the combined cap
/// is the minimum of the parts'. For a composition the inner mapping sends
/// `B̄_Δ(x₀)` into `B̄_{M̄Δ}(f₁(x₀))` — `M̄` the image-gradient constant of
/// the inner reference over `B̄_{Δ̄}(x₀)` — so the combined model is
/// `f̃_{2,M̄Δ} ∘ f̃_{1,Δ}` and the cap shrinks to `min(Δ̄₁, Δ̄₂/M̄)`,
/// keeping the outer parameter within its own family. The constant `M̄` is
/// taken from the inner reference's analytic bounds when available, else
/// sampled (recorded in the notes), and stored on the result.
pub fn combine_model_classes(kind: CombineKind, parts: &[ModelClass]) -> Result<ModelClass> {
    if parts.is_empty() {
        return Err(Error::EmptyInput("model class parts"));
    }
    let refs: Vec<SmoothOracle> = parts.iter().map(|p| p.reference.clone()).collect();
    let reference = combine_oracles(kind, &refs)?;
    let base = parts[0].base.clone();
    let mut notes = Vec::new();

    if kind == CombineKind::Composition {
        if parts.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "composition needs exactly two parts, got {}",
                parts.len()
            )));
        }
        let y0 = parts[0].reference.eval(&base)?;
        if parts[1].base != y0 {
            return Err(Error::Incompatible(format!(
                "outer class '{}' is based at {:?} but the inner reference maps the base to {:?}",
                parts[1].name,
                parts[1].base.as_slice(),
                y0.as_slice()
            )));
        }
    } else {
        for p in &parts[1..] {
            if p.base != base {
                return Err(Error::Incompatible(format!(
                    "parts '{}' and '{}' have different base points",
                    parts[0].name, p.name
                )));
            }
        }
    }

    let mut delta_bar = parts.iter().map(|p| p.delta_bar).fold(f64::INFINITY, f64::min);
    let mut image_bound = None;

    let factory: FactoryFn = if kind == CombineKind::Composition {
        let inner = parts[0].clone();
        let outer = parts[1].clone();
        let inner_ball = Ball::new(base.clone(), inner.delta_bar)?;
        let image = match inner
            .reference
            .analytic_bound(&inner_ball, BoundQuantity::ImageGrad)
        {
            Some(v) => UniformBound::new(
                BoundQuantity::ImageGrad,
                v,
                Locality::Near,
                base.clone(),
                inner.delta_bar,
                Provenance::Analytic,
            )?,
            None => sample_uniform_bound(&inner.reference, BoundQuantity::ImageGrad, &inner_ball)?,
        };
        let m_bar = image.value;
        notes.push(format!(
            "image-gradient constant of '{}' over radius {}: {m_bar} ({})",
            inner.name, inner.delta_bar, image.provenance
        ));
        delta_bar = if m_bar > 0.0 {
            inner.delta_bar.min(outer.delta_bar / m_bar)
        } else {
            inner.delta_bar
        };
        notes.push(format!(
            "outer models are instantiated at the image-scaled radius M̄·Δ; combined cap {delta_bar}"
        ));
        image_bound = Some(image);
        let outer_cap = outer.delta_bar;
        Arc::new(move |delta: f64| {
            let outer_delta = (m_bar * delta).max(f64::MIN_POSITIVE).min(outer_cap);
            let parts = [inner.model(delta)?, outer.model(outer_delta)?];
            combine_oracles(CombineKind::Composition, &parts)
        })
    } else {
        let owned: Vec<ModelClass> = parts.to_vec();
        Arc::new(move |delta: f64| {
            let models: Vec<SmoothOracle> = owned
                .iter()
                .map(|p| p.model(delta))
                .collect::<Result<_>>()?;
            combine_oracles(kind, &models)
        })
    };

    Ok(ModelClass {
        name: reference.name.clone(),
        reference,
        base,
        delta_bar,
        factory,
        certificates: Vec::new(),
        model_bounds: None,
        image_bound,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_by_name;

    fn term(
        level: DerivativeLevel,
        order: f64,
        kappa: f64,
        locality: Locality,
    ) -> SyntheticTerm {
        SyntheticTerm {
            level,
            order: Order::Finite(order),
            kappa,
            locality,
        }
    }

    #[test]
    fn exact_class_reproduces_reference() {
        let f = oracle_by_name("quad2").unwrap();
        let mc = make_exact_class(f.clone(), Point::zeros(2), 1.0).unwrap();
        let x = Point::from_vec(vec![0.3, -0.2]);
        for delta in [1.0, 0.25, 0.0625] {
            let m = mc.model(delta).unwrap();
            assert_eq!(m.eval_scalar(&x).unwrap(), f.eval_scalar(&x).unwrap());
        }
        assert_eq!(mc.certificates.len(), 6);
        assert!(mc.certificates.iter().all(|c| c.order == Order::Infinite));
    }

    #[test]
    fn synthetic_function_error_is_exact_at_base() {
        let f = oracle_by_name("quad2").unwrap();
        let x0 = Point::zeros(2);
        let mc = make_synthetic_class(
            f.clone(),
            &[term(DerivativeLevel::Function, 2.0, 1.0, Locality::At)],
            x0.clone(),
            1.0,
            42,
        )
        .unwrap();
        for delta in [1.0, 0.5, 0.125] {
            let m = mc.model(delta).unwrap();
            let err = (m.eval_scalar(&x0).unwrap() - f.eval_scalar(&x0).unwrap()).abs();
            let rel = (err - delta * delta).abs() / (delta * delta);
            assert!(rel < 1e-12, "delta={delta}: error {err} vs {}", delta * delta);
        }
    }

    #[test]
    fn synthetic_gradient_error_is_exact_at_base() {
        let f = oracle_by_name("quad2").unwrap();
        let x0 = Point::zeros(2);
        let mc = make_synthetic_class(
            f.clone(),
            &[term(DerivativeLevel::Gradient, 1.0, 1.0, Locality::At)],
            x0.clone(),
            1.0,
            42,
        )
        .unwrap();
        // With only a gradient dial the model value at the base is exact and
        // the class must say so.
        let at_f = mc
            .certificate(DerivativeLevel::Function, Locality::At)
            .unwrap();
        assert_eq!(at_f.order, Order::Infinite);
        for delta in [1.0, 0.5, 0.125] {
            let m = mc.model(delta).unwrap();
            assert_eq!(m.eval_scalar(&x0).unwrap(), f.eval_scalar(&x0).unwrap());
            let err = (m.gradient(&x0).unwrap() - f.gradient(&x0).unwrap()).norm();
            assert!(((err - delta) / delta).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_certificates_cover_spillover() {
        let f = oracle_by_name("quad2").unwrap();
        let mc = make_synthetic_class(
            f,
            &[
                term(DerivativeLevel::Function, 2.0, 1.0, Locality::Near),
                term(DerivativeLevel::Gradient, 1.0, 0.5, Locality::Near),
            ],
            Point::zeros(2),
            0.5,
            7,
        )
        .unwrap();
        let near_f = mc
            .certificate(DerivativeLevel::Function, Locality::Near)
            .unwrap();
        // Function envelope: 1·Δ² + 0.5·Δ² (gradient dial leaks with one
        // extra power) → order 2, κ = 1 + 0.5.
        assert_eq!(near_f.order, Order::Finite(2.0));
        assert!((near_f.kappa - 1.5).abs() < 1e-15);
        let near_g = mc
            .certificate(DerivativeLevel::Gradient, Locality::Near)
            .unwrap();
        // Gradient envelope: 0.5·Δ + 1·Δ³ weakened to Δ: κ = 0.5 + 0.5².
        assert_eq!(near_g.order, Order::Finite(1.0));
        assert!((near_g.kappa - 0.75).abs() < 1e-15);
    }

    #[test]
    fn synthetic_rejects_hessian_dial_on_c1_reference() {
        use std::sync::Arc as StdArc;
        let c1 = SmoothOracle::new(
            "c1",
            1,
            1,
            Smoothness::C1,
            StdArc::new(|x: &Point| Ok(DVector::from_element(1, x[0]))),
            Some(StdArc::new(|_: &Point| Ok(Matrix::from_element(1, 1, 1.0)))),
            None,
        )
        .unwrap();
        let err = make_synthetic_class(
            c1,
            &[term(DerivativeLevel::Hessian, 1.0, 1.0, Locality::At)],
            Point::zeros(1),
            1.0,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Smoothness(_)));
    }

    #[test]
    fn synthetic_zero_dials_give_exact_factory() {
        let f = oracle_by_name("exp1").unwrap();
        let mc = make_synthetic_class(f.clone(), &[], Point::zeros(1), 1.0, 3).unwrap();
        let x = Point::from_vec(vec![0.7]);
        let m = mc.model(0.25).unwrap();
        assert_eq!(m.eval_scalar(&x).unwrap(), f.eval_scalar(&x).unwrap());
        assert!(mc.certificates.iter().all(|c| c.order == Order::Infinite));
    }

    #[test]
    fn synthetic_is_deterministic_in_seed() {
        let f = oracle_by_name("quad3").unwrap();
        let spec = [term(DerivativeLevel::Gradient, 1.0, 1.0, Locality::Near)];
        let x = Point::from_vec(vec![0.1, 0.2, -0.3]);
        let a = make_synthetic_class(f.clone(), &spec, Point::zeros(3), 1.0, 9).unwrap();
        let b = make_synthetic_class(f.clone(), &spec, Point::zeros(3), 1.0, 9).unwrap();
        let c = make_synthetic_class(f, &spec, Point::zeros(3), 1.0, 10).unwrap();
        let (ma, mb, mc2) = (
            a.model(0.5).unwrap(),
            b.model(0.5).unwrap(),
            c.model(0.5).unwrap(),
        );
        assert_eq!(ma.eval_scalar(&x).unwrap(), mb.eval_scalar(&x).unwrap());
        assert_ne!(ma.eval_scalar(&x).unwrap(), mc2.eval_scalar(&x).unwrap());
    }

    #[test]
    fn interpolation_reproduces_affine_references() {
        let f = oracle_by_name("affine2").unwrap();
        let mc = make_interpolation_class(f.clone(), Point::zeros(2), 1.0).unwrap();
        let x = Point::from_vec(vec![0.3, 0.4]);
        for delta in [1.0, 0.25] {
            let m = mc.model(delta).unwrap();
            let err = (m.eval_scalar(&x).unwrap() - f.eval_scalar(&x).unwrap()).abs();
            assert!(err < 1e-14, "err {err}");
        }
    }

    #[test]
    fn interpolation_certificates_are_near_locality() {
        let f = oracle_by_name("quad2").unwrap();
        let mc = make_interpolation_class(f, Point::zeros(2), 0.5).unwrap();
        let cf = mc
            .certificate(DerivativeLevel::Function, Locality::Near)
            .unwrap();
        assert_eq!(cf.order, Order::Finite(2.0));
        assert!(cf.kappa > 0.0);
        let cg = mc
            .certificate(DerivativeLevel::Gradient, Locality::Near)
            .unwrap();
        assert_eq!(cg.order, Order::Finite(1.0));
        // L for quad2 is 2‖A‖_F; the function constant is (1+√2)/2·L.
        let l = 2.0 * crate::oracle::oracle_by_name("quad2")
            .unwrap()
            .analytic_bound(
                &Ball::new(Point::zeros(2), 0.5).unwrap(),
                BoundQuantity::NormHess,
            )
            .unwrap()
            / 2.0;
        assert!((cf.kappa - 0.5 * (1.0 + 2f64.sqrt()) * l).abs() < 1e-12);
    }

    #[test]
    fn shift_pins_value_and_keeps_derivatives() {
        let f = oracle_by_name("quad2").unwrap();
        let x0 = Point::from_vec(vec![0.2, 0.1]);
        let mc = make_synthetic_class(
            f.clone(),
            &[
                term(DerivativeLevel::Function, 1.0, 1.0, Locality::At),
                term(DerivativeLevel::Gradient, 1.0, 1.0, Locality::At),
            ],
            x0.clone(),
            1.0,
            5,
        )
        .unwrap();
        let shifted = shift_to_interpolate(&mc).unwrap();
        let x = Point::from_vec(vec![0.5, -0.1]);
        for delta in [1.0, 0.25] {
            let m = mc.model(delta).unwrap();
            let s = shifted.model(delta).unwrap();
            assert_eq!(
                s.eval_scalar(&x0).unwrap(),
                f.eval_scalar(&x0).unwrap(),
                "value pinned at base"
            );
            // Bitwise equality of derivatives: the shift delegates.
            assert_eq!(s.gradient(&x).unwrap(), m.gradient(&x).unwrap());
            assert_eq!(s.hessian(&x).unwrap(), m.hessian(&x).unwrap());
        }
        let at_f = shifted
            .certificate(DerivativeLevel::Function, Locality::At)
            .unwrap();
        assert_eq!(at_f.order, Order::Infinite);
        let near_f_old = mc
            .certificate(DerivativeLevel::Function, Locality::Near)
            .unwrap();
        let near_f_new = shifted
            .certificate(DerivativeLevel::Function, Locality::Near)
            .unwrap();
        assert_eq!(near_f_new.kappa, 2.0 * near_f_old.kappa);
    }

    #[test]
    fn combined_product_of_exact_classes_is_exact() {
        let a = make_exact_class(oracle_by_name("affine2").unwrap(), Point::zeros(2), 1.0)
            .unwrap();
        let b = make_exact_class(oracle_by_name("pos2").unwrap(), Point::zeros(2), 1.0).unwrap();
        let prod = combine_model_classes(CombineKind::Product, &[a, b]).unwrap();
        let x = Point::from_vec(vec![0.4, 0.1]);
        let m = prod.model(0.5).unwrap();
        assert_eq!(
            m.eval_scalar(&x).unwrap(),
            prod.reference.eval_scalar(&x).unwrap()
        );
        assert!(prod.certificates.is_empty());
    }

    #[test]
    fn combined_composition_records_image_bound() {
        let inner =
            make_exact_class(oracle_by_name("linmap2").unwrap(), Point::zeros(2), 1.0).unwrap();
        let outer = make_exact_class(oracle_by_name("quad2").unwrap(), Point::zeros(2), 1.0)
            .unwrap();
        let comp = combine_model_classes(CombineKind::Composition, &[inner, outer]).unwrap();
        let ib = comp.image_bound.as_ref().unwrap();
        assert!((ib.value - 2.5f64.sqrt()).abs() < 1e-12);
        // Cap shrinks: min(1, 1/√2.5).
        assert!((comp.delta_bar - 1.0 / 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn composition_rejects_mismatched_outer_base() {
        let inner =
            make_exact_class(oracle_by_name("linmap2").unwrap(), Point::zeros(2), 1.0).unwrap();
        let outer = make_exact_class(
            oracle_by_name("quad2").unwrap(),
            Point::from_vec(vec![1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let err = combine_model_classes(CombineKind::Composition, &[inner, outer]).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
    }

    #[test]
    fn model_rejects_radius_outside_cap() {
        let mc = make_exact_class(oracle_by_name("one1").unwrap(), Point::zeros(1), 0.5).unwrap();
        assert!(mc.model(0.5).is_ok());
        assert!(mc.model(0.75).is_err());
        assert!(mc.model(0.0).is_err());
    }
}
