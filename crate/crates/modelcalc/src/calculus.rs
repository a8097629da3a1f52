//! Combination calculus for accuracy certificates.
//!
//! The functions in this module answer one question: if each part of an
//! algebraic expression carries accuracy certificates (`‖Df − Df̃_Δ‖ ≤ κΔ^N`)
//! and uniform bounds (`M` values), what certificate does the combined model
//! family inherit? Each operation returns a [`CombinedBound`] `(N_F, K_F)`
//! whose trace records every additive share of the constant, so a report can
//! show exactly which part contributed what.
//!
//! Supported combinations:
//!
//! * [`product2_bound`] / [`product_n_bound`] — products of scalar parts. The
//!   function-level constant is minimised over orderings of the factors
//!   (truth bounds multiply parts placed before the weakened factor, model
//!   bounds parts placed after it). Up to 8 factors every ordering is tried;
//!   beyond that a small candidate set is searched and the trace carries a
//!   zero-valued `heuristic` annotation.
//! * [`zero_factor_refinement`] — sharper orders at the base point when the
//!   caller asserts that some factors vanish there exactly.
//! * [`power_bound`] — `f^n` via closed forms (point statements) or by
//!   delegating to the n-ary product rules (ball statements).
//! * [`reciprocal_model_bound`] — transfers a bound on `1/|f|` to the model
//!   reciprocal `1/|f̃_Δ|`, shrinking the radius cap until the transfer
//!   denominator is at least `1/2`.
//! * [`quotient_bound`] — `f₁/f₂`, requiring a positive-order denominator
//!   certificate and a bound on `1/|f₂|`.
//! * [`composition_bound`] — `f₂ ∘ f₁` for a mapping `f₁`, using an image
//!   confinement constant `M̄` with `f₁(B̄_Δ(x₀)) ⊆ B̄_{M̄Δ}(f₁(x₀))`. The
//!   combined family pairs the inner model at radius `Δ` with the outer model
//!   at radius `M̄Δ`, so the operative cap shrinks to `min(Δ̄₁, Δ̄₂/M̄)`.
//!
//! # Localities and hypotheses
//!
//! Ball statements (`Near`) need ball-wide `M` values; point statements
//! (`At`) need values at the base point only. Derivative-level point
//! statements (gradient/Hessian `At`) additionally require every part's
//! function certificate to be *exact at the base point* (infinite effective
//! order): without `f̃_Δ(x₀) = f(x₀)` a product's gradient error does not
//! telescope. Quotients need a positive-order denominator function
//! certificate, compositions a positive-order inner function certificate;
//! violations surface as [`Error::Precondition`].
//!
//! A certificate with `κ = 0` is treated as having infinite *effective*
//! order: its term contributes nothing and it never drags the combined order
//! down. The combined order is the minimum effective order over every
//! certificate the formula references.
//!
//! # Where the `M` values come from
//!
//! Each [`PartInputs`] carries truth-side bounds (on `f` itself) and
//! model-side bounds (on the family `{f̃_Δ}`). A missing model bound of a
//! differentiability quantity is derived on the fly as
//! `M_truth + κ·Δ̄^N` from the matching certificate when both ingredients are
//! present. The derived value extends the certificate's slack to the whole
//! requested ball; families that are only locally certified should supply
//! explicit model bounds instead (the experiment runner does).
//!
//! Point statements about composed families use outer-part bounds at the
//! image point `y₀ = f₁(x₀)`; ball statements use outer bounds on
//! `B̄_{M̄Δ̄}(y₀)` inflated by the inner model's own offset `κ₁Δ̄^{N₁}`, since
//! the outer model is evaluated at inner *model* images.

use crate::cert::{
    min_order, AccuracyCertificate, Ball, BoundQuantity, CombinedBound, DerivativeLevel, Locality,
    Order, Point, Provenance, TraceTerm, UniformBound,
};
use crate::error::{Error, Result};
use crate::oracle::{Smoothness, SmoothOracle};
use crate::verify::sample_uniform_bound;

/// Relative tolerance when checking that a certificate's or bound's radius
/// cap covers the operative radius.
const CAP_TOLERANCE: f64 = 1e-12;

/// Largest factor count for which the function-level product constant is
/// minimised over *all* orderings; beyond this a candidate heuristic is used.
pub const EXACT_PERMUTATION_LIMIT: usize = 8;

fn covers(cap: f64, required: f64) -> bool {
    cap >= required * (1.0 - CAP_TOLERANCE)
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

/// Certificates and uniform bounds of one part of a combination.
///
/// `truth_bounds` refer to the underlying function (`M_f`, `M_∇f`, …),
/// `model_bounds` to the model family (`M_f̃`, `M_∇f̃`, …). Model bounds of
/// function/gradient/Hessian quantities that are not supplied are derived
/// from the matching certificate as `M_truth + κ·Δ̄^N` where possible.
#[derive(Debug, Clone)]
pub struct PartInputs {
    /// Display name used in traces and error messages.
    pub name: String,
    certificates: Vec<AccuracyCertificate>,
    truth_bounds: Vec<UniformBound>,
    model_bounds: Vec<UniformBound>,
}

impl PartInputs {
    /// Bundles the inputs of one part.
    pub fn new(
        name: impl Into<String>,
        certificates: Vec<AccuracyCertificate>,
        truth_bounds: Vec<UniformBound>,
        model_bounds: Vec<UniformBound>,
    ) -> Self {
        Self {
            name: name.into(),
            certificates,
            truth_bounds,
            model_bounds,
        }
    }

    /// The certificates carried by this part.
    pub fn certificates(&self) -> &[AccuracyCertificate] {
        &self.certificates
    }

    /// The truth-side uniform bounds carried by this part.
    pub fn truth_bounds(&self) -> &[UniformBound] {
        &self.truth_bounds
    }

    /// The model-side uniform bounds carried by this part.
    pub fn model_bounds(&self) -> &[UniformBound] {
        &self.model_bounds
    }

    fn effective_order(cert: &AccuracyCertificate) -> Order {
        if cert.kappa == 0.0 {
            Order::Infinite
        } else {
            cert.order
        }
    }

    /// Best usable certificate: point requests accept point or ball
    /// certificates (preferring point ones); ball requests accept ball
    /// certificates only. Among usable candidates the highest effective
    /// order wins, ties broken by the smaller constant.
    fn find_certificate(
        &self,
        level: DerivativeLevel,
        locality: Locality,
        min_cap: f64,
    ) -> Option<&AccuracyCertificate> {
        let rank = |c: &AccuracyCertificate| {
            (
                (c.locality == locality) as u8,
                Self::effective_order(c).as_f64(),
                -c.kappa,
            )
        };
        let mut best: Option<&AccuracyCertificate> = None;
        for c in &self.certificates {
            if c.level != level || !covers(c.delta_bar, min_cap) {
                continue;
            }
            let usable = match locality {
                Locality::At => true,
                Locality::Near => c.locality == Locality::Near,
            };
            if !usable {
                continue;
            }
            if best.map_or(true, |b| rank(c) > rank(b)) {
                best = Some(c);
            }
        }
        best
    }

    fn certificate(
        &self,
        level: DerivativeLevel,
        locality: Locality,
        min_cap: f64,
        rule: &str,
    ) -> Result<&AccuracyCertificate> {
        self.find_certificate(level, locality, min_cap)
            .ok_or_else(|| Error::MissingCertificate {
                symbol: format!("κ[{level}/{locality}]({})", self.name),
                context: rule.to_string(),
            })
    }

    fn leaf(
        &self,
        level: DerivativeLevel,
        locality: Locality,
        min_cap: f64,
        rule: &str,
    ) -> Result<Leaf> {
        Ok(Leaf::from_certificate(self.certificate(
            level, locality, min_cap, rule,
        )?))
    }

    /// Point statements at derivative levels require the model family to
    /// reproduce the function value at the base exactly: an infinite
    /// effective order, zero-constant function certificate usable at the
    /// point.
    fn require_exact_function(&self, rule: &str) -> Result<()> {
        match self.find_certificate(DerivativeLevel::Function, Locality::At, 0.0) {
            Some(c) if Self::effective_order(c).is_infinite() => Ok(()),
            _ => Err(Error::Precondition {
                rule: rule.to_string(),
                detail: format!(
                    "part '{}' needs a zero-constant function certificate at the base \
                     point (the models must reproduce f(x₀) exactly)",
                    self.name
                ),
            }),
        }
    }

    fn usable_bound(b: &UniformBound, locality: Locality, radius: f64) -> bool {
        match locality {
            // Any ball contains its centre, so ball bounds serve point
            // requests at every radius.
            Locality::At => true,
            Locality::Near => match b.locality {
                Locality::Near => covers(b.delta_bar, radius),
                // A zero-radius ball degenerates to the point itself.
                Locality::At => radius == 0.0,
            },
        }
    }

    /// Tightest truth-side bound on `quantity` usable for the request.
    fn truth_bound(
        &self,
        quantity: BoundQuantity,
        locality: Locality,
        radius: f64,
        rule: &str,
    ) -> Result<f64> {
        let mut best: Option<f64> = None;
        for b in &self.truth_bounds {
            if b.quantity != quantity || !Self::usable_bound(b, locality, radius) {
                continue;
            }
            best = Some(best.map_or(b.value, |v: f64| v.min(b.value)));
        }
        best.ok_or_else(|| Error::MissingBound {
            symbol: format!("M[{quantity}/{locality}]({})", self.name),
            context: rule.to_string(),
        })
    }

    /// Tightest model-side bound on `quantity`. Falls back to
    /// `M_truth + κ·Δ̄^N` derived from the matching certificate, where `Δ̄`
    /// is the largest radius at which family members are used
    /// (`instance_cap`).
    fn model_bound(
        &self,
        quantity: BoundQuantity,
        locality: Locality,
        radius: f64,
        instance_cap: f64,
        rule: &str,
    ) -> Result<f64> {
        let mut best: Option<f64> = None;
        for b in &self.model_bounds {
            if b.quantity != quantity || !Self::usable_bound(b, locality, radius) {
                continue;
            }
            best = Some(best.map_or(b.value, |v: f64| v.min(b.value)));
        }
        let level = match quantity {
            BoundQuantity::AbsF => Some(DerivativeLevel::Function),
            BoundQuantity::NormGrad => Some(DerivativeLevel::Gradient),
            BoundQuantity::NormHess => Some(DerivativeLevel::Hessian),
            _ => None,
        };
        if let Some(level) = level {
            if let Some(c) = self.find_certificate(level, locality, radius.max(instance_cap)) {
                if let Ok(truth) = self.truth_bound(quantity, locality, radius, rule) {
                    let slack = if c.kappa == 0.0 {
                        0.0
                    } else {
                        c.kappa * instance_cap.powf(c.order.as_f64())
                    };
                    let candidate = truth + slack;
                    best = Some(best.map_or(candidate, |v: f64| v.min(candidate)));
                }
            }
        }
        best.ok_or_else(|| Error::MissingBound {
            symbol: format!("M~[{quantity}/{locality}]({})", self.name),
            context: rule.to_string(),
        })
    }
}

/// Everything a combination rule needs: the parts, the operative radius cap,
/// the base point, and optional extras (a reciprocal bound for quotients, an
/// image confinement bound and image base point for compositions).
#[derive(Debug, Clone)]
pub struct BoundInputs {
    /// The parts being combined, in expression order.
    pub parts: Vec<PartInputs>,
    /// Operative radius cap `Δ̄ > 0` of the combined family.
    pub delta_bar: f64,
    /// Shared base point `x₀` of all parts.
    pub base: Point,
    /// Bound on `1/|f₂|` for quotients; if absent, the denominator part's
    /// truth bounds are searched for an `abs_recip` entry.
    pub recip: Option<UniformBound>,
    /// Image confinement bound `M̄` (`image_grad`) for compositions.
    pub image: Option<UniformBound>,
    /// Image base point `y₀ = f₁(x₀)` for compositions; when present, outer
    /// certificates and bounds are checked to be based there.
    pub image_base: Option<Point>,
    /// Whether a heuristic (non-exhaustive) ordering search is flagged in
    /// the trace. On by default.
    pub flag_heuristic: bool,
}

impl BoundInputs {
    /// Bundles parts, radius cap, and base point; extras default to absent.
    pub fn new(parts: Vec<PartInputs>, delta_bar: f64, base: Point) -> Self {
        Self {
            parts,
            delta_bar,
            base,
            recip: None,
            image: None,
            image_base: None,
            flag_heuristic: true,
        }
    }

    /// Attaches a bound on the reciprocal of the denominator.
    pub fn with_recip_bound(mut self, bound: UniformBound) -> Self {
        self.recip = Some(bound);
        self
    }

    /// Attaches the image confinement bound `M̄` of the inner mapping.
    pub fn with_image_bound(mut self, bound: UniformBound) -> Self {
        self.image = Some(bound);
        self
    }

    /// Records the image base point `y₀ = f₁(x₀)` for base-point checks.
    pub fn with_image_base(mut self, y0: Point) -> Self {
        self.image_base = Some(y0);
        self
    }

    /// Suppresses the zero-valued `heuristic` trace annotation emitted when
    /// the ordering search is not exhaustive.
    pub fn without_heuristic_flag(mut self) -> Self {
        self.flag_heuristic = false;
        self
    }

    fn cap(&self) -> Result<f64> {
        if !self.delta_bar.is_finite() || self.delta_bar <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "operative radius cap must be finite and positive, got {}",
                self.delta_bar
            )));
        }
        Ok(self.delta_bar)
    }
}

// ---------------------------------------------------------------------------
// Internal accumulation
// ---------------------------------------------------------------------------

/// A certificate reduced to what the formulas consume: constant and
/// effective order (`κ = 0` ⇒ infinite).
#[derive(Debug, Clone, Copy)]
struct Leaf {
    kappa: f64,
    order: Order,
}

impl Leaf {
    fn from_certificate(c: &AccuracyCertificate) -> Self {
        Leaf {
            kappa: c.kappa,
            order: PartInputs::effective_order(c),
        }
    }

    fn from_bound(b: &CombinedBound) -> Result<Self> {
        if b.order.is_infinite() && b.constant != 0.0 {
            return Err(Error::Incompatible(format!(
                "combined bound with non-zero constant {} claims infinite order",
                b.constant
            )));
        }
        let order = if b.constant == 0.0 {
            Order::Infinite
        } else {
            b.order
        };
        Ok(Leaf {
            kappa: b.constant,
            order,
        })
    }
}

/// Builds a [`CombinedBound`] term by term. Each term is
/// `coefficient · κ · Δ̄^(N − N_F)`; zero terms (exact parts) and zero-valued
/// annotations keep the trace complete without touching the sum.
struct Assembler {
    rule: String,
    level: DerivativeLevel,
    locality: Locality,
    order: Order,
    delta_bar: f64,
    trace: Vec<TraceTerm>,
    constant: f64,
}

impl Assembler {
    fn new(
        rule: impl Into<String>,
        level: DerivativeLevel,
        locality: Locality,
        order: Order,
        delta_bar: f64,
    ) -> Self {
        Assembler {
            rule: rule.into(),
            level,
            locality,
            order,
            delta_bar,
            trace: Vec::new(),
            constant: 0.0,
        }
    }

    fn term(&mut self, description: impl Into<String>, coefficient: f64, leaf: Leaf) -> Result<()> {
        let description = description.into();
        if leaf.kappa == 0.0 || coefficient == 0.0 {
            self.trace.push(TraceTerm {
                rule: self.rule.clone(),
                description,
                value: 0.0,
            });
            return Ok(());
        }
        if !coefficient.is_finite() || coefficient < 0.0 {
            return Err(Error::Estimation(format!(
                "coefficient of term '{description}' in {} is not finite and non-negative: \
                 {coefficient}",
                self.rule
            )));
        }
        let (Order::Finite(n_term), Order::Finite(n_comb)) = (leaf.order, self.order) else {
            return Err(Error::Incompatible(format!(
                "term '{description}' with non-zero constant cannot enter an infinite-order \
                 statement in {}",
                self.rule
            )));
        };
        let gap = n_term - n_comb;
        if gap < -CAP_TOLERANCE {
            return Err(Error::OrderViolation {
                from: leaf.order,
                to: self.order,
            });
        }
        let value = coefficient * leaf.kappa * self.delta_bar.powf(gap.max(0.0));
        self.constant += value;
        self.trace.push(TraceTerm {
            rule: self.rule.clone(),
            description,
            value,
        });
        Ok(())
    }

    fn note(&mut self, description: impl Into<String>) {
        self.trace.push(TraceTerm {
            rule: self.rule.clone(),
            description: description.into(),
            value: 0.0,
        });
    }

    fn finish(self) -> Result<CombinedBound> {
        if !self.constant.is_finite() {
            return Err(Error::Estimation(format!(
                "combined constant of {} overflowed",
                self.rule
            )));
        }
        Ok(CombinedBound {
            level: self.level,
            locality: self.locality,
            order: self.order,
            constant: self.constant,
            trace: self.trace,
            delta_bar: self.delta_bar,
        })
    }
}

/// Picks the feasible candidate with the smallest constant; if none is
/// feasible, returns the first error encountered.
fn best_candidate(candidates: Vec<Result<CombinedBound>>) -> Result<CombinedBound> {
    let mut best: Option<CombinedBound> = None;
    let mut first_err: Option<Error> = None;
    for c in candidates {
        match c {
            Ok(b) => {
                if best.as_ref().map_or(true, |x| b.constant < x.constant) {
                    best = Some(b);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(b) => Ok(b),
        None => Err(first_err.unwrap_or(Error::EmptyInput("candidate bounds"))),
    }
}

/// Iterative Heap's algorithm; calls `visit` for every permutation of
/// `0..n`.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut arr: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&arr);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                arr.swap(0, i);
            } else {
                arr.swap(c[i], i);
            }
            visit(&arr);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// n-ary product cores
// ---------------------------------------------------------------------------

/// Function-level product constant, minimised over factor orderings.
///
/// For an ordering `σ`, the weakened constant is
/// `Σ_i (Π_{j<i} M_{σ(j)}) (Π_{k>i} M̃_{σ(k)}) κ_{σ(i)} Δ̄^{N_{σ(i)} − N_F}`.
/// A single part passes through unchanged.
fn n_ary_function_bound(
    parts: &[&PartInputs],
    delta_bar: f64,
    locality: Locality,
    rule: &str,
    flag_heuristic: bool,
) -> Result<CombinedBound> {
    let n = parts.len();
    let level = DerivativeLevel::Function;
    let radius = match locality {
        Locality::At => 0.0,
        Locality::Near => delta_bar,
    };
    if n == 1 {
        let leaf = parts[0].leaf(level, locality, delta_bar, rule)?;
        let mut asm = Assembler::new(rule, level, locality, leaf.order, delta_bar);
        asm.term(format!("κ^f({})", parts[0].name), 1.0, leaf)?;
        return asm.finish();
    }
    let leaves = parts
        .iter()
        .map(|p| p.leaf(level, locality, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let n_f = min_order(&leaves.iter().map(|l| l.order).collect::<Vec<_>>())?;
    if n_f.is_infinite() {
        let mut asm = Assembler::new(rule, level, locality, Order::Infinite, delta_bar);
        asm.note("all factors exact: zero combined error");
        return asm.finish();
    }
    let n_f_value = n_f.as_f64();

    let evaluate = |ordering: &[usize]| -> Result<f64> {
        let mut total = 0.0;
        for (pos, &p) in ordering.iter().enumerate() {
            let leaf = leaves[p];
            if leaf.kappa == 0.0 {
                continue;
            }
            let mut coefficient = 1.0;
            for &q in &ordering[..pos] {
                coefficient *= parts[q].truth_bound(BoundQuantity::AbsF, locality, radius, rule)?;
            }
            for &q in &ordering[pos + 1..] {
                coefficient *=
                    parts[q].model_bound(BoundQuantity::AbsF, locality, radius, delta_bar, rule)?;
            }
            total +=
                coefficient * leaf.kappa * delta_bar.powf(leaf.order.as_f64() - n_f_value);
        }
        Ok(total)
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut first_err: Option<Error> = None;
    let mut consider = |ordering: &[usize]| match evaluate(ordering) {
        Ok(v) => {
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, ordering.to_vec()));
            }
        }
        Err(e) => {
            if first_err.is_none() {
                first_err = Some(e);
            }
        }
    };
    let exhaustive = n <= EXACT_PERMUTATION_LIMIT;
    if exhaustive {
        for_each_permutation(n, &mut consider);
    } else {
        let identity: Vec<usize> = (0..n).collect();
        let reversed: Vec<usize> = (0..n).rev().collect();
        let mut greedy = identity.clone();
        let share = |i: usize| {
            if leaves[i].kappa == 0.0 {
                0.0
            } else {
                leaves[i].kappa * delta_bar.powf(leaves[i].order.as_f64())
            }
        };
        greedy.sort_by(|&a, &b| {
            share(a)
                .partial_cmp(&share(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        consider(&identity);
        consider(&reversed);
        consider(&greedy);
    }
    let Some((_, winner)) = best else {
        return Err(first_err.unwrap_or(Error::EmptyInput("feasible factor orderings")));
    };

    let mut asm = Assembler::new(rule, level, locality, n_f, delta_bar);
    for (pos, &p) in winner.iter().enumerate() {
        let leaf = leaves[p];
        if leaf.kappa == 0.0 {
            asm.note(format!("κ^f({}) = 0 (exact factor)", parts[p].name));
            continue;
        }
        let mut coefficient = 1.0;
        let mut description = String::new();
        for &q in &winner[..pos] {
            coefficient *= parts[q].truth_bound(BoundQuantity::AbsF, locality, radius, rule)?;
            description.push_str(&format!("M({}) ", parts[q].name));
        }
        for &q in &winner[pos + 1..] {
            coefficient *=
                parts[q].model_bound(BoundQuantity::AbsF, locality, radius, delta_bar, rule)?;
            description.push_str(&format!("M~({}) ", parts[q].name));
        }
        description.push_str(&format!("κ^f({})", parts[p].name));
        asm.term(description, coefficient, leaf)?;
    }
    if !exhaustive && flag_heuristic {
        asm.note(
            "heuristic: ordering search limited to identity, reversed, and ascending error \
             share",
        );
    }
    asm.finish()
}

/// Gradient constant of a product at the base point:
/// `Σ_i (Π_{j≠i} |f_j(x₀)|) κ_i^g Δ̄^(N_i^g − N_F)`. Requires every factor's
/// models to be exact at the base point.
fn n_ary_gradient_at(parts: &[&PartInputs], delta_bar: f64, rule: &str) -> Result<CombinedBound> {
    for p in parts {
        p.require_exact_function(rule)?;
    }
    let leaves = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Gradient, Locality::At, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let n_f = min_order(&leaves.iter().map(|l| l.order).collect::<Vec<_>>())?;
    let mut asm = Assembler::new(rule, DerivativeLevel::Gradient, Locality::At, n_f, delta_bar);
    for (i, p) in parts.iter().enumerate() {
        if leaves[i].kappa == 0.0 {
            asm.note(format!("κ^g({}) = 0 (exact factor gradient)", p.name));
            continue;
        }
        let mut coefficient = 1.0;
        let mut description = String::new();
        for (j, q) in parts.iter().enumerate() {
            if j == i {
                continue;
            }
            coefficient *= q.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, rule)?;
            description.push_str(&format!("|f({})| ", q.name));
        }
        description.push_str(&format!("κ^g({})", p.name));
        asm.term(description, coefficient, leaves[i])?;
    }
    asm.finish()
}

/// Hessian constant of a product at the base point. Requires exact function
/// values at the base; mixes each factor's gradient constant (weighted by
/// the other factors' gradient bounds) with its Hessian constant.
fn n_ary_hessian_at(parts: &[&PartInputs], delta_bar: f64, rule: &str) -> Result<CombinedBound> {
    for p in parts {
        p.require_exact_function(rule)?;
    }
    let grads = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Gradient, Locality::At, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let hesses = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Hessian, Locality::At, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let mut orders: Vec<Order> = grads.iter().map(|l| l.order).collect();
    orders.extend(hesses.iter().map(|l| l.order));
    let n_f = min_order(&orders)?;
    let mut asm = Assembler::new(rule, DerivativeLevel::Hessian, Locality::At, n_f, delta_bar);
    let abs_at = |q: &PartInputs| q.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, rule);
    for (i, p) in parts.iter().enumerate() {
        if grads[i].kappa == 0.0 {
            asm.note(format!("κ^g({}) = 0 (exact factor gradient)", p.name));
        } else {
            let mut coefficient = 0.0;
            for (j, q) in parts.iter().enumerate() {
                if j == i {
                    continue;
                }
                let mut prod = 1.0;
                for (k, r) in parts.iter().enumerate() {
                    if k == i || k == j {
                        continue;
                    }
                    prod *= abs_at(r)?;
                }
                let grad_pair = q.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, rule)?
                    + q.model_bound(
                        BoundQuantity::NormGrad,
                        Locality::At,
                        0.0,
                        delta_bar,
                        rule,
                    )?;
                coefficient += prod * grad_pair;
            }
            asm.term(
                format!("Σ_j≠{i} ∏|f| (M∇+M~∇) κ^g({})", p.name),
                coefficient,
                grads[i],
            )?;
        }
        if hesses[i].kappa == 0.0 {
            asm.note(format!("κ^h({}) = 0 (exact factor Hessian)", p.name));
        } else {
            let mut coefficient = 1.0;
            let mut description = String::new();
            for (j, q) in parts.iter().enumerate() {
                if j == i {
                    continue;
                }
                coefficient *= abs_at(q)?;
                description.push_str(&format!("|f({})| ", q.name));
            }
            description.push_str(&format!("κ^h({})", p.name));
            asm.term(description, coefficient, hesses[i])?;
        }
    }
    asm.finish()
}

/// Ball-wide gradient constant of a product:
/// `Σ_i [M_∇f̃_i · K_i^f + (Π_{j≠i} M_{f_j}) κ_i^g]` with each share weakened
/// to the combined order; `K_i^f` is the function-level constant of the
/// product of the other factors.
fn n_ary_gradient_near(
    parts: &[&PartInputs],
    delta_bar: f64,
    rule: &str,
    flag_heuristic: bool,
) -> Result<CombinedBound> {
    let n = parts.len();
    if n == 1 {
        let leaf = parts[0].leaf(DerivativeLevel::Gradient, Locality::Near, delta_bar, rule)?;
        let mut asm = Assembler::new(
            rule,
            DerivativeLevel::Gradient,
            Locality::Near,
            leaf.order,
            delta_bar,
        );
        asm.term(format!("κ^g({})", parts[0].name), 1.0, leaf)?;
        return asm.finish();
    }
    let funcs = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Function, Locality::Near, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let grads = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Gradient, Locality::Near, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let mut orders: Vec<Order> = funcs.iter().map(|l| l.order).collect();
    orders.extend(grads.iter().map(|l| l.order));
    let n_f = min_order(&orders)?;
    if n_f.is_infinite() {
        let mut asm = Assembler::new(
            rule,
            DerivativeLevel::Gradient,
            Locality::Near,
            Order::Infinite,
            delta_bar,
        );
        asm.note("all factors exact: zero combined gradient error");
        return asm.finish();
    }
    let mut asm = Assembler::new(
        rule,
        DerivativeLevel::Gradient,
        Locality::Near,
        n_f,
        delta_bar,
    );
    for (i, p) in parts.iter().enumerate() {
        let others: Vec<&PartInputs> = parts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| *q)
            .collect();
        let sub = n_ary_function_bound(&others, delta_bar, Locality::Near, rule, flag_heuristic)?;
        let sub_leaf = Leaf::from_bound(&sub)?;
        if sub_leaf.kappa == 0.0 {
            asm.note(format!("other factors of '{}' exact as a product", p.name));
        } else {
            let m = p.model_bound(
                BoundQuantity::NormGrad,
                Locality::Near,
                delta_bar,
                delta_bar,
                rule,
            )?;
            asm.term(format!("M~∇({}) K^f(rest)", p.name), m, sub_leaf)?;
        }
        if grads[i].kappa == 0.0 {
            asm.note(format!("κ^g({}) = 0 (exact factor gradient)", p.name));
        } else {
            let mut coefficient = 1.0;
            let mut description = String::new();
            for q in &others {
                coefficient *=
                    q.truth_bound(BoundQuantity::AbsF, Locality::Near, delta_bar, rule)?;
                description.push_str(&format!("M({}) ", q.name));
            }
            description.push_str(&format!("κ^g({})", p.name));
            asm.term(description, coefficient, grads[i])?;
        }
    }
    asm.finish()
}

/// Ball-wide Hessian constant of a product:
/// `Σ_i [M_∇²f̃_i · K_i^f + M_∇f̃_i · K_i^{fg}
///        + (Σ_{j≠i} (Π_{k≠i,j} M_{f_k}) M_∇f_j) κ_i^g
///        + (Π_{j≠i} M_{f_j}) κ_i^h]`,
/// each share weakened to the combined order.
fn n_ary_hessian_near(
    parts: &[&PartInputs],
    delta_bar: f64,
    rule: &str,
    flag_heuristic: bool,
) -> Result<CombinedBound> {
    let n = parts.len();
    if n == 1 {
        let leaf = parts[0].leaf(DerivativeLevel::Hessian, Locality::Near, delta_bar, rule)?;
        let mut asm = Assembler::new(
            rule,
            DerivativeLevel::Hessian,
            Locality::Near,
            leaf.order,
            delta_bar,
        );
        asm.term(format!("κ^h({})", parts[0].name), 1.0, leaf)?;
        return asm.finish();
    }
    let funcs = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Function, Locality::Near, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let grads = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Gradient, Locality::Near, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let hesses = parts
        .iter()
        .map(|p| p.leaf(DerivativeLevel::Hessian, Locality::Near, delta_bar, rule))
        .collect::<Result<Vec<_>>>()?;
    let mut orders: Vec<Order> = funcs.iter().map(|l| l.order).collect();
    orders.extend(grads.iter().map(|l| l.order));
    orders.extend(hesses.iter().map(|l| l.order));
    let n_f = min_order(&orders)?;
    if n_f.is_infinite() {
        let mut asm = Assembler::new(
            rule,
            DerivativeLevel::Hessian,
            Locality::Near,
            Order::Infinite,
            delta_bar,
        );
        asm.note("all factors exact: zero combined Hessian error");
        return asm.finish();
    }
    let mut asm = Assembler::new(
        rule,
        DerivativeLevel::Hessian,
        Locality::Near,
        n_f,
        delta_bar,
    );
    for (i, p) in parts.iter().enumerate() {
        let others: Vec<&PartInputs> = parts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| *q)
            .collect();
        let sub_f = n_ary_function_bound(&others, delta_bar, Locality::Near, rule, flag_heuristic)?;
        let sub_f_leaf = Leaf::from_bound(&sub_f)?;
        if sub_f_leaf.kappa == 0.0 {
            asm.note(format!("other factors of '{}' exact as a product", p.name));
        } else {
            let m = p.model_bound(
                BoundQuantity::NormHess,
                Locality::Near,
                delta_bar,
                delta_bar,
                rule,
            )?;
            asm.term(format!("M~∇²({}) K^f(rest)", p.name), m, sub_f_leaf)?;
        }
        let sub_g = n_ary_gradient_near(&others, delta_bar, rule, flag_heuristic)?;
        let sub_g_leaf = Leaf::from_bound(&sub_g)?;
        if sub_g_leaf.kappa == 0.0 {
            asm.note(format!(
                "other factors of '{}' have exact product gradients",
                p.name
            ));
        } else {
            let m = p.model_bound(
                BoundQuantity::NormGrad,
                Locality::Near,
                delta_bar,
                delta_bar,
                rule,
            )?;
            asm.term(format!("M~∇({}) K^fg(rest)", p.name), m, sub_g_leaf)?;
        }
        if grads[i].kappa == 0.0 {
            asm.note(format!("κ^g({}) = 0 (exact factor gradient)", p.name));
        } else {
            let mut coefficient = 0.0;
            for (j, q) in parts.iter().enumerate() {
                if j == i {
                    continue;
                }
                let mut prod = 1.0;
                for (k, r) in parts.iter().enumerate() {
                    if k == i || k == j {
                        continue;
                    }
                    prod *= r.truth_bound(BoundQuantity::AbsF, Locality::Near, delta_bar, rule)?;
                }
                coefficient +=
                    prod * q.truth_bound(BoundQuantity::NormGrad, Locality::Near, delta_bar, rule)?;
            }
            asm.term(
                format!("Σ_j≠{i} ∏M M∇ κ^g({})", p.name),
                coefficient,
                grads[i],
            )?;
        }
        if hesses[i].kappa == 0.0 {
            asm.note(format!("κ^h({}) = 0 (exact factor Hessian)", p.name));
        } else {
            let mut coefficient = 1.0;
            let mut description = String::new();
            for q in &others {
                coefficient *=
                    q.truth_bound(BoundQuantity::AbsF, Locality::Near, delta_bar, rule)?;
                description.push_str(&format!("M({}) ", q.name));
            }
            description.push_str(&format!("κ^h({})", p.name));
            asm.term(description, coefficient, hesses[i])?;
        }
    }
    asm.finish()
}

fn product_dispatch(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
    tag: &str,
) -> Result<CombinedBound> {
    let cap = inputs.cap()?;
    let parts: Vec<&PartInputs> = inputs.parts.iter().collect();
    let rule = format!("{tag}/{level}/{locality}");
    match (level, locality) {
        (DerivativeLevel::Function, _) => {
            n_ary_function_bound(&parts, cap, locality, &rule, inputs.flag_heuristic)
        }
        (DerivativeLevel::Gradient, Locality::At) => n_ary_gradient_at(&parts, cap, &rule),
        (DerivativeLevel::Hessian, Locality::At) => n_ary_hessian_at(&parts, cap, &rule),
        (DerivativeLevel::Gradient, Locality::Near) => {
            n_ary_gradient_near(&parts, cap, &rule, inputs.flag_heuristic)
        }
        (DerivativeLevel::Hessian, Locality::Near) => {
            n_ary_hessian_near(&parts, cap, &rule, inputs.flag_heuristic)
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Accuracy statement for a product of two scalar parts.
///
/// Function level: constant minimised over the two factor orderings,
/// `min{M̃₂κ₁Δ̄^{N₁−N_F} + M₁κ₂Δ̄^{N₂−N_F}, M₂κ₁Δ̄^{N₁−N_F} + M̃₁κ₂Δ̄^{N₂−N_F}}`
/// (localities of the `M` values matching the statement). Derivative levels
/// at the base point require both parts' models to be exact there;
/// ball-wide derivative levels mix function and derivative certificates.
///
/// # Example
///
/// ```
/// use modelcalc::cert::{
///     AccuracyCertificate, BoundQuantity, DerivativeLevel, Locality, Order, Point, Provenance,
///     UniformBound,
/// };
/// use modelcalc::calculus::{product2_bound, BoundInputs, PartInputs};
///
/// let base = Point::from_column_slice(&[0.0]);
/// let part = |name: &str| {
///     PartInputs::new(
///         name,
///         vec![AccuracyCertificate::new(
///             DerivativeLevel::Function,
///             Locality::Near,
///             Order::Finite(1.0),
///             1.0,
///             base.clone(),
///             1.0,
///         )
///         .unwrap()],
///         vec![UniformBound::new(
///             BoundQuantity::AbsF,
///             1.0,
///             Locality::Near,
///             base.clone(),
///             1.0,
///             Provenance::Analytic,
///         )
///         .unwrap()],
///         vec![],
///     )
/// };
/// let inputs = BoundInputs::new(vec![part("f1"), part("f2")], 1.0, base);
/// let b = product2_bound(&inputs, DerivativeLevel::Function, Locality::Near).unwrap();
/// assert_eq!(b.order, Order::Finite(1.0));
/// assert!((b.constant - 3.0).abs() < 1e-12); // M̃ derived as 1 + 1·1¹ = 2
/// ```
pub fn product2_bound(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    if inputs.parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "a two-factor product needs exactly 2 parts, got {}",
            inputs.parts.len()
        )));
    }
    product_dispatch(inputs, level, locality, "product2")
}

/// Accuracy statement for a product of `n ≥ 2` scalar parts.
///
/// Same rules as [`product2_bound`] generalised to `n` factors; with two
/// parts the two agree exactly. The function-level ordering search is
/// exhaustive up to [`EXACT_PERMUTATION_LIMIT`] factors and heuristic
/// beyond (flagged in the trace unless suppressed via
/// [`BoundInputs::without_heuristic_flag`]).
pub fn product_n_bound(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    if inputs.parts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an n-ary product needs at least 2 parts, got {}",
            inputs.parts.len()
        )));
    }
    product_dispatch(inputs, level, locality, "product_n")
}

/// Sharper base-point statements for a product when the caller asserts that
/// the factors listed in `zero_indices` vanish *exactly* at the base point.
///
/// * Function level: for each asserted zero `z`, the product's base-point
///   error is at most `(Π_{j≠z} M̃_j^{at}) κ_z^f Δ^{N_z^f}`; the candidate
///   with the highest order (ties: smallest constant) is returned.
/// * Gradient level (requires every part's models exact at the base): one
///   zero gives `(Π_{j≠z} |f_j(x₀)|) κ_z^g Δ^{N_z^g}`; two or more distinct
///   zeros annihilate every term of the gradient error — the statement is
///   exact.
/// * Hessian refinements and ball-wide refinements are not available.
///
/// The assertion is the caller's responsibility: indices must identify
/// factors whose *true* value at the base point is exactly zero. Nothing is
/// detected numerically here.
pub fn zero_factor_refinement(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    zero_indices: &[usize],
) -> Result<CombinedBound> {
    let cap = inputs.cap()?;
    let n = inputs.parts.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "zero-factor refinement applies to products of at least 2 parts, got {n}"
        )));
    }
    if zero_indices.is_empty() {
        return Err(Error::EmptyInput("zero factor indices"));
    }
    let mut zeros: Vec<usize> = zero_indices.to_vec();
    zeros.sort_unstable();
    zeros.dedup();
    if let Some(&bad) = zeros.iter().find(|&&z| z >= n) {
        return Err(Error::InvalidArgument(format!(
            "zero factor index {bad} out of range for {n} parts"
        )));
    }
    let rule = format!("product_n/zero_factor/{level}/at");
    match level {
        DerivativeLevel::Function => {
            let mut candidates = Vec::new();
            for &z in &zeros {
                candidates.push((|| -> Result<CombinedBound> {
                    let leaf =
                        inputs.parts[z].leaf(DerivativeLevel::Function, Locality::At, cap, &rule)?;
                    let mut asm = Assembler::new(
                        &rule,
                        DerivativeLevel::Function,
                        Locality::At,
                        leaf.order,
                        cap,
                    );
                    if leaf.kappa == 0.0 {
                        asm.note(format!(
                            "vanishing factor '{}' has exact models",
                            inputs.parts[z].name
                        ));
                        return asm.finish();
                    }
                    let mut coefficient = 1.0;
                    let mut description = String::new();
                    for (j, q) in inputs.parts.iter().enumerate() {
                        if j == z {
                            continue;
                        }
                        coefficient *=
                            q.model_bound(BoundQuantity::AbsF, Locality::At, 0.0, cap, &rule)?;
                        description.push_str(&format!("M~({}) ", q.name));
                    }
                    description.push_str(&format!(
                        "κ^f({}) [vanishes at x₀]",
                        inputs.parts[z].name
                    ));
                    asm.term(description, coefficient, leaf)?;
                    asm.finish()
                })());
            }
            // Highest order wins; among equal orders the smallest constant.
            let mut best: Option<CombinedBound> = None;
            let mut first_err: Option<Error> = None;
            for c in candidates {
                match c {
                    Ok(b) => {
                        let better = best.as_ref().map_or(true, |x| {
                            let (bo, xo) = (b.order.as_f64(), x.order.as_f64());
                            bo > xo || (bo == xo && b.constant < x.constant)
                        });
                        if better {
                            best = Some(b);
                        }
                    }
                    Err(e) => {
                        if first_err.is_none() {
                            first_err = Some(e);
                        }
                    }
                }
            }
            best.ok_or_else(|| first_err.unwrap_or(Error::EmptyInput("zero factor candidates")))
        }
        DerivativeLevel::Gradient => {
            for p in &inputs.parts {
                p.require_exact_function(&rule)?;
            }
            if zeros.len() >= 2 {
                let mut asm = Assembler::new(
                    &rule,
                    DerivativeLevel::Gradient,
                    Locality::At,
                    Order::Infinite,
                    cap,
                );
                asm.note(
                    "two or more factors vanish at the base point: every gradient error term \
                     contains a vanishing factor",
                );
                return asm.finish();
            }
            let z = zeros[0];
            let leaf = inputs.parts[z].leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let mut asm = Assembler::new(
                &rule,
                DerivativeLevel::Gradient,
                Locality::At,
                leaf.order,
                cap,
            );
            if leaf.kappa == 0.0 {
                asm.note(format!(
                    "vanishing factor '{}' has an exact gradient model",
                    inputs.parts[z].name
                ));
                return asm.finish();
            }
            let mut coefficient = 1.0;
            let mut description = String::new();
            for (j, q) in inputs.parts.iter().enumerate() {
                if j == z {
                    continue;
                }
                coefficient *= q.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                description.push_str(&format!("|f({})| ", q.name));
            }
            description.push_str(&format!("κ^g({}) [vanishes at x₀]", inputs.parts[z].name));
            asm.term(description, coefficient, leaf)?;
            asm.finish()
        }
        DerivativeLevel::Hessian => Err(Error::InvalidArgument(
            "zero-factor refinement covers function and gradient levels only".into(),
        )),
    }
}

/// Accuracy statement for an integer power `f^n`, `n ≥ 1`.
///
/// `n = 1` passes the part's certificate through. Function level uses the
/// telescoping constant `(Σ_{i=1..n} M^{i−1} M̃^{n−i}) κ^f`; base-point
/// derivative levels use the closed forms `n|f(x₀)|^{n−1} κ^g` and
/// `n(n−1)|f(x₀)|^{n−2}(M_∇f + M_∇f̃) κ^g Δ̄^{N^g−N} + n|f(x₀)|^{n−1} κ^h`
/// (models exact at the base required); ball-wide derivative levels
/// delegate to the n-ary product rules with `n` copies of the part.
pub fn power_bound(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
    n: u32,
) -> Result<CombinedBound> {
    let cap = inputs.cap()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "power exponent must be at least 1".into(),
        ));
    }
    if inputs.parts.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "a power takes exactly 1 part, got {}",
            inputs.parts.len()
        )));
    }
    let part = &inputs.parts[0];
    let rule = format!("power/{level}/{locality}");
    if n == 1 {
        let leaf = part.leaf(level, locality, cap, &rule)?;
        let mut asm = Assembler::new(&rule, level, locality, leaf.order, cap);
        asm.term(format!("κ({}) (exponent 1)", part.name), 1.0, leaf)?;
        return asm.finish();
    }
    let radius = match locality {
        Locality::At => 0.0,
        Locality::Near => cap,
    };
    match (level, locality) {
        (DerivativeLevel::Function, _) => {
            let leaf = part.leaf(DerivativeLevel::Function, locality, cap, &rule)?;
            let mut asm = Assembler::new(&rule, level, locality, leaf.order, cap);
            if leaf.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0 (exact base)", part.name));
                return asm.finish();
            }
            let m = part.truth_bound(BoundQuantity::AbsF, locality, radius, &rule)?;
            let m_model = part.model_bound(BoundQuantity::AbsF, locality, radius, cap, &rule)?;
            let coefficient: f64 = (0..n)
                .map(|i| m.powi(i as i32) * m_model.powi((n - 1 - i) as i32))
                .sum();
            asm.term(
                format!("Σ M({0})^i M~({0})^(n-1-i) κ^f({0})", part.name),
                coefficient,
                leaf,
            )?;
            asm.finish()
        }
        (DerivativeLevel::Gradient, Locality::At) => {
            part.require_exact_function(&rule)?;
            let leaf = part.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let mut asm = Assembler::new(&rule, level, locality, leaf.order, cap);
            if leaf.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0 (exact gradient)", part.name));
                return asm.finish();
            }
            let f0 = part.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
            asm.term(
                format!("n |f({0})(x₀)|^(n-1) κ^g({0})", part.name),
                f64::from(n) * f0.powi(n as i32 - 1),
                leaf,
            )?;
            asm.finish()
        }
        (DerivativeLevel::Hessian, Locality::At) => {
            part.require_exact_function(&rule)?;
            let grad = part.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let hess = part.leaf(DerivativeLevel::Hessian, Locality::At, cap, &rule)?;
            let n_f = min_order(&[grad.order, hess.order])?;
            let mut asm = Assembler::new(&rule, level, locality, n_f, cap);
            if grad.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0 (exact gradient)", part.name));
            } else {
                let f0 = part.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                let pair = part.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, &rule)?
                    + part.model_bound(BoundQuantity::NormGrad, Locality::At, 0.0, cap, &rule)?;
                asm.term(
                    format!("n(n-1) |f({0})(x₀)|^(n-2) (M∇+M~∇) κ^g({0})", part.name),
                    f64::from(n) * f64::from(n - 1) * f0.powi(n as i32 - 2) * pair,
                    grad,
                )?;
            }
            if hess.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0 (exact Hessian)", part.name));
            } else {
                let f0 = part.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                asm.term(
                    format!("n |f({0})(x₀)|^(n-1) κ^h({0})", part.name),
                    f64::from(n) * f0.powi(n as i32 - 1),
                    hess,
                )?;
            }
            asm.finish()
        }
        (DerivativeLevel::Gradient, Locality::Near) => {
            let clones: Vec<&PartInputs> = (0..n as usize).map(|_| part).collect();
            n_ary_gradient_near(&clones, cap, &rule, inputs.flag_heuristic)
        }
        (DerivativeLevel::Hessian, Locality::Near) => {
            let clones: Vec<&PartInputs> = (0..n as usize).map(|_| part).collect();
            n_ary_hessian_near(&clones, cap, &rule, inputs.flag_heuristic)
        }
    }
}

/// Shared reciprocal-transfer arithmetic: given a truth bound `M ≥ 1/|f|`
/// and a function certificate `(κ, N)` with positive effective order,
/// returns `(M̃, Δ̄')` with `M̃ ≥ 1/|f̃_Δ|` for all `Δ ≤ Δ̄'`, where `Δ̄'`
/// halves `Δ̄` until `1 − Δ̄'^N·M·κ ≥ 1/2`.
fn reciprocal_adjust(
    m: f64,
    kappa: f64,
    order: Order,
    delta_bar: f64,
    rule: &str,
) -> Result<(f64, f64)> {
    if kappa == 0.0 {
        return Ok((m, delta_bar));
    }
    let n = order.as_f64();
    if !(n > 0.0) {
        return Err(Error::Precondition {
            rule: rule.to_string(),
            detail: format!(
                "the function certificate must have positive order (got {order}); with order 0 \
                 the model may cross zero at every radius"
            ),
        });
    }
    let mut delta = delta_bar;
    for _ in 0..=64 {
        let denominator = 1.0 - delta.powf(n) * m * kappa;
        if denominator >= 0.5 {
            return Ok((m / denominator, delta));
        }
        delta /= 2.0;
    }
    Err(Error::Estimation(format!(
        "no radius with transfer denominator ≥ 1/2 after 64 halvings of Δ̄ = {delta_bar} \
         (M = {m}, κ = {kappa}, N = {n})"
    )))
}

/// Transfers a truth bound `M ≥ sup 1/|f|` to the model reciprocal:
/// `M̃ = M / (1 − Δ̄^N M κ) ≥ sup_Δ 1/|f̃_Δ|`, halving the radius cap until
/// the denominator is at least `1/2`.
///
/// Needs a *function*-level certificate with positive effective order whose
/// locality covers the bound's locality. An exact certificate (`κ = 0`)
/// returns `M` with the cap unchanged.
///
/// # Example
///
/// ```
/// use modelcalc::cert::{
///     AccuracyCertificate, BoundQuantity, DerivativeLevel, Locality, Order, Point, Provenance,
///     UniformBound,
/// };
/// use modelcalc::calculus::reciprocal_model_bound;
///
/// let base = Point::from_column_slice(&[0.0]);
/// let cert = AccuracyCertificate::new(
///     DerivativeLevel::Function,
///     Locality::Near,
///     Order::Finite(1.0),
///     0.5,
///     base.clone(),
///     0.5,
/// )
/// .unwrap();
/// let recip = UniformBound::new(
///     BoundQuantity::AbsRecip,
///     1.0,
///     Locality::Near,
///     base,
///     0.5,
///     Provenance::Analytic,
/// )
/// .unwrap();
/// let out = reciprocal_model_bound(&cert, &recip, 0.5).unwrap();
/// assert!((out.value - 4.0 / 3.0).abs() < 1e-15); // 1/(1 − 0.5·1·0.5)
/// assert_eq!(out.delta_bar, 0.5); // no halving needed
/// ```
pub fn reciprocal_model_bound(
    cert: &AccuracyCertificate,
    recip: &UniformBound,
    delta_bar: f64,
) -> Result<UniformBound> {
    const RULE: &str = "reciprocal/model_bound";
    if recip.quantity != BoundQuantity::AbsRecip {
        return Err(Error::QuantityMismatch {
            level: cert.level,
            quantity: recip.quantity,
        });
    }
    if cert.level != DerivativeLevel::Function {
        return Err(Error::Incompatible(format!(
            "reciprocal transfer needs a function-level certificate, got {}",
            cert.level
        )));
    }
    if !delta_bar.is_finite() || delta_bar <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "operative radius cap must be finite and positive, got {delta_bar}"
        )));
    }
    if !covers(cert.delta_bar, delta_bar) {
        return Err(Error::Incompatible(format!(
            "certificate cap {} does not cover the operative radius {delta_bar}",
            cert.delta_bar
        )));
    }
    if recip.locality == Locality::Near && cert.locality == Locality::At {
        return Err(Error::Incompatible(
            "a ball-wide reciprocal bound needs a ball-wide function certificate".into(),
        ));
    }
    let leaf = Leaf::from_certificate(cert);
    let (m_tilde, adjusted) = reciprocal_adjust(recip.value, leaf.kappa, leaf.order, delta_bar, RULE)?;
    UniformBound::new(
        BoundQuantity::AbsRecip,
        m_tilde,
        recip.locality,
        recip.base.clone(),
        adjusted,
        recip.provenance,
    )
}

fn quotient_recip(
    inputs: &BoundInputs,
    den: &PartInputs,
    locality: Locality,
    radius: f64,
    rule: &str,
) -> Result<f64> {
    if let Some(b) = &inputs.recip {
        if b.quantity != BoundQuantity::AbsRecip {
            return Err(Error::QuantityMismatch {
                level: DerivativeLevel::Function,
                quantity: b.quantity,
            });
        }
        if !PartInputs::usable_bound(b, locality, radius) {
            return Err(Error::Incompatible(format!(
                "supplied reciprocal bound ({} radius {}) does not cover a {locality} request \
                 of radius {radius}",
                b.locality, b.delta_bar
            )));
        }
        return Ok(b.value);
    }
    den.truth_bound(BoundQuantity::AbsRecip, locality, radius, rule)
}

/// Accuracy statement for a quotient `f₁/f₂` of two scalar parts.
///
/// Requires a bound `M ≥ 1/|f₂|` ([`BoundInputs::with_recip_bound`] or an
/// `abs_recip` entry among the denominator's truth bounds) and, wherever the
/// denominator's function certificate participates, a positive effective
/// order (otherwise the model denominator may cross zero). Statements whose
/// constant involves the model reciprocal `M̃` may return a *shrunken*
/// radius cap (see [`reciprocal_model_bound`]); base-point derivative
/// statements require exact function models and keep the cap.
pub fn quotient_bound(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    let cap = inputs.cap()?;
    if inputs.parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "a quotient needs exactly 2 parts (numerator, denominator), got {}",
            inputs.parts.len()
        )));
    }
    let num = &inputs.parts[0];
    let den = &inputs.parts[1];
    let rule = format!("quotient/{level}/{locality}");
    let radius = match locality {
        Locality::At => 0.0,
        Locality::Near => cap,
    };
    match (level, locality) {
        (DerivativeLevel::Function, _) => {
            let leaf1 = num.leaf(DerivativeLevel::Function, locality, cap, &rule)?;
            let leaf2 = den.leaf(DerivativeLevel::Function, locality, cap, &rule)?;
            let m_recip = quotient_recip(inputs, den, locality, radius, &rule)?;
            let (m_tilde, adjusted) =
                reciprocal_adjust(m_recip, leaf2.kappa, leaf2.order, cap, &rule)?;
            let n_f = min_order(&[leaf1.order, leaf2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, adjusted);
                asm.note("numerator and denominator exact: zero combined error");
                return asm.finish();
            }
            let adj_radius = match locality {
                Locality::At => 0.0,
                Locality::Near => adjusted,
            };
            let make = |use_model_numerator: bool| -> Result<CombinedBound> {
                let mut asm = Assembler::new(&rule, level, locality, n_f, adjusted);
                let (c1, name1) = if use_model_numerator {
                    (m_recip, "M(1/f₂)")
                } else {
                    (m_tilde, "M~(1/f₂)")
                };
                asm.term(format!("{name1} κ^f({})", num.name), c1, leaf1)?;
                if leaf2.kappa == 0.0 {
                    asm.note(format!("κ^f({}) = 0 (exact denominator)", den.name));
                } else {
                    let m_num = if use_model_numerator {
                        num.model_bound(BoundQuantity::AbsF, locality, adj_radius, adjusted, &rule)?
                    } else {
                        num.truth_bound(BoundQuantity::AbsF, locality, adj_radius, &rule)?
                    };
                    let numer = if use_model_numerator { "M~" } else { "M" };
                    asm.term(
                        format!("M(1/f₂) M~(1/f₂) {numer}({}) κ^f({})", num.name, den.name),
                        m_recip * m_tilde * m_num,
                        leaf2,
                    )?;
                }
                asm.finish()
            };
            best_candidate(vec![make(true), make(false)])
        }
        (DerivativeLevel::Gradient, Locality::At) => {
            num.require_exact_function(&rule)?;
            den.require_exact_function(&rule)?;
            let leaf1 = num.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let leaf2 = den.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let m_recip = quotient_recip(inputs, den, Locality::At, 0.0, &rule)?;
            let n_f = min_order(&[leaf1.order, leaf2.order])?;
            let mut asm = Assembler::new(&rule, level, locality, n_f, cap);
            asm.term(format!("|1/f₂(x₀)| κ^g({})", num.name), m_recip, leaf1)?;
            if leaf2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0 (exact denominator gradient)", den.name));
            } else {
                let f1 = num.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                asm.term(
                    format!("|f₁(x₀)/f₂²(x₀)| κ^g({})", den.name),
                    f1 * m_recip * m_recip,
                    leaf2,
                )?;
            }
            asm.finish()
        }
        (DerivativeLevel::Hessian, Locality::At) => {
            num.require_exact_function(&rule)?;
            den.require_exact_function(&rule)?;
            let g1 = num.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let g2 = den.leaf(DerivativeLevel::Gradient, Locality::At, cap, &rule)?;
            let h1 = num.leaf(DerivativeLevel::Hessian, Locality::At, cap, &rule)?;
            let h2 = den.leaf(DerivativeLevel::Hessian, Locality::At, cap, &rule)?;
            let m_recip = quotient_recip(inputs, den, Locality::At, 0.0, &rule)?;
            let n_f = min_order(&[g1.order, g2.order, h1.order, h2.order])?;
            let mut asm = Assembler::new(&rule, level, locality, n_f, cap);
            let grad_pair = |p: &PartInputs| -> Result<f64> {
                Ok(
                    p.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, &rule)?
                        + p.model_bound(BoundQuantity::NormGrad, Locality::At, 0.0, cap, &rule)?,
                )
            };
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", num.name));
            } else {
                asm.term(
                    format!("|1/f₂²| (M∇+M~∇)({}) κ^g({})", den.name, num.name),
                    m_recip * m_recip * grad_pair(den)?,
                    g1,
                )?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", den.name));
            } else {
                let f1 = num.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                let coefficient = m_recip * m_recip * grad_pair(num)?
                    + 2.0 * f1 * m_recip.powi(3) * grad_pair(den)?;
                asm.term(
                    format!(
                        "[|1/f₂²|(M∇+M~∇)({}) + |2f₁/f₂³|(M∇+M~∇)({})] κ^g({})",
                        num.name, den.name, den.name
                    ),
                    coefficient,
                    g2,
                )?;
            }
            if h1.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", num.name));
            } else {
                asm.term(format!("|1/f₂| κ^h({})", num.name), m_recip, h1)?;
            }
            if h2.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", den.name));
            } else {
                let f1 = num.truth_bound(BoundQuantity::AbsF, Locality::At, 0.0, &rule)?;
                asm.term(
                    format!("|f₁/f₂²| κ^h({})", den.name),
                    f1 * m_recip * m_recip,
                    h2,
                )?;
            }
            asm.finish()
        }
        (DerivativeLevel::Gradient, Locality::Near) => {
            let f1 = num.leaf(DerivativeLevel::Function, Locality::Near, cap, &rule)?;
            let f2 = den.leaf(DerivativeLevel::Function, Locality::Near, cap, &rule)?;
            let g1 = num.leaf(DerivativeLevel::Gradient, Locality::Near, cap, &rule)?;
            let g2 = den.leaf(DerivativeLevel::Gradient, Locality::Near, cap, &rule)?;
            let m_recip = quotient_recip(inputs, den, Locality::Near, cap, &rule)?;
            let (m_tilde, adjusted) = reciprocal_adjust(m_recip, f2.kappa, f2.order, cap, &rule)?;
            let n_f = min_order(&[f1.order, f2.order, g1.order, g2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, adjusted);
                asm.note("numerator and denominator exact: zero combined gradient error");
                return asm.finish();
            }
            let mut asm = Assembler::new(&rule, level, locality, n_f, adjusted);
            let mb = |p: &PartInputs, q: BoundQuantity| -> Result<f64> {
                p.model_bound(q, Locality::Near, adjusted, adjusted, &rule)
            };
            let tb = |p: &PartInputs, q: BoundQuantity| -> Result<f64> {
                p.truth_bound(q, Locality::Near, adjusted, &rule)
            };
            if f1.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", num.name));
            } else {
                asm.term(
                    format!("M~∇({}) M~² κ^f({})", den.name, num.name),
                    mb(den, BoundQuantity::NormGrad)? * m_tilde * m_tilde,
                    f1,
                )?;
            }
            if f2.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", den.name));
            } else {
                let coefficient = mb(den, BoundQuantity::NormGrad)?
                    * m_recip.powi(2)
                    * m_tilde.powi(2)
                    * tb(num, BoundQuantity::AbsF)?
                    * (tb(den, BoundQuantity::AbsF)? + mb(den, BoundQuantity::AbsF)?)
                    + mb(num, BoundQuantity::NormGrad)? * m_recip * m_tilde;
                asm.term(
                    format!(
                        "[M~∇({1}) M² M~² M({0}) (M+M~)({1}) + M~∇({0}) M M~] κ^f({1})",
                        num.name, den.name
                    ),
                    coefficient,
                    f2,
                )?;
            }
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", num.name));
            } else {
                asm.term(format!("M(1/f₂) κ^g({})", num.name), m_recip, g1)?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", den.name));
            } else {
                asm.term(
                    format!("M({}) M(1/f₂)² κ^g({})", num.name, den.name),
                    tb(num, BoundQuantity::AbsF)? * m_recip.powi(2),
                    g2,
                )?;
            }
            asm.finish()
        }
        (DerivativeLevel::Hessian, Locality::Near) => {
            let f1 = num.leaf(DerivativeLevel::Function, Locality::Near, cap, &rule)?;
            let f2 = den.leaf(DerivativeLevel::Function, Locality::Near, cap, &rule)?;
            let g1 = num.leaf(DerivativeLevel::Gradient, Locality::Near, cap, &rule)?;
            let g2 = den.leaf(DerivativeLevel::Gradient, Locality::Near, cap, &rule)?;
            let h1 = num.leaf(DerivativeLevel::Hessian, Locality::Near, cap, &rule)?;
            let h2 = den.leaf(DerivativeLevel::Hessian, Locality::Near, cap, &rule)?;
            let m_recip = quotient_recip(inputs, den, Locality::Near, cap, &rule)?;
            let (m_tilde, adjusted) = reciprocal_adjust(m_recip, f2.kappa, f2.order, cap, &rule)?;
            let n_f = min_order(&[f1.order, f2.order, g1.order, g2.order, h1.order, h2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, adjusted);
                asm.note("numerator and denominator exact: zero combined Hessian error");
                return asm.finish();
            }
            let mut asm = Assembler::new(&rule, level, locality, n_f, adjusted);
            let mb = |p: &PartInputs, q: BoundQuantity| -> Result<f64> {
                p.model_bound(q, Locality::Near, adjusted, adjusted, &rule)
            };
            let tb = |p: &PartInputs, q: BoundQuantity| -> Result<f64> {
                p.truth_bound(q, Locality::Near, adjusted, &rule)
            };
            if f1.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", num.name));
            } else {
                let coefficient = mb(den, BoundQuantity::NormHess)? * m_recip.powi(2)
                    + 2.0 * mb(den, BoundQuantity::NormGrad)?.powi(2) * m_recip.powi(3);
                asm.term(
                    format!("[M~∇²({0}) M² + 2M~∇({0})² M³] κ^f({1})", den.name, num.name),
                    coefficient,
                    f1,
                )?;
            }
            if f2.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", den.name));
            } else {
                let m_sum = tb(den, BoundQuantity::AbsF)? + mb(den, BoundQuantity::AbsF)?;
                let m2 = tb(den, BoundQuantity::AbsF)?;
                let m2_model = mb(den, BoundQuantity::AbsF)?;
                let cubic = m2 * m2 + m2 * m2_model + m2_model * m2_model;
                let coefficient = mb(num, BoundQuantity::NormHess)? * m_recip * m_tilde
                    + mb(num, BoundQuantity::AbsF)?
                        * m_sum
                        * mb(den, BoundQuantity::NormHess)?
                        * m_recip.powi(2)
                        * m_tilde.powi(2)
                    + 2.0
                        * m_sum
                        * mb(num, BoundQuantity::NormGrad)?
                        * mb(den, BoundQuantity::NormGrad)?
                        * m_recip.powi(2)
                        * m_tilde.powi(2)
                    + 2.0
                        * mb(num, BoundQuantity::AbsF)?
                        * cubic
                        * mb(den, BoundQuantity::NormGrad)?.powi(2)
                        * m_recip.powi(3)
                        * m_tilde.powi(3);
                asm.term(
                    format!("quotient curvature transfer κ^f({})", den.name),
                    coefficient,
                    f2,
                )?;
            }
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", num.name));
            } else {
                let coefficient = m_recip.powi(2)
                    * (tb(den, BoundQuantity::NormGrad)? + mb(den, BoundQuantity::NormGrad)?);
                asm.term(
                    format!("M² (M∇+M~∇)({}) κ^g({})", den.name, num.name),
                    coefficient,
                    g1,
                )?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", den.name));
            } else {
                let coefficient = m_recip.powi(2)
                    * (tb(num, BoundQuantity::NormGrad)? + mb(num, BoundQuantity::NormGrad)?)
                    + 2.0
                        * tb(num, BoundQuantity::AbsF)?
                        * m_recip.powi(3)
                        * (tb(den, BoundQuantity::NormGrad)? + mb(den, BoundQuantity::NormGrad)?);
                asm.term(
                    format!(
                        "[M²(M∇+M~∇)({0}) + 2M({0})M³(M∇+M~∇)({1})] κ^g({1})",
                        num.name, den.name
                    ),
                    coefficient,
                    g2,
                )?;
            }
            if h1.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", num.name));
            } else {
                asm.term(format!("M(1/f₂) κ^h({})", num.name), m_recip, h1)?;
            }
            if h2.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", den.name));
            } else {
                asm.term(
                    format!("M({}) M(1/f₂)² κ^h({})", num.name, den.name),
                    tb(num, BoundQuantity::AbsF)? * m_recip.powi(2),
                    h2,
                )?;
            }
            asm.finish()
        }
    }
}

/// Accuracy statement for a composition `f₂ ∘ f₁` where `f₁` maps into the
/// outer part's domain.
///
/// `inputs.parts = [inner, outer]`; the outer part's certificates and bounds
/// are taken *at the image* `y₀ = f₁(x₀)` (checked against
/// [`BoundInputs::image_base`] when present). Requires the image confinement
/// bound `M̄` ([`BoundInputs::with_image_bound`]) and an inner function
/// certificate of positive effective order where the function level
/// participates. If `Δ̄₂ < M̄·Δ̄₁` the operative cap shrinks to `Δ̄₂/M̄`.
///
/// Base-point derivative statements use the closed forms with values at
/// `x₀`/`y₀` and require exact function models on both sides; they are exact
/// for `M̄ = 1` and conservative for `M̄ < 1`. For `M̄ > 1` the combined
/// family's outer member operates at radius `M̄Δ`, which those closed forms
/// do not amplify — prefer ball statements, an exact outer part, or a
/// confinement constant at most 1 when certifying derivative behaviour at
/// the base point under an expanding inner map.
pub fn composition_bound(
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    let cap = inputs.cap()?;
    if inputs.parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "a composition needs exactly 2 parts (inner, outer), got {}",
            inputs.parts.len()
        )));
    }
    let inner = &inputs.parts[0];
    let outer = &inputs.parts[1];
    let rule = format!("composition/{level}/{locality}");
    let image = inputs.image.as_ref().ok_or_else(|| Error::MissingBound {
        symbol: format!("M̄[image_grad]({})", inner.name),
        context: rule.clone(),
    })?;
    if image.quantity != BoundQuantity::ImageGrad {
        return Err(Error::QuantityMismatch {
            level,
            quantity: image.quantity,
        });
    }
    let m_bar = image.value;
    if let Some(y0) = &inputs.image_base {
        for c in &outer.certificates {
            if c.base != *y0 {
                return Err(Error::Incompatible(format!(
                    "outer certificate of '{}' is based away from the image point f₁(x₀)",
                    outer.name
                )));
            }
        }
        for b in outer.truth_bounds.iter().chain(&outer.model_bounds) {
            if b.base != *y0 {
                return Err(Error::Incompatible(format!(
                    "outer bound of '{}' is based away from the image point f₁(x₀)",
                    outer.name
                )));
            }
        }
    }
    let outer_cap = outer
        .certificates
        .iter()
        .map(|c| c.delta_bar)
        .fold(f64::INFINITY, f64::min);
    let eff = if m_bar > 0.0 {
        cap.min(outer_cap / m_bar)
    } else {
        cap
    };
    // Outer family members are used at radii up to M̄·eff.
    let out_cap = m_bar * eff;
    // The inner model's own offset inflates the image-side ball seen by
    // outer *model* bounds: ‖f̃₁(x) − y₀‖ ≤ M̄Δ + κ₁Δ^{N₁}.
    let margin = |leaf1: Leaf| -> f64 {
        if leaf1.kappa == 0.0 {
            0.0
        } else {
            leaf1.kappa * eff.powf(leaf1.order.as_f64())
        }
    };
    let require_inner_order = |leaf1: Leaf| -> Result<()> {
        if leaf1.order.as_f64() > 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition {
                rule: rule.clone(),
                detail: format!(
                    "the inner function certificate of '{}' must have positive order; with \
                     order 0 the inner model image does not approach f₁(x₀) as Δ shrinks",
                    inner.name
                ),
            })
        }
    };
    match (level, locality) {
        (DerivativeLevel::Function, _) => {
            let leaf1 = inner.leaf(DerivativeLevel::Function, locality, eff, &rule)?;
            require_inner_order(leaf1)?;
            let leaf2 = outer.leaf(DerivativeLevel::Function, locality, out_cap, &rule)?;
            let n_f = min_order(&[leaf1.order, leaf2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, eff);
                asm.note("inner and outer exact: zero combined error");
                return asm.finish();
            }
            let mut asm = Assembler::new(&rule, level, locality, n_f, eff);
            if leaf1.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0 (exact inner)", inner.name));
            } else {
                let r_model = match locality {
                    Locality::At => 0.0,
                    Locality::Near => m_bar * eff,
                } + margin(leaf1);
                let m = outer.model_bound(
                    BoundQuantity::NormGrad,
                    Locality::Near,
                    r_model,
                    out_cap,
                    &rule,
                )?;
                asm.term(format!("M~∇({}) κ^f({})", outer.name, inner.name), m, leaf1)?;
            }
            if leaf2.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0 (exact outer)", outer.name));
            } else {
                asm.term(
                    format!("M̄^N₂ κ^f({})", outer.name),
                    m_bar.powf(leaf2.order.as_f64()),
                    leaf2,
                )?;
            }
            asm.finish()
        }
        (DerivativeLevel::Gradient, Locality::At) => {
            inner.require_exact_function(&rule)?;
            outer.require_exact_function(&rule)?;
            let g1 = inner.leaf(DerivativeLevel::Gradient, Locality::At, eff, &rule)?;
            let g2 = outer.leaf(DerivativeLevel::Gradient, Locality::At, out_cap, &rule)?;
            let n_f = min_order(&[g1.order, g2.order])?;
            let mut asm = Assembler::new(&rule, level, locality, n_f, eff);
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", inner.name));
            } else {
                let grad_out = outer.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, &rule)?;
                asm.term(
                    format!("‖∇f₂(y₀)‖ κ^g({})", inner.name),
                    grad_out,
                    g1,
                )?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", outer.name));
            } else {
                let m = inner.model_bound(BoundQuantity::NormGrad, Locality::At, 0.0, eff, &rule)?;
                asm.term(format!("M~∇({}) κ^g({})", inner.name, outer.name), m, g2)?;
            }
            asm.finish()
        }
        (DerivativeLevel::Hessian, Locality::At) => {
            inner.require_exact_function(&rule)?;
            outer.require_exact_function(&rule)?;
            let g1 = inner.leaf(DerivativeLevel::Gradient, Locality::At, eff, &rule)?;
            let g2 = outer.leaf(DerivativeLevel::Gradient, Locality::At, out_cap, &rule)?;
            let h1 = inner.leaf(DerivativeLevel::Hessian, Locality::At, eff, &rule)?;
            let h2 = outer.leaf(DerivativeLevel::Hessian, Locality::At, out_cap, &rule)?;
            let n_f = min_order(&[g1.order, g2.order, h1.order, h2.order])?;
            let mut asm = Assembler::new(&rule, level, locality, n_f, eff);
            let grad_in = || inner.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, &rule);
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", inner.name));
            } else {
                let hess_out =
                    outer.model_bound(BoundQuantity::NormHess, Locality::At, 0.0, out_cap, &rule)?;
                let pair = grad_in()?
                    + inner.model_bound(BoundQuantity::NormGrad, Locality::At, 0.0, eff, &rule)?;
                asm.term(
                    format!("M~∇²({}) (‖∇f₁‖+M~∇)({}) κ^g({})", outer.name, inner.name, inner.name),
                    hess_out * pair,
                    g1,
                )?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", outer.name));
            } else {
                let m = inner.model_bound(BoundQuantity::NormHess, Locality::At, 0.0, eff, &rule)?;
                asm.term(format!("M~∇²({}) κ^g({})", inner.name, outer.name), m, g2)?;
            }
            if h1.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", inner.name));
            } else {
                let pair = outer.truth_bound(BoundQuantity::NormGrad, Locality::At, 0.0, &rule)?
                    + outer.model_bound(BoundQuantity::NormGrad, Locality::At, 0.0, out_cap, &rule)?;
                asm.term(
                    format!("(‖∇f₂(y₀)‖+M~∇)({}) κ^h({})", outer.name, inner.name),
                    pair,
                    h1,
                )?;
            }
            if h2.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", outer.name));
            } else {
                let g = grad_in()?;
                asm.term(format!("‖∇f₁(x₀)‖² κ^h({})", outer.name), g * g, h2)?;
            }
            asm.finish()
        }
        (DerivativeLevel::Gradient, Locality::Near) => {
            let f1 = inner.leaf(DerivativeLevel::Function, Locality::Near, eff, &rule)?;
            require_inner_order(f1)?;
            let f2 = outer.leaf(DerivativeLevel::Function, Locality::Near, out_cap, &rule)?;
            let g1 = inner.leaf(DerivativeLevel::Gradient, Locality::Near, eff, &rule)?;
            let g2 = outer.leaf(DerivativeLevel::Gradient, Locality::Near, out_cap, &rule)?;
            let n_f = min_order(&[f1.order, f2.order, g1.order, g2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, eff);
                asm.note("inner and outer exact: zero combined gradient error");
                return asm.finish();
            }
            let r_model = m_bar * eff + margin(f1);
            let mut asm = Assembler::new(&rule, level, locality, n_f, eff);
            if f1.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", inner.name));
            } else {
                let m_in =
                    inner.model_bound(BoundQuantity::NormGrad, Locality::Near, eff, eff, &rule)?;
                let m_out = outer.model_bound(
                    BoundQuantity::NormHess,
                    Locality::Near,
                    r_model,
                    out_cap,
                    &rule,
                )?;
                asm.term(
                    format!("M~∇({}) M~∇²({}) κ^f({})", inner.name, outer.name, inner.name),
                    m_in * m_out,
                    f1,
                )?;
            }
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", inner.name));
            } else {
                let m = outer.truth_bound(
                    BoundQuantity::NormGrad,
                    Locality::Near,
                    m_bar * eff,
                    &rule,
                )?;
                asm.term(format!("M(∇f₂∘f₁) κ^g({})", inner.name), m, g1)?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", outer.name));
            } else {
                let m_in =
                    inner.model_bound(BoundQuantity::NormGrad, Locality::Near, eff, eff, &rule)?;
                asm.term(
                    format!("M~∇({}) M̄^N₂g κ^g({})", inner.name, outer.name),
                    m_in * m_bar.powf(g2.order.as_f64()),
                    g2,
                )?;
            }
            let _ = f2; // participates through the combined order only
            asm.finish()
        }
        (DerivativeLevel::Hessian, Locality::Near) => {
            let f1 = inner.leaf(DerivativeLevel::Function, Locality::Near, eff, &rule)?;
            require_inner_order(f1)?;
            let f2 = outer.leaf(DerivativeLevel::Function, Locality::Near, out_cap, &rule)?;
            let g1 = inner.leaf(DerivativeLevel::Gradient, Locality::Near, eff, &rule)?;
            let g2 = outer.leaf(DerivativeLevel::Gradient, Locality::Near, out_cap, &rule)?;
            let h1 = inner.leaf(DerivativeLevel::Hessian, Locality::Near, eff, &rule)?;
            let h2 = outer.leaf(DerivativeLevel::Hessian, Locality::Near, out_cap, &rule)?;
            let n_f = min_order(&[f1.order, f2.order, g1.order, g2.order, h1.order, h2.order])?;
            if n_f.is_infinite() {
                let mut asm = Assembler::new(&rule, level, locality, Order::Infinite, eff);
                asm.note("inner and outer exact: zero combined Hessian error");
                return asm.finish();
            }
            let r_model = m_bar * eff + margin(f1);
            let mut asm = Assembler::new(&rule, level, locality, n_f, eff);
            let grad_in_truth =
                || inner.truth_bound(BoundQuantity::NormGrad, Locality::Near, eff, &rule);
            if f1.kappa == 0.0 {
                asm.note(format!("κ^f({}) = 0", inner.name));
            } else {
                let hess_in =
                    inner.model_bound(BoundQuantity::NormHess, Locality::Near, eff, eff, &rule)?;
                let hess_out = outer.model_bound(
                    BoundQuantity::NormHess,
                    Locality::Near,
                    r_model,
                    out_cap,
                    &rule,
                )?;
                let third_out = outer.model_bound(
                    BoundQuantity::NormThird,
                    Locality::Near,
                    r_model,
                    out_cap,
                    &rule,
                )?;
                let g = grad_in_truth()?;
                asm.term(
                    format!(
                        "[M~∇²({0}) M~∇²({1}) + M∇({0})² M~∇³({1})] κ^f({0})",
                        inner.name, outer.name
                    ),
                    hess_in * hess_out + g * g * third_out,
                    f1,
                )?;
            }
            if g1.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", inner.name));
            } else {
                let pair = grad_in_truth()?
                    + inner.model_bound(BoundQuantity::NormGrad, Locality::Near, eff, eff, &rule)?;
                let hess_out = outer.model_bound(
                    BoundQuantity::NormHess,
                    Locality::Near,
                    r_model,
                    out_cap,
                    &rule,
                )?;
                asm.term(
                    format!("(M∇+M~∇)({}) M~∇²({}) κ^g({})", inner.name, outer.name, inner.name),
                    pair * hess_out,
                    g1,
                )?;
            }
            if g2.kappa == 0.0 {
                asm.note(format!("κ^g({}) = 0", outer.name));
            } else {
                let hess_in =
                    inner.model_bound(BoundQuantity::NormHess, Locality::Near, eff, eff, &rule)?;
                asm.term(
                    format!("M~∇²({}) M̄^N₂g κ^g({})", inner.name, outer.name),
                    hess_in * m_bar.powf(g2.order.as_f64()),
                    g2,
                )?;
            }
            if h1.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", inner.name));
            } else {
                let m = outer.truth_bound(
                    BoundQuantity::NormGrad,
                    Locality::Near,
                    m_bar * eff,
                    &rule,
                )?;
                asm.term(format!("M(∇f₂∘f₁) κ^h({})", inner.name), m, h1)?;
            }
            if h2.kappa == 0.0 {
                asm.note(format!("κ^h({}) = 0", outer.name));
            } else {
                let g = grad_in_truth()?;
                asm.term(
                    format!("M∇({})² M̄^N₂h κ^h({})", inner.name, outer.name),
                    g * g * m_bar.powf(h2.order.as_f64()),
                    h2,
                )?;
            }
            let _ = f2; // participates through the combined order only
            asm.finish()
        }
    }
}

/// The image confinement bound `M̄` of a mapping over a ball:
/// `f(B̄_Δ(x₀)) ⊆ B̄_{M̄Δ}(f(x₀))` for every `Δ` up to the ball radius.
///
/// `M̄` is the Euclidean norm of the vector of per-component gradient-norm
/// maxima. Uses the oracle's analytic bound when available, otherwise the
/// deterministic ball sample (provenance recorded on the returned bound).
/// The oracle must expose first derivatives.
pub fn image_gradient_bound(oracle: &SmoothOracle, ball: &Ball) -> Result<UniformBound> {
    if oracle.smoothness < Smoothness::C1 {
        return Err(Error::Smoothness(format!(
            "image confinement needs first derivatives; oracle '{}' is {}",
            oracle.name, oracle.smoothness
        )));
    }
    if ball.dim() != oracle.dim_in {
        return Err(Error::Incompatible(format!(
            "oracle '{}' expects dimension {}, ball has dimension {}",
            oracle.name,
            oracle.dim_in,
            ball.dim()
        )));
    }
    if let Some(value) = oracle.analytic_bound(ball, BoundQuantity::ImageGrad) {
        let locality = if ball.radius == 0.0 {
            Locality::At
        } else {
            Locality::Near
        };
        return UniformBound::new(
            BoundQuantity::ImageGrad,
            value,
            locality,
            ball.center.clone(),
            ball.radius,
            Provenance::Analytic,
        );
    }
    sample_uniform_bound(oracle, BoundQuantity::ImageGrad, ball)
}
