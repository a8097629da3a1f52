//! Experiment pipeline: build the model-class tree a config describes, derive
//! combined accuracy statements for every requested check, measure actual
//! model errors over the radius grid, and judge the results.
//!
//! The pipeline is deliberately deterministic end to end: leaf perturbation
//! seeds are mixed from the config seed and the leaf position, ball samples
//! are low-discrepancy rather than random, experiments run sequentially, and
//! reports serialise floating-point values in shortest round-trip form with
//! sorted JSON keys — running the same config twice produces bitwise
//! identical files.
//!
//! # From tree to verdicts
//!
//! [`run_experiment`] first builds a [`ModelClass`] for every tree node,
//! bottom-up. Each internal node combines its children and then attaches one
//! certificate per derivative level and locality, obtained from the matching
//! combination rule; combinations whose hypotheses fail at that node simply
//! leave that slot empty, and the failure resurfaces as a structured verdict
//! if a check needs it. Uniform bounds feeding the rules come from config
//! overrides first, then a catalogue function's closed form, then a
//! deterministic ball sample.
//!
//! A composition builds its outer subtree at the image point `y₀ = f₁(x₀)`
//! with an enlarged radius cap `M̄Δ̄ + κ₁Δ̄^{N₁}`: the inner *model* image can
//! overshoot the true image ball by the inner accuracy gap, and outer
//! certificates must cover everything the combination rule will ask of them.
//!
//! Each check then recomputes the root combination (this time honouring
//! `bound` overrides and `zero_factors` refinements), measures the true
//! model-class errors on the grid with [`measure_errors`], fits an empirical
//! order, and compares against the certified bound. The verdict states what
//! happened — `PASS`, `FAIL`, `PRECONDITION_FAILED`, or `ERROR` — while
//! [`CheckOutcome::ok`] states whether that is what the config expected, so
//! an expected hypothesis rejection still counts as a success.
//!
//! [`write_reports`] emits one CSV per measured check plus a JSON summary,
//! each written to a temporary sibling and renamed into place so readers
//! never observe a half-written file.

use std::path::Path;

use serde_json::json;

use crate::calculus::{
    composition_bound, image_gradient_bound, power_bound, product2_bound, product_n_bound,
    quotient_bound, zero_factor_refinement, BoundInputs, PartInputs,
};
use crate::cert::{
    AccuracyCertificate, Ball, BoundQuantity, CombinedBound, DerivativeLevel, Locality, Order,
    Point, Provenance, TraceTerm, UniformBound,
};
use crate::config::{BoundOverride, BoundSide, CheckSpec, Config, Expectation, LeafModel, TreeNode};
use crate::error::{Error, Result};
use crate::model::{
    combine_model_classes, make_exact_class, make_interpolation_class, make_synthetic_class,
    shift_to_interpolate, CombineKind, ModelClass,
};
use crate::oracle::oracle_by_name;
use crate::verify::{
    annotate_bounds, check_bound, estimate_order, measure_errors, sample_uniform_bound,
    BoundCheck, DeltaGrid, ErrorSeries, OrderVerdict, BOUND_SLACK,
};

/// Allowed fitted-slope deficit below an expected order.
pub const ORDER_SLOPE_LOW: f64 = 0.15;

/// Allowed fitted-slope excess above an expected order.
pub const ORDER_SLOPE_HIGH: f64 = 0.35;

/// Largest measured error an [`Expectation::Exact`] check accepts.
pub const EXACT_ERROR_CEILING: f64 = 1e-12;

/// Tolerance when comparing a combined claim's order against an expected one.
const ORDER_MATCH_TOLERANCE: f64 = 1e-9;

/// What actually happened when a check ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The check's expectation held.
    Pass,
    /// Measurements ran but the expectation did not hold.
    Fail,
    /// A combination rule rejected the tree because a hypothesis is violated.
    PreconditionFailed,
    /// The check could not run (missing inputs, evaluation failure).
    Error,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::PreconditionFailed => "PRECONDITION_FAILED",
            Verdict::Error => "ERROR",
        })
    }
}

/// Everything one check produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    /// Derivative level checked.
    pub level: DerivativeLevel,
    /// Locality checked.
    pub locality: Locality,
    /// What happened.
    pub verdict: Verdict,
    /// Whether the outcome matches the config's expectation. An expected
    /// hypothesis rejection yields `verdict = PreconditionFailed, ok = true`.
    pub ok: bool,
    /// Tag of the combination rule that produced the bound (or rejected the
    /// tree).
    pub rule: String,
    /// Combined claim order, when a bound was derived.
    pub claimed_order: Option<Order>,
    /// Combined claim constant.
    pub constant: Option<f64>,
    /// Radius cap the claim is valid for.
    pub delta_bar: Option<f64>,
    /// Fitted empirical order, when errors were measurable and nonzero.
    pub slope: Option<f64>,
    /// Fit quality of the slope.
    pub r_squared: Option<f64>,
    /// True when every measured error sat at the double-precision floor.
    pub exact: bool,
    /// Whether every measured error stayed within the certified bound.
    pub bound_pass: Option<bool>,
    /// Largest measured/bound ratio over the grid.
    pub worst_ratio: Option<f64>,
    /// Radius where the worst ratio occurred.
    pub worst_delta: Option<f64>,
    /// Failure diagnostic (None when `ok`).
    pub message: Option<String>,
    /// Measured errors with the bound values attached.
    pub series: Option<ErrorSeries>,
    /// Per-term breakdown of the combined constant.
    pub trace: Vec<TraceTerm>,
}

/// Result of running every check of one config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Experiment name (report file stem).
    pub name: String,
    /// True iff every check's expectation held.
    pub pass: bool,
    /// One outcome per configured check, in config order.
    pub outcomes: Vec<CheckOutcome>,
    /// Construction notes from the model-class build (image constants,
    /// recenterings, cap adjustments).
    pub notes: Vec<String>,
}

/// Mixes the config seed with a leaf's depth-first position into an
/// independent perturbation seed (splitmix64 finalizer).
fn mix_seed(seed: u64, leaf_index: u64) -> u64 {
    let mut z = seed.wrapping_add((leaf_index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The built tree root: the combined class plus what a per-check bound
/// recomputation needs.
struct BuiltRoot {
    class: ModelClass,
    /// Root combination children (empty when the root is a leaf or a shift).
    children: Vec<ModelClass>,
    /// Root combination kind (None when the root is a leaf or a shift).
    kind: Option<CombineKind>,
}

fn build_leaf(
    cfg: &Config,
    oracle: &str,
    model: &LeafModel,
    base: &Point,
    delta_bar: f64,
    leaf_idx: &mut u64,
) -> Result<ModelClass> {
    let reference = oracle_by_name(oracle)?;
    let index = *leaf_idx;
    *leaf_idx += 1;
    match model {
        LeafModel::Exact => make_exact_class(reference, base.clone(), delta_bar),
        LeafModel::Interpolation => make_interpolation_class(reference, base.clone(), delta_bar),
        LeafModel::Synthetic { seed, terms } => {
            let seed = seed.unwrap_or_else(|| mix_seed(cfg.seed, index));
            make_synthetic_class(reference, terms, base.clone(), delta_bar, seed)
        }
    }
}

/// Builds the outer subtree of a composition at the image point with an
/// enlarged cap covering the inner model's reach `M̄Δ̄ + κ₁Δ̄^{N₁}`.
fn build_composition_children(
    cfg: &Config,
    inner_node: &TreeNode,
    outer_node: &TreeNode,
    base: &Point,
    delta_bar: f64,
    leaf_idx: &mut u64,
) -> Result<Vec<ModelClass>> {
    let inner = build_node(cfg, inner_node, base, delta_bar, leaf_idx)?;
    let y0 = inner.reference.eval(base)?;
    let ball = Ball::new(base.clone(), inner.delta_bar)?;
    let m_bar = image_gradient_bound(&inner.reference, &ball)?.value;
    let margin = inner
        .certificates
        .iter()
        .filter(|c| c.level == DerivativeLevel::Function && c.kappa > 0.0)
        .map(|c| match c.order {
            Order::Finite(n) => c.kappa * inner.delta_bar.powf(n),
            Order::Infinite => 0.0,
        })
        .fold(0.0_f64, f64::max);
    let outer_cap = (m_bar * inner.delta_bar + margin).max(f64::MIN_POSITIVE);
    let outer = build_node(cfg, outer_node, &y0, outer_cap, leaf_idx)?;
    Ok(vec![inner, outer])
}

fn build_node(
    cfg: &Config,
    node: &TreeNode,
    base: &Point,
    delta_bar: f64,
    leaf_idx: &mut u64,
) -> Result<ModelClass> {
    match node {
        TreeNode::Leaf { oracle, model } => {
            build_leaf(cfg, oracle, model, base, delta_bar, leaf_idx)
        }
        TreeNode::Shift(child) => {
            let inner = build_node(cfg, child, base, delta_bar, leaf_idx)?;
            shift_to_interpolate(&inner)
        }
        TreeNode::Product(children) => {
            let parts = children
                .iter()
                .map(|c| build_node(cfg, c, base, delta_bar, leaf_idx))
                .collect::<Result<Vec<_>>>()?;
            combine_and_attach(CombineKind::Product, &parts)
        }
        TreeNode::Quotient(num, den) => {
            let parts = vec![
                build_node(cfg, num, base, delta_bar, leaf_idx)?,
                build_node(cfg, den, base, delta_bar, leaf_idx)?,
            ];
            combine_and_attach(CombineKind::Quotient, &parts)
        }
        TreeNode::Power(n, child) => {
            let parts = vec![build_node(cfg, child, base, delta_bar, leaf_idx)?];
            combine_and_attach(CombineKind::Power(*n), &parts)
        }
        TreeNode::Composition(inner, outer) => {
            let parts = build_composition_children(cfg, inner, outer, base, delta_bar, leaf_idx)?;
            combine_and_attach(CombineKind::Composition, &parts)
        }
    }
}

fn build_root(cfg: &Config) -> Result<BuiltRoot> {
    let mut leaf_idx = 0u64;
    let (children, kind) = match &cfg.tree {
        TreeNode::Leaf { .. } | TreeNode::Shift(_) => {
            let class = build_node(cfg, &cfg.tree, &cfg.base, cfg.delta_bar, &mut leaf_idx)?;
            return Ok(BuiltRoot {
                class,
                children: Vec::new(),
                kind: None,
            });
        }
        TreeNode::Product(nodes) => {
            let children = nodes
                .iter()
                .map(|n| build_node(cfg, n, &cfg.base, cfg.delta_bar, &mut leaf_idx))
                .collect::<Result<Vec<_>>>()?;
            (children, CombineKind::Product)
        }
        TreeNode::Quotient(num, den) => {
            let children = vec![
                build_node(cfg, num, &cfg.base, cfg.delta_bar, &mut leaf_idx)?,
                build_node(cfg, den, &cfg.base, cfg.delta_bar, &mut leaf_idx)?,
            ];
            (children, CombineKind::Quotient)
        }
        TreeNode::Power(n, child) => {
            let children = vec![build_node(cfg, child, &cfg.base, cfg.delta_bar, &mut leaf_idx)?];
            (children, CombineKind::Power(*n))
        }
        TreeNode::Composition(inner, outer) => {
            let children = build_composition_children(
                cfg,
                inner,
                outer,
                &cfg.base,
                cfg.delta_bar,
                &mut leaf_idx,
            )?;
            (children, CombineKind::Composition)
        }
    };
    let class = combine_and_attach(kind, &children)?;
    Ok(BuiltRoot {
        class,
        children,
        kind: Some(kind),
    })
}

const ALL_COMBOS: [(DerivativeLevel, Locality); 6] = [
    (DerivativeLevel::Function, Locality::At),
    (DerivativeLevel::Function, Locality::Near),
    (DerivativeLevel::Gradient, Locality::At),
    (DerivativeLevel::Gradient, Locality::Near),
    (DerivativeLevel::Hessian, Locality::At),
    (DerivativeLevel::Hessian, Locality::Near),
];

/// Combines children into a class and attaches one certificate per derivative
/// level and locality where the combination rule applies; slots whose
/// hypotheses fail stay empty.
fn combine_and_attach(kind: CombineKind, children: &[ModelClass]) -> Result<ModelClass> {
    let mut combined = combine_model_classes(kind, children)?;
    let inputs = assemble_inputs(kind, children, &combined, &[])?;
    for (level, locality) in ALL_COMBOS {
        if let Ok(bound) = op_bound(kind, children.len(), &inputs, level, locality) {
            let cert = AccuracyCertificate::new(
                level,
                locality,
                bound.order,
                bound.constant,
                combined.base.clone(),
                bound.delta_bar,
            )?;
            combined.attach_certificate(cert)?;
        }
    }
    Ok(combined)
}

/// Dispatches to the combination rule matching a node kind.
fn op_bound(
    kind: CombineKind,
    n_parts: usize,
    inputs: &BoundInputs,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    match kind {
        CombineKind::Product if n_parts == 2 => product2_bound(inputs, level, locality),
        CombineKind::Product => product_n_bound(inputs, level, locality),
        CombineKind::Quotient => quotient_bound(inputs, level, locality),
        CombineKind::Power(n) => power_bound(inputs, level, locality, n),
        CombineKind::Composition => composition_bound(inputs, level, locality),
    }
}

fn find_override<'a>(
    overrides: &'a [BoundOverride],
    part: usize,
    side: BoundSide,
    quantity: BoundQuantity,
    locality: Locality,
) -> Option<&'a BoundOverride> {
    overrides.iter().find(|o| {
        o.part == part && o.side == side && o.quantity == quantity && o.locality == locality
    })
}

/// Collects certificates and uniform bounds for one part. Truth bounds come
/// from overrides, then the catalogue function's closed forms, then a
/// deterministic ball sample; unobtainable quantities are simply skipped and
/// surface later as a missing-bound rejection if a rule needs them.
fn gather_part(
    index: usize,
    class: &ModelClass,
    extra: &[BoundQuantity],
    overrides: &[BoundOverride],
) -> Result<PartInputs> {
    let base_quantities = [
        BoundQuantity::AbsF,
        BoundQuantity::NormGrad,
        BoundQuantity::NormHess,
    ];
    let mut truth = Vec::new();
    let mut model = Vec::new();
    for locality in [Locality::At, Locality::Near] {
        let radius = match locality {
            Locality::At => 0.0,
            Locality::Near => class.delta_bar,
        };
        let ball = Ball::new(class.base.clone(), radius)?;
        for &quantity in base_quantities.iter().chain(extra) {
            if let Some(o) = find_override(overrides, index, BoundSide::Truth, quantity, locality)
            {
                truth.push(UniformBound::new(
                    quantity,
                    o.value,
                    locality,
                    class.base.clone(),
                    radius,
                    Provenance::Analytic,
                )?);
            } else if let Some(value) = class.reference.analytic_bound(&ball, quantity) {
                truth.push(UniformBound::new(
                    quantity,
                    value,
                    locality,
                    class.base.clone(),
                    radius,
                    Provenance::Analytic,
                )?);
            } else if let Ok(bound) = sample_uniform_bound(&class.reference, quantity, &ball) {
                truth.push(bound);
            }
            if quantity != BoundQuantity::AbsRecip {
                if let Some(o) =
                    find_override(overrides, index, BoundSide::Model, quantity, locality)
                {
                    model.push(UniformBound::new(
                        quantity,
                        o.value,
                        locality,
                        class.base.clone(),
                        radius,
                        Provenance::Analytic,
                    )?);
                } else if let Some(value) = class.model_bound(&ball, quantity) {
                    model.push(UniformBound::new(
                        quantity,
                        value,
                        locality,
                        class.base.clone(),
                        radius,
                        Provenance::Sampled,
                    )?);
                }
            }
        }
    }
    Ok(PartInputs::new(
        class.name.clone(),
        class.certificates.clone(),
        truth,
        model,
    ))
}

/// Builds the combination-rule inputs for a node from its children.
fn assemble_inputs(
    kind: CombineKind,
    children: &[ModelClass],
    combined: &ModelClass,
    overrides: &[BoundOverride],
) -> Result<BoundInputs> {
    let parts = children
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let mut extra = Vec::new();
            if kind == CombineKind::Quotient && i == 1 {
                extra.push(BoundQuantity::AbsRecip);
            }
            if kind == CombineKind::Composition {
                extra.push(BoundQuantity::NormThird);
            }
            gather_part(i, class, &extra, overrides)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut inputs = BoundInputs::new(parts, combined.delta_bar, combined.base.clone());
    if kind == CombineKind::Composition {
        if let Some(image) = &combined.image_bound {
            inputs = inputs.with_image_bound(image.clone());
        }
        inputs = inputs.with_image_base(children[1].base.clone());
    }
    Ok(inputs)
}

/// A bare leaf (or shifted leaf) at the root has no combination rule: its own
/// certificate becomes the claim.
fn leaf_bound(class: &ModelClass, level: DerivativeLevel, locality: Locality) -> Result<CombinedBound> {
    let rule = format!("leaf/{level}/{locality}");
    let cert = class
        .certificate_for(level, locality)
        .ok_or_else(|| Error::MissingCertificate {
            symbol: format!("κ[{level}/{locality}]({})", class.name),
            context: rule.clone(),
        })?;
    let order = if cert.kappa == 0.0 {
        Order::Infinite
    } else {
        cert.order
    };
    Ok(CombinedBound {
        level,
        locality,
        order,
        constant: cert.kappa,
        trace: vec![TraceTerm {
            rule,
            description: format!("certificate κ[{}/{}]({})", level, cert.locality, class.name),
            value: cert.kappa,
        }],
        delta_bar: cert.delta_bar,
    })
}

/// Recomputes the root combination for one check, honouring bound overrides
/// and zero-factor refinements.
fn root_bound(
    cfg: &Config,
    built: &BuiltRoot,
    level: DerivativeLevel,
    locality: Locality,
) -> Result<CombinedBound> {
    match built.kind {
        None => leaf_bound(&built.class, level, locality),
        Some(kind) => {
            let inputs = assemble_inputs(kind, &built.children, &built.class, &cfg.bounds)?;
            let refine = !cfg.zero_factors.is_empty()
                && locality == Locality::At
                && matches!(level, DerivativeLevel::Function | DerivativeLevel::Gradient);
            if refine {
                zero_factor_refinement(&inputs, level, &cfg.zero_factors)
            } else {
                op_bound(kind, built.children.len(), &inputs, level, locality)
            }
        }
    }
}

/// Compares what happened against the config's expectation; returns whether
/// it matched and a diagnostic when it did not.
fn judge(
    expectation: Expectation,
    bound: &CombinedBound,
    series: &ErrorSeries,
    order_verdict: &OrderVerdict,
    bc: &BoundCheck,
) -> (bool, Option<String>) {
    match expectation {
        Expectation::Precondition => (
            false,
            Some("the combination rule accepted the tree; expected a hypothesis rejection".into()),
        ),
        Expectation::Sound => (bc.pass, bc.message.clone()),
        Expectation::Exact => {
            if series.divergent_count() > 0 {
                return (
                    false,
                    Some(format!(
                        "{} grid radii diverged; exactness requires finite errors",
                        series.divergent_count()
                    )),
                );
            }
            let worst = series
                .points
                .iter()
                .map(|p| p.error)
                .fold(0.0_f64, f64::max);
            if worst > EXACT_ERROR_CEILING {
                return (
                    false,
                    Some(format!(
                        "largest measured error {worst:e} exceeds the exactness ceiling {EXACT_ERROR_CEILING:e}"
                    )),
                );
            }
            if !bc.pass {
                return (false, bc.message.clone());
            }
            (true, None)
        }
        Expectation::Order(expected) => {
            match bound.order {
                Order::Finite(claimed) if (claimed - expected).abs() <= ORDER_MATCH_TOLERANCE => {}
                other => {
                    return (
                        false,
                        Some(format!(
                            "combined claim order {other} differs from expected {expected}"
                        )),
                    );
                }
            }
            if series.divergent_count() > 0 {
                return (
                    false,
                    Some(format!("{} grid radii diverged", series.divergent_count())),
                );
            }
            if !bc.pass {
                return (false, bc.message.clone());
            }
            match order_verdict {
                OrderVerdict::Exact { .. } => (true, None),
                OrderVerdict::Fitted { estimate, .. } => {
                    let low = expected - ORDER_SLOPE_LOW;
                    let high = expected + ORDER_SLOPE_HIGH;
                    if estimate.slope < low || estimate.slope > high {
                        (
                            false,
                            Some(format!(
                                "fitted slope {} outside the accepted window [{low}, {high}]",
                                estimate.slope
                            )),
                        )
                    } else {
                        (true, None)
                    }
                }
            }
        }
    }
}

fn evaluate_check(
    cfg: &Config,
    built: &BuiltRoot,
    grid: &DeltaGrid,
    check: &CheckSpec,
) -> CheckOutcome {
    let mut outcome = CheckOutcome {
        level: check.level,
        locality: check.locality,
        verdict: Verdict::Error,
        ok: false,
        rule: String::new(),
        claimed_order: None,
        constant: None,
        delta_bar: None,
        slope: None,
        r_squared: None,
        exact: false,
        bound_pass: None,
        worst_ratio: None,
        worst_delta: None,
        message: None,
        series: None,
        trace: Vec::new(),
    };
    let bound = match root_bound(cfg, built, check.level, check.locality) {
        Ok(b) => b,
        Err(Error::Precondition { rule, detail }) => {
            outcome.verdict = Verdict::PreconditionFailed;
            outcome.ok = check.expectation == Expectation::Precondition;
            outcome.rule = rule;
            outcome.message = Some(detail);
            return outcome;
        }
        Err(e) => {
            outcome.message = Some(e.to_string());
            return outcome;
        }
    };
    outcome.rule = bound.rule().to_string();
    outcome.claimed_order = Some(bound.order);
    outcome.constant = Some(bound.constant);
    outcome.delta_bar = Some(bound.delta_bar);
    outcome.trace = bound.trace.clone();
    if check.expectation == Expectation::Precondition {
        outcome.verdict = Verdict::Fail;
        outcome.message =
            Some("the combination rule accepted the tree; expected a hypothesis rejection".into());
        return outcome;
    }
    let scaled = match grid.scaled_to_cap(bound.delta_bar) {
        Ok(g) => g,
        Err(e) => {
            outcome.message = Some(e.to_string());
            return outcome;
        }
    };
    let mut series = match measure_errors(
        &built.class,
        &built.class.reference,
        check.level,
        check.locality,
        &scaled,
        &cfg.base,
    ) {
        Ok(s) => s,
        Err(e) => {
            outcome.message = Some(e.to_string());
            return outcome;
        }
    };
    let order_verdict = match estimate_order(&series) {
        Ok(v) => v,
        Err(e) => {
            annotate_bounds(&mut series, &bound);
            outcome.series = Some(series);
            outcome.verdict = Verdict::Fail;
            outcome.message = Some(e.to_string());
            return outcome;
        }
    };
    annotate_bounds(&mut series, &bound);
    let bc = match check_bound(&series, &bound) {
        Ok(b) => b,
        Err(e) => {
            outcome.series = Some(series);
            outcome.message = Some(e.to_string());
            return outcome;
        }
    };
    outcome.slope = order_verdict.slope();
    outcome.r_squared = match &order_verdict {
        OrderVerdict::Fitted { estimate, .. } => Some(estimate.r_squared),
        OrderVerdict::Exact { .. } => None,
    };
    outcome.exact = matches!(order_verdict, OrderVerdict::Exact { .. });
    outcome.bound_pass = Some(bc.pass);
    outcome.worst_ratio = Some(bc.worst_ratio);
    outcome.worst_delta = Some(bc.worst_delta);
    let (ok, message) = judge(check.expectation, &bound, &series, &order_verdict, &bc);
    outcome.series = Some(series);
    outcome.ok = ok;
    outcome.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    outcome.message = message;
    outcome
}

/// Builds the model-class tree a config describes and runs every check.
///
/// Hypothesis violations inside combination rules become structured
/// [`Verdict::PreconditionFailed`] outcomes rather than errors; `Err` is
/// reserved for configuration-level problems (dimension mismatches,
/// `zero_factors` on a non-product root, invalid grids).
///
/// # Examples
///
/// ```
/// use modelcalc::{parse_config, run_experiment, Verdict};
///
/// let cfg = parse_config(
///     "name two_exact\n\
///      base 0.25\n\
///      delta_bar 0.125\n\
///      tree (product (leaf quad1 exact) (leaf sincos1 exact))\n\
///      check function near expect exact\n",
/// )
/// .unwrap();
/// let result = run_experiment(&cfg).unwrap();
/// assert!(result.pass);
/// assert_eq!(result.outcomes[0].verdict, Verdict::Pass);
/// ```
pub fn run_experiment(cfg: &Config) -> Result<ExperimentResult> {
    let grid = cfg.grid.to_grid()?;
    let built = build_root(cfg)?;
    if !cfg.zero_factors.is_empty() {
        if built.kind != Some(CombineKind::Product) {
            return Err(Error::InvalidArgument(
                "zero_factors applies only to a product at the tree root".into(),
            ));
        }
        if let Some(&bad) = cfg
            .zero_factors
            .iter()
            .find(|&&i| i >= built.children.len())
        {
            return Err(Error::InvalidArgument(format!(
                "zero factor index {bad} is out of range for {} root factors",
                built.children.len()
            )));
        }
    }
    let outcomes: Vec<CheckOutcome> = cfg
        .checks
        .iter()
        .map(|check| evaluate_check(cfg, &built, &grid, check))
        .collect();
    let pass = outcomes.iter().all(|o| o.ok);
    Ok(ExperimentResult {
        name: cfg.name.clone(),
        pass,
        outcomes,
        notes: built.class.notes.clone(),
    })
}

/// The per-point acceptance used in reports: identical to the comparison in
/// [`check_bound`].
fn point_within_bound(error: f64, bound: f64, divergent: bool) -> bool {
    !divergent && error <= bound * (1.0 + BOUND_SLACK)
}

fn order_json(order: Option<Order>) -> serde_json::Value {
    match order {
        None => serde_json::Value::Null,
        Some(Order::Infinite) => json!("inf"),
        Some(Order::Finite(n)) => json!(n),
    }
}

fn summary_json(result: &ExperimentResult) -> serde_json::Value {
    let checks: Vec<serde_json::Value> = result
        .outcomes
        .iter()
        .map(|o| {
            json!({
                "level": o.level.to_string(),
                "locality": o.locality.to_string(),
                "verdict": o.verdict.to_string(),
                "ok": o.ok,
                "rule": o.rule,
                "order": order_json(o.claimed_order),
                "constant": o.constant,
                "delta_bar": o.delta_bar,
                "slope": o.slope,
                "r_squared": o.r_squared,
                "exact": o.exact,
                "bound_pass": o.bound_pass,
                "worst_ratio": o.worst_ratio,
                "worst_delta": o.worst_delta,
                "message": o.message,
                "trace": o.trace.iter().map(|t| json!({
                    "rule": t.rule,
                    "description": t.description,
                    "value": t.value,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "name": result.name,
        "pass": result.pass,
        "notes": result.notes,
        "checks": checks,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("invalid report path {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes one `<name>.<level>.<locality>.csv` per measured check plus a
/// `<name>.summary.json`, creating the directory if needed. Files are written
/// to a temporary sibling and renamed into place, so a crash never leaves a
/// truncated report, and the byte content is deterministic for a given
/// config. Returns whether every check matched its expectation.
pub fn write_reports(result: &ExperimentResult, out_dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(out_dir)?;
    for outcome in &result.outcomes {
        if let Some(series) = &outcome.series {
            let path = out_dir.join(format!(
                "{}.{}.{}.csv",
                result.name, outcome.level, outcome.locality
            ));
            let mut text = String::from("delta,measured_error,bound_value,ok\n");
            for p in &series.points {
                let bound = p.bound.unwrap_or(f64::NAN);
                let ok = point_within_bound(p.error, bound, p.divergent);
                text.push_str(&format!("{},{},{},{}\n", p.delta, p.error, bound, ok));
            }
            write_atomic(&path, text.as_bytes())?;
        }
    }
    let mut text = serde_json::to_string_pretty(&summary_json(result))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    write_atomic(
        &out_dir.join(format!("{}.summary.json", result.name)),
        text.as_bytes(),
    )?;
    Ok(result.pass)
}
