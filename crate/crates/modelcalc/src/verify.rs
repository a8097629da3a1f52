//! Empirical verification: measured errors, fitted convergence orders,
//! bound checking, sampled suprema, and derivative cross-checks.
//!
//! A certificate makes a claim about every radius in `(0, Δ̄]`; verification
//! discretizes that to a [`DeltaGrid`] and measures the actual
//! truth-vs-model difference per radius ([`measure_errors`]). At-the-point
//! errors are exact evaluations; ball-wide errors are maxima over the
//! deterministic ball sample from the sampling module and therefore *lower*
//! bounds of the true supremum — a bound check that passes on sampled errors
//! but uses analytically derived constants is still a one-sided, meaningful
//! check.
//!
//! [`estimate_order`] fits `log(error)` against `log(Δ)` by least squares;
//! the slope is the empirical convergence order. Errors at or below `1e-14`
//! are classified `EXACT` rather than fitted (they sit at the double
//! precision floor and would otherwise produce spurious slopes), and radii
//! where evaluation failed (for instance a quotient pole) are excluded from
//! the fit and flagged.
//!
//! [`check_bound`] tests `measured ≤ K·Δ^N·(1 + 1e-9)` on every grid radius
//! and reports the worst ratio. [`sample_uniform_bound`] estimates suprema
//! over balls from the 256-point deterministic sample — including the
//! per-component image-gradient constant of a mapping.
//! [`finite_difference_check`] confirms analytic derivatives against central
//! differences. [`run_counterexamples`] rebuilds the three classical
//! divergence examples (a product with an unboundedly drifting factor, a
//! quotient whose denominator model loses zeroth-order accuracy, and a
//! composition whose inner model drifts inside a steep outer function) and
//! verifies that their errors *grow* as `Δ` shrinks.


use crate::cert::{
    stacked_matrix_norm, Ball, BoundQuantity, CombinedBound, DerivativeLevel, Locality, Matrix, Point, Provenance, UniformBound,
};
use crate::error::{Error, Result};
use crate::model::{combine_model_classes, make_exact_class, CombineKind, ModelClass};
use crate::oracle::{oracle_by_name, SmoothOracle, Smoothness};
use crate::sample::{ball_points, BOUND_SAMPLE_INTERIOR, ERROR_SAMPLE_INTERIOR};

/// Threshold below which a measured error is considered exact (double
/// precision floor).
pub const EXACT_THRESHOLD: f64 = 1e-14;

/// Relative slack granted when comparing measured errors against certified
/// bounds, absorbing benign rounding in the bound evaluation itself.
pub const BOUND_SLACK: f64 = 1e-9;

/// A strictly decreasing grid of radii to test certificates on.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGrid {
    /// Radii, strictly decreasing, all positive.
    pub deltas: Vec<f64>,
}

impl DeltaGrid {
    /// Creates a grid from explicit radii, validating the invariants:
    /// strictly decreasing, positive, at least 4 entries.
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "a grid needs at least 4 radii, got {}",
                deltas.len()
            )));
        }
        for w in deltas.windows(2) {
            if !(w[1] > 0.0 && w[1] < w[0]) {
                return Err(Error::InvalidArgument(
                    "grid radii must be positive and strictly decreasing".into(),
                ));
            }
        }
        if !(deltas[0].is_finite() && deltas[0] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid radii must be positive and finite, got {}",
                deltas[0]
            )));
        }
        Ok(Self { deltas })
    }

    /// Geometric grid `start·ratioⁱ` for `i = 0..count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(start.is_finite() && start > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid start must be positive and finite, got {start}"
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid ratio must be in (0, 1), got {ratio}"
            )));
        }
        Self::new((0..count).map(|i| start * ratio.powi(i as i32)).collect())
    }

    /// The default verification grid `2⁻³, 2⁻⁴, …, 2⁻¹⁰`.
    pub fn default_grid() -> Self {
        Self::geometric(2f64.powi(-3), 0.5, 8).expect("default grid is valid")
    }

    /// Largest radius in the grid.
    pub fn max_delta(&self) -> f64 {
        self.deltas[0]
    }

    /// Smallest radius in the grid.
    pub fn min_delta(&self) -> f64 {
        *self.deltas.last().expect("grids are non-empty")
    }

    /// Rescales the grid so its largest radius fits under `cap`, preserving
    /// the point count and ratios. A grid already under the cap is returned
    /// unchanged.
    pub fn scaled_to_cap(&self, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid cap must be positive and finite, got {cap}"
            )));
        }
        if self.max_delta() <= cap {
            return Ok(self.clone());
        }
        let scale = cap / self.max_delta();
        Self::new(self.deltas.iter().map(|d| d * scale).collect())
    }
}

/// One measured radius: the observed truth-vs-model difference and, once a
/// bound has been attached, the certified value `K·Δ^N` at that radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPoint {
    /// Radius `Δ`.
    pub delta: f64,
    /// Measured error (infinite when divergent).
    pub error: f64,
    /// True if evaluation failed or produced non-finite values at this
    /// radius.
    pub divergent: bool,
    /// Certified bound value at this radius, when a bound was checked.
    pub bound: Option<f64>,
}

/// Measured errors across a grid for one level and locality.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    /// Derivative level measured.
    pub level: DerivativeLevel,
    /// At the base point, or maximum over the radius-`Δ` ball.
    pub locality: Locality,
    /// One entry per grid radius, in decreasing-`Δ` order.
    pub points: Vec<ErrorPoint>,
}

impl ErrorSeries {
    /// Entries that can enter an order fit: not divergent and above the
    /// exactness floor.
    pub fn usable_points(&self) -> Vec<&ErrorPoint> {
        self.points
            .iter()
            .filter(|p| !p.divergent && p.error > EXACT_THRESHOLD)
            .collect()
    }

    /// Number of divergent entries.
    pub fn divergent_count(&self) -> usize {
        self.points.iter().filter(|p| p.divergent).count()
    }
}

/// Least-squares fit of `log(error)` against `log(Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// Fitted slope — the empirical convergence order.
    pub slope: f64,
    /// Fitted intercept — `log` of the empirical constant.
    pub intercept: f64,
    /// Coefficient of determination in `[0, 1]`.
    pub r_squared: f64,
    /// `(Δ_min, Δ_max)` actually used in the fit.
    pub window: (f64, f64),
}

/// Outcome of an order estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderVerdict {
    /// Every non-divergent error is at the double-precision floor: the model
    /// is empirically exact at this level.
    Exact {
        /// Radii excluded because evaluation diverged.
        divergent_excluded: usize,
    },
    /// A power law was fitted to the usable points.
    Fitted {
        /// The fit.
        estimate: OrderEstimate,
        /// Radii excluded because evaluation diverged.
        divergent_excluded: usize,
    },
}

impl OrderVerdict {
    /// The fitted slope, if a fit was performed.
    pub fn slope(&self) -> Option<f64> {
        match self {
            OrderVerdict::Exact { .. } => None,
            OrderVerdict::Fitted { estimate, .. } => Some(estimate.slope),
        }
    }
}

/// Result of checking a measured series against a certified bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// True iff every measured error is within the certified bound (with
    /// [`BOUND_SLACK`] relative slack).
    pub pass: bool,
    /// Largest `measured / bound` ratio over the grid (0 when both are 0).
    pub worst_ratio: f64,
    /// The radius at which the worst ratio occurred.
    pub worst_delta: f64,
    /// Diagnostic for failures (divergence, zero bound with nonzero error).
    pub message: Option<String>,
}

/// Report of a finite-difference derivative cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCheck {
    /// True iff every point passed every applicable check.
    pub pass: bool,
    /// Worst relative gradient discrepancy seen.
    pub worst_gradient: f64,
    /// Worst relative Hessian discrepancy seen (0 when not applicable).
    pub worst_hessian: f64,
    /// Human-readable failure details.
    pub failures: Vec<String>,
}

/// Relative tolerance for gradient-vs-central-difference agreement.
pub const FD_GRAD_TOL: f64 = 1e-5;
/// Relative tolerance for Hessian-vs-central-difference agreement.
pub const FD_HESS_TOL: f64 = 1e-3;

fn difference_at(
    truth: &SmoothOracle,
    model: &SmoothOracle,
    level: DerivativeLevel,
    x: &Point,
) -> Result<f64> {
    match level {
        DerivativeLevel::Function => Ok((truth.eval(x)? - model.eval(x)?).norm()),
        DerivativeLevel::Gradient => Ok((truth.grad(x)? - model.grad(x)?).norm()),
        DerivativeLevel::Hessian => {
            let (ht, hm) = (truth.hess(x)?, model.hess(x)?);
            if ht.len() != hm.len() {
                return Err(Error::Incompatible(
                    "truth and model have different output dimensions".into(),
                ));
            }
            let diffs: Vec<Matrix> = ht
                .iter()
                .zip(hm.iter())
                .map(|(a, b)| a - b)
                .collect();
            stacked_matrix_norm(&diffs)
        }
    }
}

fn measure_errors_with(
    mc: &ModelClass,
    truth: &SmoothOracle,
    level: DerivativeLevel,
    locality: Locality,
    grid: &DeltaGrid,
    x0: &Point,
    interior: usize,
) -> Result<ErrorSeries> {
    let needed = match level {
        DerivativeLevel::Function => Smoothness::C0,
        DerivativeLevel::Gradient => Smoothness::C1,
        DerivativeLevel::Hessian => Smoothness::C2,
    };
    if truth.smoothness < needed {
        return Err(Error::Smoothness(format!(
            "measuring {level} errors needs a {needed}-smooth truth, '{}' is {}",
            truth.name, truth.smoothness
        )));
    }
    if grid.max_delta() > mc.delta_bar * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "grid reaches {} beyond the class radius cap {}",
            grid.max_delta(),
            mc.delta_bar
        )));
    }
    let mut points = Vec::with_capacity(grid.deltas.len());
    for &delta in &grid.deltas {
        let sample = match locality {
            Locality::At => vec![x0.clone()],
            Locality::Near => ball_points(&Ball::new(x0.clone(), delta)?, interior),
        };
        let measured = mc.model(delta).and_then(|model| {
            let mut worst: f64 = 0.0;
            for p in &sample {
                worst = worst.max(difference_at(truth, &model, level, p)?);
            }
            Ok(worst)
        });
        match measured {
            Ok(err) if err.is_finite() => points.push(ErrorPoint {
                delta,
                error: err,
                divergent: false,
                bound: None,
            }),
            _ => points.push(ErrorPoint {
                delta,
                error: f64::INFINITY,
                divergent: true,
                bound: None,
            }),
        }
    }
    Ok(ErrorSeries {
        level,
        locality,
        points,
    })
}

/// Measures truth-vs-model errors over a radius grid.
///
/// At-the-point errors compare at `x₀` only (Euclidean norm for values and
/// gradients, stacked Frobenius norm for Hessians). Ball-wide errors take the
/// maximum over the deterministic sample of `B̄_Δ(x₀)` — the center, `2d`
/// axis points at radius `Δ`, and [`ERROR_SAMPLE_INTERIOR`] low-discrepancy
/// interior points rescaled per radius. An evaluation failure (for instance a
/// quotient pole inside the ball) marks that radius divergent instead of
/// aborting the series.
pub fn measure_errors(
    mc: &ModelClass,
    truth: &SmoothOracle,
    level: DerivativeLevel,
    locality: Locality,
    grid: &DeltaGrid,
    x0: &Point,
) -> Result<ErrorSeries> {
    measure_errors_with(mc, truth, level, locality, grid, x0, ERROR_SAMPLE_INTERIOR)
}

/// Fits the empirical convergence order of a measured series.
///
/// Returns [`OrderVerdict::Exact`] when every non-divergent error is at or
/// below `1e-14`; otherwise performs a least-squares fit of `log(error)`
/// against `log(Δ)` over the usable points (at least 4 required), excluding
/// divergent radii.
pub fn estimate_order(series: &ErrorSeries) -> Result<OrderVerdict> {
    let divergent_excluded = series.divergent_count();
    let finite: Vec<&ErrorPoint> = series.points.iter().filter(|p| !p.divergent).collect();
    if finite.is_empty() {
        return Err(Error::Estimation(
            "every grid radius diverged; no order to estimate".into(),
        ));
    }
    if finite.iter().all(|p| p.error <= EXACT_THRESHOLD) {
        return Ok(OrderVerdict::Exact { divergent_excluded });
    }
    let usable = series.usable_points();
    if usable.len() < 4 {
        return Err(Error::Estimation(format!(
            "order fit needs at least 4 usable points, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.delta.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.error.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let window = (
        usable.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min),
        usable.iter().map(|p| p.delta).fold(0.0f64, f64::max),
    );
    Ok(OrderVerdict::Fitted {
        estimate: OrderEstimate {
            slope,
            intercept,
            r_squared,
            window,
        },
        divergent_excluded,
    })
}

/// Checks a measured series against a certified bound: PASS iff
/// `measured ≤ K·Δ^N·(1 + 1e-9)` at every grid radius. The series and bound
/// must agree on level and locality. Divergent radii fail with a diagnostic.
pub fn check_bound(series: &ErrorSeries, bound: &CombinedBound) -> Result<BoundCheck> {
    if series.level != bound.level || series.locality != bound.locality {
        return Err(Error::Incompatible(format!(
            "series is {}/{} but bound is {}/{}",
            series.level, series.locality, bound.level, bound.locality
        )));
    }
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_delta = f64::NAN;
    let mut message = None;
    for p in &series.points {
        if p.divergent {
            pass = false;
            message = Some(format!("evaluation diverged at radius {}", p.delta));
            worst_ratio = f64::INFINITY;
            worst_delta = p.delta;
            continue;
        }
        let b = bound.bound_at(p.delta);
        let ratio = if p.error == 0.0 {
            0.0
        } else if b == 0.0 {
            pass = false;
            message = Some(format!(
                "bound is 0 but measured error is {} at radius {}",
                p.error, p.delta
            ));
            f64::INFINITY
        } else {
            p.error / b
        };
        if ratio > worst_ratio || worst_delta.is_nan() {
            worst_ratio = ratio;
            worst_delta = p.delta;
        }
        if p.error > b * (1.0 + BOUND_SLACK) {
            pass = false;
        }
    }
    Ok(BoundCheck {
        pass,
        worst_ratio,
        worst_delta,
        message,
    })
}

/// Attaches the bound values `K·Δ^N` of a combined bound to a measured
/// series (for reporting).
pub fn annotate_bounds(series: &mut ErrorSeries, bound: &CombinedBound) {
    for p in &mut series.points {
        p.bound = Some(bound.bound_at(p.delta));
    }
}

/// Estimates the supremum of a quantity over a closed ball from the
/// deterministic 256-point sample (center and axis extremes included).
///
/// * `AbsF` — maximum of `‖f‖`.
/// * `NormGrad` — maximum Frobenius norm of the Jacobian.
/// * `NormHess` — maximum stacked Frobenius norm of the Hessians.
/// * `AbsRecip` — maximum of `1/|f|` for a scalar oracle.
/// * `ImageGrad` — per-component maxima of the Jacobian row norms, combined
///   in the Euclidean norm: the constant `M̄` confining the image,
///   `g(B_Δ(x₀)) ⊆ B̄_{M̄Δ}(g(x₀))` for every `Δ ≤` the ball radius.
///
/// The result is a *lower* bound of the true supremum (provenance
/// `SAMPLED`); reports label verdicts that rely on it. A zero-radius ball
/// produces the pointwise value with locality `At`. Third-derivative bounds
/// cannot be sampled — oracles do not expose third derivatives.
pub fn sample_uniform_bound(
    oracle: &SmoothOracle,
    quantity: BoundQuantity,
    ball: &Ball,
) -> Result<UniformBound> {
    let pts = ball_points(ball, BOUND_SAMPLE_INTERIOR);
    let value = match quantity {
        BoundQuantity::AbsF => fold_max(pts.iter().map(|p| oracle.eval(p).map(|v| v.norm())))?,
        BoundQuantity::NormGrad => {
            fold_max(pts.iter().map(|p| oracle.grad(p).map(|j| j.norm())))?
        }
        BoundQuantity::NormHess => fold_max(
            pts.iter()
                .map(|p| oracle.hess(p).and_then(|h| stacked_matrix_norm(&h))),
        )?,
        BoundQuantity::AbsRecip => {
            if !oracle.is_scalar() {
                return Err(Error::Incompatible(format!(
                    "reciprocal bounds need a scalar oracle, '{}' is vector-valued",
                    oracle.name
                )));
            }
            fold_max(pts.iter().map(|p| {
                let v = oracle.eval_scalar(p)?;
                if v == 0.0 {
                    return Err(Error::Estimation(format!(
                        "function vanishes at a sample point of ball radius {}",
                        ball.radius
                    )));
                }
                Ok(1.0 / v.abs())
            }))?
        }
        BoundQuantity::ImageGrad => {
            let mut per_component = vec![0.0f64; oracle.dim_out];
            for p in &pts {
                let j = oracle.grad(p)?;
                for (i, m) in per_component.iter_mut().enumerate() {
                    *m = m.max(j.row(i).norm());
                }
            }
            per_component.iter().map(|m| m * m).sum::<f64>().sqrt()
        }
        BoundQuantity::NormThird => {
            return Err(Error::InvalidArgument(
                "third-derivative bounds cannot be sampled; supply an analytic bound".into(),
            ))
        }
    };
    if !value.is_finite() {
        return Err(Error::Estimation(format!(
            "sampled {quantity} over ball radius {} is not finite",
            ball.radius
        )));
    }
    let locality = if ball.radius == 0.0 {
        Locality::At
    } else {
        Locality::Near
    };
    UniformBound::new(
        quantity,
        value,
        locality,
        ball.center.clone(),
        ball.radius,
        Provenance::Sampled,
    )
}

fn fold_max(values: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for v in values {
        worst = worst.max(v?);
    }
    Ok(worst)
}

/// Cross-checks analytic derivatives against central finite differences with
/// step `h = 1e-5·(1 + ‖x‖)`: gradients must agree to `1e-5` relative,
/// Hessians to `1e-3` relative (relative to `max(1, ‖analytic‖)`). Checks
/// are skipped at levels the oracle's smoothness doesn't expose.
pub fn finite_difference_check(oracle: &SmoothOracle, points: &[Point]) -> Result<FdCheck> {
    if oracle.smoothness < Smoothness::C1 {
        return Err(Error::Smoothness(format!(
            "finite-difference check needs at least C1, '{}' is {}",
            oracle.name, oracle.smoothness
        )));
    }
    let mut pass = true;
    let mut worst_gradient: f64 = 0.0;
    let mut worst_hessian: f64 = 0.0;
    let mut failures = Vec::new();
    for x in points {
        let h = 1e-5 * (1.0 + x.norm());
        let jac = oracle.grad(x)?;
        let mut fd_jac = Matrix::zeros(oracle.dim_out, oracle.dim_in);
        for j in 0..oracle.dim_in {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (oracle.eval(&xp)? - oracle.eval(&xm)?) / (2.0 * h);
            fd_jac.set_column(j, &col);
        }
        let rel_g = (&fd_jac - &jac).norm() / jac.norm().max(1.0);
        worst_gradient = worst_gradient.max(rel_g);
        if rel_g > FD_GRAD_TOL {
            pass = false;
            failures.push(format!(
                "'{}' gradient off by {rel_g:.3e} at {:?}",
                oracle.name,
                x.as_slice()
            ));
        }
        if oracle.smoothness >= Smoothness::C2 {
            let hess = oracle.hess(x)?;
            let mut fd_hess =
                vec![Matrix::zeros(oracle.dim_in, oracle.dim_in); oracle.dim_out];
            for i in 0..oracle.dim_in {
                for j in 0..oracle.dim_in {
                    let mut xpp = x.clone();
                    let mut xpm = x.clone();
                    let mut xmp = x.clone();
                    let mut xmm = x.clone();
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    let cross = (oracle.eval(&xpp)? - oracle.eval(&xpm)? - oracle.eval(&xmp)?
                        + oracle.eval(&xmm)?)
                        / (4.0 * h * h);
                    for (k, fh) in fd_hess.iter_mut().enumerate() {
                        fh[(i, j)] = cross[k];
                    }
                }
            }
            let diffs: Vec<Matrix> = hess
                .iter()
                .zip(fd_hess.iter())
                .map(|(a, b)| a - b)
                .collect();
            let rel_h = stacked_matrix_norm(&diffs)? / stacked_matrix_norm(&hess)?.max(1.0);
            worst_hessian = worst_hessian.max(rel_h);
            if rel_h > FD_HESS_TOL {
                pass = false;
                failures.push(format!(
                    "'{}' hessian off by {rel_h:.3e} at {:?}",
                    oracle.name,
                    x.as_slice()
                ));
            }
        }
    }
    Ok(FdCheck {
        pass,
        worst_gradient,
        worst_hessian,
        failures,
    })
}

/// One rebuilt divergence example.
#[derive(Debug, Clone)]
pub struct CounterexampleCase {
    /// Short name of the construction.
    pub name: String,
    /// Level at which divergence is measured.
    pub level: DerivativeLevel,
    /// Measured errors over the default grid.
    pub series: ErrorSeries,
    /// `error(Δ/2)/error(Δ)` over the grid's last four halvings.
    pub halving_ratios: Vec<f64>,
    /// True iff every recorded halving ratio is at least 1.9.
    pub diverges: bool,
    /// A direct spot evaluation `(Δ, error)` away from the grid, when the
    /// construction has a round closed form there.
    pub spot: Option<(f64, f64)>,
}

/// Outcome of [`run_counterexamples`].
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    /// The three constructions.
    pub cases: Vec<CounterexampleCase>,
    /// True iff every case diverges as constructed.
    pub pass: bool,
}

fn constant_oracle(name: &str, dim: usize, value: f64) -> SmoothOracle {
    SmoothOracle::scalar_c3(
        name,
        dim,
        move |_| value,
        move |_| Point::zeros(dim),
        move |_| Matrix::zeros(dim, dim),
    )
}

fn halving_case(
    name: &str,
    level: DerivativeLevel,
    mc: &ModelClass,
    spot_delta: Option<f64>,
) -> Result<CounterexampleCase> {
    let grid = DeltaGrid::default_grid();
    let series = measure_errors(mc, &mc.reference, level, Locality::At, &grid, &mc.base)?;
    let errs: Vec<f64> = series.points.iter().map(|p| p.error).collect();
    let mut ratios = Vec::new();
    for i in errs.len().saturating_sub(5)..errs.len().saturating_sub(1) {
        ratios.push(errs[i + 1] / errs[i]);
    }
    let diverges = !ratios.is_empty() && ratios.iter().all(|r| *r >= 1.9);
    let spot = match spot_delta {
        Some(d) => {
            let model = mc.model(d)?;
            Some((d, difference_at(&mc.reference, &model, level, &mc.base)?))
        }
        None => None,
    };
    Ok(CounterexampleCase {
        name: name.into(),
        level,
        series,
        halving_ratios: ratios,
        diverges,
        spot,
    })
}

/// Rebuilds the three classical divergence constructions and verifies that
/// the measured error grows by at least 1.9× per halving over the last four
/// halvings of the default grid.
///
/// 1. *Product with an unbounded factor*: `f₁ = f₂ = 1 + x` at `x₀ = 0`,
///    modeled by `f̃₁ = f₁ + 1/Δ` and `f̃₂ = f₂`. Every gradient certificate
///    of the parts is perfect, yet the product's gradient error at `x₀` is
///    exactly `‖∇f₂(x₀)‖/Δ` — uniform boundedness of the factors is what the
///    product rule cannot do without.
/// 2. *Quotient with a zeroth-order denominator*: `f₁ = f̃₁ = f₂ = 1`,
///    `f̃₂ = Δ`. The denominator model converges pointwise to 0 ≠ 1 as
///    radii shrink, and the quotient error is `|1 − 1/Δ|`.
/// 3. *Composition drifting inside a steep outer function*: `f₁ = 1`,
///    `f̃₁ = Δ`, `f₂ = f̃₂ = 1/y` near `y₀ = 1`. The inner model's error is
///    bounded (order 0) but not vanishing, and the composition error is again
///    `|1 − 1/Δ|`.
pub fn run_counterexamples() -> Result<CounterexampleReport> {
    let mut cases = Vec::new();

    // 1. Product: model of the first factor drifts by 1/Δ.
    {
        let f = SmoothOracle::scalar_c3(
            "onepx",
            1,
            |x| 1.0 + x[0],
            |_| Point::from_vec(vec![1.0]),
            |_| Matrix::zeros(1, 1),
        );
        let drifting = ModelClass::from_parts(
            "onepx~drift",
            f.clone(),
            Point::zeros(1),
            1.0,
            move |delta| {
                Ok(SmoothOracle::scalar_c3(
                    format!("onepx+1/{delta}"),
                    1,
                    move |x| 1.0 + x[0] + 1.0 / delta,
                    |_| Point::from_vec(vec![1.0]),
                    |_| Matrix::zeros(1, 1),
                ))
            },
            vec![],
        )?;
        let exact = make_exact_class(f, Point::zeros(1), 1.0)?;
        let product = combine_model_classes(CombineKind::Product, &[drifting, exact])?;
        cases.push(halving_case(
            "product-unbounded-factor",
            DerivativeLevel::Gradient,
            &product,
            None,
        )?);
    }

    // 2. Quotient: denominator model is the constant Δ.
    {
        let one = oracle_by_name("one1")?;
        let numerator = make_exact_class(one.clone(), Point::zeros(1), 1.0)?;
        let denominator = ModelClass::from_parts(
            "one~delta",
            one,
            Point::zeros(1),
            1.0,
            |delta| Ok(constant_oracle(&format!("const{delta}"), 1, delta)),
            vec![],
        )?;
        let quotient =
            combine_model_classes(CombineKind::Quotient, &[numerator, denominator])?;
        cases.push(halving_case(
            "quotient-order-zero-denominator",
            DerivativeLevel::Function,
            &quotient,
            Some(0.01),
        )?);
    }

    // 3. Composition: inner model is the constant Δ, outer is 1/y.
    {
        let one = oracle_by_name("one1")?;
        let inner = ModelClass::from_parts(
            "one~delta",
            one,
            Point::zeros(1),
            1.0,
            |delta| Ok(constant_oracle(&format!("const{delta}"), 1, delta)),
            vec![],
        )?;
        let recip = SmoothOracle::scalar_c3(
            "recip",
            1,
            |y| 1.0 / y[0],
            |y| Point::from_vec(vec![-1.0 / (y[0] * y[0])]),
            |y| Matrix::from_element(1, 1, 2.0 / (y[0] * y[0] * y[0])),
        );
        let outer = make_exact_class(recip, Point::from_vec(vec![1.0]), 1.0)?;
        let composition =
            combine_model_classes(CombineKind::Composition, &[inner, outer])?;
        cases.push(halving_case(
            "composition-drifting-inner",
            DerivativeLevel::Function,
            &composition,
            Some(0.01),
        )?);
    }

    let pass = cases.iter().all(|c| c.diverges);
    Ok(CounterexampleReport { cases, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{Order, TraceTerm};
    use crate::model::{make_exact_class, make_synthetic_class, SyntheticTerm};
    use crate::oracle::make_test_suite;

    fn synthetic_function_class(order: f64, kappa: f64) -> ModelClass {
        make_synthetic_class(
            oracle_by_name("quad2").unwrap(),
            &[SyntheticTerm {
                level: DerivativeLevel::Function,
                order: Order::Finite(order),
                kappa,
                locality: Locality::At,
            }],
            Point::zeros(2),
            1.0,
            42,
        )
        .unwrap()
    }

    #[test]
    fn grid_construction_and_validation() {
        let g = DeltaGrid::default_grid();
        assert_eq!(g.deltas.len(), 8);
        assert_eq!(g.max_delta(), 0.125);
        assert_eq!(g.min_delta(), 2f64.powi(-10));
        assert!(DeltaGrid::new(vec![0.1, 0.2, 0.05, 0.01]).is_err());
        assert!(DeltaGrid::geometric(0.1, 0.5, 3).is_err());
        assert!(DeltaGrid::geometric(0.1, 1.5, 8).is_err());
    }

    #[test]
    fn grid_scaling_preserves_shape() {
        let g = DeltaGrid::default_grid();
        let s = g.scaled_to_cap(0.01).unwrap();
        assert_eq!(s.deltas.len(), 8);
        assert!((s.max_delta() - 0.01).abs() < 1e-18);
        let unchanged = g.scaled_to_cap(0.5).unwrap();
        assert_eq!(unchanged, g);
    }

    #[test]
    fn exact_model_measures_zero() {
        let mc = make_exact_class(oracle_by_name("exp2").unwrap(), Point::zeros(2), 1.0).unwrap();
        let series = measure_errors(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::Near,
            &DeltaGrid::default_grid(),
            &Point::zeros(2),
        )
        .unwrap();
        assert!(series.points.iter().all(|p| p.error == 0.0));
        let verdict = estimate_order(&series).unwrap();
        assert!(matches!(verdict, OrderVerdict::Exact { .. }));
    }

    #[test]
    fn synthetic_tightness_at_base() {
        let mc = synthetic_function_class(2.0, 1.0);
        let series = measure_errors(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::At,
            &DeltaGrid::default_grid(),
            &Point::zeros(2),
        )
        .unwrap();
        for p in &series.points {
            let expected = p.delta * p.delta;
            assert!(
                ((p.error - expected) / expected).abs() < 1e-12,
                "delta {}: {} vs {}",
                p.delta,
                p.error,
                expected
            );
        }
    }

    #[test]
    fn order_fit_recovers_exact_power_laws() {
        let mk = |f: &dyn Fn(f64) -> f64| ErrorSeries {
            level: DerivativeLevel::Function,
            locality: Locality::At,
            points: DeltaGrid::default_grid()
                .deltas
                .iter()
                .map(|&d| ErrorPoint {
                    delta: d,
                    error: f(d),
                    divergent: false,
                    bound: None,
                })
                .collect(),
        };
        let v = estimate_order(&mk(&|d| d * d)).unwrap();
        let OrderVerdict::Fitted { estimate, .. } = v else {
            panic!("expected a fit")
        };
        assert!((estimate.slope - 2.0).abs() < 1e-10);
        assert!(estimate.r_squared > 1.0 - 1e-12);

        let v = estimate_order(&mk(&|d| 3.0 * d)).unwrap();
        let OrderVerdict::Fitted { estimate, .. } = v else {
            panic!("expected a fit")
        };
        assert!((estimate.slope - 1.0).abs() < 1e-10);
        assert!((estimate.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn order_fit_excludes_divergent_points() {
        let mut points: Vec<ErrorPoint> = DeltaGrid::default_grid()
            .deltas
            .iter()
            .map(|&d| ErrorPoint {
                delta: d,
                error: d,
                divergent: false,
                bound: None,
            })
            .collect();
        points[0].divergent = true;
        points[0].error = f64::INFINITY;
        let series = ErrorSeries {
            level: DerivativeLevel::Function,
            locality: Locality::At,
            points,
        };
        let v = estimate_order(&series).unwrap();
        let OrderVerdict::Fitted {
            estimate,
            divergent_excluded,
        } = v
        else {
            panic!("expected a fit")
        };
        assert_eq!(divergent_excluded, 1);
        assert!((estimate.slope - 1.0).abs() < 1e-10);
    }

    fn bound(level: DerivativeLevel, order: f64, constant: f64) -> CombinedBound {
        CombinedBound {
            level,
            locality: Locality::At,
            order: Order::Finite(order),
            constant,
            trace: vec![TraceTerm {
                rule: "test".into(),
                description: "test".into(),
                value: constant,
            }],
            delta_bar: 1.0,
        }
    }

    #[test]
    fn bound_check_passes_tight_and_fails_undercut() {
        let mc = synthetic_function_class(2.0, 1.0);
        let series = measure_errors(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::At,
            &DeltaGrid::default_grid(),
            &Point::zeros(2),
        )
        .unwrap();
        let ok = check_bound(&series, &bound(DerivativeLevel::Function, 2.0, 1.0)).unwrap();
        assert!(ok.pass, "tight bound must pass, worst {}", ok.worst_ratio);
        assert!(ok.worst_ratio <= 1.0 + 1e-9);
        let bad = check_bound(&series, &bound(DerivativeLevel::Function, 2.0, 0.5)).unwrap();
        assert!(!bad.pass, "half the true constant must fail");
        assert!(bad.worst_ratio > 1.9);
    }

    #[test]
    fn bound_check_zero_bound_zero_error_passes() {
        let mc = make_exact_class(oracle_by_name("one1").unwrap(), Point::zeros(1), 1.0).unwrap();
        let series = measure_errors(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::At,
            &DeltaGrid::default_grid(),
            &Point::zeros(1),
        )
        .unwrap();
        let b = CombinedBound {
            level: DerivativeLevel::Function,
            locality: Locality::At,
            order: Order::Infinite,
            constant: 0.0,
            trace: vec![],
            delta_bar: 1.0,
        };
        let check = check_bound(&series, &b).unwrap();
        assert!(check.pass);
        assert_eq!(check.worst_ratio, 0.0);
    }

    #[test]
    fn sampled_bounds_match_known_maxima() {
        let five = constant_oracle("five", 1, 5.0);
        let ball = Ball::new(Point::zeros(1), 1.0).unwrap();
        let b = sample_uniform_bound(&five, BoundQuantity::AbsF, &ball).unwrap();
        assert_eq!(b.value, 5.0);
        assert_eq!(b.provenance, Provenance::Sampled);

        let ident = SmoothOracle::scalar_c3(
            "x",
            1,
            |x| x[0],
            |_| Point::from_vec(vec![1.0]),
            |_| Matrix::zeros(1, 1),
        );
        let b = sample_uniform_bound(&ident, BoundQuantity::AbsF, &ball).unwrap();
        assert_eq!(b.value, 1.0, "axis point is on the boundary");

        let normsq = SmoothOracle::scalar_c3(
            "normsq",
            2,
            |x| x.dot(x),
            |x| 2.0 * x,
            |_| 2.0 * Matrix::identity(2, 2),
        );
        let ball2 = Ball::new(Point::zeros(2), 1.0).unwrap();
        let b = sample_uniform_bound(&normsq, BoundQuantity::NormGrad, &ball2).unwrap();
        assert!((b.value - 2.0).abs() / 2.0 < 0.05, "sampled {}", b.value);
    }

    #[test]
    fn sampled_image_gradient_of_curve_is_exact_at_axis_points() {
        let curve = oracle_by_name("curve2").unwrap();
        let ball = Ball::new(Point::zeros(2), 0.5).unwrap();
        let sampled = sample_uniform_bound(&curve, BoundQuantity::ImageGrad, &ball).unwrap();
        let analytic = curve.analytic_bound(&ball, BoundQuantity::ImageGrad).unwrap();
        assert!(
            (sampled.value - analytic).abs() < 1e-12,
            "sampled {} vs analytic {analytic}",
            sampled.value
        );
    }

    #[test]
    fn near_error_is_monotone_in_sample_refinement() {
        let mc = make_synthetic_class(
            oracle_by_name("sincos2").unwrap(),
            &[SyntheticTerm {
                level: DerivativeLevel::Function,
                order: Order::Finite(1.0),
                kappa: 1.0,
                locality: Locality::Near,
            }],
            Point::zeros(2),
            1.0,
            11,
        )
        .unwrap();
        let grid = DeltaGrid::default_grid();
        let coarse = measure_errors_with(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::Near,
            &grid,
            &Point::zeros(2),
            ERROR_SAMPLE_INTERIOR,
        )
        .unwrap();
        let fine = measure_errors_with(
            &mc,
            &mc.reference,
            DerivativeLevel::Function,
            Locality::Near,
            &grid,
            &Point::zeros(2),
            2 * ERROR_SAMPLE_INTERIOR,
        )
        .unwrap();
        for (c, f) in coarse.points.iter().zip(fine.points.iter()) {
            assert!(f.error >= c.error, "refinement decreased the error");
        }
    }

    #[test]
    fn finite_differences_confirm_affine_exactly() {
        let f = oracle_by_name("affine2").unwrap();
        let pts = vec![Point::zeros(2), Point::from_vec(vec![0.3, -0.4])];
        let r = finite_difference_check(&f, &pts).unwrap();
        assert!(r.pass);
        // Affine differences are exact up to evaluation rounding (~eps/2h).
        assert!(r.worst_gradient <= 1e-9, "worst {}", r.worst_gradient);
    }

    #[test]
    fn finite_differences_catch_a_wrong_gradient() {
        let broken = SmoothOracle::scalar_c3(
            "broken",
            1,
            |x| x[0] * x[0],
            |x| Point::from_vec(vec![2.0 * x[0] + 1.0]),
            |_| Matrix::from_element(1, 1, 2.0),
        );
        let r = finite_difference_check(&broken, &[Point::from_vec(vec![0.5])]).unwrap();
        assert!(!r.pass);
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn whole_suite_passes_finite_differences() {
        let pts1 = vec![Point::from_vec(vec![0.3])];
        let pts2 = vec![Point::from_vec(vec![0.3, -0.2])];
        let pts3 = vec![Point::from_vec(vec![0.3, -0.2, 0.1])];
        for oracle in make_test_suite() {
            let pts = match oracle.dim_in {
                1 => &pts1,
                2 => &pts2,
                _ => &pts3,
            };
            let r = finite_difference_check(&oracle, pts).unwrap();
            assert!(r.pass, "{} failed: {:?}", oracle.name, r.failures);
        }
    }

    #[test]
    fn counterexamples_diverge_as_constructed() {
        let report = run_counterexamples().unwrap();
        assert!(report.pass);
        assert_eq!(report.cases.len(), 3);
        let product = &report.cases[0];
        for r in &product.halving_ratios {
            assert!((r - 2.0).abs() < 1e-9, "product halving ratio {r}");
        }
        // 1/Δ at the smallest default radius.
        assert_eq!(product.series.points.last().unwrap().error, 1024.0);
        for case in &report.cases[1..] {
            let (d, err) = case.spot.unwrap();
            assert_eq!(d, 0.01);
            assert!((err - 99.0).abs() < 1e-9, "{}: spot error {err}", case.name);
        }
        // |1 − 1/Δ| at the smallest default radius.
        assert_eq!(report.cases[1].series.points.last().unwrap().error, 1023.0);
    }
}
