//! End-to-end experiment pipeline: configuration text in, judged outcomes
//! out. These tests exercise paths that cross module boundaries — composition
//! with an inexact inner stage, explicit bound overrides, vanishing-factor
//! refinements, interpolation classes, and recentring.

use modelcalc::runner::run_experiment;
use modelcalc::{parse_config, CheckOutcome, DerivativeLevel, ExperimentResult, Locality, Verdict};

fn run_text(text: &str) -> ExperimentResult {
    let cfg = parse_config(text).expect("config parses");
    run_experiment(&cfg).expect("experiment runs")
}

fn outcome(result: &ExperimentResult, level: DerivativeLevel, locality: Locality) -> &CheckOutcome {
    result
        .outcomes
        .iter()
        .find(|o| o.level == level && o.locality == locality)
        .unwrap_or_else(|| panic!("no outcome for {level}/{locality}"))
}

#[test]
fn composition_with_inexact_inner_supports_all_near_levels() {
    let result = run_text(
        "name inner-synthetic\n\
         base 0.3\n\
         delta_bar 0.125\n\
         tree (composition\n\
           (leaf sincos1 (synthetic (function 2 0.5 near) (gradient 2 0.5 near) (hessian 2 0.5 near)))\n\
           (leaf exp1 (synthetic (function 2 0.5 near) (gradient 2 0.5 near) (hessian 2 0.5 near))))\n\
         check function near\n\
         check gradient near\n\
         check hessian near\n",
    );
    assert!(result.pass, "outcomes: {:?}", result.outcomes);
    for (level, rule) in [
        (DerivativeLevel::Function, "composition/function/near"),
        (DerivativeLevel::Gradient, "composition/gradient/near"),
        (DerivativeLevel::Hessian, "composition/hessian/near"),
    ] {
        let o = outcome(&result, level, Locality::Near);
        assert_eq!(o.verdict, Verdict::Pass);
        assert_eq!(o.rule, rule);
        assert_eq!(o.bound_pass, Some(true));
        assert!(o.constant.unwrap() > 0.0);
    }
}

#[test]
fn bound_overrides_replace_gathered_magnitudes() {
    let template = |truth: f64, model: f64| {
        format!(
            "name override-{truth}\n\
             base 0.25\n\
             delta_bar 0.125\n\
             tree (product\n\
               (leaf sincos1 (synthetic (function 1 1.0 near)))\n\
               (leaf one1 exact))\n\
             bound 1 truth abs_f near {truth}\n\
             bound 1 model abs_f near {model}\n\
             check function near\n"
        )
    };
    let tight = run_text(&template(1.0, 1.0));
    let loose = run_text(&template(5.0, 5.0));
    assert!(tight.pass && loose.pass);
    let t = outcome(&tight, DerivativeLevel::Function, Locality::Near);
    let l = outcome(&loose, DerivativeLevel::Function, Locality::Near);
    // The partner factor's magnitude multiplies the dialed κ = 1, so the
    // assembled constants are exactly the supplied bounds.
    assert_eq!(t.constant, Some(1.0));
    assert_eq!(l.constant, Some(5.0));
}

#[test]
fn interpolation_leaf_meets_expected_rates() {
    let result = run_text(
        "name interp-rates\n\
         base 0.3\n\
         delta_bar 0.125\n\
         tree (leaf sincos1 (interpolation))\n\
         check function near\n\
         check gradient near\n",
    );
    assert!(result.pass);
    let f = outcome(&result, DerivativeLevel::Function, Locality::Near);
    let g = outcome(&result, DerivativeLevel::Gradient, Locality::Near);
    assert!(f.slope.unwrap() >= 1.9, "function slope {:?}", f.slope);
    assert!(g.slope.unwrap() >= 0.9, "gradient slope {:?}", g.slope);
    assert_eq!(f.bound_pass, Some(true));
    assert_eq!(g.bound_pass, Some(true));
}

#[test]
fn vanishing_factor_lifts_the_pointwise_order() {
    let result = run_text(
        "name zero-single\n\
         base 0\n\
         delta_bar 0.125\n\
         tree (product\n\
           (leaf sincos1 (synthetic (function 1 1.0 near)))\n\
           (leaf quad1 (synthetic (function 3 1.0 near))))\n\
         zero_factors 1\n\
         check function at expect 3\n",
    );
    assert!(result.pass, "outcomes: {:?}", result.outcomes);
    let o = outcome(&result, DerivativeLevel::Function, Locality::At);
    assert_eq!(o.rule, "product_n/zero_factor/function/at");
    assert!(o.slope.unwrap() >= 2.85, "slope {:?}", o.slope);
    assert_eq!(o.bound_pass, Some(true));
}

#[test]
fn two_vanishing_factors_certify_an_exact_gradient() {
    let result = run_text(
        "name zero-double\n\
         base 0\n\
         delta_bar 0.125\n\
         tree (product\n\
           (leaf quad1 (synthetic (function inf 0 near) (gradient 1 1.0 near)))\n\
           (leaf root1 (synthetic (function inf 0 near) (gradient 2 1.0 near))))\n\
         zero_factors 0 1\n\
         check gradient at expect exact\n",
    );
    assert!(result.pass, "outcomes: {:?}", result.outcomes);
    let o = outcome(&result, DerivativeLevel::Gradient, Locality::At);
    assert_eq!(o.verdict, Verdict::Pass);
    let series = o.series.as_ref().unwrap();
    assert!(
        series.points.iter().all(|p| p.error == 0.0),
        "errors: {:?}",
        series.points
    );
}

#[test]
fn expected_hypothesis_rejection_counts_as_pass() {
    let result = run_text(
        "name expected-rejection\n\
         base 0.5\n\
         delta_bar 0.125\n\
         tree (quotient\n\
           (leaf quad1 exact)\n\
           (leaf pos1 (synthetic (function 0 0.1 near))))\n\
         check function near expect precondition\n",
    );
    assert!(result.pass);
    let o = outcome(&result, DerivativeLevel::Function, Locality::Near);
    assert_eq!(o.verdict, Verdict::PreconditionFailed);
    assert!(o.ok);
    assert!(o.message.as_deref().unwrap().contains("positive order"));
}

#[test]
fn measurement_grid_is_clamped_to_the_radius_cap() {
    let result = run_text(
        "name clamped-grid\n\
         base 0.3\n\
         delta_bar 0.03\n\
         grid 0.125 0.5 8\n\
         tree (leaf sincos1 (synthetic (function 1 0.5 near)))\n\
         check function near expect 1\n",
    );
    assert!(result.pass);
    let o = outcome(&result, DerivativeLevel::Function, Locality::Near);
    let series = o.series.as_ref().unwrap();
    assert_eq!(series.points.len(), 8);
    assert!(series.points.iter().all(|p| p.delta <= 0.03));
}

#[test]
fn recentring_zeroes_the_base_error_and_keeps_derivative_series() {
    let shifted = run_text(
        "name shifted\n\
         base 0.4\n\
         delta_bar 0.125\n\
         tree (shift (leaf sincos1 (synthetic (function 1 0.8 near) (gradient 1 0.7 near))))\n\
         check function at expect exact\n\
         check gradient near\n",
    );
    let plain = run_text(
        "name plain\n\
         base 0.4\n\
         delta_bar 0.125\n\
         tree (leaf sincos1 (synthetic (function 1 0.8 near) (gradient 1 0.7 near)))\n\
         check gradient near\n",
    );
    assert!(shifted.pass && plain.pass);
    let at = outcome(&shifted, DerivativeLevel::Function, Locality::At);
    assert!(at
        .series
        .as_ref()
        .unwrap()
        .points
        .iter()
        .all(|p| p.error == 0.0));
    // Recentring only reassociates the value; the derivative closures
    // delegate unchanged, so the measured gradient series must be identical
    // down to the last bit (the certificates are copied unchanged too).
    let s = outcome(&shifted, DerivativeLevel::Gradient, Locality::Near);
    let p = outcome(&plain, DerivativeLevel::Gradient, Locality::Near);
    assert_eq!(s.series, p.series);
}
