//! Property-based invariants: monotonicity of the assembled product
//! constants in every input magnitude, permutation invariance of the n-ary
//! product, reciprocal transfer soundness ranges, certificate bound
//! monotonicity, and configuration round-tripping.

use proptest::prelude::*;

use modelcalc::{
    parse_config, product2_bound, product_n_bound, reciprocal_model_bound, serialize_config,
    AccuracyCertificate, BoundInputs, BoundOverride, BoundQuantity, BoundSide, CheckSpec, Config,
    DerivativeLevel, Expectation, GridSpec, LeafModel, Locality, Order, PartInputs, Point,
    Provenance, SyntheticTerm, TreeNode, UniformBound,
};

const DELTA_BAR: f64 = 0.25;

fn base() -> Point {
    Point::from_column_slice(&[0.0])
}

fn near_cert(level: DerivativeLevel, order: f64, kappa: f64) -> AccuracyCertificate {
    let order = if kappa == 0.0 {
        Order::Infinite
    } else {
        Order::Finite(order)
    };
    AccuracyCertificate::new(level, Locality::Near, order, kappa, base(), DELTA_BAR).unwrap()
}

fn near_bound(quantity: BoundQuantity, value: f64) -> UniformBound {
    UniformBound::new(
        quantity,
        value,
        Locality::Near,
        base(),
        DELTA_BAR,
        Provenance::Analytic,
    )
    .unwrap()
}

fn fn_part(name: &str, order: f64, kappa: f64, truth: f64, model: f64) -> PartInputs {
    PartInputs::new(
        name,
        vec![near_cert(DerivativeLevel::Function, order, kappa)],
        vec![near_bound(BoundQuantity::AbsF, truth)],
        vec![near_bound(BoundQuantity::AbsF, model)],
    )
}

fn product2_constant(specs: &[(f64, f64, f64, f64); 2], locality: Locality) -> f64 {
    let parts = vec![
        fn_part("p0", specs[0].0, specs[0].1, specs[0].2, specs[0].3),
        fn_part("p1", specs[1].0, specs[1].1, specs[1].2, specs[1].3),
    ];
    let inputs = BoundInputs::new(parts, DELTA_BAR, base());
    product2_bound(&inputs, DerivativeLevel::Function, locality)
        .unwrap()
        .constant
}

fn order_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0)]
}

proptest! {
    /// Increasing any certificate constant can only increase the assembled
    /// product constant: every ordering's total is non-decreasing in each κ,
    /// so the minimum over orderings is too.
    #[test]
    fn product_constant_monotone_in_kappa(
        n1 in order_strategy(),
        n2 in order_strategy(),
        k1 in 0.0f64..2.0,
        k2 in 0.0f64..2.0,
        t1 in 0.5f64..3.0,
        t2 in 0.5f64..3.0,
        bump in 0.0f64..2.0,
        at in any::<bool>(),
    ) {
        let locality = if at { Locality::At } else { Locality::Near };
        let lo = product2_constant(&[(n1, k1, t1, t1), (n2, k2, t2, t2)], locality);
        let hi = product2_constant(&[(n1, k1 + bump, t1, t1), (n2, k2, t2, t2)], locality);
        prop_assert!(
            hi >= lo - 1e-12 * lo.abs(),
            "constant decreased when κ grew: {lo} -> {hi}"
        );
    }

    /// Increasing a factor's magnitude bound can only increase the assembled
    /// constant (the magnitudes enter as non-negative coefficients).
    #[test]
    fn product_constant_monotone_in_magnitude(
        n1 in order_strategy(),
        n2 in order_strategy(),
        k1 in 0.01f64..2.0,
        k2 in 0.01f64..2.0,
        t1 in 0.5f64..3.0,
        t2 in 0.5f64..3.0,
        grow in 1.0f64..3.0,
    ) {
        let lo = product2_constant(&[(n1, k1, t1, t1), (n2, k2, t2, t2)], Locality::Near);
        let hi = product2_constant(
            &[(n1, k1, t1 * grow, t1 * grow), (n2, k2, t2, t2)],
            Locality::Near,
        );
        prop_assert!(
            hi >= lo - 1e-12 * lo.abs(),
            "constant decreased when M grew: {lo} -> {hi}"
        );
    }

    /// The n-ary product minimises over all factor orderings, so relabelling
    /// the factors must not change the assembled constant at all.
    #[test]
    fn product_constant_invariant_under_permutation(
        specs in prop::collection::vec(
            (order_strategy(), 0.05f64..2.0, 0.5f64..3.0, 0.8f64..1.0),
            2..=4,
        ),
        shuffled in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        at in any::<bool>(),
    ) {
        let locality = if at { Locality::At } else { Locality::Near };
        let build = |order: &[usize]| -> f64 {
            let parts: Vec<PartInputs> = order
                .iter()
                .map(|&i| {
                    let (n, k, t, frac) = specs[i];
                    fn_part(&format!("p{i}"), n, k, t, t * frac)
                })
                .collect();
            let inputs = BoundInputs::new(parts, DELTA_BAR, base());
            product_n_bound(&inputs, DerivativeLevel::Function, locality)
                .unwrap()
                .constant
        };
        let identity: Vec<usize> = (0..specs.len()).collect();
        let permuted: Vec<usize> = shuffled
            .into_iter()
            .filter(|&i| i < specs.len())
            .collect();
        let a = build(&identity);
        let b = build(&permuted);
        prop_assert_eq!(a.to_bits(), b.to_bits(), "{} vs {}", a, b);
    }

    /// A certificate's error bound is non-decreasing in the radius.
    #[test]
    fn certificate_bound_monotone_in_radius(
        order in 0.5f64..4.0,
        kappa in 0.0f64..3.0,
        d1 in 0.0f64..1.0,
        d2 in 0.0f64..1.0,
    ) {
        let cert = AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::Near,
            Order::Finite(order),
            kappa,
            base(),
            1.0,
        )
        .unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(cert.error_bound(lo) <= cert.error_bound(hi));
    }

    /// Reciprocal transfer with a denominator kept away from zero: the
    /// transferred bound dominates the truth-side bound, stays finite, and
    /// the radius cap survives unhalved whenever `Δ̄^N·M·κ ≤ 1/2`.
    #[test]
    fn reciprocal_transfer_dominates_truth_bound(
        m in 0.2f64..1.0,
        kappa in 0.0f64..0.5,
        order in order_strategy(),
        delta_bar in 0.05f64..0.5,
    ) {
        let cert = AccuracyCertificate::new(
            DerivativeLevel::Function,
            Locality::Near,
            if kappa == 0.0 { Order::Infinite } else { Order::Finite(order) },
            kappa,
            base(),
            delta_bar,
        )
        .unwrap();
        let recip = UniformBound::new(
            BoundQuantity::AbsRecip,
            m,
            Locality::Near,
            base(),
            delta_bar,
            Provenance::Analytic,
        )
        .unwrap();
        let out = reciprocal_model_bound(&cert, &recip, delta_bar).unwrap();
        prop_assert!(out.value.is_finite());
        prop_assert!(out.value >= m);
        prop_assert_eq!(out.delta_bar, delta_bar);
        prop_assert_eq!(out.quantity, BoundQuantity::AbsRecip);
    }
}

// ---------------------------------------------------------------------------
// Configuration round-trip.
// ---------------------------------------------------------------------------

fn oracle_name_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("sincos1".to_string()),
        Just("exp1".to_string()),
        Just("quad2".to_string()),
        Just("pos3".to_string()),
        Just("linmap2".to_string()),
    ]
}

fn synthetic_term_strategy() -> impl Strategy<Value = SyntheticTerm> {
    (
        prop_oneof![
            Just(DerivativeLevel::Function),
            Just(DerivativeLevel::Gradient),
            Just(DerivativeLevel::Hessian),
        ],
        prop_oneof![
            (0.0f64..4.0, 0.0f64..2.0).prop_map(|(n, k)| (Order::Finite(n), k)),
            Just((Order::Infinite, 0.0)),
        ],
        prop_oneof![Just(Locality::At), Just(Locality::Near)],
    )
        .prop_map(|(level, (order, kappa), locality)| SyntheticTerm {
            level,
            order,
            kappa,
            locality,
        })
}

fn leaf_model_strategy() -> impl Strategy<Value = LeafModel> {
    prop_oneof![
        Just(LeafModel::Exact),
        Just(LeafModel::Interpolation),
        (
            prop::option::of(any::<u64>()),
            prop::collection::vec(synthetic_term_strategy(), 0..3),
        )
            .prop_map(|(seed, terms)| LeafModel::Synthetic { seed, terms }),
    ]
}

fn tree_strategy() -> impl Strategy<Value = TreeNode> {
    let leaf = (oracle_name_strategy(), leaf_model_strategy())
        .prop_map(|(oracle, model)| TreeNode::Leaf { oracle, model });
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(TreeNode::Product),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TreeNode::Quotient(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TreeNode::Composition(Box::new(a), Box::new(b))),
            (1u32..4, inner.clone()).prop_map(|(n, c)| TreeNode::Power(n, Box::new(c))),
            inner.prop_map(|c| TreeNode::Shift(Box::new(c))),
        ]
    })
}

fn check_strategy() -> impl Strategy<Value = CheckSpec> {
    (
        prop_oneof![
            Just(DerivativeLevel::Function),
            Just(DerivativeLevel::Gradient),
            Just(DerivativeLevel::Hessian),
        ],
        prop_oneof![Just(Locality::At), Just(Locality::Near)],
        prop_oneof![
            Just(Expectation::Sound),
            (0.0f64..4.0).prop_map(Expectation::Order),
            Just(Expectation::Exact),
            Just(Expectation::Precondition),
        ],
    )
        .prop_map(|(level, locality, expectation)| CheckSpec {
            level,
            locality,
            expectation,
        })
}

fn bound_override_strategy() -> impl Strategy<Value = BoundOverride> {
    (
        0usize..4,
        any::<bool>(),
        prop_oneof![
            Just(BoundQuantity::AbsF),
            Just(BoundQuantity::NormGrad),
            Just(BoundQuantity::NormHess),
            Just(BoundQuantity::NormThird),
            Just(BoundQuantity::AbsRecip),
            Just(BoundQuantity::ImageGrad),
        ],
        any::<bool>(),
        0.001f64..100.0,
    )
        .prop_map(|(part, truth, quantity, at, value)| BoundOverride {
            part,
            side: if truth { BoundSide::Truth } else { BoundSide::Model },
            quantity,
            locality: if at { Locality::At } else { Locality::Near },
            value,
        })
}

fn config_strategy() -> impl Strategy<Value = Config> {
    (
        "[a-z][a-z0-9-]{0,16}",
        prop::collection::vec(-10.0f64..10.0, 1..4),
        0.01f64..1.0,
        (0.01f64..1.0, 0.2f64..0.9, 4usize..12),
        any::<u64>(),
        tree_strategy(),
        prop::collection::vec(check_strategy(), 0..4),
        prop::collection::vec(0usize..4, 0..3),
        prop::collection::vec(bound_override_strategy(), 0..3),
    )
        .prop_map(
            |(name, coords, delta_bar, (start, ratio, count), seed, tree, checks, zeros, bounds)| {
                Config {
                    name,
                    base: Point::from_vec(coords),
                    delta_bar,
                    grid: GridSpec {
                        start,
                        ratio,
                        count,
                    },
                    seed,
                    tree,
                    checks,
                    zero_factors: zeros,
                    bounds,
                }
            },
        )
}

proptest! {
    /// Serialising a configuration and parsing it back is the identity, and
    /// the serialised text itself is a fixed point of the round trip.
    #[test]
    fn config_round_trip(cfg in config_strategy()) {
        let text = serialize_config(&cfg);
        let parsed = parse_config(&text).map_err(|e| {
            TestCaseError::fail(format!("round-trip parse failed: {e}\n---\n{text}"))
        })?;
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(serialize_config(&parsed), text);
    }
}
