//! Deterministic low-discrepancy sampling of Euclidean balls.
//!
//! Empirical verification needs two kinds of point sets on a closed ball
//! `B̄_r(c)`:
//!
//! * *error samples* — where the difference between truth and model is
//!   measured when a guarantee holds on the whole ball, and
//! * *bound samples* — where a function is evaluated to estimate a supremum.
//!
//! Both are built the same way: the center, the `2d` axis points `c ± r·e_i`
//! (suprema of the catalogue functions are typically attained on the boundary
//! along a coordinate axis, so these make many sampled bounds exact), and a
//! prefix of a Halton sequence mapped into the ball. The Halton sequence uses
//! the first `d` primes with a Cranley–Patterson rotation derived from a
//! constant seed, so all samples are reproducible bit-for-bit across runs and
//! platforms — verification never uses ambient randomness. Because a longer
//! prefix of the same sequence contains the shorter one, enlarging a sample
//! can only increase an estimated supremum (monotone refinement).
//!
//! The cube-to-ball map sends `u ∈ [0,1)^d` to `v = 2u − 1` and radially
//! clamps `v` onto the unit sphere when `‖v‖₂ > 1`. Points landing outside
//! the inscribed ball are thereby pushed to the boundary, which is harmless
//! for error measurement and helpful for supremum estimation.

use nalgebra::DVector;

use crate::cert::{Ball, Point};

/// Interior Halton points used for measuring model errors on a ball.
pub const ERROR_SAMPLE_INTERIOR: usize = 64;

/// Interior Halton points used for estimating a supremum over a ball.
pub const BOUND_SAMPLE_INTERIOR: usize = 256;

/// Fixed seed for the Cranley–Patterson rotation. Sampling is part of the
/// verification contract and must not vary with experiment configuration.
const ROTATION_SEED: u64 = 0x5EED_5EED_5EED_5EED;

/// SplitMix64 step; the standard 64-bit finalizer used to derive independent
/// rotation offsets from [`ROTATION_SEED`].
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First `n` primes (Halton bases).
fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate: u64 = 2;
    while primes.len() < n {
        if primes.iter().all(|p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Van der Corput radical inverse of `k` in the given base.
fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    let b = base as f64;
    while k > 0 {
        denom *= b;
        inv += (k % base) as f64 / denom;
        k /= base;
    }
    inv
}

/// The first `count` points of the rotated Halton sequence in `[0,1)^dim`.
///
/// The sequence is prefix-nested: the first `n` points are identical for
/// every `count ≥ n`. The rotation offsets depend only on the dimension
/// index, never on `count` or any caller-supplied seed.
pub fn halton_points(dim: usize, count: usize) -> Vec<Point> {
    let primes = first_primes(dim);
    let mut state = ROTATION_SEED;
    let shifts: Vec<f64> = (0..dim)
        .map(|_| splitmix64(&mut state) as f64 / (u64::MAX as f64 + 1.0))
        .collect();
    (1..=count as u64)
        .map(|k| {
            DVector::from_iterator(
                dim,
                (0..dim).map(|i| {
                    let u = radical_inverse(k, primes[i]) + shifts[i];
                    u - u.floor()
                }),
            )
        })
        .collect()
}

/// Maps a unit-cube point into the closed unit ball: `v = 2u − 1`, radially
/// clamped to the sphere if it falls outside.
fn cube_to_ball(u: &Point) -> Point {
    let v = u.map(|x| 2.0 * x - 1.0);
    let norm = v.norm();
    if norm > 1.0 {
        v / norm
    } else {
        v
    }
}

/// A deterministic sample of the closed ball: its center, the `2d` axis
/// points at full radius, and `interior` rotated-Halton points mapped into
/// the ball.
///
/// A zero-radius ball yields the center once (the axis and interior points
/// would all coincide with it).
pub fn ball_points(ball: &Ball, interior: usize) -> Vec<Point> {
    let d = ball.dim();
    if ball.radius == 0.0 {
        return vec![ball.center.clone()];
    }
    let mut points = Vec::with_capacity(1 + 2 * d + interior);
    points.push(ball.center.clone());
    for i in 0..d {
        let mut axis = Point::zeros(d);
        axis[i] = ball.radius;
        points.push(&ball.center + &axis);
        points.push(&ball.center - &axis);
    }
    for u in halton_points(d, interior) {
        points.push(&ball.center + cube_to_ball(&u) * ball.radius);
    }
    points
}

/// Convenience wrapper producing the two standard sample sets of a ball.
#[derive(Debug, Clone)]
pub struct BallSampler {
    ball: Ball,
}

impl BallSampler {
    /// Creates a sampler for the given ball.
    pub fn new(ball: Ball) -> Self {
        Self { ball }
    }

    /// The ball being sampled.
    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    /// Sample used for measuring model errors
    /// ([`ERROR_SAMPLE_INTERIOR`] interior points).
    pub fn error_sample(&self) -> Vec<Point> {
        ball_points(&self.ball, ERROR_SAMPLE_INTERIOR)
    }

    /// Sample used for estimating suprema
    /// ([`BOUND_SAMPLE_INTERIOR`] interior points). Contains
    /// [`Self::error_sample`] as a prefix.
    pub fn bound_sample(&self) -> Vec<Point> {
        ball_points(&self.ball, BOUND_SAMPLE_INTERIOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_start_correctly() {
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(4, 2), 0.125);
    }

    #[test]
    fn halton_points_live_in_unit_cube() {
        for p in halton_points(3, 100) {
            for &x in p.iter() {
                assert!((0.0..1.0).contains(&x), "coordinate {x} outside [0,1)");
            }
        }
    }

    #[test]
    fn halton_is_prefix_nested() {
        let short = halton_points(2, 10);
        let long = halton_points(2, 50);
        assert_eq!(&long[..10], &short[..]);
    }

    #[test]
    fn halton_is_deterministic() {
        assert_eq!(halton_points(3, 20), halton_points(3, 20));
    }

    #[test]
    fn halton_covers_the_cube_evenly() {
        // Crude equidistribution check: the empirical mean of many points
        // should approach the cube center.
        let pts = halton_points(2, 512);
        let mean = pts.iter().fold(Point::zeros(2), |acc, p| acc + p) / 512.0;
        for &m in mean.iter() {
            assert!((m - 0.5).abs() < 0.05, "mean coordinate {m} far from 0.5");
        }
    }

    #[test]
    fn ball_points_stay_in_ball() {
        let ball = Ball::new(Point::from_vec(vec![1.0, -2.0]), 0.25).unwrap();
        for p in ball_points(&ball, 64) {
            let dist = (&p - &ball.center).norm();
            assert!(dist <= ball.radius * (1.0 + 1e-12), "distance {dist}");
        }
    }

    #[test]
    fn ball_points_include_center_and_axis_extremes() {
        let ball = Ball::new(Point::zeros(2), 0.5).unwrap();
        let pts = ball_points(&ball, 4);
        assert_eq!(pts[0], ball.center);
        assert_eq!(pts[1], Point::from_vec(vec![0.5, 0.0]));
        assert_eq!(pts[2], Point::from_vec(vec![-0.5, 0.0]));
        assert_eq!(pts[3], Point::from_vec(vec![0.0, 0.5]));
        assert_eq!(pts[4], Point::from_vec(vec![0.0, -0.5]));
        assert_eq!(pts.len(), 1 + 4 + 4);
    }

    #[test]
    fn zero_radius_ball_yields_center_only() {
        let ball = Ball::new(Point::zeros(3), 0.0).unwrap();
        assert_eq!(ball_points(&ball, 64), vec![Point::zeros(3)]);
    }

    #[test]
    fn bound_sample_extends_error_sample() {
        let sampler = BallSampler::new(Ball::new(Point::zeros(2), 1.0).unwrap());
        let short = sampler.error_sample();
        let long = sampler.bound_sample();
        assert_eq!(&long[..short.len()], &short[..]);
    }
}
