//! Effective capacity and the statistical delay-QoS tail formulas.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-direction QoS exponents in 1/bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosPair {
    pub theta_a: f64,
    pub theta_b: f64,
}

impl QosPair {
    pub fn new(theta_a: f64, theta_b: f64) -> Result<Self> {
        for (field, v) in [("theta_a", theta_a), ("theta_b", theta_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(field, format!("{v} must be positive and finite")));
            }
        }
        Ok(QosPair { theta_a, theta_b })
    }

    pub fn symmetric(theta: f64) -> Result<Self> {
        Self::new(theta, theta)
    }

    /// `βA = θA / ln 2`.
    pub fn beta_a(&self) -> f64 {
        self.theta_a / LN_2
    }

    /// `βB = θB / ln 2`.
    pub fn beta_b(&self) -> f64 {
        self.theta_b / LN_2
    }

    pub fn swapped(&self) -> Self {
        QosPair {
            theta_a: self.theta_b,
            theta_b: self.theta_a,
        }
    }
}

/// Objective weights `(ωA, ωB)` with `ωA + ωB = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub a: f64,
    pub b: f64,
}

impl Weights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::domain("weights", format!("({a}, {b}) must be nonnegative")));
        }
        if ((a + b) - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::domain("weights", format!("{a} + {b} does not sum to 1")));
        }
        Ok(Weights { a, b })
    }

    /// Weights `(ωA, 1 − ωA)`.
    pub fn from_a(a: f64) -> Result<Self> {
        Self::new(a, 1.0 - a)
    }

    pub fn swapped(&self) -> Self {
        Weights { a: self.b, b: self.a }
    }
}

/// Bidirectional rates in bits per channel use, time fraction included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub a: f64,
    pub b: f64,
}

impl RatePair {
    pub fn new(a: f64, b: f64) -> Self {
        RatePair { a, b }
    }

    pub fn swapped(&self) -> Self {
        RatePair { a: self.b, b: self.a }
    }
}

/// Neumaier-compensated sum, so reductions do not depend on summation order
/// beyond the last few ulps.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean of `e^{-θR}`.
pub fn mean_exp_neg(rates: &[f64], theta: f64) -> f64 {
    if rates.is_empty() {
        return f64::NAN;
    }
    compensated_sum(rates.iter().map(|r| (-theta * r).exp())) / rates.len() as f64
}

/// `−(1/θ)·ln E[e^{−θR}]` over an i.i.d. rate sample.
///
/// The expectation is shifted by the minimum rate before exponentiating, and
/// the logarithm of the shifted mean is taken through `ln_1p(mean(expm1))` so
/// small `θ` keeps full relative accuracy.
pub fn effective_capacity(rates: &[f64], theta: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::domain("rates", "empty rate sequence"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain("theta", format!("{theta} must be positive and finite")));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::domain("rates", format!("rate {bad} is not a finite nonnegative value")));
    }
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = compensated_sum(rates.iter().map(|r| (-theta * (r - min)).exp_m1()));
    let mean_m1 = shifted / rates.len() as f64;
    let ec = min - mean_m1.ln_1p() / theta;
    // Guard the bound against rounding in the last place.
    let mean = compensated_sum(rates.iter().copied()) / rates.len() as f64;
    Ok(ec.min(mean).max(min))
}

/// `ωA·EC(RA, θA) + ωB·EC(RB, θB)` over aligned samples.
pub fn weighted_sum_objective(
    rates_a: &[f64],
    rates_b: &[f64],
    qos: &QosPair,
    weights: &Weights,
) -> Result<f64> {
    Weights::new(weights.a, weights.b)?;
    if rates_a.len() != rates_b.len() {
        return Err(Error::domain(
            "rates",
            format!("misaligned sequences of length {} and {}", rates_a.len(), rates_b.len()),
        ));
    }
    Ok(weights.a * effective_capacity(rates_a, qos.theta_a)?
        + weights.b * effective_capacity(rates_b, qos.theta_b)?)
}

/// Steady-state probability that the queue exceeds `q_th`, `e^{−θ q_th}`.
pub fn queue_violation_prob(theta: f64, q_th: f64) -> f64 {
    (-theta * q_th).exp()
}

/// Probability that the delay exceeds `d_th` given the arrival effective
/// bandwidth `φ(θ)`, `e^{−θ φ(θ) d_th}`.
pub fn delay_violation_prob(theta: f64, effective_bandwidth: f64, d_th: f64) -> f64 {
    (-theta * effective_bandwidth * d_th).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_and_zero_service() {
        assert!((effective_capacity(&[2.0; 10], 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(effective_capacity(&[0.0; 4], 3.0).unwrap(), 0.0);
        assert!(effective_capacity(&[], 1.0).is_err());
        assert!(effective_capacity(&[1.0], 0.0).is_err());
        assert!(effective_capacity(&[-1.0], 1.0).is_err());
    }

    #[test]
    fn two_point_distribution() {
        let ec = effective_capacity(&[0.0, 2.0], 1.0).unwrap();
        // hand value −ln(0.5·(1 + e^{−2}))
        assert!((ec - 0.566_219_169_516_972_7).abs() < 1e-12, "{ec}");
        // Monte Carlo cross-check with a deterministic alternating stream
        let big: Vec<f64> = (0..1_000_000).map(|k| if k % 2 == 0 { 0.0 } else { 2.0 }).collect();
        assert!((effective_capacity(&big, 1.0).unwrap() - ec).abs() < 1e-9);
    }

    #[test]
    fn no_underflow_at_large_theta_rate() {
        let ec = effective_capacity(&[1e4, 1e4 + 1.0], 1.0).unwrap();
        assert!(ec.is_finite());
        assert!((ec - (1e4 - (0.5 * (1.0 + (-1.0f64).exp())).ln())).abs() < 1e-9);
    }

    #[test]
    fn weighted_objective_reductions() {
        let ra = [0.5, 1.0, 2.0];
        let rb = [0.1, 0.2, 3.0];
        let q = QosPair::new(1.0, 2.0).unwrap();
        let w = Weights::new(1.0, 0.0).unwrap();
        assert_eq!(
            weighted_sum_objective(&ra, &rb, &q, &w).unwrap(),
            effective_capacity(&ra, 1.0).unwrap()
        );
        let q = QosPair::symmetric(0.7).unwrap();
        let w = Weights::new(0.5, 0.5).unwrap();
        let v = weighted_sum_objective(&ra, &ra, &q, &w).unwrap();
        assert!((v - effective_capacity(&ra, 0.7).unwrap()).abs() < 1e-15);
        assert!(Weights::new(0.7, 0.2).is_err());
        let bad = Weights { a: 0.7, b: 0.2 };
        assert!(weighted_sum_objective(&ra, &rb, &q, &bad).is_err());
        assert!(weighted_sum_objective(&ra, &rb[..2], &q, &w).is_err());
    }

    #[test]
    fn violation_probabilities() {
        assert_eq!(queue_violation_prob(3.0, 0.0), 1.0);
        assert!((queue_violation_prob(1.0, 100f64.ln()) - 0.01).abs() < 1e-15);
        let mut prev = 1.0;
        for theta in [0.1, 1.0, 10.0, 100.0] {
            let p = queue_violation_prob(theta, 0.5);
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 1e-20);
        assert_eq!(delay_violation_prob(2.0, 3.0, 0.0), 1.0);
        assert!((delay_violation_prob(0.5, 2.0, 10f64.ln()) - 0.1).abs() < 1e-15);
        assert_eq!(delay_violation_prob(0.8, 1.0, 2.0), queue_violation_prob(0.8, 2.0));
    }

    #[test]
    fn beta_matches_theta() {
        let q = QosPair::new(1.0, 100.0).unwrap();
        assert!((q.beta_a() * LN_2 - 1.0).abs() < 1e-15);
        assert!((q.beta_b() * LN_2 - 100.0).abs() < 1e-13);
    }

    fn rate_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, 1..64)
    }

    proptest! {
        #[test]
        fn jensen_bound(rates in rate_vec(), theta in 1e-6f64..50.0) {
            let ec = effective_capacity(&rates, theta).unwrap();
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            prop_assert!(ec <= mean + 1e-12);
        }

        #[test]
        fn nonincreasing_in_theta(rates in rate_vec()) {
            let mut prev = f64::INFINITY;
            for theta in [1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
                let ec = effective_capacity(&rates, theta).unwrap();
                prop_assert!(ec <= prev + 1e-12);
                prev = ec;
            }
        }

        #[test]
        fn small_theta_limit(rates in rate_vec(), theta in 1e-8f64..1e-4) {
            let n = rates.len() as f64;
            let mean = rates.iter().sum::<f64>() / n;
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
            let ec = effective_capacity(&rates, theta).unwrap();
            prop_assert!((ec - mean).abs() <= theta * var + 1e-12);
        }

        #[test]
        fn large_theta_limit(rates in prop::collection::vec(0.5f64..5.0, 1..32)) {
            let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
            let ec = effective_capacity(&rates, 1e3).unwrap();
            prop_assert!((ec - min).abs() <= 0.01 * min);
        }

        #[test]
        fn partition_independent(rates in rate_vec(), theta in 0.01f64..10.0) {
            let mut rev = rates.clone();
            rev.reverse();
            let a = effective_capacity(&rates, theta).unwrap();
            let b = effective_capacity(&rev, theta).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }
}
