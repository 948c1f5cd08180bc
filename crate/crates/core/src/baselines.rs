//! Reference policies: direct transmission, constant power and the static
//! weight-ordered MAC partition.

use serde::{Deserialize, Serialize};

use crate::capacity::RatePair;
use crate::channel::NetworkCsi;
use crate::error::{Error, Result};
use crate::numerics::{dual_ascent, DualEvaluation};
use crate::policy::{Diagnostics, PolicyEvaluation, SolverConfig};
use crate::rates::{awgn_capacity, bc_max_rates, mac_corner_rates, three_phase_max_rates, DecodeOrder, PowerVector};
use crate::three_phase::{direct_power, initial_multipliers, price_rescale, refresh, PhiRelaxation};
use crate::two_phase::{optimize_two_phase_from, state_lagrangian, OrderRule, DELTA};

/// Relaying protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    ThreePhase,
    TwoPhase,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::ThreePhase => "three_phase",
            Protocol::TwoPhase => "two_phase",
        }
    }
}

/// Cap on `φ'` fixed-point passes for the constant-power two-phase policy.
const FIXED_PHI_PASSES: usize = 500;

fn check(samples: &[NetworkCsi], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::domain("samples", "empty sample set"));
    }
    Ok(())
}

/// Two-way exchange over the direct link only: each direction gets half the
/// frame and QoS water-filling on `γ3`; the relay stays off.
///
/// Residuals are reported against a zero relay budget, so `resid_PR` is the
/// (zero) relay power rather than `−1`.
pub fn direct_transmission_policy(samples: &[NetworkCsi], cfg: &SolverConfig) -> Result<PolicyEvaluation> {
    check(samples, cfg)?;
    let mut eff = *cfg;
    eff.budgets.r = 0.0;
    let budgets = [cfg.budgets.a, cfg.budgets.b];
    let init = initial_multipliers(cfg, DELTA);
    let mut phi = [1.0, 1.0];
    let mut powers = vec![PowerVector::zero(); samples.len()];
    let mut rates = vec![RatePair::default(); samples.len()];
    let (ba, bb) = (cfg.qos.beta_a(), cfg.qos.beta_b());
    let mut relax = PhiRelaxation::new();

    let outcome = dual_ascent(
        |lambda| {
            for (k, csi) in samples.iter().enumerate() {
                let g = csi.direct;
                let pa = direct_power(lambda[0], phi[0], cfg.weights.a, ba, g, 2.0);
                let pb = direct_power(lambda[1], phi[1], cfg.weights.b, bb, g, 2.0);
                powers[k] = PowerVector { a: pa, b: pb, r: 0.0 };
                rates[k] = RatePair::new(0.5 * awgn_capacity(g * pa), 0.5 * awgn_capacity(g * pb));
            }
            let used_phi = phi;
            let (value, mean, settled) =
                refresh(&mut phi, &mut relax, &rates, &powers, &eff, &[lambda[0], lambda[1], 0.0]);
            Ok(DualEvaluation {
                policy: used_phi,
                expected_power: vec![mean[0], mean[1]],
                dual_value: value,
                settled,
                rescale: Some(price_rescale(&phi, &used_phi)[..2].to_vec()),
            })
        },
        &init[..2],
        &budgets,
        &cfg.dual,
    )?;
    let lambda = [outcome.multipliers[0], outcome.multipliers[1], 0.0];
    PolicyEvaluation::from_policy(
        powers,
        rates,
        &eff,
        lambda,
        outcome.policy,
        outcome.converged,
        outcome.iterations,
        Diagnostics::default(),
    )
}

/// Every node transmits at its budget in every state; rates adapt.
///
/// Three-phase takes the maximal rate pair. Two-phase picks, per state, the
/// decoding order whose capped rates give the larger linearized utility,
/// with `φ'` iterated to a fixed point (relaxed like the optimizers).
pub fn fixed_power_policy(samples: &[NetworkCsi], cfg: &SolverConfig, protocol: Protocol) -> Result<PolicyEvaluation> {
    check(samples, cfg)?;
    let p = cfg.budgets;
    let powers = vec![p; samples.len()];
    match protocol {
        Protocol::ThreePhase => {
            let rates = samples.iter().map(|c| three_phase_max_rates(&p, c)).collect();
            PolicyEvaluation::from_policy(powers, rates, cfg, [0.0; 3], [1.0, 1.0], true, 1, Diagnostics::default())
        }
        Protocol::TwoPhase => {
            let mut phi = [1.0, 1.0];
            let mut relax = PhiRelaxation::new();
            let mut orders = vec![DecodeOrder::AFirst; samples.len()];
            let mut rates = vec![RatePair::default(); samples.len()];
            let mut converged = false;
            let mut passes = 0;
            while passes < FIXED_PHI_PASSES {
                passes += 1;
                for (k, csi) in samples.iter().enumerate() {
                    let a = state_lagrangian(csi, &p, DecodeOrder::AFirst, [0.0; 3], phi, &cfg.qos, &cfg.weights);
                    let b = state_lagrangian(csi, &p, DecodeOrder::BFirst, [0.0; 3], phi, &cfg.qos, &cfg.weights);
                    orders[k] = if b > a { DecodeOrder::BFirst } else { DecodeOrder::AFirst };
                    let corner = mac_corner_rates(&p, csi, orders[k]);
                    let caps = bc_max_rates(p.r, csi);
                    rates[k] = RatePair::new(corner.a.min(caps.a), corner.b.min(caps.b));
                }
                if refresh(&mut phi, &mut relax, &rates, &powers, cfg, &[0.0; 3]).2 {
                    converged = true;
                    break;
                }
            }
            let diagnostics = Diagnostics {
                decode_orders: Some(orders),
                ..Default::default()
            };
            PolicyEvaluation::from_policy(powers, rates, cfg, [0.0; 3], phi, converged, passes, diagnostics)
        }
    }
}

/// Static order used by the weight-based partition: the source with the
/// smaller weight is decoded first, `A` first on a tie.
pub fn weight_based_order(cfg: &SolverConfig) -> DecodeOrder {
    if cfg.weights.b < cfg.weights.a {
        DecodeOrder::BFirst
    } else {
        DecodeOrder::AFirst
    }
}

/// The two-phase optimizer with the decoding order frozen by the weights.
pub fn weight_based_partition_policy(samples: &[NetworkCsi], cfg: &SolverConfig) -> Result<PolicyEvaluation> {
    check(samples, cfg)?;
    optimize_two_phase_from(samples, cfg, OrderRule::Fixed(weight_based_order(cfg)), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{QosPair, Weights};
    use crate::channel::{sample_csi, FadingSpec};
    use crate::three_phase::optimize_three_phase;
    use crate::two_phase::optimize_two_phase;

    fn cfg(budgets: [f64; 3], weights: (f64, f64), theta: f64) -> SolverConfig {
        SolverConfig::new(
            PowerVector::new(budgets[0], budgets[1], budgets[2]).unwrap(),
            Weights::new(weights.0, weights.1).unwrap(),
            QosPair::symmetric(theta).unwrap(),
        )
    }

    fn reference_samples(n: usize) -> Vec<NetworkCsi> {
        sample_csi(&FadingSpec::new(1.0, 4.0).unwrap(), n, 1).unwrap()
    }

    #[test]
    fn direct_single_sample_matches_budget_solve() {
        let c = cfg([2.0, 0.5, 1.0], (0.6, 0.4), 1.0);
        let csi = NetworkCsi::new(0.3, 0.4, 0.8).unwrap();
        let out = direct_transmission_policy(&[csi], &c).unwrap();
        assert!(out.converged);
        let p = out.powers[0];
        assert!((p.a - 2.0).abs() < 1e-4 && (p.b - 0.5).abs() < 1e-4 && p.r == 0.0);
        // direct_power(λ) = P̄ inverted by hand: δλφ/ω = (P̄ + 1/γ)^{−(β+2)/2}·γ^{−β/2}
        let beta = 1.0 / std::f64::consts::LN_2;
        for (lambda, budget, w, phi) in [(out.multipliers[0], 2.0, 0.6, out.phi[0]), (out.multipliers[1], 0.5, 0.4, out.phi[1])] {
            let level: f64 = budget + 1.0 / 0.8;
            let price = (level.ln() * -(beta + 2.0) / 2.0 + 0.8f64.ln() * -beta / 2.0).exp();
            let analytic = price * w / (DELTA * phi);
            assert!((lambda - analytic).abs() <= 1e-4 * analytic, "{lambda} vs {analytic}");
        }
        let expected = 0.6 * 0.5 * awgn_capacity(0.8 * 2.0) + 0.4 * 0.5 * awgn_capacity(0.8 * 0.5);
        assert!((out.objective - expected).abs() < 1e-4);
    }

    #[test]
    fn direct_ignores_relay_links() {
        let c = cfg([7.94, 7.94, 3.98], (0.6, 0.4), 1.0);
        let samples = reference_samples(500);
        let moved: Vec<NetworkCsi> = samples
            .iter()
            .enumerate()
            .map(|(k, s)| NetworkCsi::new(s.a_relay * (1.0 + k as f64), 0.01 + s.b_relay * 3.0, s.direct).unwrap())
            .collect();
        let x = direct_transmission_policy(&samples, &c).unwrap();
        let y = direct_transmission_policy(&moved, &c).unwrap();
        assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
    }

    #[test]
    fn direct_water_filling_limit() {
        let c = cfg([3.0, 3.0, 0.0], (0.5, 0.5), 1e-7);
        let samples = reference_samples(400);
        let out = direct_transmission_policy(&samples, &c).unwrap();
        assert!(out.converged);
        // classic water-filling: P = [ω/(δλ) − 1/γ]⁺
        for (s, p) in samples.iter().zip(&out.powers).take(50) {
            let wf = (0.5 / (DELTA * out.multipliers[0]) - 1.0 / s.direct).max(0.0);
            assert!((p.a - wf).abs() < 1e-3, "{} vs {wf}", p.a);
        }
    }

    #[test]
    fn fixed_power_zero_budgets() {
        let c = cfg([0.0, 0.0, 0.0], (0.6, 0.4), 1.0);
        let samples = reference_samples(50);
        for proto in [Protocol::ThreePhase, Protocol::TwoPhase] {
            let out = fixed_power_policy(&samples, &c, proto).unwrap();
            assert_eq!(out.objective, 0.0);
            assert_eq!(out.residuals, [0.0; 3]);
        }
    }

    #[test]
    fn fixed_power_rates_feasible() {
        let c = cfg([7.94, 7.94, 3.98], (0.6, 0.4), 1.0);
        let samples = reference_samples(300);
        let out = fixed_power_policy(&samples, &c, Protocol::TwoPhase).unwrap();
        assert!(out.converged);
        for (s, r) in samples.iter().zip(&out.rates) {
            assert!(crate::rates::two_phase_region_contains(r, &c.budgets, s, 1e-9));
        }
        assert!(out.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn weight_order_mapping() {
        assert_eq!(weight_based_order(&cfg([1.0; 3], (0.6, 0.4), 1.0)), DecodeOrder::BFirst);
        assert_eq!(weight_based_order(&cfg([1.0; 3], (0.3, 0.7), 1.0)), DecodeOrder::AFirst);
        assert_eq!(weight_based_order(&cfg([1.0; 3], (0.5, 0.5), 1.0)), DecodeOrder::AFirst);
    }

    #[test]
    fn dominance_on_shared_samples() {
        let c = cfg([7.94, 7.94, 3.98], (0.6, 0.4), 1.0);
        let samples = reference_samples(2000);
        let three = optimize_three_phase(&samples, &c).unwrap();
        let two = optimize_two_phase(&samples, &c).unwrap();
        let direct = direct_transmission_policy(&samples, &c).unwrap();
        let fixed3 = fixed_power_policy(&samples, &c, Protocol::ThreePhase).unwrap();
        let fixed2 = fixed_power_policy(&samples, &c, Protocol::TwoPhase).unwrap();
        let weight = weight_based_partition_policy(&samples, &c).unwrap();
        assert!(three.objective > fixed3.objective);
        assert!(two.objective > fixed2.objective);
        assert!(two.objective >= weight.objective - 1e-6);
        assert!(direct.objective < three.objective && direct.objective < two.objective);
        assert!(weight.diagnostics.notes.iter().any(|n| n.contains("R2'")));
    }
}
