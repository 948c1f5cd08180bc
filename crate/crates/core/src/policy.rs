//! Solver settings shared by the optimizers and the policy they return.

use serde::{Deserialize, Serialize};

use crate::capacity::{effective_capacity, QosPair, RatePair, Weights};
use crate::error::Result;
use crate::numerics::{RootMethod, RootSearchConfig, SubgradientConfig};
use crate::rates::{DecodeOrder, PowerVector};

/// Everything an optimizer needs besides the channel samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Long-term average power budgets, linear.
    pub budgets: PowerVector,
    pub weights: Weights,
    pub qos: QosPair,
    pub root: RootSearchConfig,
    pub dual: SubgradientConfig,
}

impl SolverConfig {
    pub fn new(budgets: PowerVector, weights: Weights, qos: QosPair) -> Self {
        SolverConfig {
            budgets,
            weights,
            qos,
            root: RootSearchConfig::default().with_method(RootMethod::Illinois),
            dual: SubgradientConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        PowerVector::new(self.budgets.a, self.budgets.b, self.budgets.r)?;
        Weights::new(self.weights.a, self.weights.b)?;
        QosPair::new(self.qos.theta_a, self.qos.theta_b)?;
        self.root.validate()?;
        self.dual.validate()
    }

    pub fn budget_vec(&self) -> [f64; 3] {
        [self.budgets.a, self.budgets.b, self.budgets.r]
    }
}

/// Side information collected while solving.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Per-state searches on the final pass that found more than one root.
    pub multiple_roots: usize,
    /// Samples whose marginal utility `ω/φ' − μ` was nonpositive on the final
    /// pass, forcing that source silent.
    pub blocked_directions: usize,
    /// Decode order per sample (two-phase schemes only).
    pub decode_orders: Option<Vec<DecodeOrder>>,
    /// Final `(μA, μB)` per sample (two-phase schemes only).
    pub mu: Option<Vec<(f64, f64)>>,
    /// Free-form run notes, e.g. the static decode-order mapping.
    pub notes: Vec<String>,
}

/// Per-sample policy plus the summary numbers reported for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub powers: Vec<PowerVector>,
    pub rates: Vec<RatePair>,
    /// Final `(λA, λB, λR)`.
    pub multipliers: [f64; 3],
    /// Final expectation estimates `(φ1, φ2)` used by the allocation.
    pub phi: [f64; 2],
    pub objective: f64,
    pub ec_a: f64,
    pub ec_b: f64,
    /// `(E[Pi] − P̄i)/P̄i`, or `E[Pi]` for a zero budget.
    pub residuals: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

impl PolicyEvaluation {
    /// Builds the summary for a finished per-sample policy.
    pub fn from_policy(
        powers: Vec<PowerVector>,
        rates: Vec<RatePair>,
        cfg: &SolverConfig,
        multipliers: [f64; 3],
        phi: [f64; 2],
        converged: bool,
        iterations: usize,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let ra: Vec<f64> = rates.iter().map(|r| r.a).collect();
        let rb: Vec<f64> = rates.iter().map(|r| r.b).collect();
        let ec_a = effective_capacity(&ra, cfg.qos.theta_a)?;
        let ec_b = effective_capacity(&rb, cfg.qos.theta_b)?;
        let mean = mean_powers(&powers);
        let residuals = relative_residuals(&mean, &cfg.budget_vec());
        Ok(PolicyEvaluation {
            powers,
            rates,
            multipliers,
            phi,
            objective: cfg.weights.a * ec_a + cfg.weights.b * ec_b,
            ec_a,
            ec_b,
            residuals,
            converged,
            iterations,
            diagnostics,
        })
    }

    pub fn mean_powers(&self) -> [f64; 3] {
        mean_powers(&self.powers)
    }
}

pub(crate) fn mean_powers(powers: &[PowerVector]) -> [f64; 3] {
    use crate::capacity::compensated_sum;
    let n = powers.len().max(1) as f64;
    [
        compensated_sum(powers.iter().map(|p| p.a)) / n,
        compensated_sum(powers.iter().map(|p| p.b)) / n,
        compensated_sum(powers.iter().map(|p| p.r)) / n,
    ]
}

pub(crate) fn relative_residuals(mean: &[f64; 3], budgets: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = if budgets[i] > 0.0 { (mean[i] - budgets[i]) / budgets[i] } else { mean[i] };
    }
    out
}

/// Linearized per-state utility `ω/(θφ)·(1 − e^{−θR})`.
#[inline]
pub fn linear_utility(weight: f64, theta: f64, phi: f64, rate: f64) -> f64 {
    -weight / (theta * phi) * (-theta * rate).exp_m1()
}
