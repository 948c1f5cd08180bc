//! Optimal power and rate adaptation for three-phase two-way relaying.
//!
//! Each slot carries one transmission: `A → R`, `B → R`, then a
//! network-coded broadcast from `R`. The region allocators `alloc_r1` to
//! `alloc_r4` keep every relayed direction at a balanced decode-and-forward
//! bottleneck, which ties the relay power to the source powers.
//! [`allocate_exact`] drops that tie and solves the per-state problem over
//! all three powers; it is what the optimizer uses by default.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::capacity::{mean_exp_neg, QosPair, RatePair, Weights};
use crate::channel::{classify_three_phase_region, NetworkCsi, ThreePhaseRegion};
use crate::error::{Error, Result};
use crate::numerics::{best_candidate, bisect_root, dual_ascent, stationary_then_bisect, DualEvaluation, RootSearchConfig};
use crate::policy::{linear_utility, mean_powers, Diagnostics, PolicyEvaluation, SolverConfig};
use crate::rates::{awgn_capacity, three_phase_max_rates, PowerVector};

/// `σ = 3 ln 2`.
pub const SIGMA: f64 = 3.0 * LN_2;

/// Multipliers are floored here inside closed forms so a zero price yields a
/// large finite power instead of infinity.
pub(crate) const LAMBDA_MIN: f64 = 1e-300;

/// Relative convergence threshold on the `φ` estimates.
pub const PHI_TOLERANCE: f64 = 1e-6;

/// Whether the sample averages `raw` reproduce the `φ` a pass used, within
/// [`PHI_TOLERANCE`] relative. `φ` spans many decades across `θ`.
pub(crate) fn phi_settled(raw: &[f64; 2], used: &[f64; 2]) -> bool {
    (0..2).all(|i| (raw[i] - used[i]).abs() <= PHI_TOLERANCE * used[i])
}

/// Multiplier factors `φ_used/φ_new` that keep the price `λ·φ` fixed across
/// a `φ` refresh; the relay takes the geometric mean. Allocations depend on
/// `λ` and `φ` through that product, so `φ` then relaxes on its own while
/// the subgradient only answers the power residual.
pub(crate) fn price_rescale(new: &[f64; 2], used: &[f64; 2]) -> Vec<f64> {
    let a = used[0] / new[0];
    let b = used[1] / new[1];
    vec![a, b, (a * b).sqrt()]
}

/// Relaxation of `φ` toward the sample average `φ̂` of a pass, taken in
/// `ln φ`: `φ ← φ·(φ̂/φ)^β`.
///
/// `β` starts at 1/2 (a geometric-mean damping), grows while successive
/// moves keep their direction and halves on a reversal. At large `θ` the
/// map `φ → φ̂` has slope close to one in `ln φ` and a fixed step crawls
/// across several decades.
#[derive(Debug, Clone)]
pub(crate) struct PhiRelaxation {
    step: [f64; 2],
    direction: [f64; 2],
}

impl PhiRelaxation {
    const INITIAL: f64 = 0.5;
    const GROW: f64 = 1.5;
    const SHRINK: f64 = 0.5;
    const MAX: f64 = 16.0;
    const MIN: f64 = 0.05;

    pub(crate) fn new() -> Self {
        Self {
            step: [Self::INITIAL; 2],
            direction: [0.0; 2],
        }
    }

    /// Moves `phi` toward `raw` and reports whether `raw` already matched it.
    pub(crate) fn update(&mut self, phi: &mut [f64; 2], raw: &[f64; 2]) -> bool {
        let settled = phi_settled(raw, phi);
        for i in 0..2 {
            if !(raw[i] > 0.0 && raw[i].is_finite() && phi[i] > 0.0) {
                phi[i] = Self::INITIAL * phi[i] + (1.0 - Self::INITIAL) * raw[i];
                continue;
            }
            let gap = (raw[i] / phi[i]).ln();
            let direction = gap.signum();
            if gap != 0.0 && self.direction[i] != 0.0 {
                self.step[i] = if direction == self.direction[i] {
                    (self.step[i] * Self::GROW).min(Self::MAX)
                } else {
                    (self.step[i] * Self::SHRINK).max(Self::MIN)
                };
            }
            if gap != 0.0 {
                self.direction[i] = direction;
            }
            phi[i] *= (self.step[i] * gap).exp();
        }
        settled
    }
}

/// Dual variables of the three-phase problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePhaseDuals {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_r: f64,
    /// `E[e^{−θA·RA}]`.
    pub phi_1: f64,
    /// `E[e^{−θB·RB}]`.
    pub phi_2: f64,
}

impl ThreePhaseDuals {
    pub fn new(lambda: [f64; 3], phi: [f64; 2]) -> Result<Self> {
        for (field, v) in [("lambda_a", lambda[0]), ("lambda_b", lambda[1]), ("lambda_r", lambda[2])] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(field, format!("{v} must be finite and >= 0")));
            }
        }
        for (field, v) in [("phi_1", phi[0]), ("phi_2", phi[1])] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::domain(field, format!("{v} is outside (0, 1]")));
            }
        }
        Ok(ThreePhaseDuals {
            lambda_a: lambda[0],
            lambda_b: lambda[1],
            lambda_r: lambda[2],
            phi_1: phi[0],
            phi_2: phi[1],
        })
    }

    pub fn swapped(&self) -> Self {
        ThreePhaseDuals {
            lambda_a: self.lambda_b,
            lambda_b: self.lambda_a,
            lambda_r: self.lambda_r,
            phi_1: self.phi_2,
            phi_2: self.phi_1,
        }
    }
}

/// QoS water-filling over a single link with `slots` equal time slots.
///
/// `[(s λ φ/ω)^{−m/(β+m)} · γ^{−β/(β+m)} − 1/γ]⁺` with `m = slots` and
/// `s = m ln 2`.
pub fn direct_power(lambda: f64, phi: f64, weight: f64, beta: f64, gain: f64, slots: f64) -> f64 {
    if !(gain > 0.0) || !(weight > 0.0) {
        return 0.0;
    }
    let price = slots * LN_2 * lambda.max(LAMBDA_MIN) * phi / weight;
    let level = (-(slots / (beta + slots)) * price.ln() - (beta / (beta + slots)) * gain.ln()).exp();
    (level - 1.0 / gain).max(0.0)
}

/// Both sources use the direct link; the relay stays silent.
pub fn alloc_r1(csi: &NetworkCsi, duals: &ThreePhaseDuals, qos: &QosPair, weights: &Weights) -> PowerVector {
    PowerVector {
        a: direct_power(duals.lambda_a, duals.phi_1, weights.a, qos.beta_a(), csi.direct, 3.0),
        b: direct_power(duals.lambda_b, duals.phi_2, weights.b, qos.beta_b(), csi.direct, 3.0),
        r: 0.0,
    }
}

/// The weighted ergodic-capacity limit of [`alloc_r1`]: plain water-filling.
pub fn ergodic_alloc_r1(csi: &NetworkCsi, duals: &ThreePhaseDuals, weights: &Weights) -> PowerVector {
    let fill = |w: f64, l: f64| {
        if csi.direct > 0.0 {
            (w / (SIGMA * l.max(LAMBDA_MIN)) - 1.0 / csi.direct).max(0.0)
        } else {
            0.0
        }
    };
    PowerVector {
        a: fill(weights.a, duals.lambda_a),
        b: fill(weights.b, duals.lambda_b),
        r: 0.0,
    }
}

/// Relay power that balances `A`'s bottleneck, `C(γ1PA) = C(γ3PA) + C(γ2PR)`.
pub fn relay_tie_a(csi: &NetworkCsi, pa: f64) -> f64 {
    if pa <= 0.0 || csi.a_relay <= csi.direct {
        return 0.0;
    }
    (csi.a_relay - csi.direct) * pa / (csi.b_relay * (1.0 + csi.direct * pa))
}

/// Relay power that balances `B`'s bottleneck.
pub fn relay_tie_b(csi: &NetworkCsi, pb: f64) -> f64 {
    relay_tie_a(&csi.swapped(), pb)
}

/// `τ = γ1(γ1 − γ3) / (γ2(γ2 − γ3))`.
pub fn tau(csi: &NetworkCsi) -> f64 {
    csi.a_relay * (csi.a_relay - csi.direct) / (csi.b_relay * (csi.b_relay - csi.direct))
}

/// Left side of the stationarity condition for `PA` when only `A` is relayed.
pub fn relay_a_stationarity(csi: &NetworkCsi, duals: &ThreePhaseDuals, qos: &QosPair, weights: &Weights, pa: f64) -> f64 {
    let (g1, g2, g3) = (csi.a_relay, csi.b_relay, csi.direct);
    let k = (qos.beta_a() + 3.0) / 3.0;
    weights.a * g1 / (SIGMA * duals.phi_1) * (1.0 + g1 * pa).powf(-k)
        - duals.lambda_r * (g1 - g3) / (g2 * (1.0 + g3 * pa).powi(2))
        - duals.lambda_a
}

/// Left side of the stationarity condition for `PA` when both flows are
/// relayed and `τ <= 1`.
pub fn both_relayed_pa_stationarity(csi: &NetworkCsi, duals: &ThreePhaseDuals, qos: &QosPair, weights: &Weights, pa: f64) -> f64 {
    let (pos, neg) = both_relayed_pa_parts(csi, duals, qos, weights, pa);
    pos - neg
}

/// Positive and negative parts of [`both_relayed_pa_stationarity`]; the positive part decreases in `PA`.
fn both_relayed_pa_parts(csi: &NetworkCsi, duals: &ThreePhaseDuals, qos: &QosPair, weights: &Weights, pa: f64) -> (f64, f64) {
    let (g1, g2, g3) = (csi.a_relay, csi.b_relay, csi.direct);
    let t = tau(csi);
    let ka = (qos.beta_a() + 3.0) / 3.0;
    let kb = (qos.beta_b() + 3.0) / 3.0;
    let d = 1.0 + (1.0 - t) * g3 * pa;
    let pos = weights.a * g1 / (SIGMA * duals.phi_1) * (1.0 + g1 * pa).powf(-ka)
        + t * weights.b * g2 / (SIGMA * duals.phi_2 * d * d) * (1.0 + t * g2 * pa / d).powf(-kb);
    let neg = duals.lambda_r * (g1 - g3) / (g2 * (1.0 + g3 * pa).powi(2)) + t * duals.lambda_b / (d * d) + duals.lambda_a;
    (pos, neg)
}

/// Left side of the stationarity condition for `PB` when both flows are
/// relayed and `τ > 1`.
pub fn both_relayed_pb_stationarity(csi: &NetworkCsi, duals: &ThreePhaseDuals, qos: &QosPair, weights: &Weights, pb: f64) -> f64 {
    let (g1, g2, g3) = (csi.a_relay, csi.b_relay, csi.direct);
    let t = tau(csi);
    let ka = (qos.beta_a() + 3.0) / 3.0;
    let kb = (qos.beta_b() + 3.0) / 3.0;
    let e = t + (t - 1.0) * g3 * pb;
    weights.b * g2 / (SIGMA * duals.phi_2) * (1.0 + g2 * pb).powf(-kb)
        + t * weights.a * g1 / (SIGMA * duals.phi_1 * e * e) * (1.0 + g1 * pb / e).powf(-ka)
        - duals.lambda_r * (g2 - g3) / (g1 * (1.0 + g3 * pb).powi(2))
        - t * duals.lambda_a / (e * e)
        - duals.lambda_b
}

/// Per-state Lagrangian integrand at powers `p` with the rates of
/// [`three_phase_max_rates`].
pub fn per_state_lagrangian(
    csi: &NetworkCsi,
    p: &PowerVector,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
) -> f64 {
    let r = three_phase_max_rates(p, csi);
    linear_utility(weights.a, qos.theta_a, duals.phi_1, r.a) + linear_utility(weights.b, qos.theta_b, duals.phi_2, r.b)
        - duals.lambda_a * p.a
        - duals.lambda_b * p.b
        - duals.lambda_r * p.r
}

/// Allocation plus whether the stationarity search saw several roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateAllocation {
    pub power: PowerVector,
    pub region: ThreePhaseRegion,
    pub multiple_roots: bool,
}

/// Only `A` is relayed; `B` uses the direct link.
pub fn alloc_r2(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<PowerVector> {
    Ok(r2_inner(csi, duals, qos, weights, root)?.0)
}

fn r2_inner(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<(PowerVector, bool)> {
    let direct = alloc_r1(csi, duals, qos, weights);
    if csi.a_relay <= csi.direct || !(csi.b_relay > 0.0) {
        return Ok((direct, false));
    }
    let g1 = csi.a_relay;
    let k = (qos.beta_a() + 3.0) / 3.0;
    let lead = weights.a * g1 / (SIGMA * duals.phi_1);
    let lambda_a = duals.lambda_a.max(LAMBDA_MIN);
    if lead <= lambda_a {
        return Ok((PowerVector { a: 0.0, ..direct }, false));
    }
    // beyond this point the positive term alone is below λA
    let hi = (((lead / lambda_a).ln() / k).exp_m1() / g1) * (1.0 + 1e-9) + 1e-300;
    let scan = stationary_then_bisect(|p| relay_a_stationarity(csi, duals, qos, weights, p), 0.0, hi, root)?;
    let objective = |pa: f64| {
        let ra = awgn_capacity(g1 * pa) / 3.0;
        linear_utility(weights.a, qos.theta_a, duals.phi_1, ra) - duals.lambda_a * pa - duals.lambda_r * relay_tie_a(csi, pa)
    };
    let pa = best_candidate(std::iter::once(0.0).chain(scan.roots.iter().copied()), objective);
    Ok((
        PowerVector {
            a: pa,
            b: direct.b,
            r: relay_tie_a(csi, pa),
        },
        scan.multiple_roots(),
    ))
}

/// Only `B` is relayed; the mirror image of [`alloc_r2`].
pub fn alloc_r3(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<PowerVector> {
    Ok(r3_inner(csi, duals, qos, weights, root)?.0)
}

fn r3_inner(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<(PowerVector, bool)> {
    let (p, multiple) = r2_inner(&csi.swapped(), &duals.swapped(), &qos.swapped(), &weights.swapped(), root)?;
    Ok((p.swapped(), multiple))
}

/// Both flows are relayed.
pub fn alloc_r4(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<PowerVector> {
    Ok(r4_inner(csi, duals, qos, weights, root)?.0)
}

fn r4_inner(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<(PowerVector, bool)> {
    if csi.a_relay <= csi.direct || csi.b_relay <= csi.direct {
        return Err(Error::domain("csi", "both relay gains must exceed the direct gain"));
    }
    if tau(csi) > 1.0 {
        // τ > 1 is the τ < 1 problem with the roles of A and B exchanged
        let (p, multiple) = r4_tau_le1(&csi.swapped(), &duals.swapped(), &qos.swapped(), &weights.swapped(), root)?;
        return Ok((p.swapped(), multiple));
    }
    r4_tau_le1(csi, duals, qos, weights, root)
}

/// `PB` on the balanced curve as a function of `PA` when `τ <= 1`.
pub fn r4_pb_from_pa(csi: &NetworkCsi, pa: f64) -> f64 {
    let t = tau(csi);
    t * pa / (1.0 + (1.0 - t) * csi.direct * pa)
}

/// `PA` on the balanced curve as a function of `PB` when `τ > 1`.
pub fn r4_pa_from_pb(csi: &NetworkCsi, pb: f64) -> f64 {
    let t = tau(csi);
    pb / (t + (t - 1.0) * csi.direct * pb)
}

fn r4_tau_le1(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<(PowerVector, bool)> {
    let lambda_a = duals.lambda_a.max(LAMBDA_MIN);
    let (pos0, _) = both_relayed_pa_parts(csi, duals, qos, weights, 0.0);
    if pos0 <= lambda_a {
        return Ok((PowerVector::zero(), false));
    }
    let mut hi = 1.0;
    let mut expansions = 0;
    while both_relayed_pa_parts(csi, duals, qos, weights, hi).0 > lambda_a {
        hi *= 2.0;
        expansions += 1;
        if expansions > 2100 {
            return Err(Error::Bracket { lo: 0.0, hi, iterations: expansions });
        }
    }
    let scan = stationary_then_bisect(|p| both_relayed_pa_stationarity(csi, duals, qos, weights, p), 0.0, hi, root)?;
    let objective = |pa: f64| {
        let pb = r4_pb_from_pa(csi, pa);
        linear_utility(weights.a, qos.theta_a, duals.phi_1, awgn_capacity(csi.a_relay * pa) / 3.0)
            + linear_utility(weights.b, qos.theta_b, duals.phi_2, awgn_capacity(csi.b_relay * pb) / 3.0)
            - duals.lambda_a * pa
            - duals.lambda_b * pb
            - duals.lambda_r * relay_tie_a(csi, pa)
    };
    let pa = best_candidate(std::iter::once(0.0).chain(scan.roots.iter().copied()), objective);
    Ok((
        PowerVector {
            a: pa,
            b: r4_pb_from_pa(csi, pa),
            r: relay_tie_a(csi, pa),
        },
        scan.multiple_roots(),
    ))
}

/// Region dispatch for one state.
pub fn allocate(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<StateAllocation> {
    let region = classify_three_phase_region(csi);
    let (power, multiple_roots) = match region {
        ThreePhaseRegion::Direct => (alloc_r1(csi, duals, qos, weights), false),
        ThreePhaseRegion::RelayA => r2_inner(csi, duals, qos, weights, root)?,
        ThreePhaseRegion::RelayB => r3_inner(csi, duals, qos, weights, root)?,
        ThreePhaseRegion::RelayBoth => r4_inner(csi, duals, qos, weights, root)?,
    };
    Ok(StateAllocation {
        power,
        region,
        multiple_roots,
    })
}

/// Which per-state allocation the optimizer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThreePhaseRule {
    /// Per-state optimum over `(PA, PB, PR)`.
    #[default]
    Exact,
    /// Region allocators with both bottlenecks balanced.
    Balanced,
}

/// Best power of one source for a fixed relay power, and the derivative of
/// its optimal Lagrangian term in `PR`.
///
/// A relayed source earns `(1/3)·min{C(γs·p), C(γ3·p) + C(γd·PR)}`, which is
/// concave in `p`: the optimum is the unconstrained point of whichever piece
/// it falls in, or the kink where the pieces meet.
#[allow(clippy::too_many_arguments)]
fn source_given_relay(lambda: f64, phi: f64, weight: f64, beta: f64, g_src: f64, g_dst: f64, g3: f64, pr: f64) -> (f64, f64) {
    if g_src <= g3 {
        return (direct_power(lambda, phi, weight, beta, g3, 3.0), 0.0);
    }
    let lambda = lambda.max(LAMBDA_MIN);
    let d = g_src - g3;
    let den = d - g3 * g_dst * pr;
    let kink = if den > 0.0 { g_dst * pr / den } else { f64::INFINITY };
    let p_source = direct_power(lambda, phi, weight, beta, g_src, 3.0);
    if p_source <= kink {
        return (p_source, 0.0);
    }
    let relay_term = (-(beta / 3.0) * (g_dst * pr).ln_1p()).exp();
    let p_relay = direct_power(lambda / relay_term, phi, weight, beta, g3, 3.0);
    if p_relay >= kink {
        let discount = relay_term * (-(beta / 3.0) * (g3 * p_relay).ln_1p()).exp();
        return (p_relay, weight / (SIGMA * phi) * g_dst / (1.0 + g_dst * pr) * discount);
    }
    let discount = (-(beta / 3.0) * (g_src * kink).ln_1p()).exp();
    let marginal = weight / (SIGMA * phi) * g_src / (1.0 + g_src * kink) * discount - lambda;
    (kink, marginal * g_dst * d / (den * den))
}

/// Per-state optimum of the three-phase Lagrangian over all three powers.
///
/// For a fixed `PR` the sources decouple (see `source_given_relay`); the
/// optimal value is concave in `PR`, so `PR` is the root of its derivative.
pub fn allocate_exact(
    csi: &NetworkCsi,
    duals: &ThreePhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    root: &RootSearchConfig,
) -> Result<StateAllocation> {
    let region = classify_three_phase_region(csi);
    let at = |pr: f64| {
        let (pa, sa) = source_given_relay(
            duals.lambda_a,
            duals.phi_1,
            weights.a,
            qos.beta_a(),
            csi.a_relay,
            csi.b_relay,
            csi.direct,
            pr,
        );
        let (pb, sb) = source_given_relay(
            duals.lambda_b,
            duals.phi_2,
            weights.b,
            qos.beta_b(),
            csi.b_relay,
            csi.a_relay,
            csi.direct,
            pr,
        );
        (PowerVector { a: pa, b: pb, r: pr }, sa + sb)
    };
    let lambda_r = duals.lambda_r.max(LAMBDA_MIN);
    let slope = |pr: f64| at(pr).1 - lambda_r;
    let pr = if region == ThreePhaseRegion::Direct || slope(0.0) <= 0.0 {
        0.0
    } else {
        // each relayed term's slope is below ω/(σφ·PR)
        let hi = (weights.a / duals.phi_1 + weights.b / duals.phi_2) / (SIGMA * lambda_r);
        bisect_root(slope, 0.0, hi.max(1e-12), root)?
    };
    Ok(StateAllocation {
        power: at(pr).0,
        region,
        multiple_roots: false,
    })
}

/// Rates on the region's boundary: the balanced `min` form for relayed
/// directions, the direct-link capacity otherwise.
pub fn assign_rates(csi: &NetworkCsi, p: &PowerVector, region: ThreePhaseRegion) -> RatePair {
    let direct = |ps: f64| awgn_capacity(csi.direct * ps) / 3.0;
    let relayed = |ps: f64, g_src: f64, g_dst: f64| {
        awgn_capacity(g_src * ps).min(awgn_capacity(csi.direct * ps) + awgn_capacity(g_dst * p.r)) / 3.0
    };
    let (a_relayed, b_relayed) = match region {
        ThreePhaseRegion::Direct => (false, false),
        ThreePhaseRegion::RelayA => (true, false),
        ThreePhaseRegion::RelayB => (false, true),
        ThreePhaseRegion::RelayBoth => (true, true),
    };
    RatePair {
        a: if a_relayed { relayed(p.a, csi.a_relay, csi.b_relay) } else { direct(p.a) },
        b: if b_relayed { relayed(p.b, csi.b_relay, csi.a_relay) } else { direct(p.b) },
    }
}

/// Starting multipliers: the water-filling price that would spend each budget
/// on a unit-gain link.
pub(crate) fn initial_multipliers(cfg: &SolverConfig, price: f64) -> [f64; 3] {
    let b = cfg.budget_vec();
    [
        cfg.weights.a.max(0.05) / (price * (b[0] + 1.0)),
        cfg.weights.b.max(0.05) / (price * (b[1] + 1.0)),
        0.5 / (price * (b[2] + 1.0)),
    ]
}

/// Solves the sample-average three-phase problem by dual ascent on the power
/// prices with a relaxed `φ` refresh after every pass.
pub fn optimize_three_phase(samples: &[NetworkCsi], cfg: &SolverConfig) -> Result<PolicyEvaluation> {
    optimize_three_phase_from(samples, cfg, ThreePhaseRule::Exact, None)
}

/// [`optimize_three_phase`] with an explicit allocation rule, optionally
/// starting from given multipliers and `φ`.
pub fn optimize_three_phase_from(
    samples: &[NetworkCsi],
    cfg: &SolverConfig,
    rule: ThreePhaseRule,
    start: Option<([f64; 3], [f64; 2])>,
) -> Result<PolicyEvaluation> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::domain("samples", "empty sample set"));
    }
    let (init, mut phi) = start.unwrap_or((initial_multipliers(cfg, SIGMA), [1.0, 1.0]));
    let budgets = cfg.budget_vec();
    let mut powers = vec![PowerVector::zero(); samples.len()];
    let mut rates = vec![RatePair::default(); samples.len()];
    let mut multiple = 0usize;
    let mut relax = PhiRelaxation::new();

    let outcome = dual_ascent(
        |lambda| {
            let duals = ThreePhaseDuals {
                lambda_a: lambda[0],
                lambda_b: lambda[1],
                lambda_r: lambda[2],
                phi_1: phi[0],
                phi_2: phi[1],
            };
            multiple = 0;
            for (k, csi) in samples.iter().enumerate() {
                let alloc = match rule {
                    ThreePhaseRule::Exact => allocate_exact(csi, &duals, &cfg.qos, &cfg.weights, &cfg.root)?,
                    ThreePhaseRule::Balanced => allocate(csi, &duals, &cfg.qos, &cfg.weights, &cfg.root)?,
                };
                multiple += alloc.multiple_roots as usize;
                powers[k] = alloc.power;
                rates[k] = three_phase_max_rates(&alloc.power, csi);
            }
            let used_phi = phi;
            let (value, mean, settled) = refresh(&mut phi, &mut relax, &rates, &powers, cfg, lambda);
            Ok(DualEvaluation {
                policy: used_phi,
                expected_power: mean.to_vec(),
                dual_value: value,
                settled,
                rescale: Some(price_rescale(&phi, &used_phi)),
            })
        },
        &init,
        &budgets,
        &cfg.dual,
    )?;
    let lambda = [outcome.multipliers[0], outcome.multipliers[1], outcome.multipliers[2]];
    let diagnostics = Diagnostics {
        multiple_roots: multiple,
        ..Default::default()
    };
    PolicyEvaluation::from_policy(
        powers,
        rates,
        cfg,
        lambda,
        outcome.policy,
        outcome.converged,
        outcome.iterations,
        diagnostics,
    )
}

/// Relaxes `φ` (see [`PhiRelaxation`]); returns the dual value and mean
/// powers of the pass, and whether `φ` had settled.
pub(crate) fn refresh(
    phi: &mut [f64; 2],
    relax: &mut PhiRelaxation,
    rates: &[RatePair],
    powers: &[PowerVector],
    cfg: &SolverConfig,
    lambda: &[f64],
) -> (f64, [f64; 3], bool) {
    let ra: Vec<f64> = rates.iter().map(|r| r.a).collect();
    let rb: Vec<f64> = rates.iter().map(|r| r.b).collect();
    let raw = [mean_exp_neg(&ra, cfg.qos.theta_a), mean_exp_neg(&rb, cfg.qos.theta_b)];
    let objective = -cfg.weights.a * raw[0].ln() / cfg.qos.theta_a - cfg.weights.b * raw[1].ln() / cfg.qos.theta_b;
    let settled = relax.update(phi, &raw);
    let mean = mean_powers(powers);
    let budgets = cfg.budget_vec();
    let penalty: f64 = (0..3).map(|i| lambda[i] * (budgets[i] - mean[i])).sum();
    (objective + penalty, mean, settled)
}
