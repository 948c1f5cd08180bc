//! Optimal power and rate adaptation for two-phase two-way relaying.
//!
//! Both sources transmit at once in the MAC phase and the relay decodes them
//! successively; the relay then broadcasts the network-coded message. The
//! broadcast caps are per-state constraints carried by per-sample multipliers
//! `μ`, while average power budgets are priced by global multipliers `λ`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::capacity::{mean_exp_neg, QosPair, RatePair, Weights};
use crate::channel::NetworkCsi;
use crate::error::{Error, Result};
use crate::numerics::{best_candidate, bisect_root, dual_ascent, stationary_then_bisect, DualEvaluation, RootSearchConfig};
use crate::policy::{linear_utility, mean_powers, Diagnostics, PolicyEvaluation, SolverConfig};
use crate::rates::{awgn_capacity, bc_max_rates, mac_corner_rates, DecodeOrder, PowerVector};
use crate::three_phase::{initial_multipliers, price_rescale, PhiRelaxation, LAMBDA_MIN};

/// `δ = 2 ln 2`.
pub const DELTA: f64 = 2.0 * LN_2;

const MU_STEP_GROWTH: f64 = 1.5;
const MU_STEP_MAX_FACTOR: f64 = 1e4;

/// Dual variables seen by one channel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseDuals {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_r: f64,
    /// Broadcast-cap multiplier for `A → B` at this state.
    pub mu_a: f64,
    /// Broadcast-cap multiplier for `B → A` at this state.
    pub mu_b: f64,
    /// `φ1'`, expectation of `e^{−θA·RA}` over both decoding regions.
    pub phi_1: f64,
    /// `φ2'`.
    pub phi_2: f64,
}

impl TwoPhaseDuals {
    pub fn new(lambda: [f64; 3], mu: [f64; 2], phi: [f64; 2]) -> Result<Self> {
        for (field, v) in [
            ("lambda_a", lambda[0]),
            ("lambda_b", lambda[1]),
            ("lambda_r", lambda[2]),
            ("mu_a", mu[0]),
            ("mu_b", mu[1]),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(field, format!("{v} must be finite and >= 0")));
            }
        }
        for (field, v) in [("phi_1", phi[0]), ("phi_2", phi[1])] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::domain(field, format!("{v} is outside (0, 1]")));
            }
        }
        Ok(TwoPhaseDuals {
            lambda_a: lambda[0],
            lambda_b: lambda[1],
            lambda_r: lambda[2],
            mu_a: mu[0],
            mu_b: mu[1],
            phi_1: phi[0],
            phi_2: phi[1],
        })
    }

    /// `ωA/φ1' − μA`, the marginal utility scale of `A`'s rate.
    pub fn marginal_a(&self, weights: &Weights) -> f64 {
        weights.a / self.phi_1 - self.mu_a
    }

    pub fn marginal_b(&self, weights: &Weights) -> f64 {
        weights.b / self.phi_2 - self.mu_b
    }

    /// `α1 = δλA / (ωA/φ1' − μA)`; absent when the denominator is not positive.
    pub fn alpha_1(&self, weights: &Weights) -> Option<f64> {
        let m = self.marginal_a(weights);
        (m > 0.0).then(|| DELTA * self.lambda_a.max(LAMBDA_MIN) / m)
    }

    pub fn alpha_2(&self, weights: &Weights) -> Option<f64> {
        let m = self.marginal_b(weights);
        (m > 0.0).then(|| DELTA * self.lambda_b.max(LAMBDA_MIN) / m)
    }

    pub fn swapped(&self) -> Self {
        TwoPhaseDuals {
            lambda_a: self.lambda_b,
            lambda_b: self.lambda_a,
            lambda_r: self.lambda_r,
            mu_a: self.mu_b,
            mu_b: self.mu_a,
            phi_1: self.phi_2,
            phi_2: self.phi_1,
        }
    }
}

/// `K = θA(ωB/φ2' − μB) / (θB(ωA/φ1' − μA))`.
pub fn partition_constant(duals: &TwoPhaseDuals, qos: &QosPair, weights: &Weights) -> f64 {
    qos.theta_a * duals.marginal_b(weights) / (qos.theta_b * duals.marginal_a(weights))
}

/// Which gain the partition threshold is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdAxis {
    /// `γ2ᵗʰ` for a given `γ1`; `A` is decoded first below it.
    Gamma2,
    /// `γ1ᵗʰ` for a given `γ2`; `A` is decoded first above it.
    Gamma1,
}

/// Loss in `e^{−θA·RA}` and gain in `e^{−θB·RB}` from decoding `A` first
/// instead of `B` first, at fixed powers. Both are nonnegative.
fn order_tradeoff(g1: f64, g2: f64, pa: f64, pb: f64, qos: &QosPair) -> (f64, f64) {
    let sa = g1 * pa;
    let sb = g2 * pb;
    // e^a − e^b computed as e^b·expm1(a − b)
    let diff = |hi_rate: f64, lo_rate: f64, theta: f64| {
        let (a, b) = (-theta * lo_rate, -theta * hi_rate);
        b.exp() * (a - b).exp_m1()
    };
    let ra_first = 0.5 * awgn_capacity(sa / (1.0 + sb));
    let ra_last = 0.5 * awgn_capacity(sa);
    let rb_first = 0.5 * awgn_capacity(sb / (1.0 + sa));
    let rb_last = 0.5 * awgn_capacity(sb);
    (diff(ra_last, ra_first, qos.theta_a), diff(rb_last, rb_first, qos.theta_b))
}

/// Solves the partition-threshold equation `N − K·D = 0` for the free gain,
/// with the other gain fixed at `fixed_gain`. Returns the smallest positive
/// solution, or `None` when there is none.
pub fn partition_threshold(
    fixed_gain: f64,
    p: &PowerVector,
    k: f64,
    qos: &QosPair,
    axis: ThresholdAxis,
    root: &RootSearchConfig,
) -> Option<f64> {
    if !(p.a > 0.0 && p.b > 0.0 && k >= 0.0 && fixed_gain > 0.0) {
        return None;
    }
    let f = |x: f64| {
        let (g1, g2) = match axis {
            ThresholdAxis::Gamma2 => (fixed_gain, x),
            ThresholdAxis::Gamma1 => (x, fixed_gain),
        };
        let (n, d) = order_tradeoff(g1, g2, p.a, p.b, qos);
        n - k * d
    };
    let scale = match axis {
        ThresholdAxis::Gamma2 => (1.0 + fixed_gain * p.a) / p.b,
        ThresholdAxis::Gamma1 => (1.0 + fixed_gain * p.b) / p.a,
    };
    // N and D both vanish at zero gain, so the scan starts just above it
    let scan = stationary_then_bisect(f, 1e-9 * scale, 1e4 * scale, root).ok()?;
    scan.roots.into_iter().find(|&r| r > 0.0)
}

/// Decoding order for one state at the given powers.
///
/// Decoding `A` first wins exactly when `vB·D > vA·N`, with `vA = (ωA/φ1' −
/// μA)/θA` and `(N, D)` from the partition criterion; for positive
/// `ωA/φ1' − μA` this is the criterion `N/D < K`. The comparison is made at
/// the state itself rather than through a threshold on one gain, so it stays
/// exact where `N/D` is not monotone in that gain. Ties decode `A` first.
pub fn decode_order(
    csi: &NetworkCsi,
    p: &PowerVector,
    duals: &TwoPhaseDuals,
    qos: &QosPair,
    weights: &Weights,
) -> DecodeOrder {
    let (n, d) = order_tradeoff(csi.a_relay, csi.b_relay, p.a, p.b, qos);
    let va = duals.marginal_a(weights) / qos.theta_a;
    let vb = duals.marginal_b(weights) / qos.theta_b;
    if vb * d - va * n >= 0.0 {
        DecodeOrder::AFirst
    } else {
        DecodeOrder::BFirst
    }
}

/// `A`-decoded-first source powers: `PA` from the closed form given `PB`.
pub fn pa_given_pb(csi: &NetworkCsi, duals: &TwoPhaseDuals, qos: &QosPair, weights: &Weights, pb: f64) -> f64 {
    let Some(alpha1) = duals.alpha_1(weights) else {
        return 0.0;
    };
    if !(csi.a_relay > 0.0) {
        return 0.0;
    }
    let ba = qos.beta_a();
    let y = (1.0 + csi.b_relay * pb) / csi.a_relay;
    let level = (-(2.0 / (ba + 2.0)) * alpha1.ln() + (ba / (ba + 2.0)) * y.ln()).exp();
    (level - y).max(0.0)
}

/// Stationarity in `PB` along `PA(PB)` with `A` decoded first, scaled by `δ`
/// so it stays defined when `PA` is clamped.
pub fn source_stationarity(csi: &NetworkCsi, duals: &TwoPhaseDuals, qos: &QosPair, weights: &Weights, pb: f64) -> f64 {
    let g2 = csi.b_relay;
    let kb = (qos.beta_b() + 2.0) / 2.0;
    let pa = pa_given_pb(csi, duals, qos, weights, pb);
    g2 * duals.marginal_b(weights) * (1.0 + g2 * pb).powf(-kb)
        - DELTA * duals.lambda_b
        - DELTA * duals.lambda_a * g2 * pa / (1.0 + g2 * pb)
}

/// Stationarity in `PA` with `A` decoded first, scaled by `δ`; zero at any
/// interior output of [`pa_given_pb`].
pub fn pa_stationarity(csi: &NetworkCsi, duals: &TwoPhaseDuals, qos: &QosPair, weights: &Weights, pa: f64, pb: f64) -> f64 {
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    let y = 1.0 + g2 * pb;
    duals.marginal_a(weights) * g1 / y * (1.0 + g1 * pa / y).powf(-(qos.beta_a() + 2.0) / 2.0) - DELTA * duals.lambda_a
}

/// Stationarity condition for `PB` with `A` decoded first and `PA` eliminated,
/// normalized by `δλB`. Valid
/// where `PA` is interior and both `α` are defined.
pub fn pb_stationarity_normalized(csi: &NetworkCsi, duals: &TwoPhaseDuals, qos: &QosPair, weights: &Weights, pb: f64) -> Option<f64> {
    let (a1, a2) = (duals.alpha_1(weights)?, duals.alpha_2(weights)?);
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    let (ba, bb) = (qos.beta_a(), qos.beta_b());
    let ratio = duals.lambda_a * g2 / (duals.lambda_b * g1);
    Some(
        g2 / a2 * (1.0 + g2 * pb).powf(-(bb + 2.0) / 2.0) + ratio
            - ratio * (a1 / g1).powf(-2.0 / (ba + 2.0)) * (1.0 + g2 * pb).powf(-2.0 / (ba + 2.0))
            - 1.0,
    )
}

/// Source part of the per-state Lagrangian with corner rates for `order`.
pub fn source_lagrangian(
    csi: &NetworkCsi,
    pa: f64,
    pb: f64,
    order: DecodeOrder,
    duals: &TwoPhaseDuals,
    qos: &QosPair,
    weights: &Weights,
) -> f64 {
    let r = mac_corner_rates(&PowerVector { a: pa, b: pb, r: 0.0 }, csi, order);
    let ua = -duals.marginal_a(weights) / qos.theta_a * (-qos.theta_a * r.a).exp_m1();
    let ub = -duals.marginal_b(weights) / qos.theta_b * (-qos.theta_b * r.b).exp_m1();
    ua + ub - duals.lambda_a * pa - duals.lambda_b * pb
}

/// Relay part of the per-state Lagrangian: broadcast-cap terms priced by `μ`
/// minus the relay power cost.
pub fn relay_lagrangian(csi: &NetworkCsi, pr: f64, duals: &TwoPhaseDuals, qos: &QosPair) -> f64 {
    let caps = bc_max_rates(pr, csi);
    -duals.mu_a / qos.theta_a * (-qos.theta_a * caps.a).exp() - duals.mu_b / qos.theta_b * (-qos.theta_b * caps.b).exp()
        - duals.lambda_r * pr
}

/// MAC-phase source powers `(PA, PB)` for a decoding order.
pub fn source_alloc(
    csi: &NetworkCsi,
    duals: &TwoPhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    order: DecodeOrder,
    root: &RootSearchConfig,
) -> Result<(f64, f64)> {
    Ok(source_alloc_inner(csi, duals, qos, weights, order, root)?.0)
}

fn source_alloc_inner(
    csi: &NetworkCsi,
    duals: &TwoPhaseDuals,
    qos: &QosPair,
    weights: &Weights,
    order: DecodeOrder,
    root: &RootSearchConfig,
) -> Result<((f64, f64), bool)> {
    if order == DecodeOrder::BFirst {
        let ((pb, pa), multiple) =
            source_alloc_inner(&csi.swapped(), &duals.swapped(), &qos.swapped(), &weights.swapped(), DecodeOrder::AFirst, root)?;
        return Ok(((pa, pb), multiple));
    }
    let g2 = csi.b_relay;
    let mb = duals.marginal_b(weights);
    let lead = g2 * mb;
    let price = DELTA * duals.lambda_b.max(LAMBDA_MIN);
    if !(lead > price) {
        return Ok(((pa_given_pb(csi, duals, qos, weights, 0.0), 0.0), false));
    }
    let kb = (qos.beta_b() + 2.0) / 2.0;
    let hi = ((lead / price).ln() / kb).exp_m1() / g2 * (1.0 + 1e-9) + 1e-300;
    let scan = stationary_then_bisect(|pb| source_stationarity(csi, duals, qos, weights, pb), 0.0, hi, root)?;
    let pb = best_candidate(std::iter::once(0.0).chain(scan.roots.iter().copied()), |pb| {
        let pa = pa_given_pb(csi, duals, qos, weights, pb);
        source_lagrangian(csi, pa, pb, DecodeOrder::AFirst, duals, qos, weights)
    });
    Ok(((pa_given_pb(csi, duals, qos, weights, pb), pb), scan.multiple_roots()))
}

/// Left side of the relay stationarity condition.
pub fn relay_stationarity(csi: &NetworkCsi, mu_a: f64, mu_b: f64, lambda_r: f64, qos: &QosPair, pr: f64) -> f64 {
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    mu_a * g2 * (1.0 + g2 * pr).powf(-(qos.beta_a() + 2.0) / 2.0)
        + mu_b * g1 * (1.0 + g1 * pr).powf(-(qos.beta_b() + 2.0) / 2.0)
        - DELTA * lambda_r
}

/// Broadcast power; zero when the stationarity condition is nonpositive at
/// `PR = 0`.
pub fn relay_alloc(csi: &NetworkCsi, mu_a: f64, mu_b: f64, lambda_r: f64, qos: &QosPair, root: &RootSearchConfig) -> Result<f64> {
    let lambda_r = lambda_r.max(LAMBDA_MIN);
    if relay_stationarity(csi, mu_a, mu_b, lambda_r, qos, 0.0) <= 0.0 {
        return Ok(0.0);
    }
    // each term alone falls below δλR/2 past its own bound
    let bound = |mu: f64, g: f64, beta: f64| {
        if mu * g > 0.0 {
            ((2.0 * mu * g / (DELTA * lambda_r)).ln() * 2.0 / (beta + 2.0)).exp_m1().max(0.0) / g
        } else {
            0.0
        }
    };
    let hi = bound(mu_a, csi.b_relay, qos.beta_a()).max(bound(mu_b, csi.a_relay, qos.beta_b())).max(1e-12) * 1.01;
    bisect_root(|pr| relay_stationarity(csi, mu_a, mu_b, lambda_r, qos, pr), 0.0, hi, root)
}

/// Projected subgradient step on the broadcast-cap multipliers of one state.
///
/// `rates` are the MAC corner rates before capping. A rate above its cap
/// raises the multiplier.
pub fn update_mu(csi: &NetworkCsi, rates: &RatePair, relay_power: f64, qos: &QosPair, mu: (f64, f64), step: (f64, f64)) -> (f64, f64) {
    let (ga, gb) = mu_subgradient(csi, rates, relay_power, qos);
    ((mu.0 - step.0 * ga).max(0.0), (mu.1 - step.1 * gb).max(0.0))
}

fn mu_subgradient(csi: &NetworkCsi, rates: &RatePair, relay_power: f64, qos: &QosPair) -> (f64, f64) {
    let caps = bc_max_rates(relay_power, csi);
    let diff = |rate: f64, cap: f64, theta: f64| {
        // e^{−θR} − e^{−θ·cap}
        let (a, b) = (-theta * rate, -theta * cap);
        b.exp() * (a - b).exp_m1()
    };
    (diff(rates.a, caps.a, qos.theta_a), diff(rates.b, caps.b, qos.theta_b))
}

/// Weighted ergodic-capacity policy (`θ → 0`) for one state.
///
/// With `ξA = ωA − μA < ξB = ωB − μB`, `A` is decoded first and the interior
/// solution is
/// `PB = [γ1(ξB − ξA)/(δ(λBγ1 − λAγ2)) − 1/γ2]⁺`, `PA = [ξA/(δλA) − (1 + γ2PB)/γ1]⁺`.
/// When a clamp binds, the best of the interior point, the two edges and the
/// origin is returned. The opposite case is the mirror image. `PR` is the
/// positive root of `c1·PR² + c2·PR + c3 = 0`, or zero when `c3 >= 0`.
pub fn ergodic_two_phase_alloc(csi: &NetworkCsi, duals: &TwoPhaseDuals, weights: &Weights) -> PowerVector {
    let xi_a = weights.a - duals.mu_a;
    let xi_b = weights.b - duals.mu_b;
    let (pa, pb) = if xi_a < xi_b {
        ergodic_sources_a_first(csi, duals, xi_a, xi_b)
    } else {
        let s = duals.swapped();
        let (pb, pa) = ergodic_sources_a_first(&csi.swapped(), &s, xi_b, xi_a);
        (pa, pb)
    };
    PowerVector {
        a: pa,
        b: pb,
        r: ergodic_relay(csi, duals),
    }
}

fn ergodic_sources_a_first(csi: &NetworkCsi, d: &TwoPhaseDuals, xi_a: f64, xi_b: f64) -> (f64, f64) {
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    let (la, lb) = (d.lambda_a.max(LAMBDA_MIN), d.lambda_b.max(LAMBDA_MIN));
    let single = |xi: f64, l: f64, g: f64| if g > 0.0 { (xi / (DELTA * l) - 1.0 / g).max(0.0) } else { 0.0 };
    let value = |pa: f64, pb: f64| {
        let r = mac_corner_rates(&PowerVector { a: pa, b: pb, r: 0.0 }, csi, DecodeOrder::AFirst);
        DELTA * (xi_a * r.a + xi_b * r.b) - DELTA * (la * pa + lb * pb)
    };
    let mut candidates = vec![(0.0, 0.0), (single(xi_a, la, g1), 0.0), (0.0, single(xi_b, lb, g2))];
    let denom = lb * g1 - la * g2;
    if denom > 0.0 && g1 > 0.0 && g2 > 0.0 {
        let pb = (g1 * (xi_b - xi_a) / (DELTA * denom) - 1.0 / g2).max(0.0);
        let pa = (xi_a / (DELTA * la) - (1.0 + g2 * pb) / g1).max(0.0);
        candidates.push((pa, pb));
    }
    candidates
        .into_iter()
        .fold((f64::NEG_INFINITY, (0.0, 0.0)), |best, (pa, pb)| {
            let v = value(pa, pb);
            if v > best.0 { (v, (pa, pb)) } else { best }
        })
        .1
}

fn ergodic_relay(csi: &NetworkCsi, d: &TwoPhaseDuals) -> f64 {
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    let lr = d.lambda_r.max(LAMBDA_MIN);
    let c1 = lr * g1 * g2;
    let c2 = lr * (g1 + g2) - g1 * g2 * (d.mu_a + d.mu_b) / DELTA;
    let c3 = lr - (d.mu_a * g2 + d.mu_b * g1) / DELTA;
    if c3 >= 0.0 {
        return 0.0;
    }
    if c1 <= 0.0 {
        // one link is dead, the condition is linear
        return if c2 > 0.0 { -c3 / c2 } else { 0.0 };
    }
    // numerically stable positive root for c3 < 0
    let disc = (c2 * c2 - 4.0 * c1 * c3).sqrt();
    if c2 >= 0.0 {
        -2.0 * c3 / (c2 + disc)
    } else {
        (-c2 + disc) / (2.0 * c1)
    }
}

/// How the optimizer picks the decoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderRule {
    /// Per-state choice of the better order.
    ChannelAware,
    /// The same order at every state.
    Fixed(DecodeOrder),
}

/// Regime of the broadcast caps at a per-state optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CapRegime {
    /// Only `A`'s broadcast cap binds.
    A,
    /// Only `B`'s broadcast cap binds.
    B,
    /// Both caps bind at the same relay power.
    Both,
}

/// Per-state optimum of the two-phase Lagrangian for fixed `λ` and `φ'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSolution {
    pub powers: PowerVector,
    pub order: DecodeOrder,
    /// Emitted rates: MAC corner rates capped by the broadcast limits.
    pub rates: RatePair,
    /// Broadcast-cap multipliers consistent with the optimum.
    pub mu: (f64, f64),
    /// Per-state Lagrangian value.
    pub value: f64,
    pub multiple_roots: bool,
}

/// Per-state problem with `A` decoded first, in SINR coordinates
/// `xA = γ1PA/(1 + γ2PB)`, `xB = γ2PB`. The relay spends exactly what the
/// larger broadcast cap needs, `PR = max(xA/γ2, xB/γ1)`.
struct AFirstProblem {
    g1: f64,
    g2: f64,
    lambda: [f64; 3],
    /// `ω/φ'` per source.
    m: [f64; 2],
    theta: [f64; 2],
    beta: [f64; 2],
}

impl AFirstProblem {
    fn utility(&self, i: usize, x: f64) -> f64 {
        -self.m[i] / self.theta[i] * (-(self.beta[i] / 2.0) * x.ln_1p()).exp_m1()
    }

    fn marginal(&self, i: usize, x: f64) -> f64 {
        self.m[i] / DELTA * (-(self.beta[i] + 2.0) / 2.0 * x.ln_1p()).exp()
    }

    /// Inverse of [`Self::marginal`], clamped at zero.
    fn inverse(&self, i: usize, price: f64) -> f64 {
        if !(self.m[i] > 0.0) {
            return 0.0;
        }
        ((self.m[i] / (DELTA * price)).ln() * 2.0 / (self.beta[i] + 2.0)).exp_m1().max(0.0)
    }

    /// Best `xA` for a given `xB`.
    fn xa(&self, xb: f64) -> (f64, CapRegime) {
        let [la, _, lr] = self.lambda;
        let base = la * (1.0 + xb) / self.g1;
        let kink = self.g2 * xb / self.g1;
        let above = self.inverse(0, base + lr / self.g2);
        if above >= kink {
            return (above, CapRegime::A);
        }
        let below = self.inverse(0, base);
        if below <= kink {
            (below, CapRegime::B)
        } else {
            (kink, CapRegime::Both)
        }
    }

    fn value(&self, xb: f64) -> f64 {
        let (xa, _) = self.xa(xb);
        let [la, lb, lr] = self.lambda;
        self.utility(0, xa) + self.utility(1, xb)
            - la * xa * (1.0 + xb) / self.g1
            - lb * xb / self.g2
            - lr * (xa / self.g2).max(xb / self.g1)
    }

    /// Derivative of [`Self::value`]; continuous across regimes.
    fn slope(&self, xb: f64) -> f64 {
        let (xa, regime) = self.xa(xb);
        let [la, lb, lr] = self.lambda;
        let common = self.marginal(1, xb) - la * xa / self.g1 - lb / self.g2;
        match regime {
            CapRegime::A => common,
            CapRegime::B => common - lr / self.g1,
            CapRegime::Both => {
                (self.marginal(0, xa) - la * (1.0 + xb) / self.g1) * self.g2 / self.g1 + common - lr / self.g1
            }
        }
    }

    fn solve(&self, root: &RootSearchConfig) -> Result<(f64, f64, f64, bool)> {
        let hi = self.inverse(1, self.lambda[1] / self.g2);
        let (xb, multiple) = if hi > 0.0 {
            let scan = stationary_then_bisect(|x| self.slope(x), 0.0, hi * (1.0 + 1e-9), root)?;
            let xb = best_candidate(std::iter::once(0.0).chain(scan.roots.iter().copied()), |x| self.value(x));
            (xb, scan.multiple_roots())
        } else {
            (0.0, false)
        };
        let (xa, _) = self.xa(xb);
        Ok((xa, xb, self.value(xb), multiple))
    }

    /// KKT multipliers of the broadcast caps at `(xA, xB)`.
    fn multipliers(&self, xb: f64) -> (f64, f64) {
        let (xa, regime) = self.xa(xb);
        let [la, lb, lr] = self.lambda;
        let ka = (self.beta[0] + 2.0) / 2.0;
        let kb = (self.beta[1] + 2.0) / 2.0;
        if xa <= 0.0 && xb <= 0.0 {
            // relay silent; the smallest multipliers that keep both sources off
            return ((self.m[0] - DELTA * la / self.g1).max(0.0), (self.m[1] - DELTA * lb / self.g2).max(0.0));
        }
        match regime {
            CapRegime::A => (DELTA * lr * (ka * xa.ln_1p()).exp() / self.g2, 0.0),
            CapRegime::B => (0.0, DELTA * lr * (kb * xb.ln_1p()).exp() / self.g1),
            CapRegime::Both => {
                let mu_a = (self.m[0] - DELTA * la * (1.0 + xb) * (ka * xa.ln_1p()).exp() / self.g1).max(0.0);
                let rest = DELTA * lr - mu_a * self.g2 * (-ka * xa.ln_1p()).exp();
                (mu_a, (rest * (kb * xb.ln_1p()).exp() / self.g1).max(0.0))
            }
        }
    }
}

/// Solves the per-state two-phase problem for one decoding order.
///
/// Rates sit at the MAC corner and the relay spends just enough power to
/// carry the larger of them, so the state reduces to a one-dimensional search
/// over `B`'s SINR with `A`'s SINR in closed form.
pub fn solve_state_ordered(
    csi: &NetworkCsi,
    lambda: [f64; 3],
    phi: [f64; 2],
    qos: &QosPair,
    weights: &Weights,
    order: DecodeOrder,
    root: &RootSearchConfig,
) -> Result<StateSolution> {
    if order == DecodeOrder::BFirst {
        let s = solve_state_ordered(
            &csi.swapped(),
            [lambda[1], lambda[0], lambda[2]],
            [phi[1], phi[0]],
            &qos.swapped(),
            &weights.swapped(),
            DecodeOrder::AFirst,
            root,
        )?;
        return Ok(StateSolution {
            powers: s.powers.swapped(),
            order: DecodeOrder::BFirst,
            rates: s.rates.swapped(),
            mu: (s.mu.1, s.mu.0),
            ..s
        });
    }
    let (g1, g2) = (csi.a_relay, csi.b_relay);
    if !(g1 > 0.0 && g2 > 0.0) {
        return Ok(StateSolution {
            powers: PowerVector::zero(),
            order,
            rates: RatePair::default(),
            mu: (0.0, 0.0),
            value: 0.0,
            multiple_roots: false,
        });
    }
    let problem = AFirstProblem {
        g1,
        g2,
        lambda: lambda.map(|l| l.max(LAMBDA_MIN)),
        m: [weights.a / phi[0], weights.b / phi[1]],
        theta: [qos.theta_a, qos.theta_b],
        beta: [qos.beta_a(), qos.beta_b()],
    };
    let (xa, xb, value, multiple_roots) = problem.solve(root)?;
    let powers = PowerVector {
        a: xa * (1.0 + xb) / g1,
        b: xb / g2,
        r: (xa / g2).max(xb / g1),
    };
    let corner = mac_corner_rates(&powers, csi, order);
    let caps = bc_max_rates(powers.r, csi);
    Ok(StateSolution {
        powers,
        order,
        rates: RatePair {
            a: corner.a.min(caps.a),
            b: corner.b.min(caps.b),
        },
        mu: problem.multipliers(xb),
        value,
        multiple_roots,
    })
}

/// Per-state Lagrangian of an allocation: utilities of the capped corner
/// rates minus the priced powers.
#[allow(clippy::too_many_arguments)]
pub fn state_lagrangian(
    csi: &NetworkCsi,
    p: &PowerVector,
    order: DecodeOrder,
    lambda: [f64; 3],
    phi: [f64; 2],
    qos: &QosPair,
    weights: &Weights,
) -> f64 {
    let corner = mac_corner_rates(p, csi, order);
    let caps = bc_max_rates(p.r, csi);
    linear_utility(weights.a, qos.theta_a, phi[0], corner.a.min(caps.a))
        + linear_utility(weights.b, qos.theta_b, phi[1], corner.b.min(caps.b))
        - lambda[0] * p.a
        - lambda[1] * p.b
        - lambda[2] * p.r
}

/// Per-state optimum under an order rule; the channel-aware rule keeps the
/// order with the larger Lagrangian value, `A` first on ties.
pub fn solve_state(
    csi: &NetworkCsi,
    lambda: [f64; 3],
    phi: [f64; 2],
    qos: &QosPair,
    weights: &Weights,
    rule: OrderRule,
    root: &RootSearchConfig,
) -> Result<StateSolution> {
    match rule {
        OrderRule::Fixed(order) => solve_state_ordered(csi, lambda, phi, qos, weights, order, root),
        OrderRule::ChannelAware => {
            let a = solve_state_ordered(csi, lambda, phi, qos, weights, DecodeOrder::AFirst, root)?;
            let b = solve_state_ordered(csi, lambda, phi, qos, weights, DecodeOrder::BFirst, root)?;
            Ok(if b.value > a.value { b } else { a })
        }
    }
}

/// Runs the per-state multiplier iteration: order, source powers, relay power
/// and a sign-adaptive projected step on `μ`, until `μ` moves by less than
/// `tolerance`. Returns the final state and whether it settled.
///
/// At states where the per-state problem has a duality gap the iteration
/// cycles; [`solve_state`] is exact there.
#[allow(clippy::too_many_arguments)]
pub fn mu_iteration(
    csi: &NetworkCsi,
    lambda: [f64; 3],
    phi: [f64; 2],
    qos: &QosPair,
    weights: &Weights,
    start: PowerVector,
    tolerance: f64,
    max_iterations: usize,
    root: &RootSearchConfig,
) -> Result<(StateSolution, bool)> {
    let z0 = (0.05 / qos.theta_a, 0.05 / qos.theta_b);
    let mut z = z0;
    let mut last_sign = (0.0, 0.0);
    let mut mu = (0.0f64, 0.0f64);
    let mut powers = start;
    let mut order = DecodeOrder::AFirst;
    let mut rates = RatePair::default();
    let mut settled = false;
    for _ in 0..max_iterations {
        let duals = TwoPhaseDuals::new(lambda, [mu.0, mu.1], phi)?;
        let next_order = decode_order(csi, &powers, &duals, qos, weights);
        let (pa, pb) = source_alloc(csi, &duals, qos, weights, next_order, root)?;
        let pr = relay_alloc(csi, mu.0, mu.1, lambda[2], qos, root)?;
        let changed = next_order != order;
        order = next_order;
        powers = PowerVector { a: pa, b: pb, r: pr };
        let corner = mac_corner_rates(&powers, csi, order);
        let caps = bc_max_rates(pr, csi);
        rates = RatePair {
            a: corner.a.min(caps.a),
            b: corner.b.min(caps.b),
        };
        let (ga, gb) = mu_subgradient(csi, &corner, pr, qos);
        let (na, sa) = adaptive_mu_step(mu.0, ga, &mut z.0, last_sign.0, z0.0);
        let (nb, sb) = adaptive_mu_step(mu.1, gb, &mut z.1, last_sign.1, z0.1);
        last_sign = (sa, sb);
        let moved = (na - mu.0).abs().max((nb - mu.1).abs());
        mu = (na, nb);
        if moved < tolerance && !changed {
            settled = true;
            break;
        }
    }
    Ok((
        StateSolution {
            powers,
            order,
            rates,
            mu,
            value: f64::NAN,
            multiple_roots: false,
        },
        settled,
    ))
}

/// One projected step on a single `μ` with a sign-adaptive step size. The
/// step grows while the subgradient keeps its sign and halves on a flip; it
/// resets when the projection at zero is active. Returns the new value and the
/// sign for the next call (`0` for none).
fn adaptive_mu_step(mu: f64, g: f64, z: &mut f64, last_sign: f64, z0: f64) -> (f64, f64) {
    if g == 0.0 {
        return (mu, last_sign);
    }
    if mu <= 0.0 && g > 0.0 {
        *z = z0;
        return (0.0, 0.0);
    }
    let sign = g.signum();
    if last_sign != 0.0 {
        *z = if sign == last_sign { (*z * MU_STEP_GROWTH).min(z0 * MU_STEP_MAX_FACTOR) } else { *z * 0.5 };
    }
    ((mu - *z * g).max(0.0), sign)
}

/// Warm start for [`optimize_two_phase_from`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseStart {
    pub lambda: [f64; 3],
    pub phi: [f64; 2],
}

/// Solves the sample-average two-phase problem with the channel-aware
/// decoding order.
pub fn optimize_two_phase(samples: &[NetworkCsi], cfg: &SolverConfig) -> Result<PolicyEvaluation> {
    optimize_two_phase_from(samples, cfg, OrderRule::ChannelAware, None)
}

/// Two-phase optimizer with an explicit order rule and optional warm start.
///
/// The power prices `λ` follow the shared dual ascent. Each evaluation solves
/// every state exactly (see [`solve_state`]), recovers its broadcast-cap
/// multipliers `μ`, and relaxes `φ'` toward the pass average; the loop
/// settles once a pass reproduces `φ'`.
pub fn optimize_two_phase_from(
    samples: &[NetworkCsi],
    cfg: &SolverConfig,
    rule: OrderRule,
    start: Option<&TwoPhaseStart>,
) -> Result<PolicyEvaluation> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::domain("samples", "empty sample set"));
    }
    let (init, mut phi) = match start {
        Some(s) => (s.lambda, s.phi),
        None => (initial_multipliers(cfg, DELTA), [1.0, 1.0]),
    };
    let mut states: Vec<Option<StateSolution>> = vec![None; samples.len()];
    let budgets = cfg.budget_vec();
    let mut relax = PhiRelaxation::new();

    let outcome = dual_ascent(
        |lambda| {
            let lambda = [lambda[0], lambda[1], lambda[2]];
            for (csi, slot) in samples.iter().zip(states.iter_mut()) {
                *slot = Some(solve_state(csi, lambda, phi, &cfg.qos, &cfg.weights, rule, &cfg.root)?);
            }
            let used_phi = phi;
            let (ra, rb): (Vec<f64>, Vec<f64>) = states.iter().flatten().map(|s| (s.rates.a, s.rates.b)).unzip();
            let raw = [mean_exp_neg(&ra, cfg.qos.theta_a), mean_exp_neg(&rb, cfg.qos.theta_b)];
            // μ is a function of (λ, φ') here, so only φ' needs to settle
            let settled = relax.update(&mut phi, &raw);
            let objective = -cfg.weights.a * raw[0].ln() / cfg.qos.theta_a - cfg.weights.b * raw[1].ln() / cfg.qos.theta_b;
            let powers: Vec<PowerVector> = states.iter().flatten().map(|s| s.powers).collect();
            let mean = mean_powers(&powers);
            let penalty: f64 = (0..3).map(|i| lambda[i] * (budgets[i] - mean[i])).sum();
            Ok(DualEvaluation {
                policy: used_phi,
                expected_power: mean.to_vec(),
                dual_value: objective + penalty,
                settled,
                rescale: Some(price_rescale(&phi, &used_phi)),
            })
        },
        &init,
        &budgets,
        &cfg.dual,
    )?;
    let lambda = [outcome.multipliers[0], outcome.multipliers[1], outcome.multipliers[2]];
    let states: Vec<StateSolution> = states.into_iter().flatten().collect();
    let margins = [cfg.weights.a / outcome.policy[0], cfg.weights.b / outcome.policy[1]];
    let mut notes = Vec::new();
    if let OrderRule::Fixed(order) = rule {
        notes.push(format!("static decode order {} at every state", order.label()));
    }
    let diagnostics = Diagnostics {
        multiple_roots: states.iter().filter(|s| s.multiple_roots).count(),
        blocked_directions: states.iter().filter(|s| s.mu.0 >= margins[0] || s.mu.1 >= margins[1]).count(),
        decode_orders: Some(states.iter().map(|s| s.order).collect()),
        mu: Some(states.iter().map(|s| s.mu).collect()),
        notes,
    };
    PolicyEvaluation::from_policy(
        states.iter().map(|s| s.powers).collect(),
        states.iter().map(|s| s.rates).collect(),
        cfg,
        lambda,
        outcome.policy,
        outcome.converged,
        outcome.iterations,
        diagnostics,
    )
}
