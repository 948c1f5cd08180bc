//! Instantaneous achievable-rate regions of the three-phase and two-phase
//! decode-and-forward protocols.

use serde::{Deserialize, Serialize};

use crate::capacity::RatePair;
use crate::channel::NetworkCsi;
use crate::error::{Error, Result};

/// Default additive tolerance for region membership.
pub const REGION_TOLERANCE: f64 = 1e-9;

/// Transmit powers, linear and noise-normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerVector {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl PowerVector {
    pub fn new(a: f64, b: f64, r: f64) -> Result<Self> {
        for (field, v) in [("power_a", a), ("power_b", b), ("power_r", r)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(field, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(PowerVector { a, b, r })
    }

    pub fn zero() -> Self {
        PowerVector::default()
    }

    /// The same powers with the source roles exchanged.
    pub fn swapped(&self) -> Self {
        PowerVector {
            a: self.b,
            b: self.a,
            r: self.r,
        }
    }
}

/// Successive-decoding order at the relay during the MAC phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecodeOrder {
    /// `ℝ′1`: `A` is decoded first, so `B` sees no interference.
    AFirst,
    /// `ℝ′2`: `B` is decoded first.
    BFirst,
}

impl DecodeOrder {
    pub fn label(self) -> &'static str {
        match self {
            DecodeOrder::AFirst => "R1'",
            DecodeOrder::BFirst => "R2'",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            DecodeOrder::AFirst => DecodeOrder::BFirst,
            DecodeOrder::BFirst => DecodeOrder::AFirst,
        }
    }
}

/// `C(x) = log2(1 + x)`.
#[inline]
pub fn awgn_capacity(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Rates on the three-phase boundary with one third of the frame per slot.
pub fn three_phase_max_rates(p: &PowerVector, csi: &NetworkCsi) -> RatePair {
    let one_way = |p_src: f64, g_src: f64, g_dst: f64| -> f64 {
        let direct = awgn_capacity(csi.direct * p_src);
        let bits = if g_src > csi.direct {
            awgn_capacity(g_src * p_src).min(direct + awgn_capacity(g_dst * p.r))
        } else {
            direct
        };
        bits / 3.0
    };
    RatePair {
        a: one_way(p.a, csi.a_relay, csi.b_relay),
        b: one_way(p.b, csi.b_relay, csi.a_relay),
    }
}

/// Corner of the MAC pentagon selected by `order`, with half the frame.
pub fn mac_corner_rates(p: &PowerVector, csi: &NetworkCsi, order: DecodeOrder) -> RatePair {
    let sa = csi.a_relay * p.a;
    let sb = csi.b_relay * p.b;
    match order {
        DecodeOrder::AFirst => RatePair {
            a: 0.5 * awgn_capacity(sa / (1.0 + sb)),
            b: 0.5 * awgn_capacity(sb),
        },
        DecodeOrder::BFirst => RatePair {
            a: 0.5 * awgn_capacity(sa),
            b: 0.5 * awgn_capacity(sb / (1.0 + sa)),
        },
    }
}

/// Broadcast-phase caps. `A`'s message reaches `B` over `γ2` and `B`'s
/// reaches `A` over `γ1`.
pub fn bc_max_rates(relay_power: f64, csi: &NetworkCsi) -> RatePair {
    RatePair {
        a: 0.5 * awgn_capacity(csi.b_relay * relay_power),
        b: 0.5 * awgn_capacity(csi.a_relay * relay_power),
    }
}

/// Membership in the two-phase region: three MAC inequalities and two BC
/// inequalities, each with additive slack `tol`.
pub fn two_phase_region_contains(r: &RatePair, p: &PowerVector, csi: &NetworkCsi, tol: f64) -> bool {
    let sa = csi.a_relay * p.a;
    let sb = csi.b_relay * p.b;
    let bc = bc_max_rates(p.r, csi);
    r.a >= -tol
        && r.b >= -tol
        && r.a <= 0.5 * awgn_capacity(sa) + tol
        && r.b <= 0.5 * awgn_capacity(sb) + tol
        && r.a + r.b <= 0.5 * awgn_capacity(sa + sb) + tol
        && r.a <= bc.a + tol
        && r.b <= bc.b + tol
}
