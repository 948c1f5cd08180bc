//! Log-distance path loss with Rayleigh block fading on a line network.
//!
//! Sources `A` and `B` sit two distance units apart with the relay between
//! them at distance `d` from `A`. Every link power gain is exponential with
//! rate `distance^ν`, so the mean gain decays with distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance between the two sources.
pub const SOURCE_SEPARATION: f64 = 2.0;

/// Geometry and path-loss description of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    relay_distance: f64,
    path_loss_exponent: f64,
    /// Exponential rate parameters for the A–R, B–R and A–B gains.
    rates: [f64; 3],
}

impl FadingSpec {
    pub fn new(relay_distance: f64, path_loss_exponent: f64) -> Result<Self> {
        if !(relay_distance > 0.0 && relay_distance < SOURCE_SEPARATION) {
            return Err(Error::domain(
                "relay_distance",
                format!("{relay_distance} is outside (0, 2)"),
            ));
        }
        if !(path_loss_exponent > 0.0 && path_loss_exponent.is_finite()) {
            return Err(Error::domain(
                "path_loss_exponent",
                format!("{path_loss_exponent} must be positive"),
            ));
        }
        let rates = [
            relay_distance.powf(path_loss_exponent),
            (SOURCE_SEPARATION - relay_distance).powf(path_loss_exponent),
            SOURCE_SEPARATION.powf(path_loss_exponent),
        ];
        Ok(FadingSpec {
            relay_distance,
            path_loss_exponent,
            rates,
        })
    }

    pub fn relay_distance(&self) -> f64 {
        self.relay_distance
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    /// Rate parameters `(λ1, λ2, λ3)`; the mean gain of link `i` is `1/λi`.
    pub fn rates(&self) -> [f64; 3] {
        self.rates
    }

    pub fn mean_gains(&self) -> [f64; 3] {
        self.rates.map(|r| 1.0 / r)
    }

    /// Draws sample `index` of the stream keyed by `seed`.
    ///
    /// Each component is a pure function of `(seed, index, component)`, so a
    /// sample does not depend on how many others were generated with it.
    pub fn sample(&self, seed: u64, index: u64) -> NetworkCsi {
        let gain = |component: u64| -> f64 {
            let u = counter_uniform(seed, index, component);
            -u.ln() / self.rates[component as usize]
        };
        NetworkCsi {
            a_relay: gain(0),
            b_relay: gain(1),
            direct: gain(2),
        }
    }
}

/// One fading realization: noise-normalized link power gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkCsi {
    /// A–R gain, `γ1`.
    pub a_relay: f64,
    /// B–R gain, `γ2`.
    pub b_relay: f64,
    /// A–B gain, `γ3`.
    pub direct: f64,
}

impl NetworkCsi {
    pub fn new(a_relay: f64, b_relay: f64, direct: f64) -> Result<Self> {
        for (field, v) in [("a_relay", a_relay), ("b_relay", b_relay), ("direct", direct)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(field, format!("gain {v} must be finite and >= 0")));
            }
        }
        Ok(NetworkCsi {
            a_relay,
            b_relay,
            direct,
        })
    }

    /// The same network seen with the roles of `A` and `B` exchanged.
    pub fn swapped(&self) -> Self {
        NetworkCsi {
            a_relay: self.b_relay,
            b_relay: self.a_relay,
            direct: self.direct,
        }
    }
}

/// Draws `n` i.i.d. channel states.
pub fn sample_csi(spec: &FadingSpec, n: usize, seed: u64) -> Result<Vec<NetworkCsi>> {
    if n == 0 {
        return Err(Error::domain("samples", "at least one sample is required"));
    }
    Ok((0..n as u64).map(|k| spec.sample(seed, k)).collect())
}

/// Which links the three-phase protocol relays over in a given state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThreePhaseRegion {
    /// `R1`: both flows use the direct link.
    Direct,
    /// `R2`: only `A`'s flow is relayed.
    RelayA,
    /// `R3`: only `B`'s flow is relayed.
    RelayB,
    /// `R4`: both flows are relayed.
    RelayBoth,
}

impl ThreePhaseRegion {
    pub fn label(self) -> &'static str {
        match self {
            ThreePhaseRegion::Direct => "R1",
            ThreePhaseRegion::RelayA => "R2",
            ThreePhaseRegion::RelayB => "R3",
            ThreePhaseRegion::RelayBoth => "R4",
        }
    }
}

/// Ties `γ1 = γ3` (or `γ2 = γ3`) fall on the direct-transmission side.
pub fn classify_three_phase_region(csi: &NetworkCsi) -> ThreePhaseRegion {
    let a_relayed = csi.a_relay > csi.direct;
    let b_relayed = csi.b_relay > csi.direct;
    match (a_relayed, b_relayed) {
        (false, false) => ThreePhaseRegion::Direct,
        (true, false) => ThreePhaseRegion::RelayA,
        (false, true) => ThreePhaseRegion::RelayB,
        (true, true) => ThreePhaseRegion::RelayBoth,
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in the open interval `(0, 1)` from a SplitMix64-style hash.
pub(crate) fn counter_uniform(seed: u64, index: u64, component: u64) -> f64 {
    let key = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    let key = mix64(key ^ index.wrapping_mul(GOLDEN_GAMMA));
    let bits = mix64(key.wrapping_add(component.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_parameters_follow_distance() {
        let s = FadingSpec::new(1.0, 4.0).unwrap();
        assert_eq!(s.rates(), [1.0, 1.0, 16.0]);

        let s = FadingSpec::new(0.5, 4.0).unwrap();
        let [l1, l2, l3] = s.rates();
        assert!((l1 - 0.0625).abs() < 1e-15);
        assert!((l2 - 5.0625).abs() < 1e-12);
        assert_eq!(l3, 16.0);
        // independent route through logarithms
        assert!((l1 - (4.0 * 0.5f64.ln()).exp()).abs() < 1e-15);
        assert!((l2 - (4.0 * 1.5f64.ln()).exp()).abs() < 1e-12);

        for nu in [0.5, 2.0, 3.3, 5.0] {
            let s = FadingSpec::new(1.0, nu).unwrap();
            assert_eq!(s.rates()[0], s.rates()[1]);
        }
    }

    #[test]
    fn fading_spec_rejects_bad_geometry() {
        for (d, nu, field) in [
            (0.0, 4.0, "relay_distance"),
            (2.0, 4.0, "relay_distance"),
            (-1.0, 4.0, "relay_distance"),
            (f64::NAN, 4.0, "relay_distance"),
            (1.0, 0.0, "path_loss_exponent"),
            (1.0, -2.0, "path_loss_exponent"),
        ] {
            match FadingSpec::new(d, nu) {
                Err(Error::Domain { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected domain error, got {other:?}"),
            }
        }
    }

    #[test]
    fn region_examples() {
        let c = |a, b, d| NetworkCsi::new(a, b, d).unwrap();
        assert_eq!(classify_three_phase_region(&c(0.5, 0.5, 1.0)), ThreePhaseRegion::Direct);
        assert_eq!(classify_three_phase_region(&c(2.0, 0.5, 1.0)), ThreePhaseRegion::RelayA);
        assert_eq!(classify_three_phase_region(&c(0.5, 2.0, 1.0)), ThreePhaseRegion::RelayB);
        assert_eq!(classify_three_phase_region(&c(2.0, 3.0, 1.0)), ThreePhaseRegion::RelayBoth);
        // ties go to direct transmission
        assert_eq!(classify_three_phase_region(&c(1.0, 1.0, 1.0)), ThreePhaseRegion::Direct);
        assert_eq!(classify_three_phase_region(&c(1.0, 2.0, 1.0)), ThreePhaseRegion::RelayB);
    }

    #[test]
    fn samples_are_prefix_stable_and_deterministic() {
        let s = FadingSpec::new(0.7, 3.0).unwrap();
        let long = sample_csi(&s, 500, 42).unwrap();
        let short = sample_csi(&s, 17, 42).unwrap();
        assert_eq!(&long[..17], &short[..]);
        assert_eq!(long, sample_csi(&s, 500, 42).unwrap());
        assert_eq!(long[321], s.sample(42, 321));
        assert_ne!(long, sample_csi(&s, 500, 43).unwrap());
        assert!(sample_csi(&s, 0, 1).is_err());
    }

    #[test]
    fn uniform_is_open_interval() {
        for k in 0..10_000 {
            let u = counter_uniform(7, k, 2);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
