//! Power and rate adaptation for decode-and-forward two-way relaying under
//! statistical delay-QoS constraints.
//!
//! Policies maximize the weighted sum of the two directions' effective
//! capacities subject to long-term average power budgets at both sources and
//! the relay. The expectation is taken over a frozen Monte Carlo sample of
//! Rayleigh block-fading states, and the budgets are enforced by projected
//! dual ascent.

pub mod baselines;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod numerics;
pub mod policy;
pub mod rates;
pub mod scenario;
pub mod sweep;
pub mod three_phase;
pub mod two_phase;
pub mod validation;

pub use baselines::{direct_transmission_policy, fixed_power_policy, weight_based_partition_policy, Protocol};
pub use capacity::{effective_capacity, weighted_sum_objective, QosPair, RatePair, Weights};
pub use channel::{classify_three_phase_region, sample_csi, FadingSpec, NetworkCsi, ThreePhaseRegion};
pub use error::{Error, Result};
pub use scenario::{db_to_linear, Baseline, ScenarioConfig, Scheme};
pub use sweep::{emit_results, run_sweep, Format, SweepResult, SweepRow, SweepVar};
pub use rates::{DecodeOrder, PowerVector};
