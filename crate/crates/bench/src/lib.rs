//! Fixtures shared by the benchmarks.

use twoway_core::policy::SolverConfig;
use twoway_core::{sample_csi, FadingSpec, NetworkCsi, ScenarioConfig};

/// Default scenario (9/9/6 dB, `θ = 1`, `ω = (0.6, 0.4)`) with `n` samples.
pub fn default_case(n: usize) -> (Vec<NetworkCsi>, SolverConfig) {
    let scenario = ScenarioConfig::default();
    let samples = sample_csi(&FadingSpec::new(1.0, 4.0).expect("valid geometry"), n, scenario.seed).expect("n >= 1");
    (samples, scenario.solver())
}
