//! Scenario files: line-oriented `key = value` text with `#` comments.
//!
//! Powers are given in dB and converted to linear once, while parsing.
//! Unknown or repeated keys are rejected with the offending line number.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::Protocol;
use crate::capacity::{QosPair, Weights};
use crate::channel::FadingSpec;
use crate::error::{Error, Result};
use crate::policy::SolverConfig;
use crate::rates::PowerVector;
use crate::three_phase::ThreePhaseRule;

/// A policy that a run can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Direct,
    ThreePhase,
    ThreePhaseFixed,
    TwoPhase,
    TwoPhaseFixed,
    TwoPhaseWeight,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Direct,
        Scheme::ThreePhase,
        Scheme::ThreePhaseFixed,
        Scheme::TwoPhase,
        Scheme::TwoPhaseFixed,
        Scheme::TwoPhaseWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::ThreePhase => "three_phase",
            Scheme::ThreePhaseFixed => "three_phase_fixed",
            Scheme::TwoPhase => "two_phase",
            Scheme::TwoPhaseFixed => "two_phase_fixed",
            Scheme::TwoPhaseWeight => "two_phase_weight",
        }
    }
}

/// Baselines a scenario can switch on next to the selected protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Baseline {
    Direct,
    Fixed,
    Weight,
}

impl Baseline {
    fn name(self) -> &'static str {
        match self {
            Baseline::Direct => "direct",
            Baseline::Fixed => "fixed",
            Baseline::Weight => "weight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub relay_distance: f64,
    pub path_loss_exponent: f64,
    /// Budgets as written, in dB.
    pub power_db: [f64; 3],
    /// Budgets in linear scale, fixed at parse time.
    pub budgets: PowerVector,
    pub weights: Weights,
    pub qos: QosPair,
    pub samples: usize,
    pub seed: u64,
    pub protocols: Vec<Protocol>,
    pub baselines: Vec<Baseline>,
    pub three_phase_rule: ThreePhaseRule,
    /// Relative power-residual tolerance of the dual loop.
    pub tolerance_power: f64,
    pub tolerance_root: f64,
}

pub const DEFAULT_SAMPLES: usize = 20_000;

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let power_db = [9.0, 9.0, 6.0];
        ScenarioConfig {
            relay_distance: 1.0,
            path_loss_exponent: 4.0,
            power_db,
            budgets: linear_budgets(&power_db),
            weights: Weights { a: 0.6, b: 0.4 },
            qos: QosPair { theta_a: 1.0, theta_b: 1.0 },
            samples: DEFAULT_SAMPLES,
            seed: 1,
            protocols: vec![Protocol::ThreePhase, Protocol::TwoPhase],
            baselines: vec![Baseline::Direct, Baseline::Fixed, Baseline::Weight],
            three_phase_rule: ThreePhaseRule::Exact,
            tolerance_power: 1e-3,
            tolerance_root: 1e-10,
        }
    }
}

fn linear_budgets(db: &[f64; 3]) -> PowerVector {
    PowerVector {
        a: db_to_linear(db[0]),
        b: db_to_linear(db[1]),
        r: db_to_linear(db[2]),
    }
}

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| bad(line, format!("{key}: `{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(bad(line, format!("{key}: value must be finite")));
    }
    Ok(v)
}

impl ScenarioConfig {
    /// Parses a scenario document; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<(&str, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected `key = value`, found `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let set = |k: &str| seen.iter().any(|(s, _)| *s == k);
            if set(key) {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            match key {
                "relay_distance" => cfg.relay_distance = number(line, key, value)?,
                "path_loss_exponent" => cfg.path_loss_exponent = number(line, key, value)?,
                "power_a_db" => cfg.power_db[0] = number(line, key, value)?,
                "power_b_db" => cfg.power_db[1] = number(line, key, value)?,
                "power_r_db" => cfg.power_db[2] = number(line, key, value)?,
                "weight_a" | "weights" => {
                    if set("weight_a") || set("weights") {
                        return Err(bad(line, "give either `weight_a` or `weights`, not both"));
                    }
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    let w = match (key, parts.as_slice()) {
                        ("weight_a", [a]) => Weights::from_a(number(line, key, a)?),
                        ("weights", [a, b]) => Weights::new(number(line, key, a)?, number(line, key, b)?),
                        _ => return Err(bad(line, format!("{key}: wrong number of values"))),
                    };
                    cfg.weights = w.map_err(|e| bad(line, e.to_string()))?;
                }
                "theta_a" => cfg.qos.theta_a = number(line, key, value)?,
                "theta_b" => cfg.qos.theta_b = number(line, key, value)?,
                "samples" => {
                    cfg.samples = value.parse().map_err(|_| bad(line, "samples: expected a positive integer"))?;
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad(line, "seed: expected an unsigned integer"))?,
                "protocols" => {
                    cfg.protocols = value
                        .split_whitespace()
                        .map(|p| match p {
                            "three_phase" => Ok(Protocol::ThreePhase),
                            "two_phase" => Ok(Protocol::TwoPhase),
                            other => Err(bad(line, format!("unknown protocol `{other}`"))),
                        })
                        .collect::<Result<_>>()?;
                    cfg.protocols.sort();
                    cfg.protocols.dedup();
                }
                "baselines" => {
                    cfg.baselines = value
                        .split_whitespace()
                        .filter(|b| *b != "none")
                        .map(|b| match b {
                            "direct" => Ok(Baseline::Direct),
                            "fixed" => Ok(Baseline::Fixed),
                            "weight" => Ok(Baseline::Weight),
                            other => Err(bad(line, format!("unknown baseline `{other}`"))),
                        })
                        .collect::<Result<_>>()?;
                    cfg.baselines.sort();
                    cfg.baselines.dedup();
                }
                "three_phase_rule" => {
                    cfg.three_phase_rule = match value {
                        "exact" => ThreePhaseRule::Exact,
                        "balanced" => ThreePhaseRule::Balanced,
                        other => return Err(bad(line, format!("unknown three-phase rule `{other}`"))),
                    }
                }
                "tolerance_power" => cfg.tolerance_power = number(line, key, value)?,
                "tolerance_root" => cfg.tolerance_root = number(line, key, value)?,
                other => return Err(bad(line, format!("unknown key `{other}`"))),
            }
            seen.push((key, line));
        }
        cfg.budgets = linear_budgets(&cfg.power_db);
        cfg.check().map_err(|e| match e {
            // line 0 when the offending value is a default
            Error::Domain { field, reason } => {
                let line = seen.iter().find(|(k, _)| k.starts_with(field)).map_or(0, |(_, l)| *l);
                bad(line, format!("{field}: {reason}"))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        FadingSpec::new(self.relay_distance, self.path_loss_exponent)?;
        QosPair::new(self.qos.theta_a, self.qos.theta_b)?;
        Weights::new(self.weights.a, self.weights.b)?;
        if self.samples == 0 {
            return Err(Error::domain("samples", "at least one sample is required"));
        }
        if self.protocols.is_empty() {
            return Err(Error::domain("protocols", "select at least one protocol"));
        }
        if !(self.tolerance_power > 0.0) || !(self.tolerance_root > 0.0) {
            return Err(Error::domain("tolerance", "tolerances must be positive"));
        }
        Ok(())
    }

    /// Canonical document; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let list = |items: Vec<&str>| if items.is_empty() { "none".to_string() } else { items.join(" ") };
        let _ = writeln!(out, "relay_distance = {}", self.relay_distance);
        let _ = writeln!(out, "path_loss_exponent = {}", self.path_loss_exponent);
        let _ = writeln!(out, "power_a_db = {}", self.power_db[0]);
        let _ = writeln!(out, "power_b_db = {}", self.power_db[1]);
        let _ = writeln!(out, "power_r_db = {}", self.power_db[2]);
        let _ = writeln!(out, "weights = {} {}", self.weights.a, self.weights.b);
        let _ = writeln!(out, "theta_a = {}", self.qos.theta_a);
        let _ = writeln!(out, "theta_b = {}", self.qos.theta_b);
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "protocols = {}", list(self.protocols.iter().map(|p| p.label()).collect()));
        let _ = writeln!(out, "baselines = {}", list(self.baselines.iter().map(|b| b.name()).collect()));
        let rule = match self.three_phase_rule {
            ThreePhaseRule::Exact => "exact",
            ThreePhaseRule::Balanced => "balanced",
        };
        let _ = writeln!(out, "three_phase_rule = {rule}");
        let _ = writeln!(out, "tolerance_power = {}", self.tolerance_power);
        let _ = writeln!(out, "tolerance_root = {}", self.tolerance_root);
        out
    }

    pub fn fading(&self) -> Result<FadingSpec> {
        FadingSpec::new(self.relay_distance, self.path_loss_exponent)
    }

    pub fn solver(&self) -> SolverConfig {
        let mut s = SolverConfig::new(self.budgets, self.weights, self.qos);
        s.dual.constraint_tolerance = self.tolerance_power;
        s.root.tolerance = self.tolerance_root;
        s
    }

    /// Schemes implied by the protocol and baseline selection, sorted by name.
    pub fn schemes(&self) -> Vec<Scheme> {
        let has = |p| self.protocols.contains(&p);
        let on = |b| self.baselines.contains(&b);
        let mut out: Vec<Scheme> = Vec::new();
        if has(Protocol::ThreePhase) {
            out.push(Scheme::ThreePhase);
            if on(Baseline::Fixed) {
                out.push(Scheme::ThreePhaseFixed);
            }
        }
        if has(Protocol::TwoPhase) {
            out.push(Scheme::TwoPhase);
            if on(Baseline::Fixed) {
                out.push(Scheme::TwoPhaseFixed);
            }
            if on(Baseline::Weight) {
                out.push(Scheme::TwoPhaseWeight);
            }
        }
        if on(Baseline::Direct) {
            out.push(Scheme::Direct);
        }
        out.sort_by_key(|s| s.name());
        out
    }
}
