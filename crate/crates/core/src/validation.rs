//! Independent checks of the per-state allocators: brute-force grid
//! oracles, stationarity residuals, and small-`θ` limits.
//!
//! The oracles only evaluate Lagrangians; they share no root finding or
//! closed forms with the allocators they check.

use serde::{Deserialize, Serialize};

use crate::capacity::{QosPair, Weights};
use crate::channel::{counter_uniform, sample_csi, FadingSpec, NetworkCsi};
use crate::error::Result;
use crate::numerics::RootSearchConfig;
use crate::rates::{DecodeOrder, PowerVector};
use crate::three_phase::{
    alloc_r1, alloc_r2, alloc_r3, alloc_r4, relay_a_stationarity, both_relayed_pa_stationarity, both_relayed_pb_stationarity, ergodic_alloc_r1, per_state_lagrangian, r4_pa_from_pb,
    r4_pb_from_pa, relay_tie_a, relay_tie_b, tau, ThreePhaseDuals,
};
use crate::two_phase::{
    pb_stationarity_normalized, ergodic_two_phase_alloc, pa_stationarity, relay_alloc, relay_lagrangian, relay_stationarity, source_alloc,
    source_lagrangian, source_stationarity, TwoPhaseDuals,
};

pub const ORACLE_POWER_TOL: f64 = 1e-3;
pub const ORACLE_VALUE_TOL: f64 = 1e-6;
pub const KKT_TOL: f64 = 1e-8;
pub const LIMIT_TOL: f64 = 1e-3;
/// QoS exponent standing in for `θ → 0`.
pub const LIMIT_THETA: f64 = 1e-6;

/// Root settings used when validating; tighter than the optimizers'.
pub fn validation_root() -> RootSearchConfig {
    RootSearchConfig {
        tolerance: 1e-12,
        ..RootSearchConfig::default()
    }
}

// ---------------------------------------------------------------------------
// brute-force maximizers

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd { (c, fc) } else { (d, fd) }
}

/// Grid node `i` of `n` on `[0, hi]`, quadratically denser near zero.
fn node(i: usize, n: usize, hi: f64) -> f64 {
    let t = i as f64 / n as f64;
    hi * t * t
}

/// Maximizes `f` on `[0, hi]`: dense grid, then golden section on the cells
/// next to the best node.
pub fn grid_max_1d(mut f: impl FnMut(f64) -> f64, hi: f64, n: usize) -> (f64, f64) {
    let mut best = (0.0, f(0.0));
    let mut best_i = 0;
    for i in 1..=n {
        let x = node(i, n, hi);
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let lo = node(best_i.saturating_sub(1), n, hi);
    let up = node((best_i + 1).min(n), n, hi);
    let refined = golden_max(&mut f, lo, up);
    if refined.1 > best.1 { refined } else { best }
}

/// Maximizes `f` over the box `[0, hi_i]`: grid, then a compass search with
/// diagonal moves from the best node, stopping at `1e-13` relative steps.
pub fn grid_max_nd<const D: usize>(mut f: impl FnMut(&[f64; D]) -> f64, hi: [f64; D], n: usize) -> ([f64; D], f64) {
    let mut best_x = [0.0; D];
    let mut best_v = f(&best_x);
    let total = (n + 1).pow(D as u32);
    for flat in 0..total {
        let mut rest = flat;
        let mut x = [0.0; D];
        for k in 0..D {
            x[k] = node(rest % (n + 1), n, hi[k]);
            rest /= n + 1;
        }
        let v = f(&x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    let mut dirs: Vec<[f64; D]> = Vec::new();
    for code in 1..3usize.pow(D as u32) {
        let mut d = [0.0; D];
        let mut c = code;
        for slot in d.iter_mut() {
            *slot = (c % 3) as f64 - 1.0;
            c /= 3;
        }
        dirs.push(d);
    }
    let mut step: [f64; D] = hi.map(|h| 2.0 * h / n as f64);
    while step.iter().zip(&hi).any(|(s, h)| *s > 1e-13 * h.max(1e-300)) {
        let mut moved = false;
        for d in &dirs {
            let mut y = best_x;
            for k in 0..D {
                y[k] = (y[k] + d[k] * step[k]).clamp(0.0, hi[k]);
            }
            let v = f(&y);
            if v > best_v {
                best_v = v;
                best_x = y;
                moved = true;
            }
        }
        if !moved {
            step = step.map(|s| s * 0.5);
        }
    }
    (best_x, best_v)
}

// ---------------------------------------------------------------------------
// random draws

struct Draws {
    seed: u64,
    index: u64,
}

impl Draws {
    fn new(seed: u64) -> Self {
        Draws { seed, index: 0 }
    }

    /// Next vector of `K` uniforms in `(0, 1)`.
    fn next<const K: usize>(&mut self) -> [f64; K] {
        self.index += 1;
        std::array::from_fn(|c| counter_uniform(self.seed, self.index, c as u64))
    }
}

fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
    lo + (hi - lo) * u
}

/// Allocation path checked against a grid oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Path {
    R1,
    R2,
    R3,
    R4TauLe1,
    R4TauGt1,
    TwoPhaseSources,
    BroadcastRelay,
}

impl Path {
    pub const ALL: [Path; 7] = [
        Path::R1,
        Path::R2,
        Path::R3,
        Path::R4TauLe1,
        Path::R4TauGt1,
        Path::TwoPhaseSources,
        Path::BroadcastRelay,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Path::R1 => "R1",
            Path::R2 => "R2",
            Path::R3 => "R3",
            Path::R4TauLe1 => "R4 tau<=1",
            Path::R4TauGt1 => "R4 tau>1",
            Path::TwoPhaseSources => "two-phase sources (A first)",
            Path::BroadcastRelay => "broadcast relay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub path: Path,
    /// Draws with at least one nonzero power.
    pub draws: usize,
    pub max_power_error: f64,
    pub max_value_error: f64,
}

impl PathReport {
    pub fn passed(&self, min_draws: usize) -> bool {
        self.draws >= min_draws && self.max_power_error <= ORACLE_POWER_TOL && self.max_value_error <= ORACLE_VALUE_TOL
    }
}

/// Random three-phase state and duals. `γ1, γ2` are placed relative to `γ3`
/// so the state lands in the requested region.
fn three_phase_draw(path: Path, d: &mut Draws) -> (NetworkCsi, ThreePhaseDuals, QosPair, Weights) {
    let u: [f64; 12] = d.next();
    let g3 = lerp(0.3, 2.0, u[0]);
    let below = |v: f64| g3 * lerp(0.05, 0.95, v);
    let above = |v: f64| g3 * lerp(1.2, 8.0, v);
    let (g1, g2) = match path {
        Path::R1 => (below(u[1]), below(u[2])),
        Path::R2 => (above(u[1]), below(u[2])),
        Path::R3 => (below(u[1]), above(u[2])),
        Path::R4TauLe1 => {
            let a = above(u[1]);
            (a, a * lerp(1.01, 3.0, u[2]))
        }
        _ => {
            let b = above(u[2]);
            (b * lerp(1.01, 3.0, u[1]), b)
        }
    };
    let csi = NetworkCsi::new(g1, g2, g3).unwrap_or_else(|_| unreachable!());
    let duals = ThreePhaseDuals {
        lambda_a: lerp(0.005, 0.12, u[3]),
        lambda_b: lerp(0.005, 0.12, u[4]),
        lambda_r: lerp(0.005, 0.12, u[5]),
        phi_1: lerp(0.3, 1.0, u[6]),
        phi_2: lerp(0.3, 1.0, u[7]),
    };
    let qos = QosPair {
        theta_a: lerp(0.1, 3.0, u[8]),
        theta_b: lerp(0.1, 3.0, u[9]),
    };
    let wa = lerp(0.2, 0.8, u[10]);
    (csi, duals, qos, Weights { a: wa, b: 1.0 - wa })
}

fn two_phase_draw(d: &mut Draws) -> (NetworkCsi, TwoPhaseDuals, QosPair, Weights) {
    let u: [f64; 12] = d.next();
    let csi = NetworkCsi::new(lerp(0.1, 4.0, u[0]), lerp(0.1, 4.0, u[1]), 0.0).unwrap_or_else(|_| unreachable!());
    let wa = lerp(0.2, 0.8, u[2]);
    let weights = Weights { a: wa, b: 1.0 - wa };
    let (phi_1, phi_2) = (lerp(0.3, 1.0, u[3]), lerp(0.3, 1.0, u[4]));
    let duals = TwoPhaseDuals {
        lambda_a: lerp(0.01, 0.15, u[5]),
        lambda_b: lerp(0.01, 0.15, u[6]),
        lambda_r: lerp(0.01, 0.15, u[7]),
        mu_a: weights.a / phi_1 * lerp(0.0, 0.7, u[8]),
        mu_b: weights.b / phi_2 * lerp(0.0, 0.7, u[9]),
        phi_1,
        phi_2,
    };
    let qos = QosPair {
        theta_a: lerp(0.1, 3.0, u[10]),
        theta_b: lerp(0.1, 3.0, u[11]),
    };
    (csi, duals, qos, weights)
}

fn max_abs_diff(p: &PowerVector, q: &PowerVector) -> f64 {
    (p.a - q.a).abs().max((p.b - q.b).abs()).max((p.r - q.r).abs())
}

const GRID_1D: usize = 20_000;
const GRID_2D: usize = 300;

/// Runs `draws` nontrivial draws per path against the grid oracles.
pub fn oracle_equivalence(draws: usize, seed: u64) -> Result<Vec<PathReport>> {
    let root = validation_root();
    let mut reports = Vec::new();
    for (pi, path) in Path::ALL.into_iter().enumerate() {
        let mut rng = Draws::new(seed.wrapping_add(pi as u64 * 0x1000));
        let mut report = PathReport {
            path,
            draws: 0,
            max_power_error: 0.0,
            max_value_error: 0.0,
        };
        let mut attempts = 0;
        while report.draws < draws && attempts < 50 * draws {
            attempts += 1;
            let (power_err, value_err) = match path {
                Path::TwoPhaseSources => {
                    let (csi, d, q, w) = two_phase_draw(&mut rng);
                    let (pa, pb) = source_alloc(&csi, &d, &q, &w, DecodeOrder::AFirst, &root)?;
                    if pa.max(pb) <= 1e-6 {
                        continue;
                    }
                    let f = |x: &[f64; 2]| source_lagrangian(&csi, x[0], x[1], DecodeOrder::AFirst, &d, &q, &w);
                    let hi = [
                        d.marginal_a(&w) / (q.theta_a * d.lambda_a),
                        d.marginal_b(&w) / (q.theta_b * d.lambda_b),
                    ];
                    let (x, v) = grid_max_nd(f, hi, GRID_2D);
                    let mine = f(&[pa, pb]);
                    ((x[0] - pa).abs().max((x[1] - pb).abs()), (v - mine).abs())
                }
                Path::BroadcastRelay => {
                    let (csi, d, q, _) = two_phase_draw(&mut rng);
                    let pr = relay_alloc(&csi, d.mu_a, d.mu_b, d.lambda_r, &q, &root)?;
                    if pr <= 1e-6 {
                        continue;
                    }
                    let f = |x: f64| relay_lagrangian(&csi, x, &d, &q);
                    let hi = (d.mu_a / q.theta_a + d.mu_b / q.theta_b) / d.lambda_r;
                    let (x, v) = grid_max_1d(f, hi, GRID_1D);
                    ((x - pr).abs(), (v - f(pr)).abs())
                }
                _ => {
                    let (csi, d, q, w) = three_phase_draw(path, &mut rng);
                    let p = match path {
                        Path::R1 => alloc_r1(&csi, &d, &q, &w),
                        Path::R2 => alloc_r2(&csi, &d, &q, &w, &root)?,
                        Path::R3 => alloc_r3(&csi, &d, &q, &w, &root)?,
                        _ => alloc_r4(&csi, &d, &q, &w, &root)?,
                    };
                    let relayed = match path {
                        Path::R1 => p.a.max(p.b),
                        Path::R2 => p.a,
                        Path::R3 => p.b,
                        _ => p.a.max(p.b),
                    };
                    if relayed <= 1e-6 {
                        continue;
                    }
                    let oracle = three_phase_oracle(path, &csi, &d, &q, &w);
                    let l = |p: &PowerVector| per_state_lagrangian(&csi, p, &d, &q, &w);
                    (max_abs_diff(&oracle, &p), (l(&oracle) - l(&p)).abs())
                }
            };
            report.draws += 1;
            report.max_power_error = report.max_power_error.max(power_err);
            report.max_value_error = report.max_value_error.max(value_err);
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Maximizes the per-state Lagrangian over the path's feasible set: each
/// relayed source sits on its balanced bottleneck, and in `R4` the two
/// balance conditions share one relay power.
fn three_phase_oracle(path: Path, csi: &NetworkCsi, d: &ThreePhaseDuals, q: &QosPair, w: &Weights) -> PowerVector {
    let l = |p: PowerVector| per_state_lagrangian(csi, &p, d, q, w);
    let hi_a = w.a / (q.theta_a * d.phi_1 * d.lambda_a);
    let hi_b = w.b / (q.theta_b * d.phi_2 * d.lambda_b);
    let pv = |a: f64, b: f64, r: f64| PowerVector { a, b, r };
    match path {
        Path::R1 | Path::R2 | Path::R3 => {
            let relay_a = path == Path::R2;
            let relay_b = path == Path::R3;
            let tie_a = |a: f64| if relay_a { relay_tie_a(csi, a) } else { 0.0 };
            let tie_b = |b: f64| if relay_b { relay_tie_b(csi, b) } else { 0.0 };
            // the Lagrangian separates over the two sources
            let (a, _) = grid_max_1d(|a| l(pv(a, 0.0, tie_a(a))), hi_a, GRID_1D);
            let (b, _) = grid_max_1d(|b| l(pv(0.0, b, tie_b(b))), hi_b, GRID_1D);
            pv(a, b, tie_a(a) + tie_b(b))
        }
        Path::R4TauLe1 | Path::R4TauGt1 if tau(csi) <= 1.0 => {
            let (a, _) = grid_max_1d(|a| l(pv(a, r4_pb_from_pa(csi, a), relay_tie_a(csi, a))), hi_a, GRID_1D);
            pv(a, r4_pb_from_pa(csi, a), relay_tie_a(csi, a))
        }
        _ => {
            let (b, _) = grid_max_1d(|b| l(pv(r4_pa_from_pb(csi, b), b, relay_tie_b(csi, b))), hi_b, GRID_1D);
            pv(r4_pa_from_pb(csi, b), b, relay_tie_b(csi, b))
        }
    }
}

// ---------------------------------------------------------------------------
// stationarity residuals

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub condition: &'static str,
    /// Interior allocations checked.
    pub checked: usize,
    pub max_residual: f64,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_residual <= KKT_TOL
    }
}

/// Evaluates each stationarity condition at interior allocations from
/// `draws` random draws per condition.
pub fn kkt_residuals(draws: usize, seed: u64) -> Result<Vec<KktReport>> {
    let root = validation_root();
    let mut out = Vec::new();
    let mut record = |condition: &'static str, residuals: Vec<f64>| {
        out.push(KktReport {
            condition,
            checked: residuals.len(),
            max_residual: residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())),
        });
    };

    let mut rng = Draws::new(seed);
    let mut r2 = Vec::new();
    let mut r4a = Vec::new();
    let mut r4b = Vec::new();
    for _ in 0..draws {
        let (csi, d, q, w) = three_phase_draw(Path::R2, &mut rng);
        let p = alloc_r2(&csi, &d, &q, &w, &root)?;
        if p.a > 0.0 {
            r2.push(relay_a_stationarity(&csi, &d, &q, &w, p.a));
        }
        let (csi, d, q, w) = three_phase_draw(Path::R4TauLe1, &mut rng);
        let p = alloc_r4(&csi, &d, &q, &w, &root)?;
        if p.a > 0.0 {
            r4a.push(both_relayed_pa_stationarity(&csi, &d, &q, &w, p.a));
        }
        let (csi, d, q, w) = three_phase_draw(Path::R4TauGt1, &mut rng);
        let p = alloc_r4(&csi, &d, &q, &w, &root)?;
        if p.b > 0.0 {
            r4b.push(both_relayed_pb_stationarity(&csi, &d, &q, &w, p.b));
        }
    }
    record("R2 source (PA)", r2);
    record("R4 tau<=1 (PA)", r4a);
    record("R4 tau>1 (PB)", r4b);

    let mut pa_res = Vec::new();
    let mut pb_res = Vec::new();
    let mut normalized = Vec::new();
    let mut relay = Vec::new();
    for _ in 0..draws {
        let (csi, d, q, w) = two_phase_draw(&mut rng);
        let (pa, pb) = source_alloc(&csi, &d, &q, &w, DecodeOrder::AFirst, &root)?;
        if pa > 0.0 {
            pa_res.push(pa_stationarity(&csi, &d, &q, &w, pa, pb));
        }
        if pb > 0.0 {
            pb_res.push(source_stationarity(&csi, &d, &q, &w, pb));
            if pa > 0.0 {
                // the normalized form is scaled by 1/(δλB); undo it for comparison
                if let Some(v) = pb_stationarity_normalized(&csi, &d, &q, &w, pb) {
                    normalized.push(v * crate::two_phase::DELTA * d.lambda_b);
                }
            }
        }
        let pr = relay_alloc(&csi, d.mu_a, d.mu_b, d.lambda_r, &q, &root)?;
        if pr > 0.0 {
            relay.push(relay_stationarity(&csi, d.mu_a, d.mu_b, d.lambda_r, &q, pr));
        }
    }
    record("two-phase source (PA)", pa_res);
    record("two-phase source (PB)", pb_res);
    record("two-phase source (PB, normalized form)", normalized);
    record("broadcast relay (PR)", relay);
    Ok(out)
}

// ---------------------------------------------------------------------------
// small-θ limits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub case: &'static str,
    pub samples: usize,
    pub max_error: f64,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.max_error <= LIMIT_TOL
    }
}

/// At `θ = 1e-6`, compares the QoS allocators with their ergodic closed
/// forms on `n` channel samples of the default geometry, for a few dual
/// points. `φ = 1`, its `θ → 0` value.
pub fn limiting_cases(n: usize, seed: u64) -> Result<Vec<LimitReport>> {
    let root = validation_root();
    let samples = sample_csi(&FadingSpec::new(1.0, 4.0)?, n, seed)?;
    let q = QosPair::symmetric(LIMIT_THETA)?;
    let w = Weights { a: 0.6, b: 0.4 };
    let mut three = LimitReport {
        case: "three-phase R1 vs water-filling",
        samples: 0,
        max_error: 0.0,
    };
    let mut two = LimitReport {
        case: "two-phase vs ergodic closed form",
        samples: 0,
        max_error: 0.0,
    };
    let lambdas = [[0.02, 0.03, 0.02], [0.05, 0.04, 0.06], [0.1, 0.08, 0.03]];
    let mus = [[0.0, 0.0], [0.1, 0.05], [0.3, 0.2]];
    for (lambda, mu) in lambdas.iter().zip(&mus) {
        let d3 = ThreePhaseDuals {
            lambda_a: lambda[0],
            lambda_b: lambda[1],
            lambda_r: lambda[2],
            phi_1: 1.0,
            phi_2: 1.0,
        };
        let d2 = TwoPhaseDuals {
            lambda_a: lambda[0],
            lambda_b: lambda[1],
            lambda_r: lambda[2],
            mu_a: mu[0],
            mu_b: mu[1],
            phi_1: 1.0,
            phi_2: 1.0,
        };
        for csi in &samples {
            let qos_p = alloc_r1(csi, &d3, &q, &w);
            let erg = ergodic_alloc_r1(csi, &d3, &w);
            three.samples += 1;
            three.max_error = three.max_error.max(max_abs_diff(&qos_p, &erg));

            let erg = ergodic_two_phase_alloc(csi, &d2, &w);
            let value = |pa: f64, pb: f64, order| source_lagrangian(csi, pa, pb, order, &d2, &q, &w);
            let (a1, b1) = source_alloc(csi, &d2, &q, &w, DecodeOrder::AFirst, &root)?;
            let (a2, b2) = source_alloc(csi, &d2, &q, &w, DecodeOrder::BFirst, &root)?;
            let (pa, pb) = if value(a2, b2, DecodeOrder::BFirst) > value(a1, b1, DecodeOrder::AFirst) {
                (a2, b2)
            } else {
                (a1, b1)
            };
            let pr = relay_alloc(csi, d2.mu_a, d2.mu_b, d2.lambda_r, &q, &root)?;
            two.samples += 1;
            two.max_error = two.max_error.max(max_abs_diff(&PowerVector { a: pa, b: pb, r: pr }, &erg));
        }
    }
    Ok(vec![three, two])
}
