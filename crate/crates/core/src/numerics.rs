//! Root finding and projected dual ascent shared by the optimizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refinement used once a sign change has been bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootMethod {
    Bisection,
    /// Illinois false position; superlinear, with a bisection fallback.
    Illinois,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSearchConfig {
    /// Residual target `|f(x)|`; refinement also stops when the bracket
    /// collapses to adjacent floats.
    pub tolerance: f64,
    /// Bracket expansion limit.
    pub max_iterations: usize,
    pub bracket_growth: f64,
    pub method: RootMethod,
    /// Grid size used by [`stationary_then_bisect`].
    pub scan_points: usize,
}

impl Default for RootSearchConfig {
    fn default() -> Self {
        RootSearchConfig {
            tolerance: 1e-10,
            max_iterations: 200,
            bracket_growth: 2.0,
            method: RootMethod::Bisection,
            scan_points: 24,
        }
    }
}

impl RootSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("tolerance", format!("{} must be positive", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations", "must be at least 1"));
        }
        if !(self.bracket_growth > 1.0) {
            return Err(Error::domain("bracket_growth", format!("{} must exceed 1", self.bracket_growth)));
        }
        if self.scan_points < 2 {
            return Err(Error::domain("scan_points", "must be at least 2"));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: RootMethod) -> Self {
        self.method = method;
        self
    }
}

/// Upper bound on refinement steps; bisection on doubles collapses well
/// before this.
const REFINE_CAP: usize = 4096;

/// Refines a root of `f` inside `[a, b]` given opposite-signed end values.
pub fn refine_bracket(
    f: &mut impl FnMut(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    cfg: &RootSearchConfig,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum());
    let mut side = 0i8;
    for _ in 0..REFINE_CAP {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let x = match cfg.method {
            RootMethod::Bisection => mid,
            RootMethod::Illinois => {
                let c = (a * fb - b * fa) / (fb - fa);
                if c > lo && c < hi && c.is_finite() { c } else { mid }
            }
        };
        let fx = f(x);
        if fx.abs() <= cfg.tolerance || !fx.is_finite() {
            return x;
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if cfg.method == RootMethod::Bisection {
            side = 0;
        }
    }
    if fa.abs() <= fb.abs() { a } else { b }
}

/// Root of a decreasing function on `[lo, ∞)`.
///
/// Returns `lo` when `f(lo) <= 0`, which callers read as a clamp to the
/// boundary. Otherwise `hi` is grown geometrically until `f(hi) < 0`.
pub fn bisect_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, cfg: &RootSearchConfig) -> Result<f64> {
    cfg.validate()?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::domain("bracket", format!("[{lo}, {hi}] is not a finite interval")));
    }
    let f_lo = f(lo);
    if f_lo.is_nan() {
        return Err(Error::Numeric(format!("f({lo}) is NaN")));
    }
    if f_lo <= 0.0 {
        return Ok(lo);
    }
    let mut hi = hi;
    let mut f_hi = f(hi);
    let mut steps = 0;
    while !(f_hi < 0.0) {
        if steps >= cfg.max_iterations || f_hi.is_nan() {
            return Err(Error::Bracket { lo, hi, iterations: steps });
        }
        hi = lo + (hi - lo) * cfg.bracket_growth;
        f_hi = f(hi);
        steps += 1;
    }
    Ok(refine_bracket(&mut f, lo, f_lo, hi, f_hi, cfg))
}

/// All sign changes of `f` found on a bounded domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RootScan {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    /// Roots in increasing order.
    pub roots: Vec<f64>,
}

impl RootScan {
    /// More than one root was found; [`RootScan::root`] broke the tie.
    pub fn multiple_roots(&self) -> bool {
        self.roots.len() > 1
    }

    /// Smallest root, or the domain boundary when `f` keeps one sign: `lo`
    /// when `f <= 0` throughout, `hi` when `f > 0` throughout.
    pub fn root(&self) -> f64 {
        match self.roots.first() {
            Some(&r) => r,
            None if self.f_lo <= 0.0 => self.lo,
            None => self.hi,
        }
    }
}

/// Root search for a function with a few interior stationary points.
///
/// The domain is sampled on a grid that is geometric towards `lo`, so both
/// small and large roots are resolved. Cells where `f` changes sign are
/// refined directly. Where the samples turn towards zero without crossing
/// it, the local extremum is located by golden-section search and, if it
/// lies across zero, both resulting crossings are refined.
pub fn stationary_then_bisect(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    cfg: &RootSearchConfig,
) -> Result<RootScan> {
    cfg.validate()?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::domain("domain", format!("[{lo}, {hi}] is not a finite interval")));
    }
    let n = cfg.scan_points;
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(lo);
    let span = hi - lo;
    // geometric spacing from span * 1e-6 to span
    let ratio = (1e6f64).powf(1.0 / (n - 1) as f64);
    let mut step = span * 1e-6;
    for _ in 0..n - 1 {
        xs.push(lo + step);
        step *= ratio;
    }
    xs.push(hi);
    let mut fs = Vec::with_capacity(xs.len());
    for &x in &xs {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::Numeric(format!("stationary search: f({x}) is NaN")));
        }
        fs.push(v);
    }

    let mut roots = Vec::new();
    for i in 0..xs.len() - 1 {
        let (x0, x1, f0, f1) = (xs[i], xs[i + 1], fs[i], fs[i + 1]);
        if f0 == 0.0 {
            roots.push(x0);
            continue;
        }
        if f0.signum() != f1.signum() && f1 != 0.0 {
            roots.push(refine_bracket(&mut f, x0, f0, x1, f1, cfg));
            continue;
        }
        // interior extremum pointing at zero between x_{i-1}, x_i, x_{i+1}
        if i == 0 || f1 == 0.0 {
            continue;
        }
        let fp = fs[i - 1];
        let toward_zero = if f0 > 0.0 { f0 < fp && f0 <= f1 } else { f0 > fp && f0 >= f1 };
        if !toward_zero || fp.signum() != f0.signum() {
            continue;
        }
        let sign = f0.signum();
        let (xe, fe) = golden_extremum(&mut f, xs[i - 1], x1, sign, cfg);
        if fe.signum() != sign && fe != 0.0 {
            roots.push(refine_bracket(&mut f, xs[i - 1], fp, xe, fe, cfg));
            roots.push(refine_bracket(&mut f, xe, fe, x1, f1, cfg));
        } else if fe == 0.0 {
            roots.push(xe);
        }
    }
    if fs[xs.len() - 1] == 0.0 {
        roots.push(hi);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    Ok(RootScan {
        lo,
        hi,
        f_lo: fs[0],
        f_hi: fs[xs.len() - 1],
        roots,
    })
}

/// Golden-section search for the minimum of `sign * f` on `[a, b]`.
fn golden_extremum(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, sign: f64, cfg: &RootSearchConfig) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if fc.signum() != sign && fc != 0.0 {
            return (c, fc);
        }
        if fd.signum() != sign && fd != 0.0 {
            return (d, fd);
        }
        if (b - a) <= 1e-14 * (1.0 + a.abs()) || (fc.abs().min(fd.abs()) <= cfg.tolerance) {
            break;
        }
        if sign * fc < sign * fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if sign * fc < sign * fd { (c, fc) } else { (d, fd) }
}

/// Candidate with the largest `objective`; ties keep the earliest candidate.
pub fn best_candidate(candidates: impl IntoIterator<Item = f64>, mut objective: impl FnMut(f64) -> f64) -> f64 {
    let mut best_x = f64::NAN;
    let mut best_v = f64::NEG_INFINITY;
    for x in candidates {
        let v = objective(x);
        if best_x.is_nan() || v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    best_x
}

/// Step-size rule for the multiplier update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// `s_i = c` every iteration.
    Constant(f64),
    /// `s_i = c / √k` at iteration `k`.
    Diminishing(f64),
    /// Per-multiplier step that grows while the residual keeps its sign and
    /// shrinks when it flips. The update is multiplicative,
    /// `λ ← λ·exp(s·(E[P] − P̄)/P̄)`.
    Adaptive { initial: f64, grow: f64, shrink: f64, max: f64 },
}

impl StepSchedule {
    pub fn adaptive() -> Self {
        StepSchedule::Adaptive {
            initial: 0.5,
            grow: 1.3,
            shrink: 0.5,
            max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgradientConfig {
    pub schedule: StepSchedule,
    pub max_iterations: usize,
    /// Iterations over which the best dual value must settle.
    pub window: usize,
    /// Relative power-residual target `|E[P] − P̄| / P̄`.
    pub constraint_tolerance: f64,
    /// Relative change allowed in the best dual value across the window.
    pub dual_tolerance: f64,
    /// Complementary-slackness target `λ·|E[P] − P̄|` for slack constraints.
    pub slackness_tolerance: f64,
    /// Additive steps are scaled by `max(λ, floor)`, and a multiplier at zero
    /// restarts from `floor`, so it can become positive again.
    pub multiplier_floor: f64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        SubgradientConfig {
            schedule: StepSchedule::adaptive(),
            max_iterations: 500,
            window: 20,
            constraint_tolerance: 1e-3,
            dual_tolerance: 1e-6,
            slackness_tolerance: 1e-6,
            multiplier_floor: 1e-4,
        }
    }
}

impl SubgradientConfig {
    pub fn validate(&self) -> Result<()> {
        let step_ok = match self.schedule {
            StepSchedule::Constant(c) | StepSchedule::Diminishing(c) => c > 0.0,
            StepSchedule::Adaptive { initial, grow, shrink, max } => {
                initial > 0.0 && grow >= 1.0 && shrink > 0.0 && shrink < 1.0 && max >= initial
            }
        };
        if !step_ok {
            return Err(Error::domain("schedule", format!("{:?} has a nonpositive step", self.schedule)));
        }
        if !(self.constraint_tolerance > 0.0) {
            return Err(Error::domain("constraint_tolerance", "must be positive"));
        }
        if self.max_iterations == 0 || self.window == 0 {
            return Err(Error::domain("max_iterations", "iteration limits must be at least 1"));
        }
        Ok(())
    }
}

/// What one pass of the inner problem reports back to the dual loop.
#[derive(Debug, Clone)]
pub struct DualEvaluation<P> {
    pub policy: P,
    /// Average power per constrained node.
    pub expected_power: Vec<f64>,
    /// Lagrangian value at the current multipliers.
    pub dual_value: f64,
    /// Whether state carried inside the evaluator (expectation estimates,
    /// inner multipliers) has stopped moving.
    pub settled: bool,
    /// Factors applied to the multipliers before the next step, when the
    /// evaluator rescaled the utility they are priced against.
    pub rescale: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DualOutcome<P> {
    pub multipliers: Vec<f64>,
    pub policy: P,
    /// Relative residuals `(E[P] − P̄)/P̄`; absolute `E[P]` when `P̄ = 0`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Best-so-far dual value after each iteration.
    pub best_dual_trace: Vec<f64>,
}

/// Multiplier held for a zero budget.
pub const PINNED_MULTIPLIER: f64 = 1e12;

/// Projected subgradient iteration `λ ← max(0, λ − s ⊙ (P̄ − E[P]))`.
///
/// Steps are scaled per node by `max(λ_i, floor) / P̄_i`, which makes the
/// schedule dimensionless; the adaptive schedule takes the same step in
/// `ln λ` instead. Nodes with a zero budget keep the multiplier
/// [`PINNED_MULTIPLIER`].
pub fn dual_ascent<P>(
    mut evaluate: impl FnMut(&[f64]) -> Result<DualEvaluation<P>>,
    init: &[f64],
    budgets: &[f64],
    cfg: &SubgradientConfig,
) -> Result<DualOutcome<P>> {
    cfg.validate()?;
    if init.len() != budgets.len() {
        return Err(Error::domain("multipliers", "one multiplier per budget is required"));
    }
    if budgets.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(Error::domain("budgets", "budgets must be finite and >= 0"));
    }
    let m = budgets.len();
    let mut lambda: Vec<f64> = init
        .iter()
        .zip(budgets)
        .map(|(&l, &b)| if b == 0.0 { PINNED_MULTIPLIER } else { l.max(0.0) })
        .collect();
    let mut steps = vec![
        match cfg.schedule {
            StepSchedule::Adaptive { initial, .. } => initial,
            StepSchedule::Constant(c) | StepSchedule::Diminishing(c) => c,
        };
        m
    ];
    let mut prev_sign = vec![0.0f64; m];
    let mut best = f64::INFINITY;
    let mut trace: Vec<f64> = Vec::new();
    let mut all_values: Vec<f64> = Vec::new();

    for k in 1..=cfg.max_iterations {
        let eval = evaluate(&lambda)?;
        if !eval.dual_value.is_finite() || eval.expected_power.iter().any(|p| !p.is_finite()) {
            let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.6e}")).collect();
            return Err(Error::Numeric(format!(
                "dual value {} at iteration {k}, multipliers {lambda:?}, recent best values [{}]",
                eval.dual_value,
                tail.join(", ")
            )));
        }
        if eval.expected_power.len() != m {
            return Err(Error::domain("expected_power", "evaluator returned the wrong number of nodes"));
        }
        best = best.min(eval.dual_value);
        trace.push(best);
        all_values.push(eval.dual_value);

        let residuals: Vec<f64> = eval
            .expected_power
            .iter()
            .zip(budgets)
            .map(|(&e, &b)| if b > 0.0 { (e - b) / b } else { e })
            .collect();
        let feasible = residuals.iter().zip(&lambda).zip(budgets).all(|((&r, &l), &b)| {
            if b == 0.0 {
                r <= cfg.constraint_tolerance
            } else {
                r.abs() <= cfg.constraint_tolerance || (r < 0.0 && l * (r * b).abs() <= cfg.slackness_tolerance)
            }
        });
        let stable = if k > cfg.window {
            let old = trace[k - 1 - cfg.window];
            (old - best).abs() <= cfg.dual_tolerance * (1.0 + best.abs())
        } else {
            let lo = all_values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = all_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo <= cfg.dual_tolerance * (1.0 + best.abs())
        };
        if feasible && stable && eval.settled {
            return Ok(DualOutcome {
                multipliers: lambda,
                policy: eval.policy,
                residuals,
                iterations: k,
                converged: true,
                best_dual_trace: trace,
            });
        }
        if k == cfg.max_iterations {
            return Ok(DualOutcome {
                multipliers: lambda,
                policy: eval.policy,
                residuals,
                iterations: k,
                converged: false,
                best_dual_trace: trace,
            });
        }

        if let Some(factors) = &eval.rescale {
            if factors.len() != m || factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
                return Err(Error::domain("rescale", "one positive finite factor per budget is required"));
            }
            for i in 0..m {
                if budgets[i] > 0.0 {
                    lambda[i] *= factors[i];
                }
            }
        }
        for i in 0..m {
            if budgets[i] == 0.0 {
                continue;
            }
            let r = residuals[i];
            let s = match cfg.schedule {
                StepSchedule::Constant(c) => c,
                StepSchedule::Diminishing(c) => c / (k as f64).sqrt(),
                StepSchedule::Adaptive { grow, shrink, max, .. } => {
                    let sign = if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { 0.0 };
                    if sign != 0.0 && prev_sign[i] != 0.0 {
                        steps[i] = if sign == prev_sign[i] { (steps[i] * grow).min(max) } else { steps[i] * shrink };
                    }
                    prev_sign[i] = sign;
                    steps[i]
                }
            };
            // (E[P] − P̄)/P̄ is the negated subgradient in relative units
            let r = r.clamp(-1.0, 1.0);
            lambda[i] = match cfg.schedule {
                // multiplicative, so λ can fall by orders of magnitude without
                // being projected onto zero
                StepSchedule::Adaptive { .. } if lambda[i] > 0.0 => lambda[i] * (s * r).exp(),
                StepSchedule::Adaptive { .. } if r > 0.0 => cfg.multiplier_floor * (s * r).exp(),
                StepSchedule::Adaptive { .. } => 0.0,
                _ => (lambda[i] + s * lambda[i].max(cfg.multiplier_floor) * r).max(0.0),
            };
        }
    }
    unreachable!("loop returns on its last iteration")
}
