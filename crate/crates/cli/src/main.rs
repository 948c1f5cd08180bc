use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twoway_core::sweep::{emit_results, run_sweep, Format, SweepResult, SweepVar};
use twoway_core::three_phase::ThreePhaseRule;
use twoway_core::validation::{kkt_residuals, limiting_cases, oracle_equivalence, KKT_TOL, LIMIT_TOL, ORACLE_POWER_TOL, ORACLE_VALUE_TOL};
use twoway_core::{Error, ScenarioConfig};

/// Effective-capacity power and rate adaptation for two-way relaying.
#[derive(Parser, Debug)]
#[command(name = "twoway", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve every selected scheme at the configured operating point.
    Optimize(RunArgs),
    /// Sweep both source budgets (dB); the relay keeps its offset.
    SweepPower(SweepArgs),
    /// Sweep the common QoS exponent.
    SweepTheta(SweepArgs),
    /// Sweep the relay position between the sources.
    SweepRelay(SweepArgs),
    /// Trace effective-capacity region boundaries by sweeping the weight of A.
    Region(SweepArgs),
    /// Run the oracle, stationarity and limiting-case suites.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (`key = value` lines). Defaults apply without one.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override the number of channel samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Override the sample seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    three_phase_rule: Option<RuleArg>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the document here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated grid; each command has a default.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Random draws per allocation path.
    #[arg(long, default_value_t = 25)]
    draws: usize,
    /// Channel samples for the limiting-case check.
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RuleArg {
    Exact,
    Balanced,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(n) = args.samples {
        if n == 0 {
            return Err(Failure::Config("--samples must be at least 1".into()));
        }
        cfg.samples = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(rule) = args.three_phase_rule {
        cfg.three_phase_rule = match rule {
            RuleArg::Exact => ThreePhaseRule::Exact,
            RuleArg::Balanced => ThreePhaseRule::Balanced,
        };
    }
    Ok(cfg)
}

fn default_grid(var: SweepVar) -> Vec<f64> {
    let steps = |start: f64, step: f64, count: usize| (0..count).map(|k| start + step * k as f64).collect();
    match var {
        SweepVar::Point => vec![0.0],
        SweepVar::Power => steps(0.0, 3.0, 9),
        SweepVar::Theta => vec![0.01, 0.1, 1.0, 10.0, 100.0],
        SweepVar::Relay => steps(0.25, 0.25, 7),
        SweepVar::Weight => steps(0.1, 0.1, 9),
    }
}

fn emit(result: &SweepResult, args: &RunArgs) -> Result<(), Failure> {
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let doc = emit_results(result, format);
    for row in result.rows.iter().filter(|r| !r.converged) {
        eprintln!(
            "warning: {} at {} = {} did not converge{}",
            row.scheme.name(),
            result.var.name(),
            row.value,
            row.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
    }
    match &args.output {
        Some(path) => std::fs::write(path, doc).map_err(|e| Failure::Run(format!("{}: {e}", path.display()))),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}

fn sweep(var: SweepVar, run: &RunArgs, grid: Option<&[f64]>) -> Result<(), Failure> {
    let cfg = load(run)?;
    let grid = grid.map_or_else(|| default_grid(var), <[f64]>::to_vec);
    if grid.is_empty() {
        return Err(Failure::Config("--grid is empty".into()));
    }
    // reject bad grid values before any solver runs
    for &v in &grid {
        twoway_core::sweep::scenario_at(&cfg, var, v).map_err(|e| Failure::Config(format!("grid value {v}: {e}")))?;
    }
    let result = run_sweep(&cfg, var, &grid)?;
    emit(&result, run)
}

/// Prints one line per check; returns whether all passed.
fn validate(args: &ValidateArgs) -> Result<bool, Failure> {
    let mut ok = true;
    let mut line = |passed: bool, text: String| {
        ok &= passed;
        println!("{} {text}", if passed { "PASS" } else { "FAIL" });
    };
    for r in oracle_equivalence(args.draws, args.seed)? {
        line(
            r.passed(args.draws),
            format!(
                "oracle {:<28} draws={:<3} power_err={:.2e} (<= {ORACLE_POWER_TOL:e}) value_err={:.2e} (<= {ORACLE_VALUE_TOL:e})",
                r.path.label(),
                r.draws,
                r.max_power_error,
                r.max_value_error
            ),
        );
    }
    for r in kkt_residuals(8 * args.draws, args.seed)? {
        line(
            r.passed(),
            format!("stationarity {:<36} checked={:<4} residual={:.2e} (<= {KKT_TOL:e})", r.condition, r.checked, r.max_residual),
        );
    }
    for r in limiting_cases(args.samples, args.seed)? {
        line(r.passed(), format!("limit {:<34} samples={} max_err={:.2e} (<= {LIMIT_TOL:e})", r.case, r.samples, r.max_error));
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Optimize(run) => sweep(SweepVar::Point, run, None).map(|_| true),
        Command::SweepPower(a) => sweep(SweepVar::Power, &a.run, a.grid.as_deref()).map(|_| true),
        Command::SweepTheta(a) => sweep(SweepVar::Theta, &a.run, a.grid.as_deref()).map(|_| true),
        Command::SweepRelay(a) => sweep(SweepVar::Relay, &a.run, a.grid.as_deref()).map(|_| true),
        Command::Region(a) => sweep(SweepVar::Weight, &a.run, a.grid.as_deref()).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
