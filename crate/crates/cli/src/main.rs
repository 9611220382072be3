use clap::{Parser, Subcommand};
use plaposc_cli::commands::{self, RunContext};
use plaposc_cli::scenario::Scenario;
use plaposc_cli::{acceptance, Failure};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments on the forced p-Laplacian oscillator with a
/// jumping nonlinearity.
#[derive(Parser)]
#[command(name = "plaposc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML). Required by every subcommand except `accept`.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Seed override for sampled initial conditions.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for experiments over independent orbits.
    #[arg(long)]
    threads: Option<usize>,

    /// Integrator tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check p-trigonometric identities against quadrature oracles.
    PtrigCheck,
    /// Check the auxiliary-orbit identities for the scenario parameters.
    AuxCheck,
    /// Integrate one orbit and dump it with its Hamiltonian.
    Simulate,
    /// Dump the stroboscopic section of one orbit.
    Poincare,
    /// Estimate the rotation number of one orbit.
    Rotation,
    /// Scan the angular advance against the action level.
    Twist,
    /// Classify sampled orbits as invariant curves or not.
    Curves,
    /// Windowed amplitude maxima over long horizons.
    Bounded,
    /// Log-log scaling scans of the estimate machinery.
    Scan,
    /// Run the full acceptance suite (self-contained scenarios).
    Accept,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    }

    if let Command::Accept = cli.command {
        let seed = cli.seed.unwrap_or(0);
        let outcomes = acceptance::run_full(&cli.out, seed)?;
        let mut all = true;
        for o in &outcomes {
            println!("{}", o.line());
            all &= o.pass;
        }
        println!(
            "acceptance: {}/{} criteria passed",
            outcomes.iter().filter(|o| o.pass).count(),
            outcomes.len()
        );
        if !all {
            return Err(Failure::Acceptance(
                "one or more acceptance criteria failed".into(),
            ));
        }
        return Ok(());
    }

    let scenario_path = cli.scenario.as_ref().ok_or_else(|| {
        Failure::Validation("--scenario <path> is required for this subcommand".into())
    })?;
    let bytes = std::fs::read(scenario_path).map_err(|e| {
        Failure::Validation(format!("cannot read scenario {}: {e}", scenario_path.display()))
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Failure::Validation(format!("scenario is not UTF-8: {e}")))?;
    let parsed = Scenario::parse(&text).map_err(Failure::Validation)?;
    let mut validated = parsed.validate()?;
    if let Some(seed) = cli.seed {
        validated.scenario.seed = seed;
    }
    let ctx = RunContext {
        out: &cli.out,
        seed: validated.scenario.seed,
        tol: cli.tol.unwrap_or(validated.scenario.tol),
        scenario_bytes: &bytes,
        command: command_name(&cli.command),
    };

    match cli.command {
        Command::PtrigCheck => {
            if !commands::ptrig_check(&validated, &ctx)? {
                return Err(Failure::Numeric("p-trig checks failed".into()));
            }
        }
        Command::AuxCheck => {
            if !commands::aux_check(&validated, &ctx)? {
                return Err(Failure::Numeric("auxiliary-orbit checks failed".into()));
            }
        }
        Command::Simulate => commands::simulate(&validated, &ctx)?,
        Command::Poincare => commands::poincare(&validated, &ctx)?,
        Command::Rotation => commands::rotation(&validated, &ctx)?,
        Command::Twist => {
            if !commands::twist(&validated, &ctx)? {
                return Err(Failure::Numeric("twist diagnostic failed".into()));
            }
        }
        Command::Curves => commands::curves(&validated, &ctx)?,
        Command::Bounded => commands::bounded(&validated, &ctx)?,
        Command::Scan => {
            if !commands::scan(&validated, &ctx)? {
                return Err(Failure::Numeric("scan slope checks failed".into()));
            }
        }
        Command::Accept => unreachable!("handled above"),
    }
    Ok(())
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::PtrigCheck => "ptrig-check",
        Command::AuxCheck => "aux-check",
        Command::Simulate => "simulate",
        Command::Poincare => "poincare",
        Command::Rotation => "rotation",
        Command::Twist => "twist",
        Command::Curves => "curves",
        Command::Bounded => "bounded",
        Command::Scan => "scan",
        Command::Accept => "accept",
    }
}
