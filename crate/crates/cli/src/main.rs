//! `zcobs`: validate special fibers, compute the ℚ/ℤ obstruction group,
//! classify Kulikov models and certify consonance.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use zcobs_core::arith::Prime;
use zcobs_core::corpus::{fixture, fixtures, run_all};
use zcobs_core::fiber::{delta_matrix, load_special_fiber, FiberError, SpecialFiber};
use zcobs_core::groups::qz_complex_homology;
use zcobs_core::kulikov::{classify_kulikov, consonance_solve, replay, ConsonanceCertificate, K3Error};
use zcobs_core::obstruction::compute_obstruction;
use zcobs_core::oracle::{brute_force_qz_homology, expected_at_level, OracleError};
use zcobs_core::par::Execution;

#[derive(Parser)]
#[command(name = "zcobs", version, about = "Zero-cycle obstruction tools for degenerating surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a special-fiber file.
    Validate { file: PathBuf },
    /// Compute the obstruction group H.
    Compute {
        file: PathBuf,
        /// Restrict the report to one prime.
        #[arg(long)]
        prime: Option<u64>,
        /// Cross-check against the brute-force oracle at the prime (default 2).
        #[arg(long)]
        brute_check: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Classify a semistable fiber as Kulikov type I, II or III.
    Classify { file: PathBuf },
    /// Run the consonance solver and print its certificate.
    Consonance {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Bundled fixture corpus.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Subcommand)]
enum FixtureAction {
    List,
    Show { name: String },
    /// Check every fixture against its expected values.
    Run,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Process exit status: 1 validation, 2 internal inconsistency, 3 I/O or usage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Validation = 1,
    Inconsistent = 2,
    Usage = 3,
}

struct Fail(Failure, String);

impl Fail {
    fn new(kind: Failure, msg: impl Display) -> Self {
        Fail(kind, msg.to_string())
    }
}

impl From<FiberError> for Fail {
    fn from(e: FiberError) -> Self {
        match e {
            FiberError::InternalComplexViolation { .. } => Fail::new(Failure::Inconsistent, e),
            _ => Fail::new(Failure::Validation, e),
        }
    }
}

type Outcome = Result<(), Fail>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(Failure::Usage as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(kind, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(kind as u8)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { file } => validate(&read_fiber(&file)?),
        Command::Compute {
            file,
            prime,
            brute_check,
            format,
        } => compute(&read_fiber(&file)?, prime, brute_check, format),
        Command::Classify { file } => classify(&read_fiber(&file)?),
        Command::Consonance { file, format } => consonance(&read_fiber(&file)?, format),
        Command::Fixtures { action } => fixtures_command(action),
    }
}

fn read_fiber(path: &Path) -> Result<SpecialFiber, Fail> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Fail::new(Failure::Usage, format!("{}: {e}", path.display())))?;
    Ok(load_special_fiber(&text)?)
}

fn print_warnings(fiber: &SpecialFiber) {
    for w in &fiber.warnings {
        eprintln!("warning: {w}");
    }
}

fn validate(fiber: &SpecialFiber) -> Outcome {
    print_warnings(fiber);
    let d = delta_matrix(fiber)?;
    println!("valid: {}", fiber.name);
    println!("components: {}", fiber.components.len());
    println!("double curves: {}", fiber.double_curves.len());
    println!("triple points: {}", fiber.triple_points.len());
    println!("matrix: {} x {}", d.matrix.rows(), d.matrix.cols());
    Ok(())
}

fn parse_prime(p: u64) -> Result<Prime, Fail> {
    Prime::try_from(p).map_err(|_| Fail::new(Failure::Usage, format!("--prime {p} is not prime")))
}

fn compute(fiber: &SpecialFiber, prime: Option<u64>, brute_check: bool, format: Format) -> Outcome {
    print_warnings(fiber);
    let prime = prime.map(parse_prime).transpose()?;
    let report = compute_obstruction(fiber)?;
    match format {
        Format::Text => print!("{}", report.to_text(prime.as_ref())),
        Format::Json => println!("{}", report.to_json(prime.as_ref())),
    }
    if !brute_check {
        return Ok(());
    }
    let ell = match prime {
        Some(p) => p,
        None => parse_prime(2)?,
    };
    let line = check_against_oracle(fiber, &ell)?;
    // Keep standard output parseable in JSON mode.
    match format {
        Format::Text => println!("{line}"),
        Format::Json => eprintln!("{line}"),
    }
    Ok(())
}

/// Runs the oracle at levels `n` and `n + 1`, with `n` the largest exponent
/// in the closed-form ℓ-part (at least 1), and compares both levels.
fn check_against_oracle(fiber: &SpecialFiber, ell: &Prime) -> Result<String, Fail> {
    let d = delta_matrix(fiber)?;
    let h = qz_complex_homology(&d.multiplicities, &d.matrix)
        .map_err(|e| Fail::new(Failure::Inconsistent, e))?;
    let n = h
        .finite_part
        .ell_primary(ell)
        .chain()
        .last()
        .map_or(0, |top| ell.valuation(top))
        .max(1);
    let report = brute_force_qz_homology(&d.multiplicities, &d.matrix, ell, n).map_err(|e| match e {
        OracleError::StateSpaceTooLarge { .. } => {
            Fail::new(Failure::Usage, format!("brute-check at {ell}: {e}"))
        }
        _ => Fail::new(Failure::Inconsistent, format!("brute-check at {ell}: {e}")),
    })?;
    for answer in [&report.at_level, &report.at_next_level] {
        let want = expected_at_level(&h, ell, answer.level);
        if answer.group != want.group {
            return Err(Fail::new(
                Failure::Inconsistent,
                format!(
                    "brute-check mismatch at {ell}^{}: oracle {}, closed form {}",
                    answer.level, answer.group, want.group
                ),
            ));
        }
    }
    Ok(format!(
        "brute-check: l={ell} levels {} and {}: {} and {}; agrees",
        report.at_level.level, report.at_next_level.level, report.at_level.group, report.at_next_level.group
    ))
}

fn classify(fiber: &SpecialFiber) -> Outcome {
    print_warnings(fiber);
    let c = classify_kulikov(fiber).map_err(|e| Fail::new(Failure::Validation, e))?;
    println!("type: {}", c.kind);
    for r in &c.reasons {
        println!("  {r}");
    }
    Ok(())
}

fn print_certificate(fiber: &SpecialFiber, cert: &ConsonanceCertificate, format: Format) -> Outcome {
    let replayed = replay(fiber, cert).map_err(|e| Fail::new(Failure::Inconsistent, format!("replay: {e}")))?;
    if replayed != cert.conclusion {
        return Err(Fail::new(Failure::Inconsistent, "replay reaches a different conclusion"));
    }
    match format {
        Format::Text => print!("{}", cert.to_text()),
        Format::Json => println!("{}", cert.to_json()),
    }
    Ok(())
}

fn consonance(fiber: &SpecialFiber, format: Format) -> Outcome {
    print_warnings(fiber);
    match consonance_solve(fiber) {
        Ok(cert) => print_certificate(fiber, &cert, format),
        Err(K3Error::Stuck {
            frontier,
            certificate,
        }) => {
            print_certificate(fiber, &certificate, format)?;
            Err(Fail::new(
                Failure::Validation,
                format!("propagation stopped before reaching {}", frontier.join(", ")),
            ))
        }
        Err(e) => Err(Fail::new(Failure::Validation, e)),
    }
}

fn fixtures_command(action: FixtureAction) -> Outcome {
    match action {
        FixtureAction::List => {
            for fx in fixtures() {
                println!("{:<22} {}", fx.name, fx.note);
            }
            Ok(())
        }
        FixtureAction::Show { name } => {
            let fx = fixture(&name).map_err(|e| Fail::new(Failure::Usage, e))?;
            print!("{}", fx.document);
            if !fx.document.ends_with('\n') {
                println!();
            }
            Ok(())
        }
        FixtureAction::Run => {
            let outcomes = run_all(Execution::default());
            let failed = outcomes.iter().filter(|o| !o.pass).count();
            for o in &outcomes {
                println!("{o}");
            }
            println!("{} of {} fixtures match", outcomes.len() - failed, outcomes.len());
            if failed == 0 {
                Ok(())
            } else {
                Err(Fail::new(Failure::Inconsistent, format!("{failed} fixtures disagree")))
            }
        }
    }
}
