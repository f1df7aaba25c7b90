//! `dchar`: JSON in, deterministic JSON report out.

mod input;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dchar_core::checker::{self, CheckOptions, Verdict};
use dchar_core::{dissipativity, fixtures, forms, pencil, witness, Error};
use serde::Serialize;
use serde_json::{json, Value};

use input::{InputError, Loader};
use report::RunReport;

const EXIT_FIXTURES_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
/// Seeds per fixture witness search.
const FIXTURE_SEEDS: u64 = 5;

#[derive(Debug, Parser)]
#[command(name = "dchar", version)]
#[command(about = "Necessary-condition checks for local solvability of doubly characteristic operators")]
struct Cli {
    /// Seed for every randomized routine.
    #[arg(long, global = true, default_value_t = dchar_core::rng::DEFAULT_SEED)]
    seed: u64,

    /// Human-readable summary table instead of JSON.
    #[arg(long, global = true)]
    text: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Trans,
    Bracket,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Poisson bracket C of the two forms, in both sign conventions
    Bracket { input: PathBuf },
    /// Non-dissipativity verdict with trace certificate
    Dissipativity { input: PathBuf },
    /// Rank profile of the pencil cosθ·A + sinθ·B
    Pencil { input: PathBuf },
    /// Search for a transversal or bracket witness on {Q_A = Q_B = 0}
    Witness {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "trans")]
        mode: Mode,
        #[arg(long, default_value_t = witness::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Verdict for a left-invariant operator on a Heisenberg group
    CheckHeisenberg {
        input: PathBuf,
        #[arg(long, default_value_t = witness::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Verdict for an operator on a 2-step nilpotent group
    #[command(name = "check-2step")]
    CheckTwoStep {
        input: PathBuf,
        #[arg(long, default_value_t = witness::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Verdict at a point from T = Dq(z) and the coefficient forms
    CheckPoint {
        input: PathBuf,
        #[arg(long, default_value_t = witness::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Quotient a graded nilpotent algebra to a 2-step group spec
    ReduceStep { input: PathBuf },
    /// Run the built-in counterexample corpus
    Fixtures {
        #[arg(long, default_value_t = witness::DEFAULT_RESTARTS)]
        restarts: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bracket { .. } => "bracket",
            Command::Dissipativity { .. } => "dissipativity",
            Command::Pencil { .. } => "pencil",
            Command::Witness { .. } => "witness",
            Command::CheckHeisenberg { .. } => "check-heisenberg",
            Command::CheckTwoStep { .. } => "check-2step",
            Command::CheckPoint { .. } => "check-point",
            Command::ReduceStep { .. } => "reduce-step",
            Command::Fixtures { .. } => "fixtures",
        }
    }

    fn input(&self) -> Option<&Path> {
        match self {
            Command::Bracket { input }
            | Command::Dissipativity { input }
            | Command::Pencil { input }
            | Command::Witness { input, .. }
            | Command::CheckHeisenberg { input, .. }
            | Command::CheckTwoStep { input, .. }
            | Command::CheckPoint { input, .. }
            | Command::ReduceStep { input } => Some(input),
            Command::Fixtures { .. } => None,
        }
    }
}

enum Failure {
    Input(InputError),
    Inconclusive(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

/// Budget exhaustion and non-convergence are numerical; everything else is
/// a property of the input.
fn classify(e: Error) -> Failure {
    match e {
        Error::NumericalInconclusive { .. } | Error::NoConvergence { .. } | Error::NondegenerateMuNotFound { .. } => {
            Failure::Inconclusive(e.to_string())
        }
        other => Failure::Input(InputError {
            path: ".".into(),
            message: other.to_string(),
        }),
    }
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize to JSON")
}

fn verdict_warnings(v: &Verdict) -> Vec<String> {
    v.notes
        .iter()
        .filter(|n| n.contains("within a factor 10"))
        .cloned()
        .collect()
}

struct Outcome {
    result: Value,
    warnings: Vec<String>,
    exit: u8,
}

fn run(cmd: &Command, seed: u64, bytes: &[u8]) -> Result<Outcome, Failure> {
    let mut loader = Loader::default();
    let mut exit = 0;
    let mut warnings = Vec::new();
    let result = match cmd {
        Command::Bracket { .. } => {
            let f = input::forms(bytes, &mut loader)?;
            let s = f.structure_or_canonical()?;
            let c = forms::poisson_bracket(&f.a, &f.b, &s).map_err(classify)?;
            let via = forms::bracket_via_hamilton(&f.a, &f.b, &s).map_err(classify)?;
            let deviation = (via.matrix() - c.matrix()).norm() / c.norm().max(f64::MIN_POSITIVE);
            json!({
                "structure": if f.structure.is_some() { "given" } else { "canonical" },
                "C_coordinate": c,
                "C_commutator": c.scale(-1.0),
                "conventions": {
                    "C_coordinate": "Q_C(z) = -(grad Q_A)^t J (grad Q_B), i.e. C = -2(AJB - BJA); used by every verdict",
                    "C_commutator": "C = 2(AJB - BJA), the opposite global sign"
                },
                "hamilton_commutator_deviation": if c.is_zero() { via.norm() } else { deviation },
            })
        }
        Command::Dissipativity { .. } => {
            let f = input::forms(bytes, &mut loader)?;
            let verdict = dissipativity::is_non_dissipative(&f.a, &f.b).map_err(classify)?;
            if let dissipativity::DissipativityVerdict::NonDissipative { max_min_eig, .. } = verdict {
                if max_min_eig > -10.0 * dissipativity::EIG_TOL {
                    warnings.push(format!(
                        "best smallest eigenvalue {max_min_eig:e} within a factor 10 of the tolerance"
                    ));
                }
            }
            let certificate = dissipativity::trace_certificate(&f.a, &f.b).map_err(classify)?;
            json!({ "verdict": value(&verdict), "certificate": value(&certificate) })
        }
        Command::Pencil { .. } => {
            let f = input::forms(bytes, &mut loader)?;
            let p = pencil::rank_profile(&f.a, &f.b).map_err(classify)?;
            for t in &p.marginal_thetas {
                warnings.push(format!(
                    "rank decision at theta = {t} within a factor 10 of the rank cut"
                ));
            }
            value(&p)
        }
        Command::Witness { mode, restarts, .. } => {
            let f = input::forms(bytes, &mut loader)?;
            let outcome = match mode {
                Mode::Trans => witness::transversality_witness(&f.a, &f.b, *restarts, seed),
                Mode::Bracket => {
                    let c = match &f.c {
                        Some(c) => c.clone(),
                        None => forms::poisson_bracket(&f.a, &f.b, &f.structure_or_canonical()?).map_err(classify)?,
                    };
                    witness::bracket_witness(&f.a, &f.b, &c, *restarts, seed)
                }
            }
            .map_err(classify)?;
            let mode = match mode {
                Mode::Trans => "trans",
                Mode::Bracket => "bracket",
            };
            json!({ "mode": mode, "restarts": restarts, "outcome": value(&outcome) })
        }
        Command::CheckHeisenberg { restarts, .. } => {
            let spec = input::heisenberg(bytes, &mut loader)?;
            let v = checker::heisenberg_verdict_with(
                &spec,
                &CheckOptions {
                    seed,
                    restarts: *restarts,
                },
            )
            .map_err(classify)?;
            warnings.extend(verdict_warnings(&v));
            value(&v)
        }
        Command::CheckTwoStep { restarts, .. } => {
            let spec = input::two_step(bytes, &mut loader)?;
            let v = checker::two_step_verdict_with(
                &spec,
                &CheckOptions {
                    seed,
                    restarts: *restarts,
                },
            )
            .map_err(classify)?;
            warnings.extend(verdict_warnings(&v));
            value(&v)
        }
        Command::CheckPoint { restarts, .. } => {
            let spec = input::point(bytes, &mut loader)?;
            let v = checker::point_symbol_verdict_with(
                &spec,
                &CheckOptions {
                    seed,
                    restarts: *restarts,
                },
            )
            .map_err(classify)?;
            warnings.extend(verdict_warnings(&v));
            value(&v)
        }
        Command::ReduceStep { .. } => {
            let lie = input::lie(bytes, &mut loader)?;
            value(&checker::step_reduction(&lie.constants, lie.a_re, lie.a_im).map_err(classify)?)
        }
        Command::Fixtures { restarts } => {
            let seeds: Vec<u64> = (0..FIXTURE_SEEDS).map(|i| seed.wrapping_add(i)).collect();
            let r = fixtures::run_all(&seeds, *restarts).map_err(classify)?;
            if !r.passed {
                exit = EXIT_FIXTURES_FAILED;
            }
            value(&r)
        }
    };
    let mut all = loader.warnings;
    all.extend(warnings);
    Ok(Outcome {
        result,
        warnings: all,
        exit,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let source = match cli.command.input().map(input::read_source).transpose() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("input error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let bytes = source.as_ref().map(|s| s.bytes.as_slice()).unwrap_or_default();
    match run(&cli.command, cli.seed, bytes) {
        Ok(out) => {
            let report = RunReport {
                schema_version: report::SCHEMA_VERSION,
                command: cli.command.name().to_string(),
                inputs_digest: source.map(|s| s.digest),
                seed: cli.seed,
                result: out.result,
                warnings: out.warnings,
            };
            let text = if cli.text {
                report::to_text(&report)
            } else {
                report::to_json(&report) + "\n"
            };
            // a closed downstream pipe is not an error of ours
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("cannot write report: {e}");
                    ExitCode::FAILURE
                }
                _ => ExitCode::from(out.exit),
            }
        }
        Err(Failure::Input(e)) => {
            eprintln!("input error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Inconclusive(msg)) => {
            eprintln!("numerically inconclusive: {msg}");
            ExitCode::from(EXIT_INCONCLUSIVE)
        }
    }
}
