//! `nnverify` — file handling, method dispatch, and exit codes on top of
//! the core library. Every verdict-producing subcommand maps its result
//! to the same exit-code contract:
//!
//! 0: robust / valid / certified / nothing adversarial found
//! 1: counterexample / violation / not certified
//! 2: usage or parse error (bad flags, malformed model or query files)
//! 3: environment error (unreadable files, missing or crashing solver)
//! 4: inconclusive (an incomplete method answered "unknown")

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use nnverify_core::exact::{corner_check, ibp_check, ExactError};
use nnverify_core::grid::{
    grid_check, grid_check_certified, nearest_adversarial, replay, GridError,
};
use nnverify_core::model_io::{
    load_model, save_model, train_perceptron, ModelError, TrainerConfig,
};
use nnverify_core::net::{Convention, Network};
use nnverify_core::numeric::{parse_decimal, ParsedDecimal, Rational};
use nnverify_core::query::{Expectation, RobustnessQuery};
use nnverify_core::smt::{
    declared_inputs, encode_full, encode_grid, run_solver, SmtError, SolverStatus,
};
use nnverify_core::verdict::{Method, Outcome, Verdict};

#[derive(Parser)]
#[command(
    name = "nnverify",
    version,
    about = "Exact robustness checking for small feed-forward networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the well-formedness rules.
    Validate {
        /// Model file (JSON).
        model: PathBuf,
    },
    /// Run the exact forward pass on one input point.
    Infer {
        model: PathBuf,
        /// Comma-separated input coordinates (decimals or fractions).
        #[arg(long)]
        input: String,
    },
    /// Train a perceptron on the binary AND truth table and save it.
    TrainAnd {
        /// Where to write the trained model (JSON).
        #[arg(short, long)]
        output: PathBuf,
        /// Learning rate (decimal or fraction).
        #[arg(long, default_value = "0.1")]
        eta: String,
        /// Passes over the four samples.
        #[arg(long, default_value_t = 100)]
        epochs: u32,
        /// Seed for the initial parameters (0 initializes to all zeros).
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Decide a robustness query against a model.
    Verify {
        model: PathBuf,
        /// Query file (region / grid / expectation DSL).
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// External SMT-LIB2 solver command, e.g. "z3 -in" (smt method only).
        #[arg(long)]
        solver_cmd: Option<String>,
        /// Solver wall-clock budget in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Worker threads for grid scans (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = FormatArg::Human)]
        format: FormatArg,
    },
    /// Report whether the grid verdict transfers to the whole region.
    Covering {
        model: PathBuf,
        query: PathBuf,
    },
    /// Write the SMT-LIB2 encoding of a query to a file.
    Encode {
        model: PathBuf,
        query: PathBuf,
        /// Output path for the script.
        #[arg(short, long)]
        output: PathBuf,
        /// grid: constrain inputs to ladder points; full: encode the
        /// network and negate the expectation.
        #[arg(long, value_enum)]
        style: StyleArg,
    },
    /// Re-run one candidate point (e.g. a solver model) exactly.
    Replay {
        model: PathBuf,
        /// Comma-separated coordinates; a trailing `?` marks a value the
        /// producer truncated.
        #[arg(long)]
        input: String,
        /// Class the point is expected to produce.
        #[arg(long)]
        expect: usize,
    },
    /// Find the violating grid point nearest the query's anchor.
    Nearest {
        model: PathBuf,
        query: PathBuf,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Enumerate the ladder (sound for the grid only).
    Grid,
    /// Worst-corner analysis (complete for single-layer threshold nets).
    Corner,
    /// Interval bound propagation (sound, may answer unknown).
    Ibp,
    /// Full encoding through an external solver, replayed exactly.
    Smt,
    /// corner if the shape permits, then ibp, then grid.
    Auto,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Human,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum StyleArg {
    Grid,
    Full,
}

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ENVIRONMENT: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn environment(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_ENVIRONMENT, message: message.into() }
    }
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::Io { .. } => Failure::environment(e.to_string()),
        _ => Failure::usage(e.to_string()),
    }
}

fn grid_failure(e: GridError) -> Failure {
    match e {
        GridError::Witness(_) => Failure::environment(format!("internal: {e}")),
        _ => Failure::usage(e.to_string()),
    }
}

fn exact_failure(e: ExactError) -> Failure {
    match e {
        ExactError::Witness(_) => Failure::environment(format!("internal: {e}")),
        _ => Failure::usage(e.to_string()),
    }
}

fn smt_failure(e: SmtError) -> Failure {
    match e {
        SmtError::SolverLaunch { .. } | SmtError::SolverProtocol { .. } => {
            Failure::environment(e.to_string())
        }
        _ => Failure::usage(e.to_string()),
    }
}

fn load(path: &Path) -> Result<Network, Failure> {
    load_model(path).map_err(model_failure)
}

fn load_query(path: &Path, input_dim: usize) -> Result<RobustnessQuery, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::environment(format!("cannot read {}: {e}", path.display())))?;
    RobustnessQuery::parse(&text, input_dim)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Comma-separated exact coordinates; truncation markers are rejected.
fn parse_point(text: &str) -> Result<Vec<Rational>, Failure> {
    text.split(',')
        .map(|part| part.trim().parse::<Rational>().map_err(|e| Failure::usage(e.to_string())))
        .collect()
}

/// Comma-separated coordinates that may carry truncation markers.
fn parse_candidate(text: &str) -> Result<Vec<ParsedDecimal>, Failure> {
    text.split(',')
        .map(|part| parse_decimal(part.trim()).map_err(|e| Failure::usage(e.to_string())))
        .collect()
}

fn exit_for(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Robust => EXIT_OK,
        Outcome::CounterexampleFound => EXIT_VIOLATION,
        Outcome::Unknown => EXIT_UNKNOWN,
    }
}

fn verdict_json(v: &Verdict) -> serde_json::Value {
    serde_json::json!({
        "outcome": v.outcome.to_string(),
        "method": v.method.to_string(),
        "points_checked": v.points_checked,
        "witness": v.witness.as_ref().map(|w| {
            w.iter().map(|c| c.render()).collect::<Vec<_>>()
        }),
        "witness_output": v.witness_output.as_ref().map(|obs| {
            serde_json::json!({
                "outputs": obs.outputs.iter().map(|c| c.render()).collect::<Vec<_>>(),
                "class": obs.class,
            })
        }),
        "soundness_note": v.soundness_note,
    })
}

/// Full-network encoding through an external solver; sat models are
/// replayed through the exact semantics before they are believed.
fn smt_verify(
    net: &Network,
    q: &RobustnessQuery,
    solver_cmd: Option<&str>,
    timeout: Duration,
) -> Result<Verdict, Failure> {
    let cmd = solver_cmd.ok_or_else(|| {
        Failure::environment("--method smt needs --solver-cmd (no solver is bundled)")
    })?;
    let script = encode_full(net, q).map_err(smt_failure)?;
    let result = run_solver(&script, cmd, timeout).map_err(smt_failure)?;
    match result.status {
        // The script asserts the negated expectation, so unsat means no
        // region point can violate it.
        SolverStatus::Unsat => Ok(Verdict::robust(Method::Smt, 0, None)),
        SolverStatus::Sat => {
            let model = result.model.expect("sat results carry a model");
            let mut point = Vec::new();
            let mut inexact = false;
            for name in declared_inputs(&script) {
                let value = model.assignments.get(&name).ok_or_else(|| {
                    Failure::environment(format!("solver model is missing {name}"))
                })?;
                inexact |= value.inexact;
                point.push(value.value.clone());
            }
            let note = inexact.then(|| {
                "candidate contains truncated decimals; evaluated at the truncated value"
                    .to_string()
            });
            match Verdict::counterexample(net, &q.expect, point, Method::Smt, 1, note) {
                Ok(v) => Ok(v),
                // A model that does not replay (e.g. truncated past the
                // decision boundary) proves nothing either way.
                Err(rejected) => Ok(Verdict::unknown(
                    Method::Smt,
                    1,
                    format!("solver reported sat but the model does not replay as a violation: {rejected}"),
                )),
            }
        }
        SolverStatus::Unknown => Ok(Verdict::unknown(
            Method::Smt,
            0,
            if result.stderr_excerpt.is_empty() {
                "solver answered unknown".to_string()
            } else {
                format!("solver answered unknown: {}", result.stderr_excerpt)
            },
        )),
        SolverStatus::SolverError => Err(Failure::environment(format!(
            "solver failed: {}",
            if result.stderr_excerpt.is_empty() { "no diagnostics" } else { &result.stderr_excerpt }
        ))),
    }
}

fn decide(
    net: &Network,
    q: &RobustnessQuery,
    method: MethodArg,
    solver_cmd: Option<&str>,
    timeout: Duration,
) -> Result<Verdict, Failure> {
    match method {
        MethodArg::Grid => grid_check(net, q).map_err(grid_failure),
        MethodArg::Corner => corner_check(net, q).map_err(exact_failure),
        MethodArg::Ibp => ibp_check(net, q).map_err(exact_failure),
        MethodArg::Smt => smt_verify(net, q, solver_cmd, timeout),
        MethodArg::Auto => {
            match corner_check(net, q) {
                Ok(v) => return Ok(v),
                Err(ExactError::UnsupportedShape(_)) => {}
                Err(e) => return Err(exact_failure(e)),
            }
            let undecided = match ibp_check(net, q) {
                Ok(v) if v.outcome != Outcome::Unknown => return Ok(v),
                Ok(v) => Some(v),
                Err(ExactError::UnsupportedShape(_)) => None,
                Err(e) => return Err(exact_failure(e)),
            };
            if q.grid_step.is_some() {
                return grid_check(net, q).map_err(grid_failure);
            }
            undecided.ok_or_else(|| {
                Failure::usage(
                    "no applicable method: corner analysis needs a single-layer threshold \
                     network, interval propagation needs a finite region, and the query has \
                     no `grid step`; consider --method smt with --solver-cmd",
                )
            })
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { model } => {
            let net = load(&model)?;
            let report = net.validate();
            let convention = match net.convention() {
                Convention::SignedBias => "signed-bias",
                Convention::PositiveThreshold => "positive-threshold",
            };
            println!("convention: {convention}");
            println!("shape: {} -> {}", net.input_dim(), net.output_dim());
            println!("layers: {}", net.layers().len());
            println!("output binary: {}", report.output_binary);
            println!("bias role positive: {}", report.bias_positive);
            println!("weights in [-1, 1]: {}", report.weights_in_range);
            if report.violations.is_empty() {
                println!("violations: none");
            } else {
                for v in &report.violations {
                    println!("violation: {v}");
                }
            }
            if report.is_valid() {
                println!("valid: yes");
                Ok(EXIT_OK)
            } else {
                println!("valid: no");
                Ok(EXIT_VIOLATION)
            }
        }
        Command::Infer { model, input } => {
            let net = load(&model)?;
            let point = parse_point(&input)?;
            let outputs = net.forward(&point).map_err(|e| Failure::usage(e.to_string()))?;
            let class = net.classify(&point).map_err(|e| Failure::usage(e.to_string()))?;
            let rendered: Vec<String> = outputs.iter().map(|o| o.render()).collect();
            println!("outputs: ({})", rendered.join(", "));
            println!("class: {class}");
            Ok(EXIT_OK)
        }
        Command::TrainAnd { output, eta, epochs, seed } => {
            let eta: Rational =
                eta.parse().map_err(|e| Failure::usage(format!("--eta: {e}")))?;
            let data: Vec<(Vec<u8>, u8)> = vec![
                (vec![0, 0], 0),
                (vec![0, 1], 0),
                (vec![1, 0], 0),
                (vec![1, 1], 1),
            ];
            let cfg = TrainerConfig { eta, n_iter: epochs, seed };
            let net = train_perceptron(&data, &cfg).map_err(|e| Failure::usage(e.to_string()))?;
            let layer = &net.layers()[0];
            let weights: Vec<String> = layer.weights()[0].iter().map(|w| w.render()).collect();
            println!("weights: ({})", weights.join(", "));
            println!("bias: {}", layer.bias()[0].render());
            let mut learned = true;
            for (x, y) in &data {
                let point: Vec<Rational> =
                    x.iter().map(|&b| Rational::from_int(i64::from(b))).collect();
                let class =
                    net.classify(&point).map_err(|e| Failure::usage(e.to_string()))?;
                learned &= class == *y as usize;
            }
            println!("reproduces AND: {}", if learned { "yes" } else { "no" });
            save_model(&net, &output).map_err(model_failure)?;
            println!("wrote {}", output.display());
            Ok(EXIT_OK)
        }
        Command::Verify { model, query, method, solver_cmd, timeout, jobs, format } => {
            let net = load(&model)?;
            let q = load_query(&query, net.input_dim())?;
            let timeout = Duration::from_secs(timeout);
            let verdict = match jobs {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| Failure::environment(format!("thread pool: {e}")))?;
                    pool.install(|| decide(&net, &q, method, solver_cmd.as_deref(), timeout))?
                }
                None => decide(&net, &q, method, solver_cmd.as_deref(), timeout)?,
            };
            match format {
                FormatArg::Human => println!("{verdict}"),
                FormatArg::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&verdict_json(&verdict))
                        .expect("verdict serializes")
                ),
            }
            Ok(exit_for(verdict.outcome))
        }
        Command::Covering { model, query } => {
            let net = load(&model)?;
            let q = load_query(&query, net.input_dim())?;
            let (verdict, certificate) = grid_check_certified(&net, &q).map_err(grid_failure)?;
            println!("{verdict}");
            match certificate {
                Some(cert) => {
                    println!("{cert}");
                    Ok(if cert.certified() { EXIT_OK } else { EXIT_VIOLATION })
                }
                None => {
                    println!(
                        "covering: not applicable (needs a single-layer threshold network)"
                    );
                    Ok(EXIT_VIOLATION)
                }
            }
        }
        Command::Encode { model, query, output, style } => {
            let net = load(&model)?;
            let q = load_query(&query, net.input_dim())?;
            let script = match style {
                StyleArg::Grid => encode_grid(&net, &q),
                StyleArg::Full => encode_full(&net, &q),
            }
            .map_err(smt_failure)?;
            fs::write(&output, script.text.as_bytes()).map_err(|e| {
                Failure::environment(format!("cannot write {}: {e}", output.display()))
            })?;
            println!(
                "wrote {} ({} style, {} bytes)",
                output.display(),
                script.style,
                script.text.len()
            );
            Ok(EXIT_OK)
        }
        Command::Replay { model, input, expect } => {
            let net = load(&model)?;
            let candidate = parse_candidate(&input)?;
            let verdict =
                replay(&net, &candidate, &Expectation::Class(expect)).map_err(grid_failure)?;
            println!("{verdict}");
            Ok(exit_for(verdict.outcome))
        }
        Command::Nearest { model, query } => {
            let net = load(&model)?;
            let q = load_query(&query, net.input_dim())?;
            match nearest_adversarial(&net, &q).map_err(grid_failure)? {
                Some(report) => {
                    println!("nearest adversarial: {report}");
                    Ok(EXIT_VIOLATION)
                }
                None => {
                    println!("no adversarial point on the sampled grid");
                    Ok(EXIT_OK)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
