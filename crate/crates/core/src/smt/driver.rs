//! External solver driver: feed a script to a subprocess over stdin,
//! read `check-sat`/`get-model` output back, parse the model exactly.
//! The contract is pure text — no solver library is linked, so any
//! SMT-LIB2-speaking binary works (`z3 -in`, `cvc5 --lang smt2`, …).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::numeric::{parse_decimal, ParsedDecimal};
use crate::smt::sexpr::{parse_all, Sexpr};
use crate::smt::{SmtError, SmtScript};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    SolverError,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverStatus::Sat => write!(f, "sat"),
            SolverStatus::Unsat => write!(f, "unsat"),
            SolverStatus::Unknown => write!(f, "unknown"),
            SolverStatus::SolverError => write!(f, "solver-error"),
        }
    }
}

/// Variable assignments extracted from a `get-model` response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtModel {
    pub assignments: BTreeMap<String, ParsedDecimal>,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Present exactly when the status is `sat`.
    pub model: Option<SmtModel>,
    pub stderr_excerpt: String,
}

/// Recursively collects `(define-fun NAME () SORT VALUE)` forms; cvc5's
/// legacy `(model …)` wrapper and arbitrary nesting are tolerated.
fn collect_define_funs<'a>(forms: &'a [Sexpr], out: &mut Vec<(&'a str, &'a Sexpr)>) {
    for form in forms {
        let Some(items) = form.as_list() else { continue };
        if let [head, name, args, _sort, value] = items {
            if head.as_atom() == Some("define-fun")
                && args.as_list().is_some_and(|a| a.is_empty())
            {
                if let Some(name) = name.as_atom() {
                    out.push((name, value));
                    continue;
                }
            }
        }
        collect_define_funs(items, out);
    }
}

/// Parses solver model text into exact assignments. Every name in
/// `required` must be defined; values may be decimals (with or without
/// the truncation marker), `(/ a b)` fractions, or `(- …)` negations.
pub fn parse_model(raw: &str, required: &[String]) -> Result<SmtModel, SmtError> {
    let forms = parse_all(raw).map_err(|message| SmtError::SolverProtocol {
        message,
        raw: raw.to_string(),
    })?;
    let mut defs = Vec::new();
    collect_define_funs(&forms, &mut defs);
    let mut assignments = BTreeMap::new();
    for (name, value) in defs {
        let text = value.to_string();
        let parsed = parse_decimal(&text).map_err(|e| SmtError::SolverProtocol {
            message: format!("cannot read value of `{name}`: {e} (fragment `{text}`)"),
            raw: raw.to_string(),
        })?;
        assignments.insert(name.to_string(), parsed);
    }
    for name in required {
        if !assignments.contains_key(name) {
            return Err(SmtError::SolverProtocol {
                message: format!("model does not define required variable `{name}`"),
                raw: raw.to_string(),
            });
        }
    }
    Ok(SmtModel { assignments, raw: raw.to_string() })
}

/// Input variables a script declares (the `x_*` reals).
pub fn declared_inputs(script: &SmtScript) -> Vec<String> {
    let Ok(forms) = parse_all(&script.text) else { return Vec::new() };
    forms
        .iter()
        .filter_map(|form| {
            let items = form.as_list()?;
            match items {
                [head, name, _sort]
                    if head.as_atom() == Some("declare-const")
                        && name.as_atom().is_some_and(|n| n.starts_with("x_")) =>
                {
                    Some(name.as_atom().unwrap().to_string())
                }
                _ => None,
            }
        })
        .collect()
}

fn excerpt(text: &str) -> String {
    const LIMIT: usize = 500;
    let trimmed = text.trim();
    if trimmed.len() <= LIMIT {
        return trimmed.to_string();
    }
    let mut cut = LIMIT;
    while !trimmed.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}…", &trimmed[..cut])
}

/// Runs the solver command with the script on stdin. The command string
/// is split on whitespace (program first, then arguments). The first
/// output token decides the status; on `sat` the rest of the output is
/// parsed as the model. A solver still running at the deadline is
/// killed and reported as `unknown`.
pub fn run_solver(
    script: &SmtScript,
    solver_cmd: &str,
    timeout: Duration,
) -> Result<SolverResult, SmtError> {
    let mut parts = solver_cmd.split_whitespace();
    let program = parts.next().ok_or_else(|| SmtError::SolverLaunch {
        command: solver_cmd.to_string(),
        message: "empty solver command".into(),
    })?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::SolverLaunch {
            command: solver_cmd.to_string(),
            message: e.to_string(),
        })?;
    {
        let mut stdin = child.stdin.take().expect("stdin piped");
        // A dead solver closes the pipe; that surfaces via its output,
        // not as a write error here.
        let _ = stdin.write_all(script.text.as_bytes());
    }
    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let stdout_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout_pipe.read_to_string(&mut buf);
        buf
    });
    let stderr_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });
    let deadline = Instant::now() + timeout;
    let timed_out = loop {
        match child.try_wait() {
            Ok(Some(_)) => break false,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break true;
                }
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => {
                return Err(SmtError::SolverLaunch {
                    command: solver_cmd.to_string(),
                    message: format!("wait failed: {e}"),
                })
            }
        }
    };
    if timed_out {
        // Orphaned grandchildren may still hold the pipes open, so the
        // reader threads are left to finish on their own.
        return Ok(SolverResult {
            status: SolverStatus::Unknown,
            model: None,
            stderr_excerpt: format!(
                "solver timed out after {:.1}s and was killed",
                timeout.as_secs_f64()
            ),
        });
    }
    let stdout = stdout_reader.join().unwrap_or_default();
    let stderr = stderr_reader.join().unwrap_or_default();
    let first_token = stdout.split_whitespace().next().unwrap_or("");
    let status = match first_token {
        "sat" => SolverStatus::Sat,
        "unsat" => SolverStatus::Unsat,
        "unknown" => SolverStatus::Unknown,
        _ => {
            if stdout.trim_start().starts_with("(error") || stdout.trim().is_empty() {
                return Ok(SolverResult {
                    status: SolverStatus::SolverError,
                    model: None,
                    stderr_excerpt: if stderr.trim().is_empty() {
                        excerpt(&stdout)
                    } else {
                        excerpt(&stderr)
                    },
                });
            }
            return Err(SmtError::SolverProtocol {
                message: format!("unrecognized solver response token `{first_token}`"),
                raw: stdout,
            });
        }
    };
    let model = if status == SolverStatus::Sat {
        let rest = stdout.trim_start().strip_prefix("sat").unwrap_or(&stdout);
        Some(parse_model(rest, &declared_inputs(script))?)
    } else {
        None
    };
    Ok(SolverResult { status, model, stderr_excerpt: excerpt(&stderr) })
}
