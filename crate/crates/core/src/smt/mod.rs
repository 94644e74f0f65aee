//! SMT-LIB2 pillar: script generation for robustness queries, an exact
//! in-house evaluator for those scripts, and a text-over-subprocess
//! driver for external QF_LRA solvers.

pub mod driver;
pub mod encode;
pub mod eval;
pub mod sexpr;

use thiserror::Error;

pub use driver::{declared_inputs, parse_model, run_solver, SmtModel, SolverResult, SolverStatus};
pub use encode::{encode_full, encode_grid, smt_rational, SmtScript, Style};

use crate::query::DslError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmtError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("arity mismatch: query has {query} dimensions, network takes {network} inputs")]
    ArityMismatch { query: usize, network: usize },
    #[error("activation not encodable: {0}")]
    UnsupportedActivation(String),
    #[error("failed to launch solver `{command}`: {message}")]
    SolverLaunch { command: String, message: String },
    #[error("cannot parse solver output: {message}")]
    SolverProtocol { message: String, raw: String },
}
