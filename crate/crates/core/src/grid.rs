//! Ladder falsification: enumerate the query's grid, run every point
//! through the network, and report the first violation in enumeration
//! order. Also hosts the nearest-adversarial search over the same grid
//! and the replay path for externally produced candidate points.
//!
//! Evaluation may run on the current rayon pool; all results — including
//! tie-broken witnesses — are schedule-independent, because selection is
//! always by minimal enumeration index or by (distance, point) order,
//! both of which have unique minima.

use rayon::prelude::*;
use thiserror::Error;

use crate::net::{NetError, Network};
use crate::numeric::{ParsedDecimal, Rational};
use crate::query::{DslError, Expectation, Norm, RobustnessQuery};
use crate::verdict::{observe, satisfies, Method, Verdict, WitnessRejected};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("arity mismatch: query has {query} dimensions, network takes {network} inputs")]
    ArityMismatch { query: usize, network: usize },
    #[error("query has no anchor; the nearest-adversarial search needs one")]
    AnchorMissing,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Witness(#[from] WitnessRejected),
}

fn check_arity(net: &Network, q: &RobustnessQuery) -> Result<(), GridError> {
    if q.input_dim() != net.input_dim() {
        return Err(GridError::ArityMismatch {
            query: q.input_dim(),
            network: net.input_dim(),
        });
    }
    Ok(())
}

/// Scans every grid point in lexicographic order. The first violating
/// point becomes the witness; with none, the verdict is Robust *for the
/// sampled points only*, and the soundness note says so. Points between
/// ladder steps are not this function's claim — see the covering
/// certificate for when the grid verdict transfers to the whole region.
pub fn grid_check(net: &Network, q: &RobustnessQuery) -> Result<Verdict, GridError> {
    check_arity(net, q)?;
    let grid = q.grid()?;
    let total = grid.len();
    if total == 0 {
        return Ok(Verdict::robust(
            Method::Grid,
            0,
            Some("grid is empty: no ladder point falls inside the region; vacuously robust".into()),
        ));
    }
    let first_violation = (0..total).into_par_iter().find_first(|&i| {
        let point = grid.point(i);
        let obs = observe(net, &point).expect("arity checked before the scan");
        !satisfies(&q.expect, &obs)
    });
    match first_violation {
        None => Ok(Verdict::robust(
            Method::Grid,
            total,
            Some(
                "no counterexample on the sampled grid; real-valued points between ladder steps \
                 are unchecked"
                    .into(),
            ),
        )),
        Some(i) => {
            let witness = grid.point(i);
            Ok(Verdict::counterexample(net, &q.expect, witness, Method::Grid, i + 1, None)?)
        }
    }
}

/// Grid scan plus a covering attempt. When the certificate holds, the
/// grid verdict is provably the full-region verdict, so the sampling
/// caveat is dropped from the verdict. Networks outside the certifiable
/// shape just keep their caveat (certificate slot stays empty).
pub fn grid_check_certified(
    net: &Network,
    q: &RobustnessQuery,
) -> Result<(Verdict, Option<crate::exact::CoveringCertificate>), GridError> {
    let mut verdict = grid_check(net, q)?;
    match crate::exact::check_covering(net, q) {
        Ok(cert) => {
            if cert.certified() {
                verdict.soundness_note = None;
            }
            Ok((verdict, Some(cert)))
        }
        Err(crate::exact::ExactError::UnsupportedShape(_)) => Ok((verdict, None)),
        Err(crate::exact::ExactError::Dsl(e)) => Err(GridError::Dsl(e)),
        Err(crate::exact::ExactError::ArityMismatch { query, network }) => {
            Err(GridError::ArityMismatch { query, network })
        }
        Err(crate::exact::ExactError::Net(e)) => Err(GridError::Net(e)),
        Err(crate::exact::ExactError::Witness(e)) => Err(GridError::Witness(e)),
        Err(crate::exact::ExactError::InvalidInterval(_)) => unreachable!("region is validated"),
    }
}

/// Distance between two points under the query norm. For the 2-norm the
/// *squared* distance is returned, which keeps the value rational and
/// preserves the ordering.
pub fn p_distance(a: &[Rational], b: &[Rational], norm: Norm) -> Rational {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match norm {
        Norm::One => diffs.fold(Rational::zero(), |acc, d| &acc + &d),
        Norm::Two => diffs.fold(Rational::zero(), |acc, d| &acc + &(&d * &d)),
        Norm::Inf => diffs.fold(Rational::zero(), |acc, d| if d > acc { d } else { acc }),
    }
}

/// A grid point violating the expectation, at minimal distance from the
/// anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialReport {
    pub witness: Vec<Rational>,
    /// Distance from the anchor; for the 2-norm this is the squared
    /// distance (exactness over radicals).
    pub distance: Rational,
    pub norm: Norm,
}

impl std::fmt::Display for AdversarialReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let coords: Vec<String> = self.witness.iter().map(|c| c.render()).collect();
        let kind = match self.norm {
            Norm::Two => "squared 2-norm",
            Norm::One => "1-norm",
            Norm::Inf => "inf-norm",
        };
        write!(f, "({}) at {} distance {}", coords.join(", "), kind, self.distance.render())
    }
}

/// Finds the grid point violating the expectation that lies nearest the
/// anchor under the query norm; ties break to the lexicographically
/// smallest witness. `None` when every grid point satisfies the
/// expectation. When the anchor itself violates and sits on the grid,
/// the report is the anchor at distance zero.
pub fn nearest_adversarial(
    net: &Network,
    q: &RobustnessQuery,
) -> Result<Option<AdversarialReport>, GridError> {
    check_arity(net, q)?;
    let anchor = q.anchor.as_ref().ok_or(GridError::AnchorMissing)?;
    if anchor.len() != net.input_dim() {
        return Err(GridError::ArityMismatch {
            query: anchor.len(),
            network: net.input_dim(),
        });
    }
    let grid = q.grid()?;
    let best = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let point = grid.point(i);
            let obs = observe(net, &point).expect("arity checked before the scan");
            if satisfies(&q.expect, &obs) {
                None
            } else {
                let d = p_distance(anchor, &point, q.norm);
                Some((d, point))
            }
        })
        .reduce_with(|a, b| {
            // (distance, then coordinates) has a unique minimum, so this
            // reduction is schedule-independent.
            match a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)) {
                std::cmp::Ordering::Greater => b,
                _ => a,
            }
        });
    Ok(best.map(|(distance, witness)| AdversarialReport { witness, distance, norm: q.norm }))
}

/// Replays one externally supplied candidate point (typically a solver
/// model) through the exact forward pass. A mismatch is a genuine
/// counterexample; a match only vouches for this single point. Truncated
/// decimals in the candidate are evaluated at their truncated value and
/// flagged in the note.
pub fn replay(
    net: &Network,
    candidate: &[ParsedDecimal],
    expect: &Expectation,
) -> Result<Verdict, GridError> {
    if candidate.len() != net.input_dim() {
        return Err(GridError::ArityMismatch {
            query: candidate.len(),
            network: net.input_dim(),
        });
    }
    let point: Vec<Rational> = candidate.iter().map(|p| p.value.clone()).collect();
    let inexact = candidate.iter().any(|p| p.inexact);
    let inexact_note = "candidate contains truncated decimals; evaluated at the truncated value";
    let obs = observe(net, &point)?;
    if satisfies(expect, &obs) {
        let mut note = String::from("replayed a single candidate point; no region claim");
        if inexact {
            note.push_str("; ");
            note.push_str(inexact_note);
        }
        Ok(Verdict::robust(Method::Grid, 1, Some(note)))
    } else {
        let note = inexact.then(|| inexact_note.to_string());
        Ok(Verdict::counterexample(net, expect, point, Method::Grid, 1, note)?)
    }
}
