//! Verification verdicts and the witness self-check.
//!
//! A `CounterexampleFound` verdict can only be constructed by re-running
//! the witness through the exact network semantics and confirming it
//! really violates the expectation. Every engine (grid, corner, interval,
//! solver-backed) funnels through that one constructor, so a claimed
//! counterexample is a checked counterexample.

use std::fmt;

use thiserror::Error;

use crate::net::{NetError, Network};
use crate::numeric::Rational;
use crate::query::Expectation;

/// Which engine produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Grid,
    Corner,
    Ibp,
    Smt,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Grid => write!(f, "grid"),
            Method::Corner => write!(f, "corner"),
            Method::Ibp => write!(f, "ibp"),
            Method::Smt => write!(f, "smt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Robust,
    CounterexampleFound,
    Unknown,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Robust => write!(f, "robust"),
            Outcome::CounterexampleFound => write!(f, "counterexample"),
            Outcome::Unknown => write!(f, "unknown"),
        }
    }
}

/// What the network actually did at a point: raw outputs plus the class
/// they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observed {
    pub outputs: Vec<Rational>,
    pub class: usize,
}

/// Evaluates the network at `point` and records outputs + class.
pub fn observe(net: &Network, point: &[Rational]) -> Result<Observed, NetError> {
    Ok(Observed {
        outputs: net.forward(point)?,
        class: net.classify(point)?,
    })
}

/// Does an observation satisfy the expectation?
///
/// * `Class(c)`: the induced class equals `c`.
/// * `Output(o)`: the network has a single output and it equals `o`
///   exactly (so an identity output of 0.999 does not satisfy `output 1`).
pub fn satisfies(expect: &Expectation, observed: &Observed) -> bool {
    match expect {
        Expectation::Class(c) => observed.class == *c,
        Expectation::Output(o) => {
            observed.outputs.len() == 1 && observed.outputs[0] == Rational::from_int(*o as i64)
        }
    }
}

/// Raised when a would-be counterexample fails re-validation. Reaching
/// this is an engine bug (or a lying solver), never a property of the
/// model under analysis.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("witness rejected: point ({}) does not violate the expectation ({detail})", render_point(point))]
pub struct WitnessRejected {
    pub point: Vec<Rational>,
    pub detail: String,
}

fn render_point(point: &[Rational]) -> String {
    let coords: Vec<String> = point.iter().map(|c| c.render()).collect();
    coords.join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// The violating point, present iff `outcome == CounterexampleFound`.
    pub witness: Option<Vec<Rational>>,
    /// Network behavior at the witness.
    pub witness_output: Option<Observed>,
    pub method: Method,
    pub points_checked: u64,
    /// Present when the verdict is weaker than a full-region claim (e.g.
    /// "no counterexample on the grid"), or carries a caveat worth reading.
    pub soundness_note: Option<String>,
}

impl Verdict {
    pub fn robust(method: Method, points_checked: u64, note: Option<String>) -> Verdict {
        Verdict {
            outcome: Outcome::Robust,
            witness: None,
            witness_output: None,
            method,
            points_checked,
            soundness_note: note,
        }
    }

    pub fn unknown(method: Method, points_checked: u64, note: String) -> Verdict {
        Verdict {
            outcome: Outcome::Unknown,
            witness: None,
            witness_output: None,
            method,
            points_checked,
            soundness_note: Some(note),
        }
    }

    /// The only way to build a counterexample verdict: replays `witness`
    /// through the exact semantics and refuses if it does not violate
    /// `expect`.
    pub fn counterexample(
        net: &Network,
        expect: &Expectation,
        witness: Vec<Rational>,
        method: Method,
        points_checked: u64,
        note: Option<String>,
    ) -> Result<Verdict, WitnessRejected> {
        let observed = observe(net, &witness).map_err(|e| WitnessRejected {
            point: witness.clone(),
            detail: format!("evaluation failed: {e}"),
        })?;
        if satisfies(expect, &observed) {
            return Err(WitnessRejected {
                point: witness,
                detail: format!(
                    "observed class {} with outputs ({}) satisfies the expectation",
                    observed.class,
                    render_point(&observed.outputs)
                ),
            });
        }
        Ok(Verdict {
            outcome: Outcome::CounterexampleFound,
            witness: Some(witness),
            witness_output: Some(observed),
            method,
            points_checked,
            soundness_note: note,
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", self.outcome)?;
        writeln!(f, "method: {}", self.method)?;
        write!(f, "points checked: {}", self.points_checked)?;
        if let Some(w) = &self.witness {
            let coords: Vec<String> = w.iter().map(|c| c.render()).collect();
            write!(f, "\nwitness: ({})", coords.join(", "))?;
        }
        if let Some(obs) = &self.witness_output {
            let outs: Vec<String> = obs.outputs.iter().map(|c| c.render()).collect();
            write!(f, "\nwitness output: ({}) -> class {}", outs.join(", "), obs.class)?;
        }
        if let Some(note) = &self.soundness_note {
            write!(f, "\nnote: {note}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Convention, Layer};

    fn and_gate() -> Network {
        let layer = Layer::new(
            0,
            vec![vec![Rational::new(1, 2), Rational::new(1, 2)]],
            vec![Rational::new(-9, 10)],
            Activation::Threshold(Rational::zero()),
        )
        .unwrap();
        Network::new(vec![layer], Convention::SignedBias).unwrap()
    }

    #[test]
    fn counterexample_accepts_genuine_violation() {
        let net = and_gate();
        let witness = vec![Rational::zero(), Rational::zero()];
        let v = Verdict::counterexample(
            &net,
            &Expectation::Class(1),
            witness.clone(),
            Method::Grid,
            1,
            None,
        )
        .unwrap();
        assert_eq!(v.outcome, Outcome::CounterexampleFound);
        assert_eq!(v.witness.as_deref(), Some(&witness[..]));
        assert_eq!(v.witness_output.as_ref().unwrap().class, 0);
    }

    #[test]
    fn counterexample_rejects_satisfying_point() {
        let net = and_gate();
        let err = Verdict::counterexample(
            &net,
            &Expectation::Class(1),
            vec![Rational::one(), Rational::one()],
            Method::Grid,
            1,
            None,
        )
        .unwrap_err();
        assert!(err.detail.contains("satisfies"));
    }

    #[test]
    fn counterexample_rejects_bad_arity() {
        let net = and_gate();
        assert!(Verdict::counterexample(
            &net,
            &Expectation::Class(1),
            vec![Rational::zero()],
            Method::Smt,
            1,
            None,
        )
        .is_err());
    }

    #[test]
    fn output_expectation_is_exact() {
        let layer = Layer::new(
            0,
            vec![vec![Rational::one()]],
            vec![Rational::zero()],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(vec![layer], Convention::SignedBias).unwrap();
        let obs = observe(&net, &[Rational::new(999, 1000)]).unwrap();
        assert!(!satisfies(&Expectation::Output(1), &obs));
        let obs = observe(&net, &[Rational::one()]).unwrap();
        assert!(satisfies(&Expectation::Output(1), &obs));
        // Output expectations never match multi-output networks.
        let wide = Layer::new(
            0,
            vec![vec![Rational::one()], vec![Rational::one()]],
            vec![Rational::zero(), Rational::zero()],
            Activation::Identity,
        )
        .unwrap();
        let wide = Network::new(vec![wide], Convention::SignedBias).unwrap();
        let obs = observe(&wide, &[Rational::one()]).unwrap();
        assert!(!satisfies(&Expectation::Output(1), &obs));
    }

    #[test]
    fn display_contains_all_fields() {
        let net = and_gate();
        let v = Verdict::counterexample(
            &net,
            &Expectation::Class(1),
            vec![Rational::new(7, 10), Rational::new(7, 10)],
            Method::Corner,
            1,
            Some("region-complete".into()),
        )
        .unwrap();
        let text = v.to_string();
        for needle in ["counterexample", "corner", "0.7", "class 0", "region-complete"] {
            assert!(text.contains(needle), "missing {needle} in {text}");
        }
    }
}
