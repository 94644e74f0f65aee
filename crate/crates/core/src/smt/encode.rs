//! SMT-LIB2 emission. Two styles:
//!
//! * `grid` — only the candidate set: region bounds plus per-dimension
//!   ladder disjunctions. Satisfying assignments are exactly the grid
//!   points; the network is deliberately *not* encoded, since candidates
//!   get replayed through the exact semantics anyway.
//! * `full` — the whole piecewise-linear network plus the *negation* of
//!   the expectation: `sat` models are real-valued in-region
//!   counterexamples, `unsat` proves robustness over the entire region.
//!
//! All constants are exact rationals — integers as `N.0`, everything
//! else as `(/ a b)`, negatives wrapped in `(- …)`. No floats, ever.

use std::fmt;

use crate::net::{Activation, Network};
use crate::numeric::Rational;
use crate::query::{Expectation, RobustnessQuery};
use crate::smt::SmtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Grid,
    Full,
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Style::Grid => write!(f, "grid"),
            Style::Full => write!(f, "full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub text: String,
    pub style: Style,
}

/// Exact SMT-LIB2 rendering of a rational.
pub fn smt_rational(r: &Rational) -> String {
    if r.is_negative() {
        return format!("(- {})", smt_rational(&r.abs()));
    }
    if r.is_integer() {
        format!("{}.0", r.numer())
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    }
}

fn check_arity(net: &Network, q: &RobustnessQuery) -> Result<(), SmtError> {
    if q.input_dim() != net.input_dim() {
        return Err(SmtError::ArityMismatch {
            query: q.input_dim(),
            network: net.input_dim(),
        });
    }
    Ok(())
}

fn push_region_bounds(out: &mut String, q: &RobustnessQuery) {
    for (i, iv) in q.region.iter().enumerate() {
        if let Some(lo) = iv.lo().as_finite() {
            out.push_str(&format!("(assert (<= {} x_{i}))\n", smt_rational(lo)));
        }
        if let Some(hi) = iv.hi().as_finite() {
            out.push_str(&format!("(assert (<= x_{i} {}))\n", smt_rational(hi)));
        }
    }
}

fn header(out: &mut String) {
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-logic QF_LRA)\n");
}

fn footer(out: &mut String) {
    out.push_str("(check-sat)\n");
    out.push_str("(get-model)\n");
}

/// Encodes the candidate grid: a model of this script is a grid point.
pub fn encode_grid(net: &Network, q: &RobustnessQuery) -> Result<SmtScript, SmtError> {
    check_arity(net, q)?;
    let grid = q.grid()?;
    let mut out = String::new();
    header(&mut out);
    for i in 0..q.input_dim() {
        out.push_str(&format!("(declare-const x_{i} Real)\n"));
    }
    push_region_bounds(&mut out, q);
    if grid.is_empty() {
        // No candidates at all: the script must be unsatisfiable.
        out.push_str("(assert false)\n");
    } else {
        for i in 0..q.input_dim() {
            let rungs: Vec<String> = grid
                .dim_values(i)
                .iter()
                .map(|v| format!("(= x_{i} {})", smt_rational(v)))
                .collect();
            match rungs.as_slice() {
                [single] => out.push_str(&format!("(assert {single})\n")),
                many => out.push_str(&format!("(assert (or {}))\n", many.join(" "))),
            }
        }
    }
    footer(&mut out);
    Ok(SmtScript { text: out, style: Style::Grid })
}

/// Satisfaction of the expectation over output variables, as a formula.
/// Returns `None` when no output can satisfy it (the negation is then a
/// tautology).
fn expectation_formula(net: &Network, expect: &Expectation, outs: &[String]) -> Option<String> {
    let last_is_threshold = matches!(
        net.layers().last().unwrap().activation(),
        Activation::Threshold(_)
    );
    match expect {
        Expectation::Output(o) => {
            if outs.len() != 1 {
                return None;
            }
            Some(format!("(= {} {o}.0)", outs[0]))
        }
        Expectation::Class(c) => {
            if outs.len() == 1 && last_is_threshold {
                // Classification mirrors the binary output.
                if *c > 1 {
                    return None;
                }
                return Some(format!("(= {} {c}.0)", outs[0]));
            }
            if *c >= outs.len() {
                return None;
            }
            if outs.len() == 1 {
                // Argmax of a single output is always class 0.
                return Some("true".into());
            }
            // Argmax with ties to the lowest index: class c wins
            // strictly against lower indices, weakly against higher.
            let clauses: Vec<String> = (0..outs.len())
                .filter(|j| *j != *c)
                .map(|j| {
                    let op = if j < *c { ">" } else { ">=" };
                    format!("({op} {} {})", outs[*c], outs[j])
                })
                .collect();
            match clauses.as_slice() {
                [single] => Some(single.clone()),
                many => Some(format!("(and {})", many.join(" "))),
            }
        }
    }
}

/// Encodes the network and the negated expectation.
pub fn encode_full(net: &Network, q: &RobustnessQuery) -> Result<SmtScript, SmtError> {
    check_arity(net, q)?;
    let mut out = String::new();
    header(&mut out);
    for i in 0..q.input_dim() {
        out.push_str(&format!("(declare-const x_{i} Real)\n"));
    }
    for (li, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.output_dim() {
            out.push_str(&format!("(declare-const z_{li}_{j} Real)\n"));
            out.push_str(&format!("(declare-const a_{li}_{j} Real)\n"));
        }
    }
    push_region_bounds(&mut out, q);
    let mut inputs: Vec<String> = (0..q.input_dim()).map(|i| format!("x_{i}")).collect();
    for (li, layer) in net.layers().iter().enumerate() {
        for (j, (row, b)) in layer.weights().iter().zip(layer.bias()).enumerate() {
            let mut terms: Vec<String> = row
                .iter()
                .zip(&inputs)
                .map(|(w, x)| format!("(* {} {x})", smt_rational(w)))
                .collect();
            terms.push(smt_rational(b));
            let sum = match terms.as_slice() {
                [single] => single.clone(),
                many => format!("(+ {})", many.join(" ")),
            };
            out.push_str(&format!("(assert (= z_{li}_{j} {sum}))\n"));
            let post = match layer.activation() {
                Activation::Identity => format!("z_{li}_{j}"),
                Activation::Relu => format!("(ite (>= z_{li}_{j} 0.0) z_{li}_{j} 0.0)"),
                Activation::Threshold(theta) => {
                    format!("(ite (>= z_{li}_{j} {}) 1.0 0.0)", smt_rational(theta))
                }
            };
            out.push_str(&format!("(assert (= a_{li}_{j} {post}))\n"));
        }
        inputs = (0..layer.output_dim()).map(|j| format!("a_{li}_{j}")).collect();
    }
    // `inputs` now names the output layer; assert the expectation fails.
    let negation = match expectation_formula(net, &q.expect, &inputs) {
        Some(formula) => format!("(assert (not {formula}))\n"),
        // Unsatisfiable expectation: its negation holds everywhere.
        None => "(assert true)\n".to_string(),
    };
    out.push_str(&negation);
    footer(&mut out);
    Ok(SmtScript { text: out, style: Style::Full })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Interval;
    use crate::net::{Convention, Layer};
    use crate::query::Norm;
    use crate::smt::eval::{assertions, check_asserts, eval, Value};
    use crate::smt::sexpr::parse_all;
    use crate::verdict::{observe, satisfies};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn rats(vals: &[(i64, i64)]) -> Vec<Rational> {
        vals.iter().map(|&(n, d)| rat(n, d)).collect()
    }

    fn and_gate() -> Network {
        let layer = Layer::new(
            0,
            vec![rats(&[(1, 2), (1, 2)])],
            vec![rat(-9, 10)],
            Activation::Threshold(rat(0, 1)),
        )
        .unwrap();
        Network::new(vec![layer], Convention::SignedBias).unwrap()
    }

    fn parse_query(text: &str) -> RobustnessQuery {
        RobustnessQuery::parse(text, 2).unwrap()
    }

    fn env_of(point: &[Rational]) -> BTreeMap<String, Rational> {
        point
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("x_{i}"), v.clone()))
            .collect()
    }

    #[test]
    fn rational_rendering() {
        assert_eq!(smt_rational(&rat(0, 1)), "0.0");
        assert_eq!(smt_rational(&rat(3, 1)), "3.0");
        assert_eq!(smt_rational(&rat(7, 10)), "(/ 7 10)");
        assert_eq!(smt_rational(&rat(-3, 2)), "(- (/ 3 2))");
        assert_eq!(smt_rational(&rat(-2, 1)), "(- 2.0)");
    }

    #[test]
    fn capped_ladder_emits_six_rungs_per_dimension() {
        let q = parse_query(
            "region x[0] in [0.7, 1.5]\nregion x[1] in [0.7, 1.5]\ngrid step 0.05\ngrid cap 0.95\nexpect class 1\n",
        );
        let script = encode_grid(&and_gate(), &q).unwrap();
        assert_eq!(script.style, Style::Grid);
        assert_eq!(script.text.matches("(= x_0 ").count(), 6);
        assert_eq!(script.text.matches("(= x_1 ").count(), 6);
        assert!(script.text.contains("(assert (<= (/ 7 10) x_0))"));
        assert!(script.text.contains("(assert (<= x_0 (/ 3 2)))"));
        assert!(script.text.starts_with("(set-option :produce-models true)\n(set-logic QF_LRA)\n"));
        assert!(script.text.ends_with("(check-sat)\n(get-model)\n"));
    }

    #[test]
    fn full_region_ladder_emits_seventeen_rungs() {
        let q = parse_query(
            "region x[0] in [0.7, 1.5]\nregion x[1] in [0.7, 1.5]\ngrid step 0.05\nexpect class 1\n",
        );
        let script = encode_grid(&and_gate(), &q).unwrap();
        assert_eq!(script.text.matches("(= x_0 ").count(), 17);
    }

    #[test]
    fn empty_grid_asserts_false() {
        let q = parse_query(
            "region x[0] in [0.01, 0.01]\nregion x[1] in [0.01, 0.01]\ngrid step 0.1\nexpect class 1\n",
        );
        let script = encode_grid(&and_gate(), &q).unwrap();
        assert!(script.text.contains("(assert false)"));
        assert!(!script.text.contains("(or"));
    }

    #[test]
    fn one_point_grid_is_a_bare_equality() {
        let q = parse_query(
            "region x[0] in [0.5, 0.5]\nregion x[1] in [1, 1]\ngrid step 0.5\nexpect class 1\n",
        );
        let script = encode_grid(&and_gate(), &q).unwrap();
        assert!(script.text.contains("(assert (= x_0 (/ 1 2)))"));
        assert!(script.text.contains("(assert (= x_1 1.0))"));
        assert!(!script.text.contains("(or"));
    }

    #[test]
    fn grid_script_holds_exactly_on_grid_points() {
        let q = parse_query(
            "region x[0] in [0.7, 1.5]\nregion x[1] in [0.7, 1.5]\ngrid step 0.05\ngrid cap 0.95\nexpect class 1\n",
        );
        let script = encode_grid(&and_gate(), &q).unwrap();
        let forms = parse_all(&script.text).unwrap();
        let grid = q.grid().unwrap();
        for i in 0..grid.len() {
            let point = grid.point(i);
            assert!(check_asserts(&forms, &env_of(&point)).unwrap(), "grid point {i} rejected");
        }
        // In-region but off-grid: between rungs and past the cap.
        let off = [
            rats(&[(72, 100), (8, 10)]),
            rats(&[(7, 10), (9999, 10000)]),
            rats(&[(1, 1), (1, 1)]),
            rats(&[(3, 2), (3, 2)]),
        ];
        for point in &off {
            assert!(!check_asserts(&forms, &env_of(point)).unwrap(), "{point:?} accepted");
        }
    }

    #[test]
    fn full_encoding_structure_for_the_gate() {
        let q = parse_query(
            "region x[0] in [0.7, 1.5]\nregion x[1] in [0.7, 1.5]\nexpect class 1\n",
        );
        let script = encode_full(&and_gate(), &q).unwrap();
        assert_eq!(script.style, Style::Full);
        assert!(script.text.contains(
            "(assert (= z_0_0 (+ (* (/ 1 2) x_0) (* (/ 1 2) x_1) (- (/ 9 10)))))"
        ));
        assert!(script.text.contains("(assert (= a_0_0 (ite (>= z_0_0 0.0) 1.0 0.0)))"));
        assert!(script.text.contains("(assert (not (= a_0_0 1.0)))"));
    }

    #[test]
    fn impossible_expectation_negates_to_a_tautology() {
        let q = RobustnessQuery {
            region: vec![
                Interval::finite(rat(0, 1), rat(1, 1)).unwrap(),
                Interval::finite(rat(0, 1), rat(1, 1)).unwrap(),
            ],
            grid_step: None,
            grid_cap: None,
            expect: Expectation::Class(7),
            norm: Norm::Inf,
            anchor: None,
        };
        let script = encode_full(&and_gate(), &q).unwrap();
        assert!(script.text.contains("(assert true)"));
    }

    #[test]
    fn encoding_is_deterministic() {
        let q = parse_query(
            "region x[0] in [0.7, 1.5]\nregion x[1] in [0.7, 1.5]\ngrid step 0.05\ngrid cap 0.95\nexpect class 1\n",
        );
        let a = encode_grid(&and_gate(), &q).unwrap();
        let b = encode_grid(&and_gate(), &q).unwrap();
        assert_eq!(a, b);
        let a = encode_full(&and_gate(), &q).unwrap();
        let b = encode_full(&and_gate(), &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbounded_region_refuses_grid_style_but_not_full() {
        let q = RobustnessQuery::parse(
            "region x[0] in [0.7, inf]\nregion x[1] in [0.7, inf]\ngrid step 0.1\nexpect class 1\n",
            2,
        )
        .unwrap();
        assert!(matches!(encode_grid(&and_gate(), &q), Err(SmtError::Dsl(_))));
        let script = encode_full(&and_gate(), &q).unwrap();
        // Only the finite bound is asserted.
        assert!(script.text.contains("(assert (<= (/ 7 10) x_0))"));
        assert_eq!(script.text.matches("(assert (<= x_0").count(), 0);
    }

    /// Environment holding the full forward trace: inputs, every
    /// pre-activation and every post-activation.
    fn trace_env(net: &Network, point: &[Rational]) -> BTreeMap<String, Rational> {
        let mut env = env_of(point);
        let trace = net.forward_trace(point).unwrap();
        for (li, lt) in trace.iter().enumerate() {
            for (j, v) in lt.pre.iter().enumerate() {
                env.insert(format!("z_{li}_{j}"), v.clone());
            }
            for (j, v) in lt.post.iter().enumerate() {
                env.insert(format!("a_{li}_{j}"), v.clone());
            }
        }
        env
    }

    proptest! {
        /// Layer assertions hold for the true forward trace of any
        /// in-region point, and the final (negated-expectation)
        /// assertion holds exactly when the point violates.
        #[test]
        fn full_encoding_matches_forward_semantics(
            ws in proptest::collection::vec(
                proptest::collection::vec((-8i64..8, 1i64..6), 2), 1..3),
            bs2 in (-8i64..8, 1i64..6),
            act in 0usize..3,
            t0 in 0i64..=8, t1 in 0i64..=8,
            expect_pick in 0usize..4,
        ) {
            let hidden_act = match act {
                0 => Activation::Identity,
                1 => Activation::Relu,
                _ => Activation::Threshold(rat(1, 3)),
            };
            let n_hidden = ws.len();
            let l1 = Layer::new(
                0,
                ws.iter().map(|row| row.iter().map(|&(n, d)| rat(n, d)).collect()).collect(),
                vec![rat(1, 7); n_hidden],
                hidden_act,
            ).unwrap();
            let l2 = Layer::new(
                1,
                vec![(0..n_hidden).map(|k| rat(1 + k as i64, 2)).collect()],
                vec![rat(bs2.0, bs2.1)],
                Activation::Threshold(rat(0, 1)),
            ).unwrap();
            let net = Network::new(vec![l1, l2], Convention::SignedBias).unwrap();
            let expect = match expect_pick {
                0 => Expectation::Class(0),
                1 => Expectation::Class(1),
                2 => Expectation::Output(0),
                _ => Expectation::Output(1),
            };
            let q = RobustnessQuery {
                region: vec![
                    Interval::finite(rat(-1, 1), rat(1, 1)).unwrap(),
                    Interval::finite(rat(-1, 1), rat(1, 1)).unwrap(),
                ],
                grid_step: None,
                grid_cap: None,
                expect,
                norm: Norm::Inf,
                anchor: None,
            };
            let script = encode_full(&net, &q).unwrap();
            let forms = parse_all(&script.text).unwrap();
            let asserts = assertions(&forms);
            let point = vec![rat(t0 - 4, 4), rat(t1 - 4, 4)];
            let env = trace_env(&net, &point);
            let (negation, layer_asserts) = asserts.split_last().unwrap();
            for a in layer_asserts {
                prop_assert_eq!(
                    eval(a, &env).unwrap(), Value::Bool(true),
                    "assertion {} failed", a
                );
            }
            let obs = observe(&net, &point).unwrap();
            let violates = !satisfies(&q.expect, &obs);
            prop_assert_eq!(
                eval(negation, &env).unwrap(),
                Value::Bool(violates),
                "negated expectation disagreed at {:?}", point
            );
        }
    }
}
