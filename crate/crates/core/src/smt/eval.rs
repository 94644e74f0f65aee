//! Exact evaluator for the fragment of SMT-LIB2 our encoders emit:
//! rational arithmetic, comparisons, boolean connectives, and `ite`.
//! This is the in-house semantic oracle — it lets tests confirm that a
//! script means what the encoder intended without trusting any solver.

use std::collections::BTreeMap;

use crate::numeric::{parse_decimal, Rational};
use crate::smt::sexpr::Sexpr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Num(Rational),
}

impl Value {
    fn bool(self, ctx: &Sexpr) -> Result<bool, String> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(format!("expected a boolean in {ctx}")),
        }
    }

    fn num(self, ctx: &Sexpr) -> Result<Rational, String> {
        match self {
            Value::Num(n) => Ok(n),
            Value::Bool(_) => Err(format!("expected a number in {ctx}")),
        }
    }
}

pub fn eval(expr: &Sexpr, env: &BTreeMap<String, Rational>) -> Result<Value, String> {
    match expr {
        Sexpr::Atom(a) => match a.as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => {
                if let Some(v) = env.get(a) {
                    return Ok(Value::Num(v.clone()));
                }
                match parse_decimal(a) {
                    Ok(parsed) => Ok(Value::Num(parsed.value)),
                    Err(_) => Err(format!("unbound symbol `{a}`")),
                }
            }
        },
        Sexpr::List(items) => {
            let (head, args) = items
                .split_first()
                .ok_or_else(|| "cannot evaluate ()".to_string())?;
            let op = head
                .as_atom()
                .ok_or_else(|| format!("operator must be a symbol in {expr}"))?;
            let nums = |args: &[Sexpr]| -> Result<Vec<Rational>, String> {
                args.iter().map(|a| eval(a, env)?.num(expr)).collect()
            };
            match op {
                "+" => Ok(Value::Num(
                    nums(args)?.into_iter().fold(Rational::zero(), |acc, v| &acc + &v),
                )),
                "*" => Ok(Value::Num(
                    nums(args)?.into_iter().fold(Rational::one(), |acc, v| &acc * &v),
                )),
                "-" => {
                    let vals = nums(args)?;
                    match vals.as_slice() {
                        [x] => Ok(Value::Num(-x)),
                        [first, rest @ ..] => {
                            Ok(Value::Num(rest.iter().fold(first.clone(), |acc, v| &acc - v)))
                        }
                        [] => Err(format!("`-` needs arguments in {expr}")),
                    }
                }
                "/" => {
                    let vals = nums(args)?;
                    match vals.as_slice() {
                        [a, b] if !b.is_zero() => Ok(Value::Num(a / b)),
                        [_, _] => Err(format!("division by zero in {expr}")),
                        _ => Err(format!("`/` takes two arguments in {expr}")),
                    }
                }
                "=" | "<=" | "<" | ">=" | ">" => {
                    let vals = nums(args)?;
                    if vals.len() < 2 {
                        return Err(format!("`{op}` needs two arguments in {expr}"));
                    }
                    // SMT-LIB comparisons chain across all arguments.
                    let holds = vals.windows(2).all(|w| match op {
                        "=" => w[0] == w[1],
                        "<=" => w[0] <= w[1],
                        "<" => w[0] < w[1],
                        ">=" => w[0] >= w[1],
                        _ => w[0] > w[1],
                    });
                    Ok(Value::Bool(holds))
                }
                "and" => {
                    for a in args {
                        if !eval(a, env)?.bool(expr)? {
                            return Ok(Value::Bool(false));
                        }
                    }
                    Ok(Value::Bool(true))
                }
                "or" => {
                    for a in args {
                        if eval(a, env)?.bool(expr)? {
                            return Ok(Value::Bool(true));
                        }
                    }
                    Ok(Value::Bool(false))
                }
                "not" => match args {
                    [x] => Ok(Value::Bool(!eval(x, env)?.bool(expr)?)),
                    _ => Err(format!("`not` takes one argument in {expr}")),
                },
                "ite" => match args {
                    [c, t, e] => {
                        if eval(c, env)?.bool(expr)? {
                            eval(t, env)
                        } else {
                            eval(e, env)
                        }
                    }
                    _ => Err(format!("`ite` takes three arguments in {expr}")),
                },
                other => Err(format!("unsupported operator `{other}` in {expr}")),
            }
        }
    }
}

/// Collects the `(assert …)` bodies from a parsed script, ignoring
/// declarations and solver directives.
pub fn assertions(forms: &[Sexpr]) -> Vec<&Sexpr> {
    forms
        .iter()
        .filter_map(|form| {
            let items = form.as_list()?;
            match items {
                [head, body] if head.as_atom() == Some("assert") => Some(body),
                _ => None,
            }
        })
        .collect()
}

/// True when every assertion in the script holds under the assignment.
pub fn check_asserts(forms: &[Sexpr], env: &BTreeMap<String, Rational>) -> Result<bool, String> {
    for body in assertions(forms) {
        if !eval(body, env)?.bool(body)? {
            return Ok(false);
        }
    }
    Ok(true)
}
