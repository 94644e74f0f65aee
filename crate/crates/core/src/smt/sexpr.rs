//! Minimal s-expression reader for SMT-LIB2 text: enough to walk solver
//! model output and our own emitted scripts. Atoms are kept verbatim;
//! `;` comments run to end of line; `"… "` and `|…|` quoted atoms are
//! preserved whole.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

impl Sexpr {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(a) => Some(a),
            Sexpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::Atom(_) => None,
            Sexpr::List(items) => Some(items),
        }
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexpr::Atom(a) => write!(f, "{a}"),
            Sexpr::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses every top-level form in the text.
pub fn parse_all(text: &str) -> Result<Vec<Sexpr>, String> {
    let mut chars = text.char_indices().peekable();
    let mut stack: Vec<Vec<Sexpr>> = Vec::new();
    let mut top: Vec<Sexpr> = Vec::new();
    let push = |top: &mut Vec<Sexpr>, stack: &mut Vec<Vec<Sexpr>>, e: Sexpr| {
        match stack.last_mut() {
            Some(frame) => frame.push(e),
            None => top.push(e),
        }
    };
    while let Some((pos, c)) = chars.next() {
        match c {
            ';' => {
                for (_, c) in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {}
            '(' => stack.push(Vec::new()),
            ')' => {
                let frame = stack
                    .pop()
                    .ok_or_else(|| format!("unbalanced `)` at byte {pos}"))?;
                push(&mut top, &mut stack, Sexpr::List(frame));
            }
            '"' | '|' => {
                let close = c;
                let mut atom = String::new();
                atom.push(c);
                let mut closed = false;
                for (_, c) in chars.by_ref() {
                    atom.push(c);
                    if c == close {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(format!("unterminated `{close}` starting at byte {pos}"));
                }
                push(&mut top, &mut stack, Sexpr::Atom(atom));
            }
            _ => {
                let mut atom = String::new();
                atom.push(c);
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                push(&mut top, &mut stack, Sexpr::Atom(atom));
            }
        }
    }
    if !stack.is_empty() {
        return Err(format!("unbalanced `(`: {} unclosed", stack.len()));
    }
    Ok(top)
}
