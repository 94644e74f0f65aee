//! Robustness queries and the small text language that describes them.
//!
//! A query pins down a box-shaped input region, an optional sampling grid
//! over it, the expected behavior, a norm for distance reporting, and an
//! optional anchor point. The text form is line-oriented:
//!
//! ```text
//! # and-gate robustness probe
//! region x[0] in [0.7, 1.5]
//! region x[1] in [0.7, 1.5]
//! grid step 0.05
//! grid cap 0.95
//! expect class 1
//! norm inf
//! ```
//!
//! Grid points are integer multiples of the step, anchored at zero — the
//! lattice `k * step`, not `lo + k * step` — intersected with the region
//! and, when a cap is present, cut off above it.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::exact::{Extended, Interval};
use crate::numeric::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}: dimension x[{dim}] out of range (network has {input_dim} inputs)")]
    DimensionOutOfRange { line: usize, dim: usize, input_dim: usize },
    #[error("line {line}: {clause} given more than once")]
    ConflictingClause { line: usize, clause: String },
    #[error("grid is unbounded: {0}")]
    GridUnbounded(String),
    #[error("grid is too large to enumerate: {0}")]
    GridTooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    One,
    Two,
    Inf,
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::One => write!(f, "1"),
            Norm::Two => write!(f, "2"),
            Norm::Inf => write!(f, "inf"),
        }
    }
}

/// What the network is expected to do everywhere in the region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    /// The induced class index.
    Class(usize),
    /// Exact 0/1 value of a single-output network.
    Output(u8),
}

impl std::fmt::Display for Expectation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expectation::Class(c) => write!(f, "class {c}"),
            Expectation::Output(o) => write!(f, "output {o}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobustnessQuery {
    /// One interval per input dimension; unconstrained dimensions are
    /// (-inf, +inf).
    pub region: Vec<Interval>,
    /// Grid pitch; present iff the query carries a grid.
    pub grid_step: Option<Rational>,
    /// Upper cut for grid coordinates in every dimension (the region may
    /// extend further; sampled points do not).
    pub grid_cap: Option<Rational>,
    pub expect: Expectation,
    pub norm: Norm,
    /// Reference point for nearest-adversarial search.
    pub anchor: Option<Vec<Rational>>,
}

impl RobustnessQuery {
    pub fn input_dim(&self) -> usize {
        self.region.len()
    }

    /// A query with the given expectation and everything else defaulted:
    /// unconstrained region, no grid, inf norm, no anchor.
    pub fn unconstrained(input_dim: usize, expect: Expectation) -> RobustnessQuery {
        RobustnessQuery {
            region: (0..input_dim).map(|_| Interval::unbounded()).collect(),
            grid_step: None,
            grid_cap: None,
            expect,
            norm: Norm::Inf,
            anchor: None,
        }
    }

    /// Parses the text form. `input_dim` bounds the `x[i]` indices and
    /// sizes the defaulted region.
    pub fn parse(text: &str, input_dim: usize) -> Result<RobustnessQuery, DslError> {
        Parser::new(text, input_dim).run()
    }

    /// Canonical text rendering; `parse(render(q)) == q`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let bound = |b: &Extended| -> String {
            match b {
                Extended::NegInf => "-inf".into(),
                Extended::PosInf => "inf".into(),
                Extended::Finite(r) => r.render(),
            }
        };
        for (i, iv) in self.region.iter().enumerate() {
            writeln!(out, "region x[{i}] in [{}, {}]", bound(iv.lo()), bound(iv.hi())).unwrap();
        }
        if let Some(step) = &self.grid_step {
            writeln!(out, "grid step {}", step.render()).unwrap();
        }
        if let Some(cap) = &self.grid_cap {
            writeln!(out, "grid cap {}", cap.render()).unwrap();
        }
        writeln!(out, "expect {}", self.expect).unwrap();
        writeln!(out, "norm {}", self.norm).unwrap();
        if let Some(anchor) = &self.anchor {
            let coords: Vec<String> = anchor.iter().map(|c| c.render()).collect();
            writeln!(out, "anchor {}", coords.join(", ")).unwrap();
        }
        out
    }

    /// Materializes the grid: per-dimension coordinate ranges plus the
    /// closed-form counts. Fails if the step is missing or any dimension
    /// is unbounded.
    pub fn grid(&self) -> Result<GridLattice, DslError> {
        let step = self.grid_step.as_ref().ok_or_else(|| {
            DslError::GridUnbounded("query has no `grid step` clause".into())
        })?;
        let mut dims = Vec::with_capacity(self.region.len());
        for (i, iv) in self.region.iter().enumerate() {
            let lo = match iv.lo() {
                Extended::Finite(r) => r,
                _ => {
                    return Err(DslError::GridUnbounded(format!(
                        "dimension x[{i}] has no finite lower bound"
                    )))
                }
            };
            let hi = match iv.hi() {
                Extended::Finite(r) => r,
                _ => {
                    return Err(DslError::GridUnbounded(format!(
                        "dimension x[{i}] has no finite upper bound"
                    )))
                }
            };
            let hi_eff = match &self.grid_cap {
                Some(cap) if cap < hi => cap,
                _ => hi,
            };
            // k ranges over ceil(lo/step) ..= floor(hi_eff/step); the grid
            // is the zero-anchored lattice, so bounds that are not
            // multiples of the step simply do not appear on it.
            let k_min = (lo / step).ceil();
            let k_max = (hi_eff / step).floor();
            let count = if k_max < k_min {
                0u64
            } else {
                (&k_max - &k_min + 1u32).to_u64().ok_or_else(|| {
                    DslError::GridTooLarge(format!(
                        "dimension x[{i}] alone has more than 2^64 - 1 grid values"
                    ))
                })?
            };
            dims.push(GridDim { k_min, count });
        }
        let mut total: u64 = 1;
        for d in &dims {
            total = total.checked_mul(d.count).ok_or_else(|| {
                DslError::GridTooLarge("total point count exceeds 2^64 - 1".into())
            })?;
        }
        Ok(GridLattice { step: step.clone(), dims, total })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct GridDim {
    k_min: BigInt,
    count: u64,
}

/// The finite sampling lattice of a query: every grid point is
/// `(k_0 * step, ..., k_{n-1} * step)` with each `k_i` in its dimension's
/// range. Points are indexable, so enumeration order (lexicographic, last
/// dimension fastest) is a property of the lattice, not of any loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLattice {
    step: Rational,
    dims: Vec<GridDim>,
    total: u64,
}

impl GridLattice {
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn step(&self) -> &Rational {
        &self.step
    }

    /// Per-dimension value counts (the closed form, not an enumeration).
    pub fn dim_counts(&self) -> Vec<u64> {
        self.dims.iter().map(|d| d.count).collect()
    }

    /// The grid coordinates of one dimension, ascending.
    pub fn dim_values(&self, dim: usize) -> Vec<Rational> {
        let d = &self.dims[dim];
        (0..d.count)
            .map(|j| {
                let k = &d.k_min + BigInt::from(j);
                Rational::from_bigint(k, BigInt::from(1)) * self.step.clone()
            })
            .collect()
    }

    /// Point at `index` in lexicographic order (dimension 0 most
    /// significant). Mixed-radix decode; O(dims), no enumeration.
    pub fn point(&self, index: u64) -> Vec<Rational> {
        assert!(index < self.total, "grid index {index} out of range {}", self.total);
        let mut coords = vec![Rational::zero(); self.dims.len()];
        let mut rest = index;
        for (i, d) in self.dims.iter().enumerate().rev() {
            let j = rest % d.count;
            rest /= d.count;
            let k = &d.k_min + BigInt::from(j);
            coords[i] = Rational::from_bigint(k, BigInt::from(1)) * self.step.clone();
        }
        coords
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<Rational>> + '_ {
        (0..self.total).map(|i| self.point(i))
    }

    /// Is `point` on this lattice (and within its ranges)?
    pub fn contains(&self, point: &[Rational]) -> bool {
        if point.len() != self.dims.len() {
            return false;
        }
        point.iter().zip(&self.dims).all(|(c, d)| {
            let ratio = c / &self.step;
            if !ratio.is_integer() {
                return false;
            }
            let k = ratio.floor();
            k >= d.k_min && k < &d.k_min + BigInt::from(d.count)
        })
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    text: &'a str,
    input_dim: usize,
    region: Vec<Option<Interval>>,
    region_lines: Vec<usize>,
    grid_step: Option<Rational>,
    grid_cap: Option<Rational>,
    expect: Option<Expectation>,
    norm: Option<Norm>,
    anchor: Option<Vec<Rational>>,
    lines_seen: usize,
}

/// Cursor over a single clause line; `col` is 1-based for messages.
struct Line<'a> {
    line_no: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> DslError {
        DslError::Syntax {
            line: self.line_no,
            col: self.pos + 1,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }

    fn expect_end(&mut self) -> Result<(), DslError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected trailing input `{}`", self.rest())))
        }
    }

    fn eat_char(&mut self, ch: char) -> Result<(), DslError> {
        self.skip_ws();
        if self.rest().starts_with(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected `{ch}`")))
        }
    }

    /// Consumes the next bare word (letters/digits, no punctuation).
    fn word(&mut self) -> Result<&'a str, DslError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .find(|c: char| !c.is_ascii_alphanumeric() && c != '_' && c != '-' && c != '.')
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(self.err("expected a word"));
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    /// Consumes a number token: everything up to a delimiter. Accepts
    /// decimals and `a/b` fractions.
    fn rational(&mut self) -> Result<Rational, DslError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .find(|c: char| c == ',' || c == ']' || c == '[' || c.is_whitespace())
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(self.err("expected a number"));
        }
        let token = &rest[..end];
        let value = token
            .parse::<Rational>()
            .map_err(|e| self.err(format!("{e}")))?;
        self.pos += end;
        Ok(value)
    }

    /// A region bound: a rational, `-inf`, or `inf`.
    fn bound(&mut self) -> Result<Extended, DslError> {
        self.skip_ws();
        let rest = self.rest();
        if let Some(r) = rest.strip_prefix("-inf") {
            if !r.starts_with(|c: char| c.is_ascii_alphanumeric()) {
                self.pos += 4;
                return Ok(Extended::NegInf);
            }
        }
        if let Some(r) = rest.strip_prefix("inf") {
            if !r.starts_with(|c: char| c.is_ascii_alphanumeric()) {
                self.pos += 3;
                return Ok(Extended::PosInf);
            }
        }
        Ok(Extended::Finite(self.rational()?))
    }

    fn usize_token(&mut self) -> Result<usize, DslError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len());
        if end == 0 {
            return Err(self.err("expected an integer"));
        }
        let v = rest[..end]
            .parse::<usize>()
            .map_err(|_| self.err("integer out of range"))?;
        self.pos += end;
        Ok(v)
    }
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, input_dim: usize) -> Parser<'a> {
        Parser {
            text,
            input_dim,
            region: vec![None; input_dim],
            region_lines: vec![0; input_dim],
            grid_step: None,
            grid_cap: None,
            expect: None,
            norm: None,
            anchor: None,
            lines_seen: 0,
        }
    }

    fn run(mut self) -> Result<RobustnessQuery, DslError> {
        for (idx, raw) in self.text.lines().enumerate() {
            let line_no = idx + 1;
            self.lines_seen = line_no;
            // `#` starts a comment anywhere on the line.
            let content = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            if content.trim().is_empty() {
                continue;
            }
            let mut line = Line { line_no, text: content, pos: 0 };
            self.clause(&mut line)?;
        }
        let expect = self.expect.ok_or_else(|| DslError::Syntax {
            line: self.lines_seen.max(1),
            col: 1,
            message: "query has no `expect` clause".into(),
        })?;
        Ok(RobustnessQuery {
            region: self
                .region
                .into_iter()
                .map(|iv| iv.unwrap_or_else(Interval::unbounded))
                .collect(),
            grid_step: self.grid_step,
            grid_cap: self.grid_cap,
            expect,
            norm: self.norm.unwrap_or(Norm::Inf),
            anchor: self.anchor,
        })
    }

    fn clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        let keyword = line.word()?;
        match keyword {
            "region" => self.region_clause(line),
            "grid" => self.grid_clause(line),
            "expect" => self.expect_clause(line),
            "norm" => self.norm_clause(line),
            "anchor" => self.anchor_clause(line),
            other => Err(line.err(format!(
                "unknown clause `{other}` (expected region, grid, expect, norm, or anchor)"
            ))),
        }
    }

    fn region_clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        line.skip_ws();
        let x = line.word()?;
        if x != "x" {
            return Err(line.err("expected `x[INDEX]`"));
        }
        line.eat_char('[')?;
        let dim = line.usize_token()?;
        line.eat_char(']')?;
        if dim >= self.input_dim {
            return Err(DslError::DimensionOutOfRange {
                line: line.line_no,
                dim,
                input_dim: self.input_dim,
            });
        }
        let kw = line.word()?;
        if kw != "in" {
            return Err(line.err("expected `in`"));
        }
        line.eat_char('[')?;
        let lo = line.bound()?;
        line.eat_char(',')?;
        let hi = line.bound()?;
        line.eat_char(']')?;
        line.expect_end()?;
        if self.region[dim].is_some() {
            return Err(DslError::ConflictingClause {
                line: line.line_no,
                clause: format!("region x[{dim}] (previously on line {})", self.region_lines[dim]),
            });
        }
        let interval = Interval::new(lo, hi)
            .map_err(|e| line.err(e.to_string()))?;
        self.region[dim] = Some(interval);
        self.region_lines[dim] = line.line_no;
        Ok(())
    }

    fn grid_clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        let which = line.word()?;
        match which {
            "step" => {
                let step = line.rational()?;
                line.expect_end()?;
                if self.grid_step.is_some() {
                    return Err(DslError::ConflictingClause {
                        line: line.line_no,
                        clause: "grid step".into(),
                    });
                }
                if !step.is_positive() {
                    return Err(line.err(format!("grid step must be positive, got {step}")));
                }
                self.grid_step = Some(step);
                Ok(())
            }
            "cap" => {
                let cap = line.rational()?;
                line.expect_end()?;
                if self.grid_cap.is_some() {
                    return Err(DslError::ConflictingClause {
                        line: line.line_no,
                        clause: "grid cap".into(),
                    });
                }
                self.grid_cap = Some(cap);
                Ok(())
            }
            other => Err(line.err(format!("expected `grid step` or `grid cap`, got `grid {other}`"))),
        }
    }

    fn expect_clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        let which = line.word()?;
        let expect = match which {
            "class" => Expectation::Class(line.usize_token()?),
            "output" => {
                let v = line.usize_token()?;
                if v > 1 {
                    return Err(line.err(format!("expected output 0 or 1, got {v}")));
                }
                Expectation::Output(v as u8)
            }
            other => return Err(line.err(format!("expected `expect class` or `expect output`, got `expect {other}`"))),
        };
        line.expect_end()?;
        if self.expect.is_some() {
            return Err(DslError::ConflictingClause { line: line.line_no, clause: "expect".into() });
        }
        self.expect = Some(expect);
        Ok(())
    }

    fn norm_clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        let which = line.word()?;
        let norm = match which {
            "1" => Norm::One,
            "2" => Norm::Two,
            "inf" => Norm::Inf,
            other => return Err(line.err(format!("norm must be 1, 2, or inf, got `{other}`"))),
        };
        line.expect_end()?;
        if self.norm.is_some() {
            return Err(DslError::ConflictingClause { line: line.line_no, clause: "norm".into() });
        }
        self.norm = Some(norm);
        Ok(())
    }

    fn anchor_clause(&mut self, line: &mut Line<'a>) -> Result<(), DslError> {
        let mut coords = vec![line.rational()?];
        loop {
            line.skip_ws();
            if line.rest().starts_with(',') {
                line.eat_char(',')?;
                coords.push(line.rational()?);
            } else {
                break;
            }
        }
        line.expect_end()?;
        if self.anchor.is_some() {
            return Err(DslError::ConflictingClause { line: line.line_no, clause: "anchor".into() });
        }
        if coords.len() != self.input_dim {
            return Err(line.err(format!(
                "anchor has {} coordinates, network has {} inputs",
                coords.len(),
                self.input_dim
            )));
        }
        self.anchor = Some(coords);
        Ok(())
    }
}
