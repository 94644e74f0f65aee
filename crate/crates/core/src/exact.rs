//! Complete and sound-but-incomplete analyses over the real region.
//!
//! Three pieces live here:
//!
//! * **Corner analysis** — for a single-layer threshold network the
//!   potential is affine, hence monotone in each coordinate by weight
//!   sign, so its extremes over a box sit at one corner each. Checking
//!   that corner decides the query for *every real point* in the region,
//!   no sampling involved.
//! * **Covering certificates** — when the deciding corner is itself a grid
//!   point (or the corner already forces a uniform outcome), a grid
//!   verdict is provably equal to the full-region verdict. This is what
//!   upgrades "no counterexample on the grid" to "no counterexample".
//! * **Interval bound propagation** — sound output enclosures for deeper
//!   networks; may return Unknown, never a wrong verdict.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::net::{Activation, NetError, Network};
use crate::numeric::Rational;
use crate::query::{DslError, Expectation, RobustnessQuery};
use crate::verdict::{Method, Verdict, WitnessRejected};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("unsupported network shape: {0}")]
    UnsupportedShape(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("arity mismatch: query has {query} dimensions, network takes {network} inputs")]
    ArityMismatch { query: usize, network: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Witness(#[from] WitnessRejected),
}

/// A rational extended with the two infinities, ordered the obvious way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extended {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Extended {
    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Extended) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Extended {
    fn cmp(&self, other: &Extended) -> Ordering {
        use Extended::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::PosInf => write!(f, "inf"),
            Extended::Finite(r) => write!(f, "{r}"),
        }
    }
}

/// Closed interval with possibly-infinite endpoints. `lo <= hi` always;
/// `lo` is never `+inf` and `hi` never `-inf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Extended,
    hi: Extended,
}

impl Interval {
    pub fn new(lo: Extended, hi: Extended) -> Result<Interval, ExactError> {
        if matches!(lo, Extended::PosInf) {
            return Err(ExactError::InvalidInterval("lower bound cannot be +inf".into()));
        }
        if matches!(hi, Extended::NegInf) {
            return Err(ExactError::InvalidInterval("upper bound cannot be -inf".into()));
        }
        if lo > hi {
            return Err(ExactError::InvalidInterval(format!(
                "lower bound {lo} exceeds upper bound {hi}"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn finite(lo: Rational, hi: Rational) -> Result<Interval, ExactError> {
        Interval::new(Extended::Finite(lo), Extended::Finite(hi))
    }

    pub fn unbounded() -> Interval {
        Interval { lo: Extended::NegInf, hi: Extended::PosInf }
    }

    pub fn lo(&self) -> &Extended {
        &self.lo
    }

    pub fn hi(&self) -> &Extended {
        &self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn as_finite(&self) -> Option<(&Rational, &Rational)> {
        match (&self.lo, &self.hi) {
            (Extended::Finite(a), Extended::Finite(b)) => Some((a, b)),
            _ => None,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let v = Extended::Finite(x.clone());
        self.lo <= v && v <= self.hi
    }

    /// Some finite point inside the interval: a finite endpoint if one
    /// exists, otherwise 0.
    pub fn finite_rep(&self) -> Rational {
        match (&self.lo, &self.hi) {
            (Extended::Finite(a), _) => a.clone(),
            (_, Extended::Finite(b)) => b.clone(),
            _ => Rational::zero(),
        }
    }
}

/// The single affine unit of a single-layer, single-output threshold
/// network, extracted once and reused by the corner and covering paths.
struct ThresholdUnit<'a> {
    weights: &'a [Rational],
    bias: &'a Rational,
    theta: &'a Rational,
}

fn threshold_unit<'a>(net: &'a Network) -> Result<ThresholdUnit<'a>, ExactError> {
    if net.layers().len() != 1 {
        return Err(ExactError::UnsupportedShape(format!(
            "corner analysis needs a single layer, network has {}",
            net.layers().len()
        )));
    }
    let layer = &net.layers()[0];
    if layer.output_dim() != 1 {
        return Err(ExactError::UnsupportedShape(format!(
            "corner analysis needs one output neuron, layer has {}",
            layer.output_dim()
        )));
    }
    let theta = match layer.activation() {
        Activation::Threshold(theta) => theta,
        other => {
            return Err(ExactError::UnsupportedShape(format!(
                "corner analysis needs a threshold activation, found {other}"
            )))
        }
    };
    Ok(ThresholdUnit {
        weights: &layer.weights()[0],
        bias: &layer.bias()[0],
        theta,
    })
}

fn check_arity(net: &Network, region: &[Interval]) -> Result<(), ExactError> {
    if region.len() != net.input_dim() {
        return Err(ExactError::ArityMismatch {
            query: region.len(),
            network: net.input_dim(),
        });
    }
    Ok(())
}

/// Extremes of the affine potential over the boxed region.
///
/// The infimum is taken at the lower bound where the weight is
/// nonnegative and at the upper bound where it is negative (zero-weight
/// coordinates pick the lower bound for determinism); the supremum
/// mirrors this. `inf_corner`/`sup_corner` always hold finite in-region
/// points; when the corresponding extreme is infinite they are merely
/// representatives, not attaining points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerAnalysis {
    pub infimum: Extended,
    pub supremum: Extended,
    pub inf_corner: Vec<Rational>,
    pub sup_corner: Vec<Rational>,
    pub theta: Rational,
}

pub fn corner_analysis(net: &Network, region: &[Interval]) -> Result<CornerAnalysis, ExactError> {
    check_arity(net, region)?;
    let unit = threshold_unit(net)?;
    let mut inf = Extended::Finite(unit.bias.clone());
    let mut sup = Extended::Finite(unit.bias.clone());
    let mut inf_corner = Vec::with_capacity(region.len());
    let mut sup_corner = Vec::with_capacity(region.len());
    for (w, iv) in unit.weights.iter().zip(region) {
        if w.is_zero() {
            // The bound is irrelevant; any finite coordinate will do.
            let rep = iv.finite_rep();
            inf_corner.push(rep.clone());
            sup_corner.push(rep);
            continue;
        }
        // Which endpoint minimizes w * x?
        let (min_end, max_end) = if w.is_positive() {
            (&iv.lo, &iv.hi)
        } else {
            (&iv.hi, &iv.lo)
        };
        match min_end {
            Extended::Finite(x) => {
                if let Extended::Finite(v) = &inf {
                    inf = Extended::Finite(v + &(w * x));
                }
                inf_corner.push(x.clone());
            }
            _ => {
                inf = Extended::NegInf;
                inf_corner.push(iv.finite_rep());
            }
        }
        match max_end {
            Extended::Finite(x) => {
                if let Extended::Finite(v) = &sup {
                    sup = Extended::Finite(v + &(w * x));
                }
                sup_corner.push(x.clone());
            }
            _ => {
                sup = Extended::PosInf;
                sup_corner.push(iv.finite_rep());
            }
        }
    }
    Ok(CornerAnalysis {
        infimum: inf,
        supremum: sup,
        inf_corner,
        sup_corner,
        theta: unit.theta.clone(),
    })
}

/// Reduces the query's expectation to the target bit of a single-output
/// threshold network; `None` means no output can ever satisfy it.
fn target_bit(expect: &Expectation) -> Option<u8> {
    match expect {
        Expectation::Class(0) => Some(0),
        Expectation::Class(1) => Some(1),
        Expectation::Class(_) => None,
        Expectation::Output(o) => Some(*o),
    }
}

/// Complete verdict for a single-layer threshold network over the boxed
/// region: Robust here means *every real point* satisfies the
/// expectation, and a counterexample is a concrete in-region point.
pub fn corner_check(net: &Network, q: &RobustnessQuery) -> Result<Verdict, ExactError> {
    let analysis = corner_analysis(net, &q.region)?;
    let counterexample = |witness: Vec<Rational>, note: Option<String>| {
        Verdict::counterexample(net, &q.expect, witness, Method::Corner, 1, note)
            .map_err(ExactError::from)
    };
    let Some(target) = target_bit(&q.expect) else {
        // No single-output threshold network produces this class; any
        // point in the region is a witness.
        let anywhere: Vec<Rational> = q.region.iter().map(|iv| iv.finite_rep()).collect();
        return counterexample(
            anywhere,
            Some("expected class is outside the network's output alphabet".into()),
        );
    };
    let theta = Extended::Finite(analysis.theta.clone());
    if target == 1 {
        // Output 1 iff potential >= theta, so robustness is decided by
        // the infimum.
        if analysis.infimum >= theta {
            Ok(Verdict::robust(Method::Corner, 1, None))
        } else if analysis.infimum.is_finite() {
            counterexample(analysis.inf_corner.clone(), None)
        } else {
            let unit = threshold_unit(net)?;
            let witness = unbounded_witness(&unit, &q.region, false)?;
            counterexample(witness, None)
        }
    } else {
        // Output 0 iff potential < theta (strictly), decided by the
        // supremum.
        if analysis.supremum < theta {
            Ok(Verdict::robust(Method::Corner, 1, None))
        } else if analysis.supremum.is_finite() {
            counterexample(analysis.sup_corner.clone(), None)
        } else {
            let unit = threshold_unit(net)?;
            let witness = unbounded_witness(&unit, &q.region, true)?;
            counterexample(witness, None)
        }
    }
}

/// Constructs a finite in-region point whose potential is beyond the
/// threshold crossing, for regions where the relevant extreme is
/// infinite. `want_high` asks for potential >= theta, otherwise < theta.
fn unbounded_witness(
    unit: &ThresholdUnit<'_>,
    region: &[Interval],
    want_high: bool,
) -> Result<Vec<Rational>, ExactError> {
    let mut point: Vec<Rational> = region.iter().map(|iv| iv.finite_rep()).collect();
    let z = crate::net::neuron_potential(unit.weights, &point, unit.bias)?;
    let already = if want_high { z >= *unit.theta } else { z < *unit.theta };
    if already {
        return Ok(point);
    }
    // Find a coordinate whose weight sign and unbounded side let the
    // potential run in the needed direction, then push just past the
    // crossing. One must exist: the caller established the extreme is
    // infinite.
    for (j, (w, iv)) in unit.weights.iter().zip(region).enumerate() {
        if w.is_zero() {
            continue;
        }
        let downward_open = matches!(iv.lo, Extended::NegInf);
        let upward_open = matches!(iv.hi, Extended::PosInf);
        // Moving x_j changes z by w; which direction raises z?
        let raise_dir_open = if w.is_positive() { upward_open } else { downward_open };
        let lower_dir_open = if w.is_positive() { downward_open } else { upward_open };
        let usable = if want_high { raise_dir_open } else { lower_dir_open };
        if !usable {
            continue;
        }
        // Solve z + w * (x - point_j) crossing theta: x* = point_j +
        // (theta - z) / w, then step one unit past it on the open side.
        let x_star = &point[j] + &(&(unit.theta - &z) / w);
        let one = Rational::one();
        let candidate = if (want_high && w.is_positive()) || (!want_high && w.is_negative()) {
            // Push upward. Stay above the current coordinate so the
            // finite lower bound (if any) keeps holding.
            let up = &x_star + &one;
            if up > point[j] { up } else { point[j].clone() }
        } else {
            let down = &x_star - &one;
            if down < point[j] { down } else { point[j].clone() }
        };
        point[j] = candidate;
        return Ok(point);
    }
    // Unreachable when the caller's extreme really is infinite.
    Err(ExactError::UnsupportedShape(
        "no unbounded coordinate can move the potential past the threshold".into(),
    ))
}

/// Whether a grid verdict on this query can be trusted for the whole
/// region, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringCertificate {
    /// The corner that decides the expectation (infimum corner when the
    /// target output is 1, supremum corner when it is 0).
    pub worst_corner: Vec<Rational>,
    /// The deciding corner is itself a sampled grid point, so the grid
    /// cannot miss it.
    pub worst_corner_on_grid: bool,
    /// The corner values already force one uniform outcome over every
    /// real point (and, for the all-violating direction, the grid is
    /// nonempty so it must observe a violation).
    pub verdict_forced: bool,
}

impl CoveringCertificate {
    /// Certified means: grid verdict equals full-region verdict.
    pub fn certified(&self) -> bool {
        self.worst_corner_on_grid || self.verdict_forced
    }
}

impl fmt::Display for CoveringCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<String> = self.worst_corner.iter().map(|c| c.render()).collect();
        writeln!(f, "worst corner: ({})", coords.join(", "))?;
        writeln!(f, "worst corner on grid: {}", self.worst_corner_on_grid)?;
        writeln!(f, "verdict forced by corner values: {}", self.verdict_forced)?;
        write!(
            f,
            "covering: {}",
            if self.certified() { "certified" } else { "not certified" }
        )
    }
}

/// Builds the covering certificate for a gridded query on a single-layer
/// threshold network.
pub fn check_covering(
    net: &Network,
    q: &RobustnessQuery,
) -> Result<CoveringCertificate, ExactError> {
    let analysis = corner_analysis(net, &q.region)?;
    let grid = q.grid()?;
    let theta = Extended::Finite(analysis.theta.clone());
    let (worst_corner, all_satisfy, all_violate) = match target_bit(&q.expect) {
        Some(1) => (
            analysis.inf_corner.clone(),
            analysis.infimum >= theta,
            analysis.supremum < theta,
        ),
        Some(_) => (
            analysis.sup_corner.clone(),
            analysis.supremum < theta,
            analysis.infimum >= theta,
        ),
        // Impossible expected class: every point violates.
        None => (analysis.inf_corner.clone(), false, true),
    };
    Ok(CoveringCertificate {
        worst_corner_on_grid: grid.contains(&worst_corner),
        verdict_forced: all_satisfy || (all_violate && !grid.is_empty()),
        worst_corner,
    })
}

/// Per-layer interval enclosures from a forward bound propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerBounds {
    pub pre: Vec<Interval>,
    pub post: Vec<Interval>,
}

/// Propagates the boxed region through the network, layer by layer.
/// Affine images split each weighted term by sign; activations clamp.
/// Sound by construction: the true value of every neuron at every region
/// point lies inside its interval.
pub fn ibp_bounds(net: &Network, region: &[Interval]) -> Result<Vec<LayerBounds>, ExactError> {
    check_arity(net, region)?;
    let mut boxes: Vec<(Rational, Rational)> = region
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            iv.as_finite()
                .map(|(lo, hi)| (lo.clone(), hi.clone()))
                .ok_or_else(|| {
                    ExactError::UnsupportedShape(format!(
                        "interval propagation needs a finite region, x[{i}] is unbounded"
                    ))
                })
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let mut pre = Vec::with_capacity(layer.output_dim());
        let mut post = Vec::with_capacity(layer.output_dim());
        let mut next_boxes = Vec::with_capacity(layer.output_dim());
        for (row, b) in layer.weights().iter().zip(layer.bias()) {
            let mut lo = b.clone();
            let mut hi = b.clone();
            for (w, (xlo, xhi)) in row.iter().zip(&boxes) {
                if w.is_negative() {
                    lo = &lo + &(w * xhi);
                    hi = &hi + &(w * xlo);
                } else {
                    lo = &lo + &(w * xlo);
                    hi = &hi + &(w * xhi);
                }
            }
            let (alo, ahi) = match layer.activation() {
                Activation::Identity => (lo.clone(), hi.clone()),
                Activation::Relu => {
                    let clamp = |v: &Rational| if v.is_negative() { Rational::zero() } else { v.clone() };
                    (clamp(&lo), clamp(&hi))
                }
                Activation::Threshold(theta) => {
                    if &lo >= theta {
                        (Rational::one(), Rational::one())
                    } else if &hi < theta {
                        (Rational::zero(), Rational::zero())
                    } else {
                        (Rational::zero(), Rational::one())
                    }
                }
            };
            pre.push(Interval::finite(lo, hi).expect("affine image ordered"));
            post.push(Interval::finite(alo.clone(), ahi.clone()).expect("activation image ordered"));
            next_boxes.push((alo, ahi));
        }
        boxes = next_boxes;
        out.push(LayerBounds { pre, post });
    }
    Ok(out)
}

/// Interval verdict: Robust when the output enclosure forces the
/// expectation everywhere, a (checked) counterexample when it forbids the
/// expectation everywhere, Unknown otherwise. Never wrong, often
/// undecided — that is the trade this method makes for depth.
pub fn ibp_check(net: &Network, q: &RobustnessQuery) -> Result<Verdict, ExactError> {
    let bounds = ibp_bounds(net, &q.region)?;
    let outputs = &bounds.last().unwrap().post;
    enum Forced {
        Satisfy,
        Violate,
        Undecided,
    }
    let last_is_threshold = matches!(
        net.layers().last().unwrap().activation(),
        Activation::Threshold(_)
    );
    fn finite(iv: &Interval) -> (&Rational, &Rational) {
        iv.as_finite().expect("ibp intervals are finite")
    }
    let forced = if outputs.len() == 1 && last_is_threshold {
        // Classification mirrors the binary output here.
        let (lo, hi) = finite(&outputs[0]);
        match target_bit(&q.expect) {
            None => Forced::Violate,
            Some(t) => {
                let t = Rational::from_int(t as i64);
                if lo == hi && *lo == t {
                    Forced::Satisfy
                } else if &t < lo || &t > hi {
                    Forced::Violate
                } else {
                    Forced::Undecided
                }
            }
        }
    } else {
        match &q.expect {
            Expectation::Output(o) => {
                if outputs.len() != 1 {
                    // A 0/1 output expectation can never hold for a
                    // multi-output network.
                    Forced::Violate
                } else {
                    let (lo, hi) = finite(&outputs[0]);
                    let t = Rational::from_int(*o as i64);
                    if lo == hi && *lo == t {
                        Forced::Satisfy
                    } else if &t < lo || &t > hi {
                        Forced::Violate
                    } else {
                        Forced::Undecided
                    }
                }
            }
            Expectation::Class(c) => {
                let c = *c;
                if c >= outputs.len() {
                    Forced::Violate
                } else if outputs.len() == 1 {
                    // Argmax of a single output is always class 0.
                    Forced::Satisfy
                } else {
                    // Ties go to the lowest index, so class c wins against
                    // lower indices only strictly.
                    let (c_lo, c_hi) = finite(&outputs[c]);
                    let mut satisfy = true;
                    let mut violate = false;
                    for (j, iv) in outputs.iter().enumerate() {
                        if j == c {
                            continue;
                        }
                        let (j_lo, j_hi) = finite(iv);
                        let c_beats_j = if j < c { c_lo > j_hi } else { c_lo >= j_hi };
                        let j_beats_c = if j < c { j_lo >= c_hi } else { j_lo > c_hi };
                        satisfy &= c_beats_j;
                        violate |= j_beats_c;
                    }
                    if satisfy {
                        Forced::Satisfy
                    } else if violate {
                        Forced::Violate
                    } else {
                        Forced::Undecided
                    }
                }
            }
        }
    };
    match forced {
        Forced::Satisfy => Ok(Verdict::robust(Method::Ibp, 0, None)),
        Forced::Violate => {
            // Every region point violates; the lower corner is as good a
            // witness as any (and gets re-checked on construction).
            let corner: Vec<Rational> = q
                .region
                .iter()
                .map(|iv| iv.as_finite().expect("finite region").0.clone())
                .collect();
            Ok(Verdict::counterexample(net, &q.expect, corner, Method::Ibp, 1, None)?)
        }
        Forced::Undecided => Ok(Verdict::unknown(
            Method::Ibp,
            0,
            "output intervals admit both outcomes; try a finer method".into(),
        )),
    }
}
