//! The five relaxation analyses: IBP, DeepPoly-0/1, triangle and the
//! single-layer multi-neuron hull.

mod deeppoly;
mod ibp;
mod multineuron;
mod triangle;

use std::fmt;
use std::str::FromStr;

use num::Signed;
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::network::ReluNetwork;
use crate::numerics::rational::{parse_rational, random_in, render, Rational};
use crate::numerics::HullPolygon;

pub use deeppoly::deeppoly;
pub use ibp::ibp;
pub use multineuron::{check_single_layer, multineuron_single_layer};
pub use triangle::{triangle, triangle_fiber};

/// Axis-aligned box `[l_1, u_1] x ... x [l_d, u_d]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputBox {
    dims: Vec<(Rational, Rational)>,
}

impl InputBox {
    pub fn new(dims: Vec<(Rational, Rational)>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidBox("box needs at least one dimension".into()));
        }
        if let Some((l, u)) = dims.iter().find(|(l, u)| l > u) {
            return Err(Error::InvalidBox(format!("lower {} exceeds upper {}", render(l), render(u))));
        }
        Ok(InputBox { dims })
    }

    /// One interval `[l, u]`.
    pub fn interval1(l: Rational, u: Rational) -> Result<Self> {
        Self::new(vec![(l, u)])
    }

    /// `[lo, hi]^d`.
    pub fn cube(d: usize, lo: &Rational, hi: &Rational) -> Result<Self> {
        Self::new(vec![(lo.clone(), hi.clone()); d])
    }

    pub fn point(x: &[Rational]) -> Result<Self> {
        Self::new(x.iter().map(|v| (v.clone(), v.clone())).collect())
    }

    /// Parses `l,u` per dimension joined by `x`, e.g. `0,1x-1/2,1`.
    pub fn parse(s: &str) -> Result<Self> {
        let dims = s
            .split('x')
            .map(|part| {
                let (l, u) = part
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidBox(format!("expected l,u in {part:?}")))?;
                Ok((parse_rational(l)?, parse_rational(u)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[(Rational, Rational)] {
        &self.dims
    }

    pub fn interval(&self, i: usize) -> (&Rational, &Rational) {
        (&self.dims[i].0, &self.dims[i].1)
    }

    pub fn lower(&self) -> Vec<Rational> {
        self.dims.iter().map(|d| d.0.clone()).collect()
    }

    pub fn upper(&self) -> Vec<Rational> {
        self.dims.iter().map(|d| d.1.clone()).collect()
    }

    pub fn is_point(&self) -> bool {
        self.dims.iter().all(|(l, u)| l == u)
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|((l, u), v)| l <= v && v <= u)
    }

    pub fn is_subset_of(&self, other: &InputBox) -> bool {
        self.dim() == other.dim()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|((l, u), (ol, ou))| ol <= l && u <= ou)
    }

    /// Random point with per-coordinate denominators up to `max_den`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_den: i64) -> Vec<Rational> {
        self.dims.iter().map(|(l, u)| random_in(rng, l, u, max_den)).collect()
    }

    /// Random sub-box with endpoints on grids of denominator up to `max_den`.
    pub fn sample_subbox<R: Rng + ?Sized>(&self, rng: &mut R, max_den: i64) -> InputBox {
        let dims = self
            .dims
            .iter()
            .map(|(l, u)| {
                let a = random_in(rng, l, u, max_den);
                let b = random_in(rng, l, u, max_den);
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        InputBox { dims }
    }

    /// Midpoint of every interval.
    pub fn center(&self) -> Vec<Rational> {
        self.dims.iter().map(|(l, u)| (l + u) / Rational::from_integer(2.into())).collect()
    }
}

impl fmt::Display for InputBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|(l, u)| format!("{},{}", render(l), render(u))).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl FromStr for InputBox {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelaxationId {
    Ibp,
    Dp0,
    Dp1,
    Tri,
    Mn,
}

impl RelaxationId {
    pub const ALL: [RelaxationId; 5] = [
        RelaxationId::Ibp,
        RelaxationId::Dp0,
        RelaxationId::Dp1,
        RelaxationId::Tri,
        RelaxationId::Mn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelaxationId::Ibp => "ibp",
            RelaxationId::Dp0 => "dp0",
            RelaxationId::Dp1 => "dp1",
            RelaxationId::Tri => "tri",
            RelaxationId::Mn => "mn",
        }
    }

    /// Row label used in the expressivity table.
    pub fn label(&self) -> &'static str {
        match self {
            RelaxationId::Ibp => "IBP",
            RelaxationId::Dp0 => "DP-0",
            RelaxationId::Dp1 => "DP-1",
            RelaxationId::Tri => "Triangle",
            RelaxationId::Mn => "Multi-Neuron",
        }
    }
}

impl fmt::Display for RelaxationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelaxationId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RelaxationId::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownRelaxation(s.to_string()))
    }
}

/// `coeffs . x + bias` over the network inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineForm {
    pub coeffs: Vec<Rational>,
    pub bias: Rational,
}

impl AffineForm {
    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.coeffs.iter().zip(x).fold(self.bias.clone(), |acc, (c, v)| acc + c * v)
    }

    /// Exact `(min, max)` over the box.
    pub fn range(&self, b: &InputBox) -> (Rational, Rational) {
        let mut lo = self.bias.clone();
        let mut hi = self.bias.clone();
        for (c, (l, u)) in self.coeffs.iter().zip(b.dims()) {
            if c.is_positive() {
                lo += c * l;
                hi += c * u;
            } else if c.is_negative() {
                lo += c * u;
                hi += c * l;
            }
        }
        (lo, hi)
    }

    fn to_json(&self) -> Value {
        json!({
            "coeffs": self.coeffs.iter().map(render).collect::<Vec<_>>(),
            "bias": render(&self.bias),
        })
    }
}

/// `lower(x) <= v <= upper(x)` on the analysis box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearBoundPair {
    pub lower: AffineForm,
    pub upper: AffineForm,
}

/// Pre-activation bounds of one ReLU neuron as seen by an analyzer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluBound {
    pub neuron: usize,
    pub lower: Rational,
    pub upper: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detail {
    /// Post-activation interval per neuron.
    Intervals(Vec<(Rational, Rational)>),
    /// Post-activation bounds per neuron, backsubstituted to the inputs.
    Linear(Vec<LinearBoundPair>),
    /// Size of the joint LP and the input points attaining the output bounds.
    Polytope {
        variables: usize,
        constraints: usize,
        argmin: Vec<Rational>,
        argmax: Vec<Rational>,
    },
    Hull(HullPolygon),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisResult {
    pub relaxation: RelaxationId,
    pub lower: Rational,
    pub upper: Rational,
    pub relu_bounds: Vec<ReluBound>,
    pub detail: Detail,
}

impl AnalysisResult {
    pub fn interval(&self) -> (Rational, Rational) {
        (self.lower.clone(), self.upper.clone())
    }

    /// True when `[lower, upper]` is inside `[lo, hi]`.
    pub fn within(&self, lo: &Rational, hi: &Rational) -> bool {
        lo <= &self.lower && &self.upper <= hi
    }

    pub fn to_json(&self) -> Value {
        let pair = |(l, u): &(Rational, Rational)| json!([render(l), render(u)]);
        let detail = match &self.detail {
            Detail::Intervals(v) => json!({ "neurons": v.iter().map(pair).collect::<Vec<_>>() }),
            Detail::Linear(v) => json!({
                "neurons": v
                    .iter()
                    .map(|b| json!({ "lower": b.lower.to_json(), "upper": b.upper.to_json() }))
                    .collect::<Vec<_>>()
            }),
            Detail::Polytope {
                variables,
                constraints,
                argmin,
                argmax,
            } => json!({
                "lp_variables": variables,
                "lp_constraints": constraints,
                "argmin": argmin.iter().map(render).collect::<Vec<_>>(),
                "argmax": argmax.iter().map(render).collect::<Vec<_>>(),
            }),
            Detail::Hull(h) => json!({ "hull": h }),
        };
        let mut detail = detail;
        detail["relu_bounds"] = self
            .relu_bounds
            .iter()
            .map(|r| json!({ "neuron": r.neuron, "lower": render(&r.lower), "upper": render(&r.upper) }))
            .collect::<Vec<_>>()
            .into();
        json!({
            "relax": self.relaxation.as_str(),
            "lower": render(&self.lower),
            "upper": render(&self.upper),
            "detail": detail,
        })
    }
}

pub(crate) fn check_box(net: &ReluNetwork, b: &InputBox) -> Result<()> {
    if b.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Runs the named relaxation.
pub fn analyze(net: &ReluNetwork, b: &InputBox, relax: RelaxationId) -> Result<AnalysisResult> {
    match relax {
        RelaxationId::Ibp => ibp(net, b),
        RelaxationId::Dp0 => deeppoly(net, b, 0),
        RelaxationId::Dp1 => deeppoly(net, b, 1),
        RelaxationId::Tri => triangle(net, b),
        RelaxationId::Mn => multineuron_single_layer(net, b),
    }
}

/// Whether `relax` can analyze `net` at all (only MN has a shape requirement).
pub fn applies(net: &ReluNetwork, relax: RelaxationId) -> bool {
    relax != RelaxationId::Mn || check_single_layer(net).is_ok()
}

/// Output bounds of the relaxation's polytope restricted to input `x`.
pub fn fiber_bounds(net: &ReluNetwork, b: &InputBox, relax: RelaxationId, x: &[Rational]) -> Result<(Rational, Rational)> {
    check_box(net, b)?;
    if !b.contains(x) {
        return Err(Error::InvalidBox("fiber point outside the box".into()));
    }
    match relax {
        RelaxationId::Ibp => ibp(net, b).map(|r| r.interval()),
        RelaxationId::Dp0 | RelaxationId::Dp1 => {
            let r = analyze(net, b, relax)?;
            match &r.detail {
                Detail::Linear(v) => {
                    let out = &v[net.output()];
                    Ok((out.lower.eval(x), out.upper.eval(x)))
                }
                _ => unreachable!("deeppoly returns linear detail"),
            }
        }
        RelaxationId::Tri => triangle_fiber(net, b, x),
        RelaxationId::Mn => {
            let r = multineuron_single_layer(net, b)?;
            match &r.detail {
                Detail::Hull(h) => h.fiber(&x[0]).ok_or(Error::LpDefect("empty hull fiber")),
                _ => unreachable!("multi-neuron returns a hull"),
            }
        }
    }
}
