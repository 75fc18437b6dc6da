//! Precision verdicts over finite box families.
//!
//! A box family is a testable surrogate for "every box in the domain": a
//! precise verdict is evidence, not a proof.

pub mod table1;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analyzers::{analyze, AnalysisResult, Detail, InputBox, RelaxationId};
use crate::cpwl::Cpwl1D;
use crate::error::{Error, Result};
use crate::network::ReluNetwork;
use crate::numerics::rational::{int, render, to_f64, Rational};
use crate::oracle;

pub use table1::{table1_matrix, Mark, Table1Config, Table1Report};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoxStrategy {
    BreakpointSpans,
    RandomRational { count: usize, seed: u64 },
    Exhaustive2DGrid { resolution: usize },
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxFamily {
    pub strategies: Vec<BoxStrategy>,
    pub boxes: Vec<InputBox>,
}

impl BoxFamily {
    /// All `[x_i, x_j]` with `i < j`, plus `[m_i, m_j]` over the midpoints
    /// `m_i = (x_i + x_{i+1}) / 2`.
    pub fn breakpoint_spans(points: &[Rational]) -> Self {
        let mut xs = points.to_vec();
        xs.sort();
        xs.dedup();
        let two = int(2);
        let mids: Vec<Rational> = xs.windows(2).map(|w| (&w[0] + &w[1]) / &two).collect();
        let mut boxes = Vec::new();
        for set in [&xs, &mids] {
            for i in 0..set.len() {
                for j in i + 1..set.len() {
                    boxes.push(InputBox::interval1(set[i].clone(), set[j].clone()).expect("ordered"));
                }
            }
        }
        BoxFamily {
            strategies: vec![BoxStrategy::BreakpointSpans],
            boxes,
        }
    }

    /// Breakpoint spans of a function on its own domain.
    pub fn for_function(f: &Cpwl1D) -> Self {
        Self::breakpoint_spans(&f.xs())
    }

    /// `count` random sub-boxes of `domain`, endpoints with denominators up to 64.
    pub fn random(domain: &InputBox, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BoxFamily {
            strategies: vec![BoxStrategy::RandomRational { count, seed }],
            boxes: (0..count).map(|_| domain.sample_subbox(&mut rng, 64)).collect(),
        }
    }

    /// Every box of a 2D domain whose corners lie on a `resolution` grid.
    pub fn grid_2d(domain: &InputBox, resolution: usize) -> Result<Self> {
        if domain.dim() != 2 || resolution == 0 {
            return Err(Error::InvalidBox("grid family needs a 2D domain and resolution >= 1".into()));
        }
        let axis = |i: usize| -> Vec<(Rational, Rational)> {
            let (l, u) = domain.interval(i);
            let step = (u - l) / int(resolution as i64);
            let g: Vec<Rational> = (0..=resolution).map(|k| l + &step * int(k as i64)).collect();
            let mut out = Vec::new();
            for a in 0..g.len() {
                for b in a + 1..g.len() {
                    out.push((g[a].clone(), g[b].clone()));
                }
            }
            out
        };
        let (ax, ay) = (axis(0), axis(1));
        let mut boxes = Vec::with_capacity(ax.len() * ay.len());
        for x in &ax {
            for y in &ay {
                boxes.push(InputBox::new(vec![x.clone(), y.clone()])?);
            }
        }
        Ok(BoxFamily {
            strategies: vec![BoxStrategy::Exhaustive2DGrid { resolution }],
            boxes,
        })
    }

    pub fn explicit(boxes: Vec<InputBox>) -> Self {
        BoxFamily {
            strategies: vec![BoxStrategy::Explicit],
            boxes,
        }
    }

    pub fn union(mut self, other: BoxFamily) -> Self {
        self.strategies.extend(other.strategies);
        self.boxes.extend(other.boxes);
        self
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// What the network is checked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Function(Cpwl1D),
    /// Exact ranges of this network via the pattern-enumeration oracle.
    Network(ReluNetwork),
}

impl Reference {
    pub fn exact_range(&self, b: &InputBox) -> Result<(Rational, Rational)> {
        match self {
            Reference::Function(f) => f.exact_range(b.interval(0).0, b.interval(0).1),
            Reference::Network(n) => oracle::exact_range(n, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxVerdict {
    pub domain: InputBox,
    pub analyzer: (Rational, Rational),
    pub oracle: (Rational, Rational),
    pub precise: bool,
    /// Input attaining the first loose analyzer bound, when the relaxation exposes one.
    pub loose_at: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub index: usize,
    pub verdict: BoxVerdict,
    /// Bisection-shrunk imprecise box inside the original witness.
    pub minimized: BoxVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionReport {
    pub relaxation: RelaxationId,
    pub verdicts: Vec<BoxVerdict>,
    pub witness: Option<Witness>,
}

impl PrecisionReport {
    pub fn all_precise(&self) -> bool {
        self.witness.is_none()
    }

    pub fn imprecise_count(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.precise).count()
    }

    pub fn to_json(&self) -> Value {
        let pair = |(l, u): &(Rational, Rational)| json!([render(l), render(u)]);
        let verdict = |v: &BoxVerdict| {
            json!({
                "box": v.domain.to_string(),
                "analyzer": pair(&v.analyzer),
                "oracle": pair(&v.oracle),
                "precise": v.precise,
                "loose_at": v.loose_at.as_ref().map(|x| x.iter().map(render).collect::<Vec<_>>()),
            })
        };
        json!({
            "relax": self.relaxation.as_str(),
            "note": "box-family surrogate for all boxes; a precise verdict is evidence, not a proof",
            "all_precise": self.all_precise(),
            "boxes": self.verdicts.iter().map(verdict).collect::<Vec<_>>(),
            "witness": self.witness.as_ref().map(|w| json!({
                "index": w.index,
                "box": verdict(&w.verdict),
                "minimized": verdict(&w.minimized),
            })),
        })
    }

    /// One row per box: `l,u,oracle_lo,oracle_hi,D_lo,D_hi,precise`.
    /// Multi-dimensional corners are written as `;`-joined coordinates.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("l,u,oracle_lo,oracle_hi,D_lo,D_hi,precise\n");
        for v in &self.verdicts {
            let join = |xs: Vec<Rational>| xs.iter().map(render).collect::<Vec<_>>().join(";");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                join(v.domain.lower()),
                join(v.domain.upper()),
                render(&v.oracle.0),
                render(&v.oracle.1),
                render(&v.analyzer.0),
                render(&v.analyzer.1),
                v.precise
            );
        }
        s
    }
}

fn verdict(net: &ReluNetwork, reference: &Reference, relax: RelaxationId, b: &InputBox) -> Result<BoxVerdict> {
    let r: AnalysisResult = analyze(net, b, relax)?;
    let oracle = reference.exact_range(b)?;
    let precise = r.lower == oracle.0 && r.upper == oracle.1;
    let loose_at = match (&r.detail, precise) {
        (Detail::Polytope { argmin, argmax, .. }, false) => Some(if r.upper != oracle.1 { argmax.clone() } else { argmin.clone() }),
        _ => None,
    };
    Ok(BoxVerdict {
        domain: b.clone(),
        analyzer: r.interval(),
        oracle,
        precise,
        loose_at,
    })
}

fn halves(b: &InputBox) -> Vec<InputBox> {
    let two = int(2);
    let mut out = Vec::new();
    for i in 0..b.dim() {
        let (l, u) = b.interval(i);
        if l == u {
            continue;
        }
        let m = (l + u) / &two;
        for (nl, nu) in [(l.clone(), m.clone()), (m, u.clone())] {
            let mut dims = b.dims().to_vec();
            dims[i] = (nl, nu);
            out.push(InputBox::new(dims).expect("ordered"));
        }
    }
    out
}

/// Repeatedly moves to the first imprecise half-box, at most `steps` times.
fn minimize(net: &ReluNetwork, reference: &Reference, relax: RelaxationId, start: BoxVerdict, steps: usize) -> Result<BoxVerdict> {
    let mut cur = start;
    for _ in 0..steps {
        let mut next = None;
        for h in halves(&cur.domain) {
            let v = verdict(net, reference, relax, &h)?;
            if !v.precise {
                next = Some(v);
                break;
            }
        }
        match next {
            Some(v) => cur = v,
            None => break,
        }
    }
    Ok(cur)
}

/// Confirms that `net` computes the reference before any verdict is issued.
pub fn verify_encoding(net: &ReluNetwork, reference: &Reference, family: &BoxFamily) -> Result<()> {
    match reference {
        Reference::Function(f) => {
            let (lo, hi) = f.domain();
            let g = net.to_cpwl(&InputBox::interval1(lo, hi)?)?;
            if &g != f {
                return Err(Error::EncodingMismatch(format!("network computes {} not {}", g.to_json(), f.to_json())));
            }
        }
        Reference::Network(r) => {
            if r.input_dim() != net.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: r.input_dim(),
                    got: net.input_dim(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for b in &family.boxes {
                let mut pts = vec![b.lower(), b.upper(), b.center()];
                pts.extend((0..4).map(|_| b.sample(&mut rng, 32)));
                for x in pts {
                    if net.evaluate(&x)? != r.evaluate(&x)? {
                        let p: Vec<String> = x.iter().map(render).collect();
                        return Err(Error::EncodingMismatch(format!("values differ at ({})", p.join(", "))));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact per-box comparison of the analyzer against the reference's range.
pub fn check_precise(net: &ReluNetwork, reference: &Reference, relax: RelaxationId, family: &BoxFamily) -> Result<PrecisionReport> {
    verify_encoding(net, reference, family)?;
    let verdicts: Vec<BoxVerdict> = family
        .boxes
        .par_iter()
        .map(|b| verdict(net, reference, relax, b))
        .collect::<Result<Vec<_>>>()?;
    let witness = match verdicts.iter().position(|v| !v.precise) {
        Some(index) => Some(Witness {
            index,
            verdict: verdicts[index].clone(),
            minimized: minimize(net, reference, relax, verdicts[index].clone(), 12)?,
        }),
        None => None,
    };
    Ok(PrecisionReport {
        relaxation: relax,
        verdicts,
        witness,
    })
}

/// Samples of `(x, h(x), lower(x), upper(x))` across a 1D box for plotting
/// the relaxation's shading.
pub fn plot_data(net: &ReluNetwork, b: &InputBox, relax: RelaxationId, samples: usize) -> Result<String> {
    if net.input_dim() != 1 {
        return Err(Error::NotUnivariate(net.input_dim()));
    }
    let (l, u) = b.interval(0);
    let mut xs: Vec<Rational> = (0..=samples.max(1))
        .map(|k| l + (u - l) * Rational::new(k.into(), samples.max(1).into()))
        .collect();
    if let Ok(f) = net.to_cpwl(b) {
        xs.extend(f.xs());
    }
    xs.sort();
    xs.dedup();
    let mut s = String::from("x,h,lower,upper\n");
    for x in xs {
        let p = [x.clone()];
        let h = net.evaluate(&p)?;
        let (lo, hi) = crate::analyzers::fiber_bounds(net, b, relax, &p)?;
        let _ = writeln!(s, "{},{},{},{}", to_f64(&x), to_f64(&h), to_f64(&lo), to_f64(&hi));
    }
    Ok(s)
}
