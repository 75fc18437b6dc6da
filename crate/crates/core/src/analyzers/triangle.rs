use std::collections::BTreeMap;

use num::{Signed, Zero};

use super::{check_box, AnalysisResult, Detail, InputBox, RelaxationId, ReluBound};
use crate::error::{Error, Result};
use crate::network::{Activation, ReluNetwork, Source};
use crate::numerics::rational::Rational;
use crate::numerics::{lp_solve, Direction, LinProgram, LpOutcome, Relation};

/// Affine expression over LP variables.
#[derive(Debug, Clone, Default)]
struct Lin {
    bias: Rational,
    terms: BTreeMap<usize, Rational>,
}

impl Lin {
    fn var(i: usize) -> Self {
        Lin {
            bias: Rational::zero(),
            terms: BTreeMap::from([(i, Rational::from_integer(1.into()))]),
        }
    }

    fn add_scaled(&mut self, other: &Lin, c: &Rational) {
        self.bias += &other.bias * c;
        for (i, v) in &other.terms {
            let e = self.terms.entry(*i).or_insert_with(Rational::zero);
            *e += v * c;
            if e.is_zero() {
                self.terms.remove(i);
            }
        }
    }

    fn dense(&self, vars: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); vars];
        for (i, v) in &self.terms {
            out[*i] = v.clone();
        }
        out
    }

    /// Interval of the expression given per-variable intervals.
    fn interval(&self, ivs: &[(Rational, Rational)]) -> (Rational, Rational) {
        let mut lo = self.bias.clone();
        let mut hi = self.bias.clone();
        for (i, c) in &self.terms {
            let (l, u) = &ivs[*i];
            if c.is_positive() {
                lo += c * l;
                hi += c * u;
            } else {
                lo += c * u;
                hi += c * l;
            }
        }
        (lo, hi)
    }

    /// Point of the interval box attaining the extreme, free coordinates at their lower end.
    fn extreme_point(&self, ivs: &[(Rational, Rational)], maximize: bool, dims: usize) -> Vec<Rational> {
        (0..dims)
            .map(|i| {
                let up = self.terms.get(&i).is_some_and(|c| c.is_positive() == maximize);
                if up {
                    ivs[i].1.clone()
                } else {
                    ivs[i].0.clone()
                }
            })
            .collect()
    }
}

struct Model {
    lp: LinProgram,
    intervals: Vec<(Rational, Rational)>,
    output: Lin,
    relu_bounds: Vec<ReluBound>,
    inputs: usize,
}

fn optimize(lp: &LinProgram, e: &Lin, dir: Direction) -> Result<(Rational, Vec<Rational>)> {
    let p = lp.with_objective(dir, e.dense(lp.variables()))?;
    match lp_solve(&p) {
        LpOutcome::Optimal { value, point } => Ok((value + &e.bias, point)),
        LpOutcome::Infeasible => Err(Error::LpDefect("infeasible")),
        LpOutcome::Unbounded => Err(Error::LpDefect("unbounded")),
    }
}

/// Exact range of `e` over the current polytope. Expressions over inputs
/// only are ranged directly on the box.
fn range(m: &Model, e: &Lin) -> Result<(Rational, Rational)> {
    if e.terms.keys().all(|&i| i < m.inputs) {
        return Ok(e.interval(&m.intervals));
    }
    let (lo, _) = optimize(&m.lp, e, Direction::Minimize)?;
    let (hi, _) = optimize(&m.lp, e, Direction::Maximize)?;
    Ok((lo, hi))
}

fn build(net: &ReluNetwork, b: &InputBox) -> Result<Model> {
    check_box(net, b)?;
    let d = net.input_dim();
    let mut lp = LinProgram::new(0);
    let mut intervals = Vec::new();
    for (l, u) in b.dims() {
        let i = lp.add_variable(Some(l.clone()));
        let mut row = vec![Rational::zero(); lp.variables()];
        row[i] = Rational::from_integer(1.into());
        lp.add_constraint(row, Relation::Le, u.clone())?;
        intervals.push((l.clone(), u.clone()));
    }
    let mut m = Model {
        lp,
        intervals,
        output: Lin::default(),
        relu_bounds: Vec::new(),
        inputs: d,
    };
    let mut post: Vec<Lin> = Vec::with_capacity(net.neurons().len());
    for (k, n) in net.neurons().iter().enumerate() {
        let mut pre = Lin {
            bias: n.bias.clone(),
            terms: BTreeMap::new(),
        };
        for (s, c) in &n.coeffs {
            match *s {
                Source::Input(i) => pre.add_scaled(&Lin::var(i), c),
                Source::Neuron(j) => pre.add_scaled(&post[j], c),
            }
        }
        if n.act == Activation::Identity {
            post.push(pre);
            continue;
        }
        // Interval reasoning over the LP variables is a relaxation of the LP,
        // so a sign it proves is the sign the LP would prove.
        let cheap = pre.interval(&m.intervals);
        let (l, u) = if !cheap.0.is_negative() || !cheap.1.is_positive() {
            cheap
        } else {
            range(&m, &pre)?
        };
        m.relu_bounds.push(ReluBound {
            neuron: k,
            lower: l.clone(),
            upper: u.clone(),
        });
        if !l.is_negative() {
            post.push(pre);
        } else if !u.is_positive() {
            post.push(Lin::default());
        } else {
            let y = m.lp.add_variable(Some(Rational::zero()));
            let vars = m.lp.variables();
            // y >= v
            let mut row = Lin::var(y);
            row.add_scaled(&pre, &-Rational::from_integer(1.into()));
            m.lp.add_constraint(row.dense(vars), Relation::Ge, pre.bias.clone())?;
            // (u - l) y - u v <= -u l
            let mut row = Lin::default();
            row.add_scaled(&Lin::var(y), &(&u - &l));
            row.add_scaled(&pre, &-u.clone());
            m.lp.add_constraint(row.dense(vars), Relation::Le, -(&u * &l) + &u * &pre.bias)?;
            m.intervals.push((Rational::zero(), u.clone()));
            post.push(Lin::var(y));
        }
    }
    m.output = post.swap_remove(net.output());
    Ok(m)
}

/// Triangle relaxation solved as one exact LP.
///
/// Each unstable ReLU gets the rows `y >= 0`, `y >= v` and
/// `(u - l) y <= u (v - l)`, where `(l, u)` are the exact optimum of `v`
/// over the LP built from the earlier neurons. Stable ReLUs pass through
/// exactly.
pub fn triangle(net: &ReluNetwork, b: &InputBox) -> Result<AnalysisResult> {
    let m = build(net, b)?;
    let d = m.inputs;
    let out = &m.output;
    let ((lower, argmin), (upper, argmax)) = if out.terms.keys().all(|&i| i < d) {
        let (lo, hi) = out.interval(&m.intervals);
        (
            (lo, out.extreme_point(&m.intervals, false, d)),
            (hi, out.extreme_point(&m.intervals, true, d)),
        )
    } else {
        let (lo, pmin) = optimize(&m.lp, out, Direction::Minimize)?;
        let (hi, pmax) = optimize(&m.lp, out, Direction::Maximize)?;
        ((lo, pmin[..d].to_vec()), (hi, pmax[..d].to_vec()))
    };
    Ok(AnalysisResult {
        relaxation: RelaxationId::Tri,
        lower,
        upper,
        relu_bounds: m.relu_bounds,
        detail: Detail::Polytope {
            variables: m.lp.variables(),
            constraints: m.lp.constraints().len(),
            argmin,
            argmax,
        },
    })
}

/// Output range of the triangle polytope with the input pinned to `x`.
pub fn triangle_fiber(net: &ReluNetwork, b: &InputBox, x: &[Rational]) -> Result<(Rational, Rational)> {
    let mut m = build(net, b)?;
    for (i, v) in x.iter().enumerate() {
        let row = Lin::var(i).dense(m.lp.variables());
        m.lp.add_constraint(row, Relation::Eq, v.clone())?;
    }
    let (lo, _) = optimize(&m.lp, &m.output, Direction::Minimize)?;
    let (hi, _) = optimize(&m.lp, &m.output, Direction::Maximize)?;
    Ok((lo, hi))
}
