//! Brute-force ground truth: exact ranges and graph hulls.

use num::{Signed, Zero};

use crate::analyzers::{ibp, AffineForm, InputBox};
use crate::error::{Error, Result};
use crate::network::{Activation, ReluNetwork, Source};
use crate::numerics::rational::{int, Rational};
use crate::numerics::{convex_hull_2d, lp_solve, Direction, HullPolygon, LinProgram, LpOutcome, Relation};

/// At most this many unstable ReLUs, i.e. `2^20` activation patterns.
pub const PATTERN_CAP_LOG2: usize = 20;

/// Exact `(min, max)` of a univariate network over an interval.
pub fn exact_range_univariate(net: &ReluNetwork, b: &InputBox) -> Result<(Rational, Rational)> {
    if net.input_dim() != 1 {
        return Err(Error::NotUnivariate(net.input_dim()));
    }
    if b.dim() == 1 && b.is_point() {
        let y = net.evaluate(&b.lower())?;
        return Ok((y.clone(), y));
    }
    let f = net.to_cpwl(b)?;
    let (lo, hi) = f.domain();
    f.exact_range(&lo, &hi)
}

/// Convex hull of the graph of a univariate network over an interval.
pub fn exact_hull_univariate(net: &ReluNetwork, b: &InputBox) -> Result<HullPolygon> {
    if net.input_dim() != 1 {
        return Err(Error::NotUnivariate(net.input_dim()));
    }
    if b.dim() == 1 && b.is_point() {
        let x = b.lower();
        let y = net.evaluate(&x)?;
        return convex_hull_2d(&[(x[0].clone(), y)]);
    }
    Ok(net.to_cpwl(b)?.graph_hull())
}

/// One linear region: the ReLUs that are unstable on the box, each with its
/// state, and the affine output on that region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub pattern: Vec<(usize, bool)>,
    pub output: AffineForm,
    pub min: Rational,
    pub max: Rational,
}

impl Region {
    /// Whether `x` satisfies every sign condition of the pattern.
    pub fn admits(&self, net: &ReluNetwork, x: &[Rational]) -> Result<bool> {
        let t = net.trace(x)?;
        Ok(self.pattern.iter().all(|&(k, active)| {
            let v = &t[k].0;
            if active {
                !v.is_negative()
            } else {
                !v.is_positive()
            }
        }))
    }
}

struct Search<'a> {
    net: &'a ReluNetwork,
    stable: Vec<Option<bool>>,
    regions: Vec<Region>,
}

fn dense(f: &AffineForm) -> Vec<Rational> {
    f.coeffs.clone()
}

fn lp_range(lp: &LinProgram, f: &AffineForm) -> Result<Option<(Rational, Rational)>> {
    let solve = |dir| -> Result<Option<Rational>> {
        match lp_solve(&lp.with_objective(dir, dense(f))?) {
            LpOutcome::Optimal { value, .. } => Ok(Some(value + &f.bias)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::LpDefect("unbounded")),
        }
    };
    let Some(lo) = solve(Direction::Minimize)? else {
        return Ok(None);
    };
    let hi = solve(Direction::Maximize)?.ok_or(Error::LpDefect("infeasible after feasible"))?;
    Ok(Some((lo, hi)))
}

impl Search<'_> {
    fn affine_of(&self, k: usize, post: &[AffineForm]) -> AffineForm {
        let n = &self.net.neurons()[k];
        let mut f = AffineForm {
            coeffs: vec![Rational::zero(); self.net.input_dim()],
            bias: n.bias.clone(),
        };
        for (s, c) in &n.coeffs {
            match *s {
                Source::Input(i) => f.coeffs[i] += c,
                Source::Neuron(j) => {
                    f.bias += c * &post[j].bias;
                    for (a, b) in f.coeffs.iter_mut().zip(&post[j].coeffs) {
                        *a += c * b;
                    }
                }
            }
        }
        f
    }

    fn zero_form(&self) -> AffineForm {
        AffineForm {
            coeffs: vec![Rational::zero(); self.net.input_dim()],
            bias: Rational::zero(),
        }
    }

    fn dfs(&mut self, k: usize, lp: &LinProgram, post: &mut Vec<AffineForm>, pattern: &mut Vec<(usize, bool)>) -> Result<()> {
        let neurons = self.net.neurons();
        if k == neurons.len() {
            let out = post[self.net.output()].clone();
            if let Some((min, max)) = lp_range(lp, &out)? {
                self.regions.push(Region {
                    pattern: pattern.clone(),
                    output: out,
                    min,
                    max,
                });
            }
            return Ok(());
        }
        let pre = self.affine_of(k, post);
        if neurons[k].act == Activation::Identity {
            post.push(pre);
            self.dfs(k + 1, lp, post, pattern)?;
            post.pop();
            return Ok(());
        }
        match self.stable[k] {
            Some(active) => {
                post.push(if active { pre } else { self.zero_form() });
                self.dfs(k + 1, lp, post, pattern)?;
                post.pop();
            }
            None => {
                let Some((lo, hi)) = lp_range(lp, &pre)? else {
                    return Ok(());
                };
                for active in [false, true] {
                    if (active && hi.is_negative()) || (!active && lo.is_positive()) {
                        continue;
                    }
                    let mut sub = lp.clone();
                    let rel = if active { Relation::Ge } else { Relation::Le };
                    sub.add_constraint(dense(&pre), rel, -pre.bias.clone())?;
                    pattern.push((k, active));
                    post.push(if active { pre.clone() } else { self.zero_form() });
                    self.dfs(k + 1, &sub, post, pattern)?;
                    post.pop();
                    pattern.pop();
                }
            }
        }
        Ok(())
    }
}

/// Every feasible activation pattern of the ReLUs that IBP cannot fix, with
/// the exact output range on each region.
pub fn activation_regions(net: &ReluNetwork, b: &InputBox) -> Result<Vec<Region>> {
    let pre = ibp(net, b)?;
    let mut stable = vec![None; net.neurons().len()];
    let mut unstable = 0;
    for r in &pre.relu_bounds {
        if !r.lower.is_negative() {
            stable[r.neuron] = Some(true);
        } else if !r.upper.is_positive() {
            stable[r.neuron] = Some(false);
        } else {
            unstable += 1;
        }
    }
    if unstable > PATTERN_CAP_LOG2 {
        return Err(Error::BudgetExceeded {
            unstable,
            cap: PATTERN_CAP_LOG2,
        });
    }
    let mut lp = LinProgram::new(b.dim());
    for (i, (l, u)) in b.dims().iter().enumerate() {
        lp.set_lower_bound(i, l.clone());
        let mut row = vec![Rational::zero(); b.dim()];
        row[i] = int(1);
        lp.add_constraint(row, Relation::Le, u.clone())?;
    }
    let mut s = Search {
        net,
        stable,
        regions: Vec::new(),
    };
    s.dfs(0, &lp, &mut Vec::new(), &mut Vec::new())?;
    Ok(s.regions)
}

/// Exact `(min, max)` over a box by enumerating activation patterns.
pub fn exact_range_multivariate(net: &ReluNetwork, b: &InputBox) -> Result<(Rational, Rational)> {
    if b.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: b.dim(),
        });
    }
    let regions = activation_regions(net, b)?;
    let min = regions.iter().map(|r| &r.min).min().ok_or(Error::LpDefect("no feasible region"))?;
    let max = regions.iter().map(|r| &r.max).max().ok_or(Error::LpDefect("no feasible region"))?;
    Ok((min.clone(), max.clone()))
}

/// Exact range for any supported network, univariate or not.
pub fn exact_range(net: &ReluNetwork, b: &InputBox) -> Result<(Rational, Rational)> {
    if net.input_dim() == 1 {
        exact_range_univariate(net, b)
    } else {
        exact_range_multivariate(net, b)
    }
}
