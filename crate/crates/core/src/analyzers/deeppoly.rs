use std::collections::BTreeMap;

use num::{Signed, Zero};

use super::{check_box, AffineForm, AnalysisResult, Detail, InputBox, LinearBoundPair, RelaxationId, ReluBound};
use crate::error::Result;
use crate::network::{Activation, ReluNetwork, Source};
use crate::numerics::rational::{int, Rational};

/// Affine expression over inputs and earlier neurons.
#[derive(Debug, Clone)]
struct Expr {
    bias: Rational,
    terms: BTreeMap<Source, Rational>,
}

impl Expr {
    fn zero() -> Self {
        Expr {
            bias: Rational::zero(),
            terms: BTreeMap::new(),
        }
    }

    fn scaled(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Expr {
            bias: &self.bias * c,
            terms: self.terms.iter().map(|(s, v)| (*s, v * c)).collect(),
        }
    }

    fn add_scaled(&mut self, other: &Expr, c: &Rational) {
        self.bias += &other.bias * c;
        for (s, v) in &other.terms {
            let e = self.terms.entry(*s).or_insert_with(Rational::zero);
            *e += v * c;
            if e.is_zero() {
                self.terms.remove(s);
            }
        }
    }
}

struct Bounds {
    lower: Expr,
    upper: Expr,
}

/// Substitutes neuron bounds in descending neuron order until only inputs remain.
fn backsubstitute(mut e: Expr, want_upper: bool, bounds: &[Bounds], input_dim: usize) -> AffineForm {
    while let Some((&Source::Neuron(j), _)) = e.terms.last_key_value() {
        let c = e.terms.remove(&Source::Neuron(j)).expect("present");
        let b = if c.is_positive() == want_upper {
            &bounds[j].upper
        } else {
            &bounds[j].lower
        };
        e.add_scaled(b, &c);
    }
    let mut coeffs = vec![Rational::zero(); input_dim];
    for (s, v) in e.terms {
        if let Source::Input(i) = s {
            coeffs[i] = v;
        }
    }
    AffineForm { coeffs, bias: e.bias }
}

/// DeepPoly with a fixed lower-bound slope `lambda` in {0, 1} for every
/// unstable ReLU: `lambda * v <= relu(v) <= u/(u-l) * (v - l)`.
///
/// Bounds are kept over immediate predecessors and concretized by full
/// backsubstitution to the input box.
pub fn deeppoly(net: &ReluNetwork, b: &InputBox, lambda: u8) -> Result<AnalysisResult> {
    check_box(net, b)?;
    assert!(lambda <= 1, "lambda must be 0 or 1");
    let d = net.input_dim();
    let mut bounds: Vec<Bounds> = Vec::with_capacity(net.neurons().len());
    let mut relu_bounds = Vec::new();
    for (k, n) in net.neurons().iter().enumerate() {
        let pre = Expr {
            bias: n.bias.clone(),
            terms: n.coeffs.iter().cloned().collect(),
        };
        let entry = match n.act {
            Activation::Identity => Bounds {
                lower: pre.clone(),
                upper: pre,
            },
            Activation::Relu => {
                let l = backsubstitute(pre.clone(), false, &bounds, d).range(b).0;
                let u = backsubstitute(pre.clone(), true, &bounds, d).range(b).1;
                relu_bounds.push(ReluBound {
                    neuron: k,
                    lower: l.clone(),
                    upper: u.clone(),
                });
                if !l.is_negative() {
                    Bounds {
                        lower: pre.clone(),
                        upper: pre,
                    }
                } else if !u.is_positive() {
                    Bounds {
                        lower: Expr::zero(),
                        upper: Expr::zero(),
                    }
                } else {
                    let slope = &u / (&u - &l);
                    let mut upper = pre.scaled(&slope);
                    upper.bias -= &slope * &l;
                    Bounds {
                        lower: pre.scaled(&int(lambda as i64)),
                        upper,
                    }
                }
            }
        };
        bounds.push(entry);
    }
    let linear: Vec<LinearBoundPair> = bounds
        .iter()
        .map(|bd| LinearBoundPair {
            lower: backsubstitute(bd.lower.clone(), false, &bounds, d),
            upper: backsubstitute(bd.upper.clone(), true, &bounds, d),
        })
        .collect();
    let out = &linear[net.output()];
    let lower = out.lower.range(b).0;
    let upper = out.upper.range(b).1;
    Ok(AnalysisResult {
        relaxation: if lambda == 0 { RelaxationId::Dp0 } else { RelaxationId::Dp1 },
        lower,
        upper,
        relu_bounds,
        detail: Detail::Linear(linear),
    })
}
