//! Network encodings of univariate CPWL functions whose analysis under a
//! given relaxation is precise.

use std::fmt;
use std::str::FromStr;

use num::{Signed, Zero};

use crate::cpwl::Cpwl1D;
use crate::error::{Error, Result};
use crate::network::{Activation, NetBuilder, Neuron, ReluNetwork, Source};
use crate::numerics::rational::{int, Rational};

const X: Source = Source::Input(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> Rational {
        match self {
            Sign::Plus => int(1),
            Sign::Minus => int(-1),
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Parses a sign string such as `++-+`.
pub fn parse_signs(s: &str) -> Result<Vec<Sign>> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(Sign::Plus),
            '-' => Ok(Sign::Minus),
            _ => Err(Error::InvalidCpwl(format!("bad sign character {c:?} in {s:?}"))),
        })
        .collect()
}

pub fn render_signs(signs: &[Sign]) -> String {
    signs.iter().map(|s| if *s == Sign::Plus { '+' } else { '-' }).collect()
}

/// All `2^n` sign vectors of length `n`, in binary order with `+` as 0.
pub fn all_sign_vectors(n: usize) -> Vec<Vec<Sign>> {
    (0..1u64 << n)
        .map(|mask| {
            (0..n)
                .map(|i| if mask >> (n - 1 - i) & 1 == 0 { Sign::Plus } else { Sign::Minus })
                .collect()
        })
        .collect()
}

/// One term `gamma * relu(sign * (x - anchor))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingTerm {
    pub gamma: Rational,
    pub sign: Sign,
    pub anchor: Rational,
}

/// `h(x) = b + c x + sum gamma_i relu(sign_i (x - x_i))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingSpec {
    pub b: Rational,
    pub c: Rational,
    pub terms: Vec<EncodingTerm>,
}

impl EncodingSpec {
    pub fn to_network(&self) -> ReluNetwork {
        let mut nb = NetBuilder::new(1);
        let mut out = vec![(X, self.c.clone())];
        for t in &self.terms {
            let s = t.sign.value();
            let r = nb.relu(-(&s * &t.anchor), [(X, s)]);
            out.push((r, t.gamma.clone()));
        }
        let o = nb.linear(self.b.clone(), out);
        nb.finish(o).expect("well-formed single-layer network")
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.terms.iter().fold(&self.b + &self.c * x, |acc, t| {
            acc + &t.gamma * crate::numerics::rational::relu(&(t.sign.value() * (x - &t.anchor)))
        })
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Sign::Plus { "+" } else { "-" })
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match parse_signs(s)?.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::InvalidCpwl(format!("expected one sign, got {s:?}"))),
        }
    }
}

/// Appends `phi(x) = beta - relu(beta - beta/(x1-x0) relu(x - x0))` and
/// returns its output neuron.
fn push_step(nb: &mut NetBuilder, x0: &Rational, x1: &Rational, beta: &Rational) -> Source {
    let inner = nb.relu(-x0.clone(), [(X, int(1))]);
    let outer = nb.relu(beta.clone(), [(inner, -(beta / (x1 - x0)))]);
    nb.linear(beta.clone(), [(outer, int(-1))])
}

/// The ramp `phi_{x0,x1,beta}`: 0 left of `x0`, `beta` right of `x1`, linear between.
pub fn step_network(x0: &Rational, x1: &Rational, beta: &Rational) -> Result<ReluNetwork> {
    if x0 >= x1 {
        return Err(Error::InvalidCpwl("step needs x0 < x1".into()));
    }
    if beta.is_negative() {
        return Err(Error::InvalidCpwl("step needs beta >= 0".into()));
    }
    let mut nb = NetBuilder::new(1);
    let o = push_step(&mut nb, x0, x1, beta);
    nb.finish(o)
}

/// `f(x_0) + sum_i phi_{x_i, x_{i+1}, f(x_{i+1}) - f(x_i)}` for increasing `f`;
/// decreasing `f` is built for `-f` with the output negated after the last block.
pub fn ibp_monotone(f: &Cpwl1D) -> Result<ReluNetwork> {
    let class = f.classify();
    if !class.monotone() {
        return Err(Error::ClassMismatch("ibp_monotone needs a monotone function".into()));
    }
    let g = if class.monotone_increasing { f.clone() } else { f.neg() };
    let sign = if class.monotone_increasing { int(1) } else { int(-1) };
    let pts = g.points();
    let mut nb = NetBuilder::new(1);
    let steps: Vec<Source> = pts
        .windows(2)
        .map(|w| push_step(&mut nb, &w[0].0, &w[1].0, &(&w[1].1 - &w[0].1)))
        .collect();
    let o = nb.linear(&sign * &pts[0].1, steps.into_iter().map(|s| (s, sign.clone())));
    nb.finish(o)
}

fn require_convex(f: &Cpwl1D, what: &str) -> Result<()> {
    if !f.classify().convex {
        return Err(Error::ClassMismatch(format!("{what} needs a convex function")));
    }
    Ok(())
}

/// Coefficients of the single-layer form for convex `f` with the given signs
/// at the interior breakpoints.
pub fn convex_encoding_spec(f: &Cpwl1D, signs: &[Sign]) -> Result<EncodingSpec> {
    require_convex(f, "convex_encoding")?;
    let pts = f.points();
    if signs.len() != pts.len() - 2 {
        return Err(Error::DimensionMismatch {
            expected: pts.len() - 2,
            got: signs.len(),
        });
    }
    let alpha0 = &f.slopes()[0];
    let (x0, y0) = &pts[0];
    let mut b = y0 - x0 * alpha0;
    let mut c = alpha0.clone();
    let mut terms = Vec::with_capacity(signs.len());
    for ((gamma, (xi, _)), sign) in f.slope_changes().into_iter().zip(&pts[1..]).zip(signs) {
        if *sign == Sign::Minus {
            b -= &gamma * xi;
            c += &gamma;
        }
        terms.push(EncodingTerm {
            gamma,
            sign: *sign,
            anchor: xi.clone(),
        });
    }
    Ok(EncodingSpec { b, c, terms })
}

pub fn convex_encoding(f: &Cpwl1D, signs: &[Sign]) -> Result<ReluNetwork> {
    Ok(convex_encoding_spec(f, signs)?.to_network())
}

/// Concave `f` via the convex encoding of `-f` with the output negated.
pub fn concave_encoding(f: &Cpwl1D, signs: &[Sign]) -> Result<ReluNetwork> {
    if !f.classify().concave {
        return Err(Error::ClassMismatch("concave_encoding needs a concave function".into()));
    }
    let mut spec = convex_encoding_spec(&f.neg(), signs)?;
    spec.b = -spec.b;
    spec.c = -spec.c;
    for t in &mut spec.terms {
        t.gamma = -t.gamma.clone();
    }
    Ok(spec.to_network())
}

/// The DP-0-precise form for convex `f`: every ReLU opens away from the
/// minimum, a unique interior minimum gets one ReLU on each side, and there
/// is no linear term.
pub fn dp0_precise_convex_spec(f: &Cpwl1D) -> Result<EncodingSpec> {
    require_convex(f, "dp0_precise_convex")?;
    let pts = f.points();
    let a = f.slopes();
    let n = a.len();
    let mut terms = Vec::new();
    let mut term = |gamma: Rational, sign, anchor: &Rational| {
        terms.push(EncodingTerm {
            gamma,
            sign,
            anchor: anchor.clone(),
        })
    };
    if a[0].is_positive() {
        term(a[0].clone(), Sign::Plus, &pts[0].0);
    }
    for i in 1..n {
        let xi = &pts[i].0;
        if !a[i].is_positive() {
            term(&a[i] - &a[i - 1], Sign::Minus, xi);
        } else if !a[i - 1].is_negative() {
            term(&a[i] - &a[i - 1], Sign::Plus, xi);
        } else {
            term(a[i].clone(), Sign::Plus, xi);
            term(-a[i - 1].clone(), Sign::Minus, xi);
        }
    }
    if a[n - 1].is_negative() {
        term(-a[n - 1].clone(), Sign::Minus, &pts[n].0);
    }
    let b = pts.iter().map(|p| &p.1).min().expect("non-empty").clone();
    Ok(EncodingSpec {
        b,
        c: Rational::zero(),
        terms,
    })
}

pub fn dp0_precise_convex(f: &Cpwl1D) -> Result<ReluNetwork> {
    Ok(dp0_precise_convex_spec(f)?.to_network())
}

/// Replaces every `relu(v)` by `v + relu(-v)`.
pub fn dp1_substitute(net: &ReluNetwork) -> ReluNetwork {
    let mut map: Vec<usize> = Vec::with_capacity(net.neurons().len());
    let mut out: Vec<Neuron> = Vec::new();
    let remap = |coeffs: &[(Source, Rational)], map: &[usize]| -> Vec<(Source, Rational)> {
        coeffs
            .iter()
            .map(|(s, c)| match *s {
                Source::Neuron(j) => (Source::Neuron(map[j]), c.clone()),
                input => (input, c.clone()),
            })
            .collect()
    };
    for n in net.neurons() {
        let coeffs = remap(&n.coeffs, &map);
        match n.act {
            Activation::Identity => out.push(Neuron::new(n.bias.clone(), coeffs, Activation::Identity)),
            Activation::Relu => {
                let neg = coeffs.iter().map(|(s, c)| (*s, -c.clone()));
                out.push(Neuron::new(-n.bias.clone(), neg, Activation::Relu));
                let r = Source::Neuron(out.len() - 1);
                let mut v = coeffs;
                v.push((r, int(1)));
                out.push(Neuron::new(n.bias.clone(), v, Activation::Identity));
            }
        }
        map.push(out.len() - 1);
    }
    ReluNetwork::new(net.input_dim(), out, vec![map[net.output()]]).expect("substitution keeps the DAG valid")
}

/// `h_1(x) = (x - x_0) alpha_0 + y_0` plus `(alpha_i - alpha_{i-1}) relu(x - x_i)`
/// per interior breakpoint.
pub fn mn_single_layer(f: &Cpwl1D) -> ReluNetwork {
    let pts = f.points();
    let alpha0 = f.slopes()[0].clone();
    let spec = EncodingSpec {
        b: &pts[0].1 - &pts[0].0 * &alpha0,
        c: alpha0,
        terms: f
            .slope_changes()
            .into_iter()
            .zip(&pts[1..])
            .map(|(gamma, (xi, _))| EncodingTerm {
                gamma,
                sign: Sign::Plus,
                anchor: xi.clone(),
            })
            .collect(),
    };
    spec.to_network()
}
