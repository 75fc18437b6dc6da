//! Rewriting networks whose ReLUs all kink on one hyperplane into the
//! single-layer form `b + W x + alpha relu(w^T x)` without loosening
//! triangle bounds.

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::analyzers::{triangle, InputBox, RelaxationId};
use crate::error::{Error, Result};
use crate::network::{classify_relu_stability, Activation, KinkHyperplane, NetBuilder, ReluNetwork, Source, Stability};
use crate::numerics::rational::{int, q, relu, render, Rational};

/// `h(z) = A^T relu(w z)` as `gamma z + alpha relu(z)`.
pub fn simplify_relu_sum(a: &[Rational], w: &[Rational]) -> Result<(Rational, Rational)> {
    if a.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: w.len(),
        });
    }
    let mut gamma = Rational::zero();
    let mut pos = Rational::zero();
    for (ai, wi) in a.iter().zip(w) {
        if wi.is_negative() {
            gamma += ai * wi;
        } else if wi.is_positive() {
            pos += ai * wi;
        }
    }
    let alpha = pos - &gamma;
    Ok((gamma, alpha))
}

/// `relu(gamma z + alpha relu(z))` as `gamma' z + alpha' relu(z)`.
pub fn simplify_composed(gamma: &Rational, alpha: &Rational) -> (Rational, Rational) {
    let g = -relu(&-gamma.clone());
    let a = relu(&(alpha + gamma)) - &g;
    (g, a)
}

/// `bias + linear . x + sum c_k unit_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combination {
    pub bias: Rational,
    pub linear: Vec<Rational>,
    pub units: Vec<(usize, Rational)>,
}

impl Combination {
    fn zero(d: usize) -> Self {
        Combination {
            bias: Rational::zero(),
            linear: vec![Rational::zero(); d],
            units: Vec::new(),
        }
    }

    fn add_scaled(&mut self, other: &Combination, c: &Rational) {
        self.bias += &other.bias * c;
        for (a, b) in self.linear.iter_mut().zip(&other.linear) {
            *a += b * c;
        }
        for (k, v) in &other.units {
            match self.units.iter_mut().find(|(j, _)| j == k) {
                Some((_, e)) => *e += v * c,
                None => self.units.push((*k, v * c)),
            }
        }
        self.units.retain(|(_, v)| !v.is_zero());
        self.units.sort_by_key(|(k, _)| *k);
    }
}

/// A ReLU switching exactly on the kink hyperplane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinkUnit {
    /// Neuron of the source network this unit came from.
    pub neuron: usize,
    pub pre: Combination,
    /// 1 for units reading no other unit.
    pub depth: usize,
    /// The pre-activation as `pre_gamma z + pre_alpha relu(z)`.
    pub pre_gamma: Rational,
    pub pre_alpha: Rational,
    /// The unit's value as `gamma z + alpha relu(z)` with `z = w^T x`.
    pub gamma: Rational,
    pub alpha: Rational,
}

/// Skip-connected layered form: every unit is `relu` of an affine function
/// of the input plus earlier units, and the output is another such sum.
/// Grouping units by depth gives the layers `h^i = h_L + W_i relu(h_R)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormedNetwork {
    pub kink: KinkHyperplane,
    pub domain: InputBox,
    pub units: Vec<KinkUnit>,
    pub output: Combination,
}

impl FormedNetwork {
    pub fn input_dim(&self) -> usize {
        self.kink.dim()
    }

    pub fn depth(&self) -> usize {
        self.units.iter().map(|u| u.depth).max().unwrap_or(0)
    }

    /// Unit indices per layer, shallowest first.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.depth()];
        for (i, u) in self.units.iter().enumerate() {
            out[u.depth - 1].push(i);
        }
        out
    }

    fn eval_comb(c: &Combination, x: &[Rational], units: &[Rational]) -> Rational {
        let mut v = c.linear.iter().zip(x).fold(c.bias.clone(), |acc, (a, b)| acc + a * b);
        for (k, w) in &c.units {
            v += w * &units[*k];
        }
        v
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Rational> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut vals: Vec<Rational> = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let v = relu(&Self::eval_comb(&u.pre, x, &vals));
            vals.push(v);
        }
        Ok(Self::eval_comb(&self.output, x, &vals))
    }

    /// The structure as a plain network.
    pub fn to_network(&self) -> ReluNetwork {
        let d = self.input_dim();
        let mut nb = NetBuilder::new(d);
        let mut srcs: Vec<Source> = Vec::with_capacity(self.units.len());
        let terms = |c: &Combination, srcs: &[Source]| -> Vec<(Source, Rational)> {
            let lin = c.linear.iter().enumerate().map(|(i, a)| (Source::Input(i), a.clone()));
            lin.chain(c.units.iter().map(|(k, v)| (srcs[*k], v.clone()))).collect()
        };
        for u in &self.units {
            let s = nb.relu(u.pre.bias.clone(), terms(&u.pre, &srcs));
            srcs.push(s);
        }
        let o = nb.linear(self.output.bias.clone(), terms(&self.output, &srcs));
        nb.finish(o).expect("formed network is a valid DAG")
    }

    /// `(b, W, alpha)` with the output equal to `b + W x + alpha relu(w^T x)`.
    pub fn single_layer_coefficients(&self) -> (Rational, Vec<Rational>, Rational) {
        let (gamma, alpha) = sum_units(&self.output, &self.units);
        let w = self.kink.w();
        let weights = self.output.linear.iter().zip(w).map(|(a, wi)| a + &gamma * wi).collect();
        (self.output.bias.clone(), weights, alpha)
    }
}

/// Collapses `sum c_k unit_k` to `gamma z + alpha relu(z)`. Units of the
/// form `relu(s z)` are grouped with the ReLU-sum rule.
fn sum_units(c: &Combination, units: &[KinkUnit]) -> (Rational, Rational) {
    let (first, deeper): (Vec<_>, Vec<_>) = c.units.iter().partition(|(k, _)| units[*k].pre_alpha.is_zero());
    let a: Vec<Rational> = first.iter().map(|(_, v)| v.clone()).collect();
    let s: Vec<Rational> = first.iter().map(|(k, _)| units[*k].pre_gamma.clone()).collect();
    let (mut gamma, mut alpha) = simplify_relu_sum(&a, &s).expect("same length");
    for (k, v) in deeper {
        gamma += v * &units[*k].gamma;
        alpha += v * &units[*k].alpha;
    }
    (gamma, alpha)
}

/// Parallel test for `v = gamma w`; `None` when `v` is not a multiple of `w`.
fn multiple_of(v: &[Rational], w: &[Rational]) -> Option<Rational> {
    let pivot = w.iter().position(|c| !c.is_zero())?;
    let gamma = &v[pivot] / &w[pivot];
    v.iter().zip(w).all(|(a, b)| *a == &gamma * b).then_some(gamma)
}

/// Builds the formed structure from a network, absorbing ReLUs that the
/// triangle analysis proves stable on `b` and checking that every other
/// ReLU's pre-activation is `gamma z + alpha relu(z)`.
pub fn to_network_form(net: &ReluNetwork, b: &InputBox, kink: &KinkHyperplane) -> Result<FormedNetwork> {
    let d = net.input_dim();
    if kink.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: kink.dim(),
        });
    }
    let stability = classify_relu_stability(net, b, RelaxationId::Tri)?;
    let w = kink.w();
    let mut units: Vec<KinkUnit> = Vec::new();
    let mut vals: Vec<Combination> = Vec::with_capacity(net.neurons().len());
    for (k, n) in net.neurons().iter().enumerate() {
        let mut pre = Combination::zero(d);
        pre.bias = n.bias.clone();
        for (s, c) in &n.coeffs {
            match *s {
                Source::Input(i) => pre.linear[i] += c,
                Source::Neuron(j) => {
                    let v = vals[j].clone();
                    pre.add_scaled(&v, c);
                }
            }
        }
        if n.act == Activation::Identity {
            vals.push(pre);
            continue;
        }
        let state = &stability.iter().find(|(j, _)| *j == k).expect("every ReLU classified").1;
        match state {
            Stability::StablyActive => vals.push(pre),
            Stability::StablyInactive => vals.push(Combination::zero(d)),
            Stability::Unstable { .. } => {
                let (g_units, alpha) = sum_units(&pre, &units);
                let lin: Vec<Rational> = pre.linear.iter().zip(w).map(|(a, wi)| a + &g_units * wi).collect();
                let gamma = match multiple_of(&lin, w) {
                    Some(g) if pre.bias.is_zero() => g,
                    _ => return Err(Error::KinkMismatch { neuron: k }),
                };
                let (g2, a2) = simplify_composed(&gamma, &alpha);
                let depth = 1 + pre.units.iter().map(|(j, _)| units[*j].depth).max().unwrap_or(0);
                units.push(KinkUnit {
                    neuron: k,
                    pre,
                    depth,
                    pre_gamma: gamma,
                    pre_alpha: alpha,
                    gamma: g2,
                    alpha: a2,
                });
                let mut v = Combination::zero(d);
                v.units.push((units.len() - 1, int(1)));
                vals.push(v);
            }
        }
    }
    let output = vals.swap_remove(net.output());
    Ok(FormedNetwork {
        kink: kink.clone(),
        domain: b.clone(),
        units,
        output,
    })
}

/// `b + W x + alpha relu(w^T x)`, with no ReLU when `alpha = 0`.
pub fn collapse_to_single_layer(fnet: &FormedNetwork) -> ReluNetwork {
    let (bias, weights, alpha) = fnet.single_layer_coefficients();
    let mut nb = NetBuilder::new(fnet.input_dim());
    let mut terms: Vec<(Source, Rational)> = weights.into_iter().enumerate().map(|(i, c)| (Source::Input(i), c)).collect();
    if !alpha.is_zero() {
        let z = nb.relu(int(0), fnet.kink.w().iter().enumerate().map(|(i, c)| (Source::Input(i), c.clone())));
        terms.push((z, alpha));
    }
    let o = nb.linear(bias, terms);
    nb.finish(o).expect("single-layer network is valid")
}

/// Per-box outcome of a replacement check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementEntry {
    pub domain: InputBox,
    /// First sample where the two networks differ.
    pub mismatch: Option<Vec<Rational>>,
    pub original: (Rational, Rational),
    pub replacement: (Rational, Rational),
    pub contained: bool,
}

impl ReplacementEntry {
    pub fn ok(&self) -> bool {
        self.mismatch.is_none() && self.contained
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementReport {
    pub entries: Vec<ReplacementEntry>,
}

impl ReplacementReport {
    pub fn holds(&self) -> bool {
        self.entries.iter().all(ReplacementEntry::ok)
    }

    pub fn first_violation(&self) -> Option<&ReplacementEntry> {
        self.entries.iter().find(|e| !e.ok())
    }

    pub fn to_json(&self) -> Value {
        let pair = |(l, u): &(Rational, Rational)| json!([render(l), render(u)]);
        json!({
            "holds": self.holds(),
            "boxes": self.entries.iter().map(|e| json!({
                "box": e.domain.to_string(),
                "pointwise_equal": e.mismatch.is_none(),
                "mismatch": e.mismatch.as_ref().map(|x| x.iter().map(render).collect::<Vec<_>>()),
                "original": pair(&e.original),
                "replacement": pair(&e.replacement),
                "contained": e.contained,
            })).collect::<Vec<_>>(),
            "witness": self.first_violation().map(|e| e.domain.to_string()),
        })
    }
}

/// Checks `h ~> h'` on each box: equal values on the box corners, centre and
/// `samples` random points, and the triangle interval of `h'` inside that of `h`.
pub fn verify_replacement(h: &ReluNetwork, h2: &ReluNetwork, boxes: &[InputBox], samples: usize, seed: u64) -> Result<ReplacementReport> {
    if h.input_dim() != h2.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.input_dim(),
            got: h2.input_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(boxes.len());
    for b in boxes {
        let mut points = vec![b.lower(), b.upper(), b.center()];
        points.extend((0..samples).map(|_| b.sample(&mut rng, 32)));
        let mut mismatch = None;
        for x in points {
            if h.evaluate(&x)? != h2.evaluate(&x)? {
                mismatch = Some(x);
                break;
            }
        }
        let r1 = triangle(h, b)?;
        let r2 = triangle(h2, b)?;
        let contained = r2.within(&r1.lower, &r1.upper);
        entries.push(ReplacementEntry {
            domain: b.clone(),
            mismatch,
            original: r1.interval(),
            replacement: r2.interval(),
            contained,
        });
    }
    Ok(ReplacementReport { entries })
}

/// Random network on `[-1,1]^d` whose unstable ReLUs all kink on `kink`,
/// with `depth` layers of one to three kink ReLUs, plus one ReLU that is
/// stably active and one that is stably inactive there.
pub fn random_kinked_network(kink: &KinkHyperplane, depth: usize, seed: u64) -> ReluNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = kink.dim();
    let w = kink.w();
    let small = |rng: &mut ChaCha8Rng| loop {
        let v = q(rng.gen_range(-4..=4), [1, 2, 4][rng.gen_range(0..3)]);
        if !v.is_zero() {
            break v;
        }
    };
    let mut nb = NetBuilder::new(d);
    let on = nb.relu(int(3), [(Source::Input(0), int(1))]);
    let off = nb.relu(int(-3), [(Source::Input(0), int(1))]);
    let mut layers: Vec<Vec<Source>> = Vec::new();
    for level in 0..depth {
        let count = rng.gen_range(1..=3);
        let mut layer = Vec::with_capacity(count);
        for _ in 0..count {
            let s = small(&mut rng);
            let mut coeffs: Vec<(Source, Rational)> = w.iter().enumerate().map(|(i, c)| (Source::Input(i), c * &s)).collect();
            if level > 0 {
                for &src in layers.iter().flatten() {
                    if rng.gen_bool(0.6) {
                        coeffs.push((src, small(&mut rng)));
                    }
                }
                let last = *layers[level - 1].last().expect("non-empty layer");
                coeffs.push((last, small(&mut rng)));
            }
            layer.push(nb.relu(int(0), coeffs));
        }
        layers.push(layer);
    }
    let mut out: Vec<(Source, Rational)> = (0..d).map(|i| (Source::Input(i), small(&mut rng))).collect();
    out.push((on, small(&mut rng)));
    out.push((off, small(&mut rng)));
    for &src in layers.iter().flatten() {
        out.push((src, small(&mut rng)));
    }
    let o = nb.linear(small(&mut rng), out);
    nb.finish(o).expect("valid network")
}
