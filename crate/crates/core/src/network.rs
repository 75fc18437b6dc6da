//! The ReLU-network IR: a flat DAG of scalar neurons.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::analyzers::{self, InputBox, RelaxationId};
use crate::cpwl::Cpwl1D;
use crate::error::{Error, Result};
use crate::numerics::rational::{int, parse_rational, relu, render, Rational};

/// Where a neuron reads a value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Input(usize),
    Neuron(usize),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Input(i) => write!(f, "x{i}"),
            Source::Neuron(k) => write!(f, "n{k}"),
        }
    }
}

impl Source {
    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidNetwork(format!("unknown coefficient key {s:?}"));
        let (kind, idx) = s.split_at(1.min(s.len()));
        let idx: usize = idx.parse().map_err(|_| bad())?;
        match kind {
            "x" => Ok(Source::Input(idx)),
            "n" => Ok(Source::Neuron(idx)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

/// `act(bias + sum coeff * source)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neuron {
    pub bias: Rational,
    /// Sorted by source, no zero coefficients.
    pub coeffs: Vec<(Source, Rational)>,
    pub act: Activation,
}

impl Neuron {
    pub fn new(bias: Rational, coeffs: impl IntoIterator<Item = (Source, Rational)>, act: Activation) -> Self {
        let mut merged: BTreeMap<Source, Rational> = BTreeMap::new();
        for (s, c) in coeffs {
            *merged.entry(s).or_insert_with(Rational::zero) += c;
        }
        Neuron {
            bias,
            coeffs: merged.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            act,
        }
    }

    pub fn is_relu(&self) -> bool {
        self.act == Activation::Relu
    }

    pub fn coeff(&self, s: Source) -> Rational {
        self.coeffs
            .iter()
            .find(|(t, _)| *t == s)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReluNetwork {
    input_dim: usize,
    neurons: Vec<Neuron>,
    outputs: Vec<usize>,
}

impl ReluNetwork {
    /// Validates acyclicity, index ranges and the single-output convention.
    pub fn new(input_dim: usize, neurons: Vec<Neuron>, outputs: Vec<usize>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        if neurons.is_empty() {
            return Err(Error::InvalidNetwork("network has no neurons".into()));
        }
        for (k, n) in neurons.iter().enumerate() {
            for (s, _) in &n.coeffs {
                match *s {
                    Source::Input(i) if i >= input_dim => {
                        return Err(Error::InvalidNetwork(format!("n{k} reads x{i} but input_dim = {input_dim}")))
                    }
                    Source::Neuron(j) if j >= k => {
                        return Err(Error::InvalidNetwork(format!("n{k} reads n{j}, which is not earlier")))
                    }
                    _ => {}
                }
            }
        }
        if outputs.len() != 1 {
            return Err(Error::InvalidNetwork(format!("expected exactly one output, got {}", outputs.len())));
        }
        if outputs[0] >= neurons.len() {
            return Err(Error::InvalidNetwork(format!("output n{} does not exist", outputs[0])));
        }
        Ok(ReluNetwork { input_dim, neurons, outputs })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn output(&self) -> usize {
        self.outputs[0]
    }

    pub fn relu_count(&self) -> usize {
        self.neurons.iter().filter(|n| n.is_relu()).count()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got,
            });
        }
        Ok(())
    }

    /// Pre-activation and post-activation value of every neuron.
    pub fn trace(&self, x: &[Rational]) -> Result<Vec<(Rational, Rational)>> {
        self.check_dim(x.len())?;
        let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(self.neurons.len());
        for n in &self.neurons {
            let mut v = n.bias.clone();
            for (s, c) in &n.coeffs {
                let val = match *s {
                    Source::Input(i) => &x[i],
                    Source::Neuron(j) => &out[j].1,
                };
                v += c * val;
            }
            let post = match n.act {
                Activation::Relu => relu(&v),
                Activation::Identity => v.clone(),
            };
            out.push((v, post));
        }
        Ok(out)
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Rational> {
        let mut t = self.trace(x)?;
        Ok(t.swap_remove(self.output()).1)
    }

    /// Exact CPWL form of a univariate network on a non-degenerate interval.
    pub fn to_cpwl(&self, domain: &InputBox) -> Result<Cpwl1D> {
        if self.input_dim != 1 {
            return Err(Error::NotUnivariate(self.input_dim));
        }
        self.check_dim(domain.dim())?;
        let (lo, hi) = domain.interval(0);
        if lo == hi {
            return Err(Error::InvalidBox("to_cpwl needs a non-degenerate interval".into()));
        }
        let x = Cpwl1D::affine(lo, hi, &int(1), &int(0))?;
        let mut values: Vec<Cpwl1D> = Vec::with_capacity(self.neurons.len());
        for n in &self.neurons {
            let terms: Vec<(Rational, &Cpwl1D)> = n
                .coeffs
                .iter()
                .map(|(s, c)| {
                    let f = match *s {
                        Source::Input(_) => &x,
                        Source::Neuron(j) => &values[j],
                    };
                    (c.clone(), f)
                })
                .collect();
            let v = Cpwl1D::affine_combination(&n.bias, &terms, (lo, hi))?;
            values.push(match n.act {
                Activation::Relu => v.relu(),
                Activation::Identity => v,
            });
        }
        Ok(values.swap_remove(self.output()))
    }

    /// Same network with the output wrapped as `scale * out + offset`.
    pub fn affine_output(&self, scale: &Rational, offset: &Rational) -> Self {
        let mut neurons = self.neurons.clone();
        neurons.push(Neuron::new(
            offset.clone(),
            [(Source::Neuron(self.output()), scale.clone())],
            Activation::Identity,
        ));
        let out = neurons.len() - 1;
        ReluNetwork::new(self.input_dim, neurons, vec![out]).expect("extension of a valid network")
    }
}

/// Incremental construction helper.
#[derive(Debug, Clone)]
pub struct NetBuilder {
    input_dim: usize,
    neurons: Vec<Neuron>,
}

impl NetBuilder {
    pub fn new(input_dim: usize) -> Self {
        NetBuilder {
            input_dim,
            neurons: Vec::new(),
        }
    }

    pub fn push(&mut self, bias: Rational, coeffs: impl IntoIterator<Item = (Source, Rational)>, act: Activation) -> Source {
        self.neurons.push(Neuron::new(bias, coeffs, act));
        Source::Neuron(self.neurons.len() - 1)
    }

    pub fn relu(&mut self, bias: Rational, coeffs: impl IntoIterator<Item = (Source, Rational)>) -> Source {
        self.push(bias, coeffs, Activation::Relu)
    }

    pub fn linear(&mut self, bias: Rational, coeffs: impl IntoIterator<Item = (Source, Rational)>) -> Source {
        self.push(bias, coeffs, Activation::Identity)
    }

    /// Finishes with `output` as the network output. An input source gets an
    /// identity neuron of its own.
    pub fn finish(mut self, output: Source) -> Result<ReluNetwork> {
        let idx = match output {
            Source::Neuron(k) => k,
            Source::Input(_) => match self.linear(int(0), [(output, int(1))]) {
                Source::Neuron(k) => k,
                Source::Input(_) => unreachable!(),
            },
        };
        ReluNetwork::new(self.input_dim, self.neurons, vec![idx])
    }
}

/// The hyperplane `{x | w^T x = 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinkHyperplane {
    w: Vec<Rational>,
}

impl KinkHyperplane {
    pub fn new(w: Vec<Rational>) -> Result<Self> {
        if w.is_empty() || w.iter().all(|c| c.is_zero()) {
            return Err(Error::InvalidKink("normal must be non-zero".into()));
        }
        Ok(KinkHyperplane { w })
    }

    /// Parses a comma-separated normal such as `1,-1`.
    pub fn parse(s: &str) -> Result<Self> {
        let w = s.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
        Self::new(w)
    }

    pub fn w(&self) -> &[Rational] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Stability {
    StablyActive,
    StablyInactive,
    Unstable {
        #[serde(with = "crate::numerics::rational::as_string")]
        lower: Rational,
        #[serde(with = "crate::numerics::rational::as_string")]
        upper: Rational,
    },
}

impl Stability {
    pub fn from_bounds(lower: &Rational, upper: &Rational) -> Self {
        if !lower.is_negative() {
            Stability::StablyActive
        } else if !upper.is_positive() {
            Stability::StablyInactive
        } else {
            Stability::Unstable {
                lower: lower.clone(),
                upper: upper.clone(),
            }
        }
    }

    pub fn is_stable(&self) -> bool {
        !matches!(self, Stability::Unstable { .. })
    }
}

/// Stability of every ReLU neuron, keyed by neuron index, using the given
/// analyzer's pre-activation bounds.
pub fn classify_relu_stability(net: &ReluNetwork, b: &InputBox, analyzer: RelaxationId) -> Result<Vec<(usize, Stability)>> {
    let res = analyzers::analyze(net, b, analyzer)?;
    Ok(res
        .relu_bounds
        .iter()
        .map(|r| (r.neuron, Stability::from_bounds(&r.lower, &r.upper)))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct NeuronJson {
    bias: String,
    coeffs: BTreeMap<String, String>,
    act: String,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    neurons: Vec<NeuronJson>,
    outputs: Vec<usize>,
}

impl ReluNetwork {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dto()).expect("serializable")
    }

    fn to_dto(&self) -> NetworkJson {
        NetworkJson {
            input_dim: self.input_dim,
            neurons: self
                .neurons
                .iter()
                .map(|n| NeuronJson {
                    bias: render(&n.bias),
                    coeffs: n.coeffs.iter().map(|(s, c)| (s.to_string(), render(c))).collect(),
                    act: match n.act {
                        Activation::Relu => "relu".into(),
                        Activation::Identity => "id".into(),
                    },
                })
                .collect(),
            outputs: self.outputs.clone(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dto: NetworkJson = serde_json::from_str(s)?;
        let neurons = dto
            .neurons
            .iter()
            .map(|n| {
                let act = match n.act.as_str() {
                    "relu" => Activation::Relu,
                    "id" => Activation::Identity,
                    other => return Err(Error::InvalidNetwork(format!("unknown activation {other:?}"))),
                };
                let coeffs = n
                    .coeffs
                    .iter()
                    .map(|(k, v)| Ok((Source::parse(k)?, parse_rational(v)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Neuron::new(parse_rational(&n.bias)?, coeffs, act))
            })
            .collect::<Result<Vec<_>>>()?;
        ReluNetwork::new(dto.input_dim, neurons, dto.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational::q;
    use proptest::prelude::*;

    fn relu_net() -> ReluNetwork {
        let mut b = NetBuilder::new(1);
        let r = b.relu(int(0), [(Source::Input(0), int(1))]);
        b.finish(r).unwrap()
    }

    fn max_net() -> ReluNetwork {
        let mut b = NetBuilder::new(2);
        let r = b.relu(int(0), [(Source::Input(0), int(1)), (Source::Input(1), int(-1))]);
        let o = b.linear(int(0), [(Source::Input(1), int(1)), (r, int(1))]);
        b.finish(o).unwrap()
    }

    fn step(x0: i64, x1: i64, beta: i64) -> ReluNetwork {
        let mut b = NetBuilder::new(1);
        let inner = b.relu(int(-x0), [(Source::Input(0), int(1))]);
        let outer = b.relu(int(beta), [(inner, -q(beta, x1 - x0))]);
        let o = b.linear(int(beta), [(outer, int(-1))]);
        b.finish(o).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(relu_net().evaluate(&[int(-2)]).unwrap(), int(0));
        assert_eq!(step(0, 1, 1).evaluate(&[q(1, 2)]).unwrap(), q(1, 2));
        assert_eq!(max_net().evaluate(&[int(3), int(5)]).unwrap(), int(5));
        assert!(matches!(max_net().evaluate(&[int(1)]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn to_cpwl_examples() {
        let d = InputBox::parse("-1,1").unwrap();
        assert_eq!(
            relu_net().to_cpwl(&d).unwrap().points(),
            &[(int(-1), int(0)), (int(0), int(0)), (int(1), int(1))]
        );
        let d = InputBox::parse("-1,2").unwrap();
        assert_eq!(
            step(0, 1, 1).to_cpwl(&d).unwrap().points(),
            &[(int(-1), int(0)), (int(0), int(0)), (int(1), int(1)), (int(2), int(1))]
        );
        assert!(matches!(max_net().to_cpwl(&d), Err(Error::NotUnivariate(2))));
    }

    #[test]
    fn stability_examples() {
        let net = relu_net();
        for relax in RelaxationId::ALL {
            if relax == RelaxationId::Mn {
                continue;
            }
            let s = classify_relu_stability(&net, &InputBox::parse("1,2").unwrap(), relax).unwrap();
            assert_eq!(s, vec![(0, Stability::StablyActive)]);
            let s = classify_relu_stability(&net, &InputBox::parse("-2,-1").unwrap(), relax).unwrap();
            assert_eq!(s, vec![(0, Stability::StablyInactive)]);
            let s = classify_relu_stability(&max_net(), &InputBox::parse("0,1x0,1").unwrap(), relax).unwrap();
            assert_eq!(s, vec![(0, Stability::Unstable { lower: int(-1), upper: int(1) })]);
        }
        let s = classify_relu_stability(&net, &InputBox::parse("0,1").unwrap(), RelaxationId::Ibp).unwrap();
        assert_eq!(s, vec![(0, Stability::StablyActive)]);
    }

    #[test]
    fn rejects_bad_networks() {
        let n = Neuron::new(int(0), [(Source::Neuron(0), int(1))], Activation::Relu);
        assert!(ReluNetwork::new(1, vec![n], vec![0]).is_err());
        let n = Neuron::new(int(0), [(Source::Input(1), int(1))], Activation::Relu);
        assert!(ReluNetwork::new(1, vec![n.clone()], vec![0]).is_err());
        assert!(ReluNetwork::new(2, vec![n.clone()], vec![]).is_err());
        assert!(ReluNetwork::new(2, vec![n], vec![1]).is_err());
        assert!(KinkHyperplane::parse("0,0").is_err());
    }

    #[test]
    fn json_round_trip_and_format() {
        let net = step(0, 2, 3);
        assert_eq!(ReluNetwork::from_json(&net.to_json()).unwrap(), net);
        let src = r#"{"input_dim": 1, "neurons": [{"bias": "0", "coeffs": {"x0": "1"}, "act": "relu"},
            {"bias": "1/2", "coeffs": {"n0": "-3/4", "x0": "1"}, "act": "id"}], "outputs": [1]}"#;
        let net = ReluNetwork::from_json(src).unwrap();
        assert_eq!(net.evaluate(&[int(2)]).unwrap(), int(1));
        assert!(ReluNetwork::from_json(r#"{"input_dim":1,"neurons":[{"bias":"0","coeffs":{"y0":"1"},"act":"id"}],"outputs":[0]}"#).is_err());
    }

    fn arb_univariate() -> impl Strategy<Value = ReluNetwork> {
        let neuron = (-4i64..=4, prop::collection::vec((-4i64..=4, 1i64..=4), 1..6), any::<bool>());
        prop::collection::vec(neuron, 1..7).prop_map(|spec| {
            let mut b = NetBuilder::new(1);
            let mut last = Source::Input(0);
            for (k, (bias, cs, is_relu)) in spec.into_iter().enumerate() {
                let coeffs: Vec<(Source, Rational)> = cs
                    .into_iter()
                    .enumerate()
                    .map(|(j, (n, d))| {
                        let s = if j == 0 || k == 0 { Source::Input(0) } else { Source::Neuron((j * 7 + k) % k) };
                        (s, q(n, d))
                    })
                    .collect();
                let act = if is_relu { Activation::Relu } else { Activation::Identity };
                last = b.push(int(bias), coeffs, act);
            }
            b.finish(last).unwrap()
        })
    }

    proptest! {
        #[test]
        fn evaluate_matches_to_cpwl(net in arb_univariate(), seed in any::<u64>()) {
            use rand::SeedableRng;
            let d = InputBox::parse("-3,5/2").unwrap();
            let f = net.to_cpwl(&d).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let x = d.sample(&mut rng, 64);
                prop_assert_eq!(net.evaluate(&x).unwrap(), f.eval(&x[0]).unwrap());
            }
        }

        #[test]
        fn positive_homogeneity(w in -5i64..=5, x in -10i64..=10, t in 1i64..=9, d in 1i64..=4) {
            let mut b = NetBuilder::new(1);
            let r = b.relu(int(0), [(Source::Input(0), int(w))]);
            let net = b.finish(r).unwrap();
            let t = q(t, d);
            let base = net.evaluate(&[int(x)]).unwrap();
            prop_assert_eq!(net.evaluate(&[int(x) * &t]).unwrap(), base * t);
        }

        #[test]
        fn stability_monotone_in_box(net in arb_univariate(), a in -12i64..=12, b in -12i64..=12, c in 0u8..=8, e in 0u8..=8, which in 0usize..4) {
            let (l, u) = (a.min(b), a.max(b));
            let outer = InputBox::new(vec![(q(l, 4), q(u, 4))]).unwrap();
            let span = q(u - l, 4);
            let il = q(l, 4) + &span * q(c.min(e) as i64, 8);
            let iu = q(l, 4) + &span * q(c.max(e) as i64, 8);
            let inner = InputBox::new(vec![(il, iu)]).unwrap();
            let relax = [RelaxationId::Ibp, RelaxationId::Dp0, RelaxationId::Dp1, RelaxationId::Tri][which];
            let so = classify_relu_stability(&net, &outer, relax).unwrap();
            let si = classify_relu_stability(&net, &inner, relax).unwrap();
            for ((k, o), (_, i)) in so.iter().zip(&si) {
                if o.is_stable() {
                    prop_assert_eq!(o, i, "neuron {}", k);
                }
            }
        }
    }
}
