use num::Signed;

use super::{check_box, AnalysisResult, Detail, InputBox, RelaxationId, ReluBound};
use crate::error::Result;
use crate::network::{Activation, ReluNetwork, Source};
use crate::numerics::rational::{int, relu, Rational};

/// Interval bound propagation.
///
/// Each affine neuron maps `[l, u]` to `(W(l+u) - |W|(u-l))/2 + b` and
/// `(W(l+u) + |W|(u-l))/2 + b`; a ReLU clamps to `[relu(l), relu(u)]`.
pub fn ibp(net: &ReluNetwork, b: &InputBox) -> Result<AnalysisResult> {
    check_box(net, b)?;
    let two = int(2);
    let mut post: Vec<(Rational, Rational)> = Vec::with_capacity(net.neurons().len());
    let mut relu_bounds = Vec::new();
    for (k, n) in net.neurons().iter().enumerate() {
        let mut mid = &n.bias * &two;
        let mut rad = int(0);
        for (s, w) in &n.coeffs {
            let (l, u) = match *s {
                Source::Input(i) => b.interval(i),
                Source::Neuron(j) => (&post[j].0, &post[j].1),
            };
            mid += w * (l + u);
            rad += w.abs() * (u - l);
        }
        let lo = (&mid - &rad) / &two;
        let hi = (mid + rad) / &two;
        post.push(match n.act {
            Activation::Relu => {
                relu_bounds.push(ReluBound {
                    neuron: k,
                    lower: lo.clone(),
                    upper: hi.clone(),
                });
                (relu(&lo), relu(&hi))
            }
            Activation::Identity => (lo, hi),
        });
    }
    let (lower, upper) = post[net.output()].clone();
    Ok(AnalysisResult {
        relaxation: RelaxationId::Ibp,
        lower,
        upper,
        relu_bounds,
        detail: Detail::Intervals(post),
    })
}
