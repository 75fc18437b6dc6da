use super::{check_box, AffineForm, AnalysisResult, Detail, InputBox, RelaxationId, ReluBound};
use crate::error::{Error, Result};
use crate::network::{Activation, ReluNetwork, Source};
use crate::numerics::convex_hull_2d;

/// Accepts univariate nets whose hidden neurons are ReLUs of the input and
/// whose output is an identity neuron over the input and those ReLUs.
pub fn check_single_layer(net: &ReluNetwork) -> Result<()> {
    if net.input_dim() != 1 {
        return Err(Error::NotUnivariate(net.input_dim()));
    }
    let out = net.output();
    for (k, n) in net.neurons().iter().enumerate() {
        if k == out {
            if n.act != Activation::Identity {
                return Err(Error::NotSingleLayer("output neuron has a ReLU".into()));
            }
            continue;
        }
        if n.act != Activation::Relu {
            return Err(Error::NotSingleLayer(format!("hidden neuron n{k} is not a ReLU")));
        }
        if n.coeffs.iter().any(|(s, _)| matches!(s, Source::Neuron(_))) {
            return Err(Error::NotSingleLayer(format!("hidden neuron n{k} reads another neuron")));
        }
    }
    Ok(())
}

/// All ReLUs of the single hidden layer relaxed jointly: the exact convex hull
/// of the graph `{(x, h(x)) | x in box}`.
pub fn multineuron_single_layer(net: &ReluNetwork, b: &InputBox) -> Result<AnalysisResult> {
    check_box(net, b)?;
    check_single_layer(net)?;
    let out = net.output();
    let relu_bounds = net
        .neurons()
        .iter()
        .enumerate()
        .filter(|(k, n)| *k != out && n.is_relu())
        .map(|(k, n)| {
            let (lower, upper) = AffineForm {
                coeffs: vec![n.coeff(Source::Input(0))],
                bias: n.bias.clone(),
            }
            .range(b);
            ReluBound { neuron: k, lower, upper }
        })
        .collect();
    let hull = if b.is_point() {
        let x = b.lower();
        let y = net.evaluate(&x)?;
        convex_hull_2d(&[(x[0].clone(), y)])?
    } else {
        net.to_cpwl(b)?.graph_hull()
    };
    let (lower, upper) = hull.y_extent();
    Ok(AnalysisResult {
        relaxation: RelaxationId::Mn,
        lower,
        upper,
        relu_bounds,
        detail: Detail::Hull(hull),
    })
}
