//! Exact convex-relaxation analyzers for ReLU networks.
//!
//! All arithmetic is over exact rationals. The crate provides the IBP,
//! DeepPoly-0/1, triangle and single-layer multi-neuron analyses, network
//! encodings of univariate CPWL functions that those analyses bound
//! precisely, a rewrite calculus for triangle bounds, brute-force oracles and
//! a precision checker.

pub mod analyzers;
pub mod checker;
pub mod constructors;
pub mod cpwl;
pub mod error;
pub mod network;
pub mod numerics;
pub mod oracle;
pub mod rewrites;

pub use analyzers::{analyze, AnalysisResult, InputBox, RelaxationId};
pub use cpwl::{classify, random_cpwl, ClassFilter, Cpwl1D, FunctionClass};
pub use error::{Error, Result};
pub use network::{classify_relu_stability, Activation, KinkHyperplane, NetBuilder, Neuron, ReluNetwork, Source, Stability};
pub use numerics::{parse_rational, render, Rational};
