#![allow(dead_code)]

use rand::Rng;
use relexp::numerics::rational::{q, random_on_grid, int};
use relexp::{InputBox, NetBuilder, Rational, ReluNetwork, Source};

pub fn small<R: Rng>(rng: &mut R) -> Rational {
    q(rng.gen_range(-6..=6), [1, 2, 4][rng.gen_range(0..3)])
}

fn nonzero<R: Rng>(rng: &mut R) -> Rational {
    loop {
        let v = small(rng);
        if v != int(0) {
            return v;
        }
    }
}

/// Layered net with skip connections to the inputs, `layers` ReLU layers of
/// width 1..=`width`.
pub fn random_net<R: Rng>(rng: &mut R, dim: usize, layers: usize, width: usize) -> ReluNetwork {
    let mut nb = NetBuilder::new(dim);
    let mut prev: Vec<Source> = (0..dim).map(Source::Input).collect();
    let mut all = prev.clone();
    for _ in 0..layers {
        let w = rng.gen_range(1..=width);
        let mut layer = Vec::with_capacity(w);
        for _ in 0..w {
            let mut coeffs: Vec<(Source, Rational)> = prev.iter().map(|s| (*s, nonzero(rng))).collect();
            if rng.gen_bool(0.3) {
                coeffs.push((Source::Input(rng.gen_range(0..dim)), small(rng)));
            }
            layer.push(nb.relu(small(rng), coeffs));
        }
        all.extend(layer.iter().copied());
        prev = layer;
    }
    let out: Vec<(Source, Rational)> = all.iter().map(|s| (*s, small(rng))).collect();
    let o = nb.linear(small(rng), out);
    nb.finish(o).expect("valid")
}

/// Single hidden layer on one input: `b + c x + sum a_i relu(w_i x + b_i)`.
pub fn random_single_layer<R: Rng>(rng: &mut R, width: usize) -> ReluNetwork {
    let mut nb = NetBuilder::new(1);
    let mut out = vec![(Source::Input(0), small(rng))];
    for _ in 0..width {
        let r = nb.relu(small(rng), [(Source::Input(0), nonzero(rng))]);
        out.push((r, small(rng)));
    }
    let o = nb.linear(small(rng), out);
    nb.finish(o).expect("valid")
}

pub fn random_box<R: Rng>(rng: &mut R, dim: usize) -> InputBox {
    let dims = (0..dim)
        .map(|_| {
            let a = random_on_grid(rng, &int(-3), &int(3), 4);
            let b = random_on_grid(rng, &int(-3), &int(3), 4);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    InputBox::new(dims).expect("ordered")
}
