use proptest::prelude::*;
use relexp::analyzers::{deeppoly, ibp, multineuron_single_layer, triangle};
use relexp::checker::{check_precise, BoxFamily, Reference};
use relexp::constructors::*;
use relexp::numerics::rational::{int, q};
use relexp::{random_cpwl, Activation, ClassFilter, Cpwl1D, Error, InputBox, NetBuilder, Rational, RelaxationId, ReluNetwork, Source};

fn cpwl(pts: &[(i64, i64)]) -> Cpwl1D {
    Cpwl1D::new(pts.iter().map(|&(x, y)| (int(x), int(y))).collect()).unwrap()
}

fn abs() -> Cpwl1D {
    cpwl(&[(-1, 1), (0, 0), (1, 1)])
}

fn bx(s: &str) -> InputBox {
    InputBox::parse(s).unwrap()
}

fn domain(f: &Cpwl1D) -> InputBox {
    let (l, u) = f.domain();
    InputBox::interval1(l, u).unwrap()
}

fn family(f: &Cpwl1D) -> BoxFamily {
    BoxFamily::for_function(f).union(BoxFamily::random(&domain(f), 30, 1))
}

fn precise(net: &ReluNetwork, f: &Cpwl1D, rel: RelaxationId) -> bool {
    check_precise(net, &Reference::Function(f.clone()), rel, &family(f)).unwrap().all_precise()
}

fn term(gamma: i64, sign: Sign, anchor: i64) -> EncodingTerm {
    EncodingTerm {
        gamma: int(gamma),
        sign,
        anchor: int(anchor),
    }
}

#[test]
fn step_three_cases() {
    let phi = step_network(&int(0), &int(1), &int(1)).unwrap();
    assert_eq!(phi.relu_count(), 2);
    assert_eq!(phi.to_cpwl(&bx("-1,2")).unwrap(), cpwl(&[(-1, 0), (0, 0), (1, 1), (2, 1)]));
    assert_eq!(phi.evaluate(&[q(1, 2)]).unwrap(), q(1, 2));
    assert_eq!(phi.evaluate(&[int(-5)]).unwrap(), int(0));
    assert_eq!(phi.evaluate(&[int(7)]).unwrap(), int(1));
}

#[test]
fn step_with_zero_height_is_zero() {
    let phi = step_network(&int(0), &int(1), &int(0)).unwrap();
    let f = phi.to_cpwl(&bx("-3,3")).unwrap();
    assert_eq!(f.points(), &[(int(-3), int(0)), (int(3), int(0))]);
}

#[test]
fn step_ibp_interval() {
    let phi = step_network(&int(0), &int(2), &int(3)).unwrap();
    assert_eq!(ibp(&phi, &bx("1,5")).unwrap().interval(), (q(3, 2), int(3)));
}

#[test]
fn step_rejects_bad_arguments() {
    assert!(step_network(&int(1), &int(1), &int(1)).is_err());
    assert!(step_network(&int(2), &int(1), &int(1)).is_err());
    assert!(step_network(&int(0), &int(1), &int(-1)).is_err());
}

#[test]
fn ibp_monotone_affine_is_one_block() {
    let f = cpwl(&[(0, 1), (2, 5)]);
    let net = ibp_monotone(&f).unwrap();
    assert_eq!(net.relu_count(), 2);
    assert!(precise(&net, &f, RelaxationId::Ibp));
}

#[test]
fn ibp_monotone_example() {
    let f = cpwl(&[(0, 0), (1, 2), (2, 3)]);
    let net = ibp_monotone(&f).unwrap();
    assert_eq!(net.relu_count(), 4);
    assert_eq!(net.to_cpwl(&domain(&f)).unwrap(), f);
    assert_eq!(ibp(&net, &bx("1/2,3/2")).unwrap().interval(), (int(1), q(5, 2)));
}

#[test]
fn ibp_monotone_decreasing() {
    let f = cpwl(&[(0, 3), (1, 1), (3, 0)]);
    let net = ibp_monotone(&f).unwrap();
    assert_eq!(net.to_cpwl(&domain(&f)).unwrap(), f);
    let (l, u) = (q(1, 2), q(5, 2));
    let r = ibp(&net, &InputBox::interval1(l.clone(), u.clone()).unwrap()).unwrap();
    assert_eq!(r.interval(), (f.eval(&u).unwrap(), f.eval(&l).unwrap()));
}

#[test]
fn ibp_monotone_rejects_non_monotone() {
    assert!(matches!(ibp_monotone(&abs()), Err(Error::ClassMismatch(_))));
}

#[test]
fn convex_encoding_abs_plus() {
    let spec = convex_encoding_spec(&abs(), &[Sign::Plus]).unwrap();
    assert_eq!(
        spec,
        EncodingSpec {
            b: int(0),
            c: int(-1),
            terms: vec![term(2, Sign::Plus, 0)],
        }
    );
    assert_eq!(spec.to_network().to_cpwl(&bx("-1,1")).unwrap(), abs());
}

#[test]
fn convex_encoding_abs_minus() {
    let spec = convex_encoding_spec(&abs(), &[Sign::Minus]).unwrap();
    assert_eq!(
        spec,
        EncodingSpec {
            b: int(0),
            c: int(1),
            terms: vec![term(2, Sign::Minus, 0)],
        }
    );
    assert_eq!(spec.to_network().to_cpwl(&bx("-1,1")).unwrap(), abs());
}

#[test]
fn convex_encoding_affine_has_no_relus() {
    let f = cpwl(&[(-1, 3), (2, -3)]);
    let net = convex_encoding(&f, &[]).unwrap();
    assert_eq!(net.relu_count(), 0);
    assert_eq!(net.to_cpwl(&domain(&f)).unwrap(), f);
}

#[test]
fn convex_encoding_rejects() {
    let zigzag = cpwl(&[(0, 0), (1, 1), (2, 0)]);
    assert!(matches!(convex_encoding(&zigzag, &[Sign::Plus]), Err(Error::ClassMismatch(_))));
    assert!(matches!(convex_encoding(&abs(), &[]), Err(Error::DimensionMismatch { expected: 1, got: 0 })));
}

#[test]
fn concave_encoding_negates() {
    let f = abs().neg();
    for s in [Sign::Plus, Sign::Minus] {
        let net = concave_encoding(&f, &[s]).unwrap();
        assert_eq!(net.to_cpwl(&bx("-1,1")).unwrap(), f);
        assert!(precise(&net, &f, RelaxationId::Tri));
    }
    assert!(concave_encoding(&abs(), &[Sign::Plus]).is_err());
}

#[test]
fn dp0_form_of_abs() {
    let spec = dp0_precise_convex_spec(&abs()).unwrap();
    assert_eq!(
        spec,
        EncodingSpec {
            b: int(0),
            c: int(0),
            terms: vec![term(1, Sign::Plus, 0), term(1, Sign::Minus, 0)],
        }
    );
    let net = spec.to_network();
    assert_eq!(net.evaluate(&[int(-1)]).unwrap(), int(1));
    assert!(precise(&net, &abs(), RelaxationId::Dp0));
}

#[test]
fn dp0_form_with_zero_slope() {
    let f = cpwl(&[(0, 0), (1, 0), (2, 1)]);
    let spec = dp0_precise_convex_spec(&f).unwrap();
    assert_eq!(
        spec,
        EncodingSpec {
            b: int(0),
            c: int(0),
            terms: vec![term(1, Sign::Plus, 1)],
        }
    );
    assert!(precise(&spec.to_network(), &f, RelaxationId::Dp0));
}

#[test]
fn dp0_relu_counts() {
    for seed in 0..20 {
        let n = 2 + seed as usize % 6;
        let f = random_cpwl(n, ClassFilter::ConvexZeroSlope, seed).unwrap();
        let net = dp0_precise_convex(&f).unwrap();
        assert_eq!(net.relu_count(), n - 1);
        assert!(precise(&net, &f, RelaxationId::Dp0));
        let g = random_cpwl(n, ClassFilter::ConvexUniqueMinimum, seed).unwrap();
        let net = dp0_precise_convex(&g).unwrap();
        assert_eq!(net.relu_count(), n);
        assert!(precise(&net, &g, RelaxationId::Dp0));
    }
}

#[test]
fn dp0_increasing_convex_sign_flips_fail() {
    let f = Cpwl1D::new(vec![(int(0), int(0)), (int(1), q(1, 2)), (int(2), int(2)), (int(3), int(5))]).unwrap();
    let net = dp0_precise_convex(&f).unwrap();
    assert!(dp0_precise_convex_spec(&f).unwrap().terms.iter().all(|t| t.sign == Sign::Plus));
    assert!(precise(&net, &f, RelaxationId::Dp0));
    assert!(precise(&convex_encoding(&f, &[Sign::Plus, Sign::Plus]).unwrap(), &f, RelaxationId::Dp0));
    for flip in 0..2 {
        let mut signs = vec![Sign::Plus; 2];
        signs[flip] = Sign::Minus;
        let net = convex_encoding(&f, &signs).unwrap();
        assert!(!precise(&net, &f, RelaxationId::Dp0), "flip {flip}");
    }
}

#[test]
fn dp0_decreasing_convex_uses_minus() {
    let f = Cpwl1D::new(vec![(int(0), int(6)), (int(1), int(3)), (int(2), int(1)), (int(4), int(0))]).unwrap();
    let spec = dp0_precise_convex_spec(&f).unwrap();
    assert!(spec.terms.iter().all(|t| t.sign == Sign::Minus));
    assert_eq!(spec.c, int(0));
    assert!(precise(&spec.to_network(), &f, RelaxationId::Dp0));
}

#[test]
fn ibp_is_imprecise_on_dp0_abs() {
    let net = dp0_precise_convex(&abs()).unwrap();
    assert_eq!(ibp(&net, &bx("-1,1")).unwrap().interval(), (int(0), int(2)));
}

#[test]
fn dp1_substitute_relu() {
    let mut nb = NetBuilder::new(1);
    let r = nb.relu(int(0), [(Source::Input(0), int(1))]);
    let net = nb.finish(r).unwrap();
    let sub = dp1_substitute(&net);
    let n = sub.neurons();
    assert_eq!(n.len(), 2);
    assert_eq!(n[0].act, Activation::Relu);
    assert_eq!(n[0].coeff(Source::Input(0)), int(-1));
    assert_eq!(n[1].act, Activation::Identity);
    assert_eq!(n[1].coeff(Source::Input(0)), int(1));
    assert_eq!(n[1].coeff(Source::Neuron(0)), int(1));
    assert_eq!(deeppoly(&sub, &bx("-1,1"), 1).unwrap().interval(), (int(0), int(1)));
}

#[test]
fn dp1_substitute_keeps_affine_nets() {
    let mut nb = NetBuilder::new(2);
    let o = nb.linear(int(1), [(Source::Input(0), int(2)), (Source::Input(1), int(3))]);
    let net = nb.finish(o).unwrap();
    assert_eq!(dp1_substitute(&net), net);
}

#[test]
fn dp1_image_of_dp0_abs_is_dp1_precise() {
    let net = dp1_substitute(&dp0_precise_convex(&abs()).unwrap());
    assert!(precise(&net, &abs(), RelaxationId::Dp1));
}

#[test]
fn dp1_substitute_swaps_dp_variants() {
    for seed in 0..10 {
        let f = random_cpwl(1 + seed as usize % 6, ClassFilter::Convex, 90 + seed).unwrap();
        let net = dp0_precise_convex(&f).unwrap();
        let sub = dp1_substitute(&net);
        for b in family(&f).boxes {
            assert_eq!(deeppoly(&net, &b, 0).unwrap().interval(), deeppoly(&sub, &b, 1).unwrap().interval());
            assert_eq!(deeppoly(&net, &b, 1).unwrap().interval(), deeppoly(&sub, &b, 0).unwrap().interval());
        }
    }
}

#[test]
fn mn_affine_has_no_relus() {
    assert_eq!(mn_single_layer(&cpwl(&[(0, 1), (4, 3)])).relu_count(), 0);
}

#[test]
fn mn_zigzag_coefficients() {
    let net = mn_single_layer(&cpwl(&[(0, 0), (1, 1), (2, 0)]));
    assert_eq!(net.relu_count(), 1);
    let out = &net.neurons()[net.output()];
    assert_eq!(out.bias, int(0));
    assert_eq!(out.coeff(Source::Input(0)), int(1));
    assert_eq!(out.coeff(Source::Neuron(0)), int(-2));
    assert_eq!(net.neurons()[0].bias, int(-1));
}

#[test]
fn mn_random_is_precise() {
    for seed in 0..10 {
        let f = random_cpwl(1 + seed as usize % 10, ClassFilter::Any, 70 + seed).unwrap();
        let net = mn_single_layer(&f);
        assert!(precise(&net, &f, RelaxationId::Mn));
        assert_eq!(multineuron_single_layer(&net, &domain(&f)).unwrap().interval(), f.exact_range(&f.domain().0, &f.domain().1).unwrap());
    }
}

#[test]
fn sign_strings() {
    let s = parse_signs("++-+").unwrap();
    assert_eq!(s, vec![Sign::Plus, Sign::Plus, Sign::Minus, Sign::Plus]);
    assert_eq!(render_signs(&s), "++-+");
    assert!(parse_signs("+x").is_err());
    assert_eq!("-".parse::<Sign>().unwrap(), Sign::Minus);
    assert_eq!(all_sign_vectors(3).len(), 8);
    assert_eq!(all_sign_vectors(0), vec![Vec::<Sign>::new()]);
}

#[test]
fn spec_eval_matches_network() {
    let f = random_cpwl(5, ClassFilter::Convex, 4).unwrap();
    let spec = convex_encoding_spec(&f, &parse_signs("+-+-").unwrap()).unwrap();
    let net = spec.to_network();
    for (x, y) in f.points() {
        assert_eq!(&spec.eval(x), y);
        assert_eq!(&net.evaluate(std::slice::from_ref(x)).unwrap(), y);
    }
}

fn signs_from(mask: u64, n: usize) -> Vec<Sign> {
    (0..n).map(|i| if mask >> i & 1 == 1 { Sign::Minus } else { Sign::Plus }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructors_encode(seed in any::<u64>(), n in 1usize..10, mask in any::<u64>()) {
        let any = random_cpwl(n, ClassFilter::Any, seed).unwrap();
        prop_assert_eq!(mn_single_layer(&any).to_cpwl(&domain(&any)).unwrap(), any.clone());
        prop_assert_eq!(dp1_substitute(&mn_single_layer(&any)).to_cpwl(&domain(&any)).unwrap(), any);

        let m = random_cpwl(n, ClassFilter::Monotone, seed).unwrap();
        prop_assert_eq!(ibp_monotone(&m).unwrap().to_cpwl(&domain(&m)).unwrap(), m);

        let c = random_cpwl(n, ClassFilter::Convex, seed).unwrap();
        let signs = signs_from(mask, n - 1);
        prop_assert_eq!(convex_encoding(&c, &signs).unwrap().to_cpwl(&domain(&c)).unwrap(), c.clone());
        prop_assert_eq!(dp0_precise_convex(&c).unwrap().to_cpwl(&domain(&c)).unwrap(), c);
    }

    #[test]
    fn triangle_precise_for_any_signs(seed in any::<u64>(), n in 1usize..7, mask in any::<u64>()) {
        let c = random_cpwl(n, ClassFilter::Convex, seed).unwrap();
        let net = convex_encoding(&c, &signs_from(mask, n - 1)).unwrap();
        for b in BoxFamily::for_function(&c).boxes {
            let (l, u) = b.interval(0);
            prop_assert_eq!(triangle(&net, &b).unwrap().interval(), c.exact_range(l, u).unwrap());
        }
    }
}

#[test]
fn precision_stable_under_refinement() {
    for seed in 0..5 {
        let f = random_cpwl(4, ClassFilter::Convex, 200 + seed).unwrap();
        let net = dp0_precise_convex(&f).unwrap();
        let fam = family(&f);
        let mut doubled = fam.boxes.clone();
        for b in &fam.boxes {
            let (l, u) = b.interval(0);
            let m: Rational = (l + u) / int(2);
            doubled.push(InputBox::interval1(l.clone(), m.clone()).unwrap());
            doubled.push(InputBox::interval1(m, u.clone()).unwrap());
        }
        let r = check_precise(&net, &Reference::Function(f.clone()), RelaxationId::Dp0, &BoxFamily::explicit(doubled)).unwrap();
        assert!(r.all_precise());
    }
}

/// Moves the linear term of an Eq. 1 spec into a ReLU anchored at a domain
/// end, where it is stably active, so the result has `c = 0`.
fn without_linear_term(spec: &EncodingSpec, f: &Cpwl1D) -> EncodingSpec {
    let (lo, hi) = f.domain();
    let mut out = spec.clone();
    out.c = int(0);
    if spec.c > int(0) {
        out.b += &spec.c * &lo;
        out.terms.push(EncodingTerm {
            gamma: spec.c.clone(),
            sign: Sign::Plus,
            anchor: lo,
        });
    } else if spec.c < int(0) {
        out.b += &spec.c * &hi;
        out.terms.push(EncodingTerm {
            gamma: -spec.c.clone(),
            sign: Sign::Minus,
            anchor: hi,
        });
    }
    out
}

#[test]
fn only_the_paired_form_is_dp0_precise() {
    for seed in 0..6 {
        let f = random_cpwl(2 + seed as usize % 4, ClassFilter::ConvexUniqueMinimum, 400 + seed).unwrap();
        assert!(precise(&dp0_precise_convex(&f).unwrap(), &f, RelaxationId::Dp0));
        for signs in all_sign_vectors(f.segments() - 1) {
            let spec = without_linear_term(&convex_encoding_spec(&f, &signs).unwrap(), &f);
            let net = spec.to_network();
            assert_eq!(net.to_cpwl(&domain(&f)).unwrap(), f);
            assert!(!precise(&net, &f, RelaxationId::Dp0), "signs {}", render_signs(&signs));
        }
    }
}
