use relexp::checker::table1::{abs_function, max_network, Column, Mark};
use relexp::checker::*;
use relexp::constructors::{convex_encoding, dp0_precise_convex, ibp_monotone, mn_single_layer, Sign};
use relexp::numerics::rational::{int, q};
use relexp::{random_cpwl, ClassFilter, Cpwl1D, Error, InputBox, RelaxationId};

fn bx(s: &str) -> InputBox {
    InputBox::parse(s).unwrap()
}

fn small_config() -> Table1Config {
    Table1Config {
        funcs_per_class: 4,
        max_breakpoints: 6,
        random_boxes: 10,
        seed: 3,
    }
}

#[test]
fn breakpoint_span_count() {
    let fam = BoxFamily::breakpoint_spans(&[int(0), int(1), int(3), int(4)]);
    assert_eq!(fam.len(), 6 + 3);
    assert!(fam.boxes.contains(&bx("1/2,7/2")));
    assert!(fam.boxes.contains(&bx("0,4")));
    assert_eq!(fam.strategies, vec![BoxStrategy::BreakpointSpans]);
}

#[test]
fn grid_family() {
    let fam = BoxFamily::grid_2d(&bx("0,1x0,1"), 2).unwrap();
    assert_eq!(fam.len(), 9);
    assert!(fam.boxes.contains(&bx("1/2,1x0,1/2")));
    assert!(BoxFamily::grid_2d(&bx("0,1"), 2).is_err());
}

#[test]
fn random_family_is_deterministic_and_inside() {
    let d = bx("-2,3");
    let a = BoxFamily::random(&d, 30, 9);
    assert_eq!(a, BoxFamily::random(&d, 30, 9));
    assert_ne!(a, BoxFamily::random(&d, 30, 10));
    assert!(a.boxes.iter().all(|b| b.is_subset_of(&d)));
}

#[test]
fn monotone_is_ibp_precise() {
    for seed in 0..5 {
        let f = random_cpwl(5, ClassFilter::Monotone, seed).unwrap();
        let r = check_precise(&ibp_monotone(&f).unwrap(), &Reference::Function(f.clone()), RelaxationId::Ibp, &BoxFamily::for_function(&f)).unwrap();
        assert!(r.all_precise());
        assert_eq!(r.imprecise_count(), 0);
    }
}

#[test]
fn single_relu_at_minimum_is_dp0_imprecise() {
    let f = abs_function();
    let net = convex_encoding(&f, &[Sign::Plus]).unwrap();
    let r = check_precise(&net, &Reference::Function(f.clone()), RelaxationId::Dp0, &BoxFamily::for_function(&f)).unwrap();
    let w = r.witness.expect("imprecise");
    let (l, u) = w.verdict.domain.interval(0);
    assert!(*l < int(0) && int(0) < *u);
    let m = &w.minimized;
    assert!(!m.precise);
    assert!(m.domain.is_subset_of(&w.verdict.domain));
    let (l, u) = m.domain.interval(0);
    assert!(*l < int(0) && int(0) < *u);
    let dedicated = dp0_precise_convex(&f).unwrap();
    assert!(check_precise(&dedicated, &Reference::Function(f.clone()), RelaxationId::Dp0, &BoxFamily::for_function(&f)).unwrap().all_precise());
}

#[test]
fn max_witness() {
    let net = max_network();
    let fam = BoxFamily::explicit(vec![bx("0,1x0,1")]);
    let r = check_precise(&net, &Reference::Network(net.clone()), RelaxationId::Tri, &fam).unwrap();
    let w = r.witness.unwrap();
    assert_eq!(w.index, 0);
    assert_eq!(w.verdict.analyzer, (int(0), q(3, 2)));
    assert_eq!(w.verdict.oracle, (int(0), int(1)));
    assert_eq!(w.verdict.loose_at, Some(vec![int(1), int(1)]));
    assert!(w.minimized.domain.is_subset_of(&w.verdict.domain));
    assert!(!w.minimized.precise);
}

#[test]
fn encoding_checked_first() {
    let f = abs_function();
    let g = Cpwl1D::new(vec![(int(-1), int(1)), (int(0), int(0)), (int(1), int(2))]).unwrap();
    let e = check_precise(&mn_single_layer(&g), &Reference::Function(f), RelaxationId::Mn, &BoxFamily::explicit(vec![bx("-1,1")])).unwrap_err();
    assert!(matches!(e, Error::EncodingMismatch(_)));
    let shifted = max_network().affine_output(&int(1), &int(1));
    let e = check_precise(&shifted, &Reference::Network(max_network()), RelaxationId::Tri, &BoxFamily::explicit(vec![bx("0,1x0,1")])).unwrap_err();
    assert!(matches!(e, Error::EncodingMismatch(_)));
}

#[test]
fn report_formats() {
    let f = abs_function();
    let net = dp0_precise_convex(&f).unwrap();
    let fam = BoxFamily::explicit(vec![bx("-1,1"), bx("0,1")]);
    let r = check_precise(&net, &Reference::Function(f.clone()), RelaxationId::Ibp, &fam).unwrap();
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "l,u,oracle_lo,oracle_hi,D_lo,D_hi,precise");
    assert_eq!(lines[1], "-1,1,0,1,0,2,false");
    assert_eq!(lines[2], "0,1,0,1,0,1,true");
    let j = r.to_json();
    assert_eq!(j["all_precise"], false);
    assert_eq!(j["witness"]["index"], 0);
    assert_eq!(j["boxes"].as_array().unwrap().len(), 2);
    let again = check_precise(&net, &Reference::Function(f), RelaxationId::Ibp, &fam).unwrap();
    assert_eq!(again.to_json().to_string(), j.to_string());
}

#[test]
fn plot_data_rows() {
    let net = dp0_precise_convex(&abs_function()).unwrap();
    let csv = plot_data(&net, &bx("-1,1"), RelaxationId::Tri, 4).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,h,lower,upper");
    assert_eq!(lines.len(), 1 + 5);
    assert_eq!(lines[3], "0,0,0,1");
    assert!(plot_data(&max_network(), &bx("0,1x0,1"), RelaxationId::Tri, 4).is_err());
}

#[test]
fn table1_small_matches() {
    let t = table1_matrix(&small_config()).unwrap();
    assert!(t.matches_expected(), "{}", t.render_text());
    assert_eq!(t.cells.len(), 24);
    let c = t.cell("R", RelaxationId::Ibp, Column::Convex).unwrap();
    assert_eq!(c.observed, Mark::No);
    assert!(c.note.contains("vs exact [0, 1]"));
    let c = t.cell("R^d", RelaxationId::Tri, Column::MonotoneConvex).unwrap();
    assert!(c.note.contains("[0, 3/2]"));
    assert_eq!(t.cell("R", RelaxationId::Dp1, Column::Cpwl).unwrap().observed, Mark::Open);
}

#[test]
fn table1_rendering() {
    let t = table1_matrix(&small_config()).unwrap();
    let text = t.render_text();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[0].contains("CPWL") && rows[0].contains("MC-CPWL"));
    fn marks(row: &str) -> Vec<&str> {
        let w: Vec<&str> = row.split_whitespace().collect();
        w[w.len() - 4..].to_vec()
    }
    assert_eq!(marks(rows[1]), ["✗", "✓", "✗", "✓"]);
    assert_eq!(marks(rows[2]), ["?", "✓", "✓", "✓"]);
    assert_eq!(marks(rows[5]), ["✓", "✓", "✓", "✓"]);
    assert_eq!(marks(rows[6]), ["✗", "✗", "✗", "✗"]);
    assert!(rows[5].contains("Multi-Neuron∞"));
    let j = t.to_json();
    assert_eq!(j["matches_expected"], true);
    assert_eq!(j["cells"].as_array().unwrap().len(), 24);
}

#[test]
fn table1_is_deterministic() {
    let a = table1_matrix(&small_config()).unwrap().to_json().to_string();
    let b = table1_matrix(&small_config()).unwrap().to_json().to_string();
    assert_eq!(a, b);
}
