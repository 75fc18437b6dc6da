//! The expressivity matrix: relaxation x function class.

use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{check_precise, BoxFamily, PrecisionReport, Reference};
use crate::analyzers::{InputBox, RelaxationId};
use crate::constructors::{convex_encoding, dp0_precise_convex, dp1_substitute, ibp_monotone, mn_single_layer, Sign};
use crate::cpwl::{random_cpwl, ClassFilter, Cpwl1D};
use crate::error::Result;
use crate::network::{NetBuilder, ReluNetwork, Source};
use crate::numerics::rational::{int, render};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Yes,
    No,
    Open,
}

impl Mark {
    pub fn symbol(&self) -> &'static str {
        match self {
            Mark::Yes => "✓",
            Mark::No => "✗",
            Mark::Open => "?",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Cpwl,
    Monotone,
    Convex,
    MonotoneConvex,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Cpwl, Column::Monotone, Column::Convex, Column::MonotoneConvex];

    pub fn label(&self) -> &'static str {
        match self {
            Column::Cpwl => "CPWL",
            Column::Monotone => "M-CPWL",
            Column::Convex => "C-CPWL",
            Column::MonotoneConvex => "MC-CPWL",
        }
    }

    fn filter(&self) -> ClassFilter {
        match self {
            Column::Cpwl => ClassFilter::Any,
            Column::Monotone => ClassFilter::Monotone,
            Column::Convex => ClassFilter::Convex,
            Column::MonotoneConvex => ClassFilter::MonotoneConvex,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table1Config {
    pub funcs_per_class: usize,
    pub max_breakpoints: usize,
    pub random_boxes: usize,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            funcs_per_class: 50,
            max_breakpoints: 10,
            random_boxes: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub row: &'static str,
    pub relaxation: RelaxationId,
    pub column: Column,
    pub expected: Mark,
    pub observed: Mark,
    pub construction: &'static str,
    pub functions: usize,
    pub boxes: usize,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct Table1Report {
    pub cells: Vec<Cell>,
}

const UNIVARIATE: &str = "R";
const MULTIVARIATE: &str = "R^d";

fn expected(rel: RelaxationId, col: Column) -> Mark {
    match (rel, col) {
        (RelaxationId::Ibp, Column::Cpwl | Column::Convex) => Mark::No,
        (RelaxationId::Dp0 | RelaxationId::Dp1 | RelaxationId::Tri, Column::Cpwl) => Mark::Open,
        _ => Mark::Yes,
    }
}

type Builder = fn(&Cpwl1D) -> Result<ReluNetwork>;

fn dp0_net(f: &Cpwl1D) -> Result<ReluNetwork> {
    if f.classify().convex {
        dp0_precise_convex(f)
    } else {
        ibp_monotone(f)
    }
}

fn dp1_net(f: &Cpwl1D) -> Result<ReluNetwork> {
    Ok(dp1_substitute(&dp0_net(f)?))
}

/// Under the triangle any sign vector works; the seed-free choice here
/// alternates signs so that both orientations are exercised.
fn tri_net(f: &Cpwl1D) -> Result<ReluNetwork> {
    if f.classify().convex {
        let k = f.points().len() - 2;
        let signs: Vec<Sign> = (0..k).map(|i| if i % 2 == 0 { Sign::Minus } else { Sign::Plus }).collect();
        convex_encoding(f, &signs)
    } else {
        ibp_monotone(f)
    }
}

fn mn_net(f: &Cpwl1D) -> Result<ReluNetwork> {
    Ok(mn_single_layer(f))
}

fn construction(rel: RelaxationId, col: Column) -> Option<(&'static str, Builder)> {
    let monotone_only = matches!(col, Column::Monotone);
    Some(match rel {
        RelaxationId::Ibp => ("ibp_monotone", ibp_monotone as Builder),
        RelaxationId::Dp0 if monotone_only => ("ibp_monotone", ibp_monotone),
        RelaxationId::Dp0 => ("dp0_precise_convex", dp0_net),
        RelaxationId::Dp1 if monotone_only => ("dp1_substitute(ibp_monotone)", dp1_net),
        RelaxationId::Dp1 => ("dp1_substitute(dp0_precise_convex)", dp1_net),
        RelaxationId::Tri if monotone_only => ("ibp_monotone", ibp_monotone),
        RelaxationId::Tri => ("convex_encoding", tri_net),
        RelaxationId::Mn => ("mn_single_layer", mn_net),
    })
}

/// `|x|` on `[-1, 1]`.
pub fn abs_function() -> Cpwl1D {
    Cpwl1D::new(vec![(int(-1), int(1)), (int(0), int(0)), (int(1), int(1))]).expect("valid")
}

/// `y + relu(x - y)`, which computes `max(x, y)`.
pub fn max_network() -> ReluNetwork {
    let mut nb = NetBuilder::new(2);
    let r = nb.relu(int(0), [(Source::Input(0), int(1)), (Source::Input(1), int(-1))]);
    let o = nb.linear(int(0), [(Source::Input(1), int(1)), (r, int(1))]);
    nb.finish(o).expect("valid")
}

fn corpus(col: Column, cfg: &Table1Config) -> Result<Vec<Cpwl1D>> {
    let max_n = cfg.max_breakpoints.max(1);
    (0..cfg.funcs_per_class)
        .map(|i| {
            let seed = cfg.seed ^ ((col as u64 + 1) << 40) ^ i as u64;
            let n = 1 + (i % max_n);
            random_cpwl(n, col.filter(), seed)
        })
        .collect()
}

fn family(f: &Cpwl1D, cfg: &Table1Config, seed: u64) -> Result<BoxFamily> {
    let (lo, hi) = f.domain();
    let domain = InputBox::interval1(lo, hi)?;
    Ok(BoxFamily::for_function(f).union(BoxFamily::random(&domain, cfg.random_boxes, seed)))
}

fn describe_witness(r: &PrecisionReport) -> String {
    match &r.witness {
        Some(w) => format!(
            "box {}: analyzer [{}, {}] vs exact [{}, {}]",
            w.verdict.domain,
            render(&w.verdict.analyzer.0),
            render(&w.verdict.analyzer.1),
            render(&w.verdict.oracle.0),
            render(&w.verdict.oracle.1)
        ),
        None => String::new(),
    }
}

fn positive_cell(rel: RelaxationId, col: Column, cfg: &Table1Config) -> Result<Cell> {
    let (name, build) = construction(rel, col).expect("construction exists");
    let funcs = corpus(col, cfg)?;
    let mut boxes = 0;
    let mut failure = None;
    for (i, f) in funcs.iter().enumerate() {
        let net = build(f)?;
        let fam = family(f, cfg, cfg.seed.wrapping_add(i as u64))?;
        boxes += fam.len();
        let report = check_precise(&net, &Reference::Function(f.clone()), rel, &fam)?;
        if !report.all_precise() {
            failure = Some(format!("function {}: {}", f.to_json(), describe_witness(&report)));
            break;
        }
    }
    Ok(Cell {
        row: UNIVARIATE,
        relaxation: rel,
        column: col,
        expected: expected(rel, col),
        observed: if failure.is_some() { Mark::No } else { Mark::Yes },
        construction: name,
        functions: funcs.len(),
        boxes,
        note: failure.unwrap_or_else(|| "all boxes precise".into()),
    })
}

/// IBP on every constructed encoding of `|x|` over `[-1, 1]`.
fn ibp_abs_witness(col: Column) -> Result<Cell> {
    let f = abs_function();
    let nets = [
        dp0_precise_convex(&f)?,
        convex_encoding(&f, &[Sign::Plus])?,
        convex_encoding(&f, &[Sign::Minus])?,
        mn_single_layer(&f),
    ];
    let fam = BoxFamily::explicit(vec![InputBox::parse("-1,1")?]);
    let mut notes = Vec::new();
    let mut all_imprecise = true;
    for net in &nets {
        let r = check_precise(net, &Reference::Function(f.clone()), RelaxationId::Ibp, &fam)?;
        all_imprecise &= !r.all_precise();
        notes.push(describe_witness(&r));
    }
    Ok(Cell {
        row: UNIVARIATE,
        relaxation: RelaxationId::Ibp,
        column: col,
        expected: expected(RelaxationId::Ibp, col),
        observed: if all_imprecise { Mark::No } else { Mark::Yes },
        construction: "witness |x|",
        functions: 1,
        boxes: nets.len(),
        note: notes.join("; "),
    })
}

fn open_cell(rel: RelaxationId, col: Column) -> Cell {
    Cell {
        row: UNIVARIATE,
        relaxation: rel,
        column: col,
        expected: Mark::Open,
        observed: Mark::Open,
        construction: "none",
        functions: 0,
        boxes: 0,
        note: "open question; not tested".into(),
    }
}

/// The triangle on `max(x, y)` over `[0,1]^2` and its grid sub-boxes.
fn max_witness(col: Column) -> Result<Cell> {
    let net = max_network();
    let domain = InputBox::parse("0,1x0,1")?;
    let fam = BoxFamily::explicit(vec![domain.clone()]).union(BoxFamily::grid_2d(&domain, 2)?);
    let r = check_precise(&net, &Reference::Network(net.clone()), RelaxationId::Tri, &fam)?;
    Ok(Cell {
        row: MULTIVARIATE,
        relaxation: RelaxationId::Tri,
        column: col,
        expected: Mark::No,
        observed: if r.all_precise() { Mark::Yes } else { Mark::No },
        construction: "witness max(x, y) = y + relu(x - y)",
        functions: 1,
        boxes: fam.len(),
        note: describe_witness(&r),
    })
}

/// Builds every cell. Positive cells run the designated construction on the
/// random corpus; negative cells exhibit an imprecise witness.
pub fn table1_matrix(cfg: &Table1Config) -> Result<Table1Report> {
    let mut cells = Vec::new();
    for rel in RelaxationId::ALL {
        for col in Column::ALL {
            let cell = match expected(rel, col) {
                Mark::Yes => positive_cell(rel, col, cfg)?,
                Mark::No => ibp_abs_witness(col)?,
                Mark::Open => open_cell(rel, col),
            };
            cells.push(cell);
        }
    }
    for col in Column::ALL {
        cells.push(max_witness(col)?);
    }
    Ok(Table1Report { cells })
}

impl Table1Report {
    pub fn matches_expected(&self) -> bool {
        self.cells.iter().all(|c| c.expected == c.observed)
    }

    pub fn cell(&self, row: &str, rel: RelaxationId, col: Column) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.relaxation == rel && c.column == col)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6}{:<16}{:>8}{:>8}{:>8}{:>8}", "", "", "CPWL", "M-CPWL", "C-CPWL", "MC-CPWL");
        let mut rows: Vec<(&str, RelaxationId)> = RelaxationId::ALL.iter().map(|r| (UNIVARIATE, *r)).collect();
        rows.push((MULTIVARIATE, RelaxationId::Tri));
        for (row, rel) in rows {
            let label = if rel == RelaxationId::Mn { "Multi-Neuron∞" } else { rel.label() };
            let _ = write!(s, "{row:<6}{label:<16}");
            for col in Column::ALL {
                let mark = self.cell(row, rel, col).map(|c| c.observed.symbol()).unwrap_or(" ");
                let _ = write!(s, "{mark:>8}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "matches expected: {}", if self.matches_expected() { "yes" } else { "NO" });
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "matches_expected": self.matches_expected(),
            "cells": self.cells.iter().map(|c| json!({
                "row": c.row,
                "relax": c.relaxation.as_str(),
                "class": c.column.label(),
                "expected": c.expected.symbol(),
                "observed": c.observed.symbol(),
                "construction": c.construction,
                "functions": c.functions,
                "boxes": c.boxes,
                "note": c.note,
            })).collect::<Vec<_>>(),
        })
    }
}
