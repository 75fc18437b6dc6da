//! Exact linear programming.
//!
//! A dense two-phase primal simplex over [`Rational`] using Bland's rule for
//! both the entering and the leaving variable, so it always terminates.
//! Programs here are small (tens of variables), so a dense tableau is fine.

use num::{Signed, Zero};
use serde::Serialize;

use super::rational::Rational;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// A linear program over `variables` real variables.
///
/// Variables are free unless given a lower bound; every constraint row has
/// exactly `variables` coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinProgram {
    variables: usize,
    lower_bounds: Vec<Option<Rational>>,
    constraints: Vec<Constraint>,
    objective: Vec<Rational>,
    direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, point: Vec<Rational> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Rational, Vec<Rational>)> {
        match self {
            LpOutcome::Optimal { value, point } => Some((value, point)),
            _ => None,
        }
    }
}

impl LinProgram {
    pub fn new(variables: usize) -> Self {
        LinProgram {
            variables,
            lower_bounds: vec![None; variables],
            constraints: Vec::new(),
            objective: vec![Rational::zero(); variables],
            direction: Direction::Minimize,
        }
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn lower_bounds(&self) -> &[Option<Rational>] {
        &self.lower_bounds
    }

    pub fn objective(&self) -> (&[Rational], Direction) {
        (&self.objective, self.direction)
    }

    /// Appends a fresh free variable and returns its index.
    pub fn add_variable(&mut self, lower: Option<Rational>) -> usize {
        self.variables += 1;
        self.lower_bounds.push(lower);
        self.objective.push(Rational::zero());
        for c in &mut self.constraints {
            c.coeffs.push(Rational::zero());
        }
        self.variables - 1
    }

    pub fn set_lower_bound(&mut self, var: usize, lower: Rational) {
        self.lower_bounds[var] = Some(lower);
    }

    pub fn add_constraint(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> Result<()> {
        if coeffs.len() != self.variables {
            return Err(Error::DimensionMismatch {
                expected: self.variables,
                got: coeffs.len(),
            });
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(())
    }

    pub fn set_objective(&mut self, direction: Direction, coeffs: Vec<Rational>) -> Result<()> {
        if coeffs.len() != self.variables {
            return Err(Error::DimensionMismatch {
                expected: self.variables,
                got: coeffs.len(),
            });
        }
        self.direction = direction;
        self.objective = coeffs;
        Ok(())
    }

    /// Same feasible set, different objective.
    pub fn with_objective(&self, direction: Direction, coeffs: Vec<Rational>) -> Result<Self> {
        let mut p = self.clone();
        p.set_objective(direction, coeffs)?;
        Ok(p)
    }
}

/// How an original variable maps onto nonnegative tableau columns.
enum ColumnMap {
    Shifted { col: usize, lower: Rational },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    // m rows of `cols + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    // reduced costs; the last entry is minus the current objective value.
    cost: Vec<Rational>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        let nz: Vec<usize> = (0..=self.cols).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
        }
        if !self.cost[c].is_zero() {
            let f = self.cost[c].clone();
            for &j in &nz {
                self.cost[j] -= &f * &pivot_row[j];
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the current cost row over the allowed columns.
    /// Returns false when the program is unbounded.
    fn run(&mut self, allowed: &[bool]) -> bool {
        loop {
            // Bland: lowest-index improving column.
            let entering = (0..self.cols).find(|&j| allowed[j] && self.cost[j].is_negative());
            let Some(c) = entering else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[c];
                let replace = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if replace {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Solves `p` exactly.
pub fn lp_solve(p: &LinProgram) -> LpOutcome {
    // Column layout: mapped variables, then slack/surplus, then artificials.
    let mut maps = Vec::with_capacity(p.variables);
    let mut ncols = 0;
    for lb in &p.lower_bounds {
        match lb {
            Some(l) => {
                maps.push(ColumnMap::Shifted { col: ncols, lower: l.clone() });
                ncols += 1;
            }
            None => {
                maps.push(ColumnMap::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
    }
    let structural = ncols;

    struct Row {
        coeffs: Vec<Rational>,
        relation: Relation,
        rhs: Rational,
    }
    let mut std_rows = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let mut coeffs = vec![Rational::zero(); structural];
        let mut rhs = c.rhs.clone();
        for (a, m) in c.coeffs.iter().zip(&maps) {
            if a.is_zero() {
                continue;
            }
            match m {
                ColumnMap::Shifted { col, lower } => {
                    coeffs[*col] = a.clone();
                    rhs -= a * lower;
                }
                ColumnMap::Split { pos, neg } => {
                    coeffs[*pos] = a.clone();
                    coeffs[*neg] = -a.clone();
                }
            }
        }
        let mut relation = c.relation;
        if rhs.is_negative() {
            for v in coeffs.iter_mut() {
                *v = -v.clone();
            }
            rhs = -rhs;
            relation = match relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        std_rows.push(Row { coeffs, relation, rhs });
    }

    let slack_count = std_rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let art_count = std_rows.iter().filter(|r| r.relation != Relation::Le).count();
    let cols = structural + slack_count + art_count;
    let art_start = structural + slack_count;

    let mut rows = Vec::with_capacity(std_rows.len());
    let mut basis = Vec::with_capacity(std_rows.len());
    let mut next_slack = structural;
    let mut next_art = art_start;
    for r in std_rows {
        let mut row = r.coeffs;
        row.resize(cols + 1, Rational::zero());
        row[cols] = r.rhs;
        match r.relation {
            Relation::Le => {
                row[next_slack] = Rational::from_integer(1.into());
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = Rational::from_integer((-1).into());
                next_slack += 1;
                row[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }

    // Phase one: minimize the sum of artificials.
    let mut cost = vec![Rational::zero(); cols + 1];
    for (row, &b) in rows.iter().zip(&basis) {
        if b >= art_start {
            for j in 0..=cols {
                if j < art_start || j == cols {
                    cost[j] -= &row[j];
                }
            }
        }
    }
    let mut t = Tableau { rows, basis, cost, cols };
    if art_count > 0 {
        let allowed = vec![true; cols];
        t.run(&allowed);
        if t.cost[cols].is_negative() {
            return LpOutcome::Infeasible;
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                match (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase two.
    let sign = match p.direction {
        Direction::Minimize => Rational::from_integer(1.into()),
        Direction::Maximize => Rational::from_integer((-1).into()),
    };
    let mut c_struct = vec![Rational::zero(); cols + 1];
    for (a, m) in p.objective.iter().zip(&maps) {
        if a.is_zero() {
            continue;
        }
        let a = a * &sign;
        match m {
            ColumnMap::Shifted { col, .. } => c_struct[*col] = a,
            ColumnMap::Split { pos, neg } => {
                c_struct[*neg] = -a.clone();
                c_struct[*pos] = a;
            }
        }
    }
    let mut cost = c_struct.clone();
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        if c_struct[b].is_zero() {
            continue;
        }
        let cb = c_struct[b].clone();
        for j in 0..=cols {
            if !row[j].is_zero() {
                cost[j] -= &cb * &row[j];
            }
        }
    }
    t.cost = cost;
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if !t.run(&allowed) {
        return LpOutcome::Unbounded;
    }

    let mut col_values = vec![Rational::zero(); cols];
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        col_values[b] = row[cols].clone();
    }
    let point: Vec<Rational> = maps
        .iter()
        .map(|m| match m {
            ColumnMap::Shifted { col, lower } => lower + &col_values[*col],
            ColumnMap::Split { pos, neg } => &col_values[*pos] - &col_values[*neg],
        })
        .collect();
    let value = p
        .objective
        .iter()
        .zip(&point)
        .fold(Rational::zero(), |acc, (a, x)| acc + a * x);
    LpOutcome::Optimal { value, point }
}

/// Checks a point against every constraint and lower bound of `p`.
pub fn is_feasible(p: &LinProgram, point: &[Rational]) -> bool {
    if point.len() != p.variables {
        return false;
    }
    let bounds_ok = p
        .lower_bounds
        .iter()
        .zip(point)
        .all(|(lb, x)| lb.as_ref().is_none_or(|l| x >= l));
    bounds_ok
        && p.constraints.iter().all(|c| {
            let lhs = c
                .coeffs
                .iter()
                .zip(point)
                .fold(Rational::zero(), |acc, (a, x)| acc + a * x);
            match c.relation {
                Relation::Le => lhs <= c.rhs,
                Relation::Ge => lhs >= c.rhs,
                Relation::Eq => lhs == c.rhs,
            }
        })
}
