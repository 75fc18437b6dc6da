//! Univariate continuous piecewise-linear functions.

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rational::{int, parse_rational, q, random_on_grid, render, Rational};
use crate::numerics::{convex_hull_2d, HullPolygon};

/// A CPWL function on `[x_0, x_n]` given by its vertices `(x_i, f(x_i))`.
///
/// Always canonical: `x_i` strictly increasing, at least two points, and every
/// interior point is a genuine slope change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpwl1D {
    points: Vec<(Rational, Rational)>,
}

impl Cpwl1D {
    /// Builds and canonicalizes. Collinear interior points are dropped.
    pub fn new(points: Vec<(Rational, Rational)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCpwl(format!("need at least two points, got {}", points.len())));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidCpwl("x coordinates must be strictly increasing".into()));
        }
        Ok(Self::canonical(points))
    }

    fn canonical(points: Vec<(Rational, Rational)>) -> Self {
        let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(points.len());
        for p in points {
            while out.len() >= 2 {
                let a = &out[out.len() - 2];
                let b = &out[out.len() - 1];
                let s1 = (&b.1 - &a.1) / (&b.0 - &a.0);
                let s2 = (&p.1 - &b.1) / (&p.0 - &b.0);
                if s1 == s2 {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        Cpwl1D { points: out }
    }

    /// Affine function `slope * x + offset` on `[lo, hi]`.
    pub fn affine(lo: &Rational, hi: &Rational, slope: &Rational, offset: &Rational) -> Result<Self> {
        Self::new(vec![
            (lo.clone(), slope * lo + offset),
            (hi.clone(), slope * hi + offset),
        ])
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    /// Number of linear pieces.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn domain(&self) -> (Rational, Rational) {
        (self.points[0].0.clone(), self.points[self.points.len() - 1].0.clone())
    }

    pub fn xs(&self) -> Vec<Rational> {
        self.points.iter().map(|p| p.0.clone()).collect()
    }

    /// Slopes `alpha_i` of each piece.
    pub fn slopes(&self) -> Vec<Rational> {
        self.points
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect()
    }

    /// Slope changes `gamma_i = alpha_i - alpha_{i-1}` at interior points `x_1..x_{n-1}`.
    pub fn slope_changes(&self) -> Vec<Rational> {
        self.slopes().windows(2).map(|w| &w[1] - &w[0]).collect()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let (lo, hi) = self.domain();
        &lo <= x && x <= &hi
    }

    /// Evaluates; `None` outside the domain.
    pub fn eval(&self, x: &Rational) -> Option<Rational> {
        if !self.contains(x) {
            return None;
        }
        let i = self.points.partition_point(|p| &p.0 <= x);
        if i == 0 {
            return Some(self.points[0].1.clone());
        }
        let (x0, y0) = &self.points[i - 1];
        if x0 == x || i == self.points.len() {
            return Some(y0.clone());
        }
        let (x1, y1) = &self.points[i];
        Some(y0 + (x - x0) * (y1 - y0) / (x1 - x0))
    }

    fn eval_unchecked(&self, x: &Rational) -> Rational {
        self.eval(x).expect("x inside domain")
    }

    /// `bias + sum_k coeff_k * f_k` over a shared domain.
    pub fn affine_combination(bias: &Rational, terms: &[(Rational, &Cpwl1D)], domain: (&Rational, &Rational)) -> Result<Self> {
        let mut xs = vec![domain.0.clone(), domain.1.clone()];
        for (_, f) in terms {
            let (lo, hi) = f.domain();
            if &lo != domain.0 || &hi != domain.1 {
                return Err(Error::InvalidCpwl("domains differ in affine combination".into()));
            }
            xs.extend(f.points.iter().map(|p| p.0.clone()));
        }
        xs.sort();
        xs.dedup();
        let points = xs
            .into_iter()
            .map(|x| {
                let y = terms
                    .iter()
                    .fold(bias.clone(), |acc, (c, f)| acc + c * f.eval_unchecked(&x));
                (x, y)
            })
            .collect();
        Self::new(points)
    }

    /// `max(0, f)` with exact zero crossings inserted.
    pub fn relu(&self) -> Self {
        let mut pts: Vec<(Rational, Rational)> = Vec::with_capacity(self.points.len() * 2);
        for (i, (x, y)) in self.points.iter().enumerate() {
            if i > 0 {
                let (px, py) = &self.points[i - 1];
                if (py.is_negative() && y.is_positive()) || (py.is_positive() && y.is_negative()) {
                    let t = py / (py - y);
                    pts.push((px + t * (x - px), Rational::zero()));
                }
            }
            pts.push((x.clone(), crate::numerics::rational::relu(y)));
        }
        Self::canonical(pts)
    }

    pub fn neg(&self) -> Self {
        Cpwl1D {
            points: self.points.iter().map(|(x, y)| (x.clone(), -y.clone())).collect(),
        }
    }

    /// Restriction to a sub-interval.
    pub fn restrict(&self, lo: &Rational, hi: &Rational) -> Result<Self> {
        self.check_inside(lo, hi)?;
        if lo == hi {
            return Err(Error::InvalidCpwl("cannot restrict to a single point".into()));
        }
        let mut pts = vec![(lo.clone(), self.eval_unchecked(lo))];
        pts.extend(self.points.iter().filter(|p| &p.0 > lo && &p.0 < hi).cloned());
        pts.push((hi.clone(), self.eval_unchecked(hi)));
        Self::new(pts)
    }

    fn check_inside(&self, lo: &Rational, hi: &Rational) -> Result<()> {
        let (dl, du) = self.domain();
        if lo > hi || lo < &dl || hi > &du {
            return Err(Error::OutsideDomain {
                lower: render(lo),
                upper: render(hi),
                domain_lower: render(&dl),
                domain_upper: render(&du),
            });
        }
        Ok(())
    }

    /// Exact `(min, max)` of `f` on `[lo, hi]`: candidates are the endpoints and
    /// the breakpoints strictly inside.
    pub fn exact_range(&self, lo: &Rational, hi: &Rational) -> Result<(Rational, Rational)> {
        self.check_inside(lo, hi)?;
        let first = self.eval_unchecked(lo);
        let mut min = first.clone();
        let mut max = first;
        let inner = self.points.iter().filter(|p| &p.0 > lo && &p.0 < hi).map(|p| p.1.clone());
        for y in inner.chain(std::iter::once(self.eval_unchecked(hi))) {
            if y < min {
                min = y.clone();
            }
            if y > max {
                max = y;
            }
        }
        Ok((min, max))
    }

    /// Convex hull of the graph on the full domain.
    pub fn graph_hull(&self) -> HullPolygon {
        convex_hull_2d(&self.points).expect("at least two points")
    }

    pub fn classify(&self) -> FunctionClass {
        classify(self)
    }
}

/// Exact class membership derived from the slope sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionClass {
    pub monotone_increasing: bool,
    pub monotone_decreasing: bool,
    pub convex: bool,
    pub concave: bool,
    pub has_zero_slope_segment: bool,
    /// Set when the global minimum is attained at exactly one point and that
    /// point is interior to the domain.
    #[serde(serialize_with = "ser_opt_rational")]
    pub unique_interior_minimum_at: Option<Rational>,
}

fn ser_opt_rational<S: serde::Serializer>(v: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_some(&render(x)),
        None => s.serialize_none(),
    }
}

impl FunctionClass {
    pub fn monotone(&self) -> bool {
        self.monotone_increasing || self.monotone_decreasing
    }
}

pub fn classify(f: &Cpwl1D) -> FunctionClass {
    let a = f.slopes();
    let monotone_increasing = a.iter().all(|s| !s.is_negative());
    let monotone_decreasing = a.iter().all(|s| !s.is_positive());
    let convex = a.windows(2).all(|w| w[0] <= w[1]);
    let concave = a.windows(2).all(|w| w[0] >= w[1]);
    let has_zero_slope_segment = a.iter().any(|s| s.is_zero());
    let pts = f.points();
    let min = pts.iter().map(|p| &p.1).min().expect("non-empty");
    let at_min: Vec<usize> = (0..pts.len()).filter(|&i| &pts[i].1 == min).collect();
    let unique_interior_minimum_at = match at_min.as_slice() {
        [i] if *i > 0 && *i < pts.len() - 1 => Some(pts[*i].0.clone()),
        _ => None,
    };
    FunctionClass {
        monotone_increasing,
        monotone_decreasing,
        convex,
        concave,
        has_zero_slope_segment,
        unique_interior_minimum_at,
    }
}

/// Class requests for [`random_cpwl`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ClassFilter {
    /// Arbitrary slopes.
    Any,
    Monotone,
    Convex,
    MonotoneConvex,
    /// Convex, not monotone, minimum at a single interior breakpoint.
    ConvexUniqueMinimum,
    /// Convex with a zero-slope piece.
    ConvexZeroSlope,
}

impl ClassFilter {
    pub fn accepts(&self, c: &FunctionClass) -> bool {
        match self {
            ClassFilter::Any => true,
            ClassFilter::Monotone => c.monotone(),
            ClassFilter::Convex => c.convex,
            ClassFilter::MonotoneConvex => c.convex && c.monotone(),
            ClassFilter::ConvexUniqueMinimum => {
                c.convex && !c.monotone() && !c.has_zero_slope_segment && c.unique_interior_minimum_at.is_some()
            }
            ClassFilter::ConvexZeroSlope => c.convex && c.has_zero_slope_segment,
        }
    }
}

/// Positive step `k / den` with `den` in {1, 2, 4, 8} and value in `(0, max]`.
fn positive_step<R: Rng>(rng: &mut R, max: i64) -> Rational {
    let den = [1, 2, 4, 8][rng.gen_range(0..4)];
    q(rng.gen_range(1..=max * den), den)
}

fn grid_value<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> Rational {
    let den = [1, 2, 4, 8][rng.gen_range(0..4)];
    random_on_grid(rng, &int(lo), &int(hi), den)
}

fn distinct_neighbors<R: Rng>(rng: &mut R, n: usize, mut draw: impl FnMut(&mut R) -> Rational) -> Vec<Rational> {
    let mut out: Vec<Rational> = Vec::with_capacity(n);
    while out.len() < n {
        let s = draw(rng);
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

fn increasing_slopes<R: Rng>(rng: &mut R, n: usize, start: Rational) -> Vec<Rational> {
    let mut out = Vec::with_capacity(n);
    let mut s = start;
    for i in 0..n {
        if i > 0 {
            s += positive_step(rng, 2);
        }
        out.push(s.clone());
    }
    out
}

/// Deterministic random CPWL function with `n` pieces and the requested class.
///
/// All coordinates have denominators dividing 64.
pub fn random_cpwl(n: usize, class: ClassFilter, seed: u64) -> Result<Cpwl1D> {
    if n == 0 {
        return Err(Error::Unsatisfiable("need at least one piece".into()));
    }
    if class == ClassFilter::ConvexUniqueMinimum && n < 2 {
        return Err(Error::Unsatisfiable("a unique interior minimum needs two pieces".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes: Vec<Rational> = match class {
        ClassFilter::Any => distinct_neighbors(&mut rng, n, |r| grid_value(r, -3, 3)),
        ClassFilter::Monotone => {
            let s = distinct_neighbors(&mut rng, n, |r| grid_value(r, 0, 3));
            if rng.gen_bool(0.5) {
                s
            } else {
                s.into_iter().map(|v| -v).collect()
            }
        }
        ClassFilter::Convex => {
            let start = grid_value(&mut rng, -3, 3);
            increasing_slopes(&mut rng, n, start)
        }
        ClassFilter::MonotoneConvex => {
            let start = grid_value(&mut rng, 0, 1);
            let s = increasing_slopes(&mut rng, n, start);
            if rng.gen_bool(0.5) {
                s
            } else {
                s.into_iter().rev().map(|v| -v).collect()
            }
        }
        ClassFilter::ConvexUniqueMinimum => {
            let j = rng.gen_range(1..n);
            let first_neg = -positive_step(&mut rng, 2);
            let left: Vec<Rational> = increasing_slopes(&mut rng, j, -first_neg)
                .into_iter()
                .rev()
                .map(|v| -v)
                .collect();
            let first_pos = positive_step(&mut rng, 2);
            let right = increasing_slopes(&mut rng, n - j, first_pos);
            left.into_iter().chain(right).collect()
        }
        ClassFilter::ConvexZeroSlope => {
            let j = rng.gen_range(0..n);
            let mut left: Vec<Rational> = increasing_slopes(&mut rng, j + 1, int(0))
                .into_iter()
                .rev()
                .map(|v| -v)
                .collect();
            let right = increasing_slopes(&mut rng, n - j, int(0));
            left.pop();
            left.into_iter().chain(right).collect()
        }
    };
    let mut x = random_on_grid(&mut rng, &int(-4), &int(4), 1);
    let mut y = grid_value(&mut rng, -2, 2);
    let mut points = vec![(x.clone(), y.clone())];
    for s in &slopes {
        let dx = positive_step(&mut rng, 2);
        y += s * &dx;
        x += dx;
        points.push((x.clone(), y.clone()));
    }
    let f = Cpwl1D::new(points)?;
    debug_assert_eq!(f.segments(), n);
    debug_assert!(class.accepts(&f.classify()));
    Ok(f)
}

#[derive(Serialize, Deserialize)]
struct CpwlJson {
    points: Vec<[String; 2]>,
}

impl Cpwl1D {
    pub fn to_json(&self) -> String {
        let j = CpwlJson {
            points: self.points.iter().map(|(x, y)| [render(x), render(y)]).collect(),
        };
        serde_json::to_string(&j).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: CpwlJson = serde_json::from_str(s)?;
        let pts = j
            .points
            .iter()
            .map(|[x, y]| Ok((parse_rational(x)?, parse_rational(y)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(pts: &[(i64, i64)]) -> Cpwl1D {
        Cpwl1D::new(pts.iter().map(|&(x, y)| (int(x), int(y))).collect()).unwrap()
    }

    #[test]
    fn canonical_form_drops_collinear() {
        let g = f(&[(0, 0), (1, 1), (2, 2), (3, 0)]);
        assert_eq!(g.points().len(), 3);
        assert_eq!(g.xs(), vec![int(0), int(2), int(3)]);
        assert!(Cpwl1D::new(vec![(int(0), int(0))]).is_err());
        assert!(Cpwl1D::new(vec![(int(1), int(0)), (int(1), int(2))]).is_err());
    }

    #[test]
    fn classify_identity() {
        let c = f(&[(0, 0), (1, 1)]).classify();
        assert!(c.monotone_increasing && c.convex && c.concave);
        assert!(!c.monotone_decreasing && !c.has_zero_slope_segment);
        assert_eq!(c.unique_interior_minimum_at, None);
    }

    #[test]
    fn classify_abs() {
        let c = f(&[(-1, 1), (0, 0), (1, 1)]).classify();
        assert!(c.convex && !c.monotone());
        assert_eq!(c.unique_interior_minimum_at, Some(int(0)));
    }

    #[test]
    fn classify_zero_slope() {
        let c = f(&[(0, 0), (1, 0), (2, 1)]).classify();
        assert!(c.convex && c.monotone_increasing && c.has_zero_slope_segment);
        assert_eq!(c.unique_interior_minimum_at, None);
    }

    #[test]
    fn exact_range_examples() {
        let abs = f(&[(-1, 1), (0, 0), (1, 1)]);
        assert_eq!(abs.exact_range(&int(-1), &q(1, 2)).unwrap(), (int(0), int(1)));
        assert_eq!(abs.exact_range(&q(1, 3), &q(1, 3)).unwrap(), (q(1, 3), q(1, 3)));
        let mono = f(&[(0, 0), (1, 2), (2, 3)]);
        assert_eq!(mono.exact_range(&q(1, 2), &q(3, 2)).unwrap(), (int(1), q(5, 2)));
        assert!(abs.exact_range(&int(-2), &int(0)).is_err());
    }

    #[test]
    fn relu_inserts_crossings() {
        let g = f(&[(-1, -1), (1, 1)]).relu();
        assert_eq!(g.points(), &[(int(-1), int(0)), (int(0), int(0)), (int(1), int(1))]);
        let h = f(&[(0, 1), (2, -3)]).relu();
        assert_eq!(h.points(), &[(int(0), int(1)), (q(1, 2), int(0)), (int(2), int(0))]);
    }

    #[test]
    fn generator_examples() {
        let g = random_cpwl(1, ClassFilter::MonotoneConvex, 0).unwrap();
        assert_eq!(g.segments(), 1);
        let c = random_cpwl(4, ClassFilter::Convex, 7).unwrap();
        let s = c.slopes();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(c.classify().convex);
        let m = random_cpwl(4, ClassFilter::Monotone, 7).unwrap();
        assert!(m.classify().monotone());
        assert!(random_cpwl(1, ClassFilter::ConvexUniqueMinimum, 1).is_err());
        assert!(random_cpwl(0, ClassFilter::Any, 1).is_err());
        assert_eq!(random_cpwl(6, ClassFilter::Any, 3).unwrap(), random_cpwl(6, ClassFilter::Any, 3).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let g = random_cpwl(5, ClassFilter::Any, 11).unwrap();
        assert_eq!(Cpwl1D::from_json(&g.to_json()).unwrap(), g);
        assert_eq!(Cpwl1D::from_json(r#"{"points": [["-1","1"],["0","0"],["1","1"]]}"#).unwrap().segments(), 2);
    }

    const FILTERS: [ClassFilter; 6] = [
        ClassFilter::Any,
        ClassFilter::Monotone,
        ClassFilter::Convex,
        ClassFilter::MonotoneConvex,
        ClassFilter::ConvexUniqueMinimum,
        ClassFilter::ConvexZeroSlope,
    ];

    proptest! {
        #[test]
        fn generator_soundness(n in 2usize..=12, which in 0usize..6, seed in any::<u64>()) {
            let class = FILTERS[which];
            let g = random_cpwl(n, class, seed).unwrap();
            prop_assert_eq!(g.segments(), n);
            prop_assert!(class.accepts(&g.classify()));
            for (x, y) in g.points() {
                prop_assert!((64i64 % x.denom().to_string().parse::<i64>().unwrap()) == 0);
                prop_assert!((64i64 % y.denom().to_string().parse::<i64>().unwrap()) == 0);
            }
        }

        #[test]
        fn class_under_affine_and_negation(n in 1usize..=8, which in 0usize..6, seed in any::<u64>(), a in -3i64..=3, b in -3i64..=3) {
            let g = random_cpwl(n.max(2), FILTERS[which], seed).unwrap();
            let c = g.classify();
            let (lo, hi) = g.domain();
            let lin = Cpwl1D::affine(&lo, &hi, &int(a), &int(b)).unwrap();
            let shifted = Cpwl1D::affine_combination(&int(0), &[(int(1), &g), (int(1), &lin)], (&lo, &hi)).unwrap();
            let cs = shifted.classify();
            prop_assert_eq!(cs.convex, c.convex);
            prop_assert_eq!(cs.concave, c.concave);
            let cn = g.neg().classify();
            prop_assert_eq!(cn.convex, c.concave);
            prop_assert_eq!(cn.concave, c.convex);
            prop_assert_eq!(cn.monotone_increasing, c.monotone_decreasing);
            prop_assert_eq!(cn.monotone_decreasing, c.monotone_increasing);
        }

        #[test]
        fn exact_range_bounds_samples(n in 1usize..=8, seed in any::<u64>(), s1 in 0u32..=64, s2 in 0u32..=64) {
            let g = random_cpwl(n, ClassFilter::Any, seed).unwrap();
            let (lo, hi) = g.domain();
            let w = &hi - &lo;
            let (a, b) = (s1.min(s2), s1.max(s2));
            let l = &lo + &w * q(a as i64, 64);
            let u = &lo + &w * q(b as i64, 64);
            let (mn, mx) = g.exact_range(&l, &u).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let x = crate::numerics::rational::random_in(&mut rng, &l, &u, 32);
                let y = g.eval(&x).unwrap();
                prop_assert!(mn <= y && y <= mx);
            }
            let mut cands: Vec<Rational> = vec![g.eval(&l).unwrap(), g.eval(&u).unwrap()];
            cands.extend(g.points().iter().filter(|p| p.0 > l && p.0 < u).map(|p| p.1.clone()));
            prop_assert!(cands.contains(&mn) && cands.contains(&mx));
        }
    }
}
