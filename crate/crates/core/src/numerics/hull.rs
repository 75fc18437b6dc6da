//! Exact planar convex hulls.

use num::{Signed, Zero};
use serde::Serialize;

use super::rational::{render, Rational};
use crate::error::{Error, Result};

pub type Point = (Rational, Rational);

/// Convex polygon in canonical form: counterclockwise, starting at the
/// lexicographically smallest vertex, with no three stored vertices collinear.
///
/// Degenerate hulls hold one vertex (a point) or two (a segment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HullPolygon {
    #[serde(serialize_with = "ser_points")]
    vertices: Vec<Point>,
}

fn ser_points<S: serde::Serializer>(v: &[Point], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|(x, y)| [render(x), render(y)]))
}

/// Twice the signed area of `(o, a, b)`; positive for a left turn.
pub fn cross(o: &Point, a: &Point, b: &Point) -> Rational {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

/// Andrew's monotone chain.
pub fn convex_hull_2d(points: &[Point]) -> Result<HullPolygon> {
    if points.is_empty() {
        return Err(Error::Empty("convex hull of no points"));
    }
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(HullPolygon { vertices: pts });
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // All-collinear input leaves the two extreme points, each once.
    lower.dedup();
    if lower.len() == 2 && lower[0] > lower[1] {
        lower.swap(0, 1);
    }
    Ok(HullPolygon { vertices: lower })
}

impl HullPolygon {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn x_span(&self) -> (Rational, Rational) {
        let lo = self.vertices.iter().map(|p| &p.0).min().expect("non-empty hull");
        let hi = self.vertices.iter().map(|p| &p.0).max().expect("non-empty hull");
        (lo.clone(), hi.clone())
    }

    pub fn y_extent(&self) -> (Rational, Rational) {
        let lo = self.vertices.iter().map(|p| &p.1).min().expect("non-empty hull");
        let hi = self.vertices.iter().map(|p| &p.1).max().expect("non-empty hull");
        (lo.clone(), hi.clone())
    }

    /// The vertical fiber `{y | (x, y) in hull}` as `(min, max)`, if `x` is in the span.
    pub fn fiber(&self, x: &Rational) -> Option<(Rational, Rational)> {
        let n = self.vertices.len();
        let mut lo: Option<Rational> = None;
        let mut hi: Option<Rational> = None;
        let mut push = |y: Rational| {
            if lo.as_ref().is_none_or(|l| &y < l) {
                lo = Some(y.clone());
            }
            if hi.as_ref().is_none_or(|h| &y > h) {
                hi = Some(y);
            }
        };
        for i in 0..n {
            let a = &self.vertices[i];
            if &a.0 == x {
                push(a.1.clone());
            }
            let b = &self.vertices[(i + 1) % n];
            let (left, right) = if a.0 <= b.0 { (a, b) } else { (b, a) };
            if &left.0 < x && x < &right.0 {
                let t = (x - &left.0) / (&right.0 - &left.0);
                push(&left.1 + t * (&right.1 - &left.1));
            }
        }
        Some((lo?, hi?))
    }

    /// True when `p` lies inside or on the boundary.
    pub fn contains(&self, p: &Point) -> bool {
        match self.vertices.len() {
            1 => &self.vertices[0] == p,
            2 => {
                let (a, b) = (&self.vertices[0], &self.vertices[1]);
                cross(a, b, p).is_zero()
                    && within(&a.0, &b.0, &p.0)
                    && within(&a.1, &b.1, &p.1)
            }
            n => (0..n).all(|i| !cross(&self.vertices[i], &self.vertices[(i + 1) % n], p).is_negative()),
        }
    }
}

fn within(a: &Rational, b: &Rational, v: &Rational) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo <= v && v <= hi
}

/// Fiberwise sum `{(x, y' + y'') | (x, y') in a, (x, y'') in b}`.
pub fn hull_sum(a: &HullPolygon, b: &HullPolygon) -> Result<HullPolygon> {
    let (sa, sb) = (a.x_span(), b.x_span());
    if sa != sb {
        return Err(Error::SpanMismatch(
            format!("{}, {}", render(&sa.0), render(&sa.1)),
            format!("{}, {}", render(&sb.0), render(&sb.1)),
        ));
    }
    let mut xs: Vec<Rational> = a.vertices.iter().chain(&b.vertices).map(|p| p.0.clone()).collect();
    xs.sort();
    xs.dedup();
    let mut pts = Vec::with_capacity(2 * xs.len());
    for x in &xs {
        let (alo, ahi) = a.fiber(x).expect("x inside span");
        let (blo, bhi) = b.fiber(x).expect("x inside span");
        pts.push((x.clone(), alo + blo));
        pts.push((x.clone(), ahi + bhi));
    }
    convex_hull_2d(&pts)
}
