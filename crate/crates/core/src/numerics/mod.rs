//! Exact rational arithmetic, linear programming and planar hulls.

pub mod hull;
pub mod lp;
pub mod rational;

pub use hull::{convex_hull_2d, hull_sum, HullPolygon, Point};
pub use lp::{lp_solve, Direction, LinProgram, LpOutcome, Relation};
pub use rational::{parse_rational, render, Rational};
