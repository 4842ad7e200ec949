use std::fmt;

use serde::{Deserialize, Serialize};

use super::body::ConvexBody;
use super::distance::distance_between;
use super::space::{LpSpace, Point};
use super::GeometryError;

/// One of the two sets of a proximity pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// A pair `(A, B)` of convex bodies with its distance computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityInstance {
    space: LpSpace,
    a: ConvexBody,
    b: ConvexBody,
    dist: f64,
    realizing: (Point, Point),
    tol: f64,
}

impl ProximityInstance {
    pub fn new(a: ConvexBody, b: ConvexBody, tol: f64) -> Result<Self, GeometryError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(GeometryError::InvalidTolerance(tol));
        }
        // the cached distance is resolved well below the working tolerance
        let r = distance_between(&a, &b, tol * 1e-3, DEFAULT_MAX_ITER)?;
        if !r.converged {
            return Err(GeometryError::NotConverged {
                iterations: r.iterations,
                achieved: r.dist,
            });
        }
        Ok(Self {
            space: *a.space(),
            a,
            b,
            dist: r.dist,
            realizing: (r.a, r.b),
            tol,
        })
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn a(&self) -> &ConvexBody {
        &self.a
    }

    pub fn b(&self) -> &ConvexBody {
        &self.b
    }

    pub fn body(&self, side: Side) -> &ConvexBody {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    /// `dist(A, B)`.
    pub fn dist(&self) -> f64 {
        self.dist
    }

    pub fn realizing_pair(&self) -> (&Point, &Point) {
        (&self.realizing.0, &self.realizing.1)
    }

    pub fn realizing_point(&self, side: Side) -> &Point {
        match side {
            Side::A => &self.realizing.0,
            Side::B => &self.realizing.1,
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_bounded(&self) -> bool {
        self.a.is_bounded() && self.b.is_bounded()
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64, GeometryError> {
        self.space.distance(x, y)
    }

    /// Side whose body contains `x` within `tol`; `A` wins when both do.
    pub fn side_of(&self, x: &Point, tol: f64) -> Result<Option<Side>, GeometryError> {
        if self.a.contains(x, tol)? {
            Ok(Some(Side::A))
        } else if self.b.contains(x, tol)? {
            Ok(Some(Side::B))
        } else {
            Ok(None)
        }
    }

    /// How far `x` is from the proximal set of `side`: the larger of
    /// `d(x, other) - dist(A, B)` and `|x - P_side P_other x|`. The second
    /// term grows linearly with the offset, the first only like its `p`-th
    /// power.
    pub fn proximal_excess(&self, x: &Point, side: Side) -> Result<f64, GeometryError> {
        let other = self.body(side.opposite());
        let y = other.project(x)?;
        let gap = self.space.distance(x, &y)? - self.dist;
        let back = self.body(side).project(&y)?;
        Ok(gap.max(self.space.distance(x, &back)?))
    }

    /// Whether `x` (a point of `side`) realizes the distance to the
    /// opposite body, i.e. lies in `A0` or `B0`.
    pub fn proximal_membership(&self, x: &Point, side: Side) -> Result<bool, GeometryError> {
        let off = self.body(side).distance_to(x)?;
        if off > self.tol {
            return Err(GeometryError::NotOnSide { side, distance: off });
        }
        Ok(self.proximal_excess(x, side)? <= self.tol)
    }
}
