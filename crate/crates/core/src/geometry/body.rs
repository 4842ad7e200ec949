use super::space::{LpSpace, Point};
use super::GeometryError;

/// Linear constraint `<normal, x> <= offset`, or `= offset` when `equality`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub normal: Point,
    pub offset: f64,
    pub equality: bool,
}

impl LinearConstraint {
    pub fn le(normal: Point, offset: f64) -> Self {
        Self {
            normal,
            offset,
            equality: false,
        }
    }

    pub fn eq(normal: Point, offset: f64) -> Self {
        Self {
            normal,
            offset,
            equality: true,
        }
    }

    /// Signed violation; positive means the point is outside.
    pub fn violation(&self, x: &Point) -> f64 {
        let s = self.normal.dot(x) - self.offset;
        if self.equality {
            s.abs()
        } else {
            s
        }
    }

    fn normalized(mut self) -> Self {
        let n = self.normal.norm();
        self.normal /= n;
        self.offset /= n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyKind {
    Ball {
        center: Point,
        radius: f64,
    },
    Box {
        lo: Point,
        hi: Point,
    },
    /// `<normal, x> <= offset`
    Halfspace {
        normal: Point,
        offset: f64,
    },
    /// `<normal, x> = offset`
    Hyperplane {
        normal: Point,
        offset: f64,
    },
    /// Convex hull of `vertices`; `constraints` is the matching halfspace form.
    Polytope {
        vertices: Vec<Point>,
        constraints: Vec<LinearConstraint>,
    },
    Intersection {
        bodies: Vec<ConvexBody>,
        witness: Point,
    },
}

/// A closed convex subset of an [`LpSpace`]. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    space: LpSpace,
    kind: BodyKind,
}

fn invalid(field: &str, reason: impl Into<String>) -> GeometryError {
    GeometryError::InvalidBody {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_finite(field: &str, x: &Point) -> Result<(), GeometryError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(field, "coordinates must be finite"))
    }
}

fn check_dim(space: &LpSpace, field: &str, x: &Point) -> Result<(), GeometryError> {
    if x.len() != space.dim() {
        return Err(invalid(
            field,
            format!("expected {} coordinates, got {}", space.dim(), x.len()),
        ));
    }
    check_finite(field, x)
}

/// Relative slack allowed when checking vertices against supplied halfspaces.
const VERTEX_SLACK: f64 = 1e-9;

impl ConvexBody {
    pub fn ball(space: LpSpace, center: Point, radius: f64) -> Result<Self, GeometryError> {
        check_dim(&space, "center", &center)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self {
            space,
            kind: BodyKind::Ball { center, radius },
        })
    }

    pub fn cuboid(space: LpSpace, lo: Point, hi: Point) -> Result<Self, GeometryError> {
        check_dim(&space, "lo", &lo)?;
        check_dim(&space, "hi", &hi)?;
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(invalid(
                "hi",
                format!("lo[{i}] = {} exceeds hi[{i}] = {}", lo[i], hi[i]),
            ));
        }
        Ok(Self {
            space,
            kind: BodyKind::Box { lo, hi },
        })
    }

    pub fn halfspace(space: LpSpace, normal: Point, offset: f64) -> Result<Self, GeometryError> {
        Self::check_normal(&space, &normal, offset)?;
        Ok(Self {
            space,
            kind: BodyKind::Halfspace { normal, offset },
        })
    }

    pub fn hyperplane(space: LpSpace, normal: Point, offset: f64) -> Result<Self, GeometryError> {
        Self::check_normal(&space, &normal, offset)?;
        Ok(Self {
            space,
            kind: BodyKind::Hyperplane { normal, offset },
        })
    }

    fn check_normal(space: &LpSpace, normal: &Point, offset: f64) -> Result<(), GeometryError> {
        check_dim(space, "normal", normal)?;
        if normal.iter().all(|v| *v == 0.0) {
            return Err(invalid("normal", "must be nonzero"));
        }
        if !offset.is_finite() {
            return Err(invalid("offset", "must be finite"));
        }
        Ok(())
    }

    /// Polytope from a vertex list. The halfspace form is derived for
    /// dimensions 1 and 2; higher dimensions need [`ConvexBody::polytope_with_halfspaces`].
    pub fn polytope(space: LpSpace, vertices: Vec<Point>) -> Result<Self, GeometryError> {
        Self::check_vertices(&space, &vertices)?;
        let constraints = match space.dim() {
            1 => interval_constraints(&vertices),
            2 => planar_constraints(&vertices),
            d => {
                return Err(invalid(
                    "halfspaces",
                    format!("required for polytopes in dimension {d}"),
                ))
            }
        };
        Ok(Self {
            space,
            kind: BodyKind::Polytope { vertices, constraints },
        })
    }

    /// Polytope with an explicit halfspace description. Every vertex must
    /// satisfy every constraint.
    pub fn polytope_with_halfspaces(
        space: LpSpace,
        vertices: Vec<Point>,
        halfspaces: Vec<LinearConstraint>,
    ) -> Result<Self, GeometryError> {
        Self::check_vertices(&space, &vertices)?;
        if halfspaces.is_empty() {
            return Err(invalid("halfspaces", "must not be empty"));
        }
        for (j, h) in halfspaces.iter().enumerate() {
            Self::check_normal(&space, &h.normal, h.offset)
                .map_err(|_| invalid("halfspaces", format!("constraint {j} is malformed")))?;
        }
        let constraints: Vec<_> = halfspaces.into_iter().map(LinearConstraint::normalized).collect();
        for (i, v) in vertices.iter().enumerate() {
            let scale = 1.0 + v.amax();
            if let Some(j) = constraints.iter().position(|c| c.violation(v) > VERTEX_SLACK * scale) {
                return Err(invalid("halfspaces", format!("vertex {i} violates constraint {j}")));
            }
        }
        Ok(Self {
            space,
            kind: BodyKind::Polytope { vertices, constraints },
        })
    }

    fn check_vertices(space: &LpSpace, vertices: &[Point]) -> Result<(), GeometryError> {
        if vertices.is_empty() {
            return Err(invalid("vertices", "need at least one vertex"));
        }
        for v in vertices {
            check_dim(space, "vertices", v)?;
        }
        Ok(())
    }

    /// Intersection of `bodies`, certified nonempty by `witness`.
    pub fn intersection(space: LpSpace, bodies: Vec<ConvexBody>, witness: Point) -> Result<Self, GeometryError> {
        if bodies.is_empty() {
            return Err(invalid("bodies", "need at least one body"));
        }
        check_dim(&space, "witness", &witness)?;
        for (i, b) in bodies.iter().enumerate() {
            if b.space != space {
                return Err(invalid("bodies", format!("body {i} lives in a different space")));
            }
        }
        let body = Self {
            space,
            kind: BodyKind::Intersection {
                bodies,
                witness: witness.clone(),
            },
        };
        let BodyKind::Intersection { bodies, .. } = &body.kind else {
            unreachable!()
        };
        for (i, b) in bodies.iter().enumerate() {
            let scale = 1.0 + witness.amax();
            if !b.contains(&witness, 1e-9 * scale)? {
                return Err(invalid("witness", format!("not contained in body {i}")));
            }
        }
        Ok(body)
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    pub fn variant_name(&self) -> &'static str {
        match &self.kind {
            BodyKind::Ball { .. } => "ball",
            BodyKind::Box { .. } => "box",
            BodyKind::Halfspace { .. } => "halfspace",
            BodyKind::Hyperplane { .. } => "hyperplane",
            BodyKind::Polytope { .. } => "polytope",
            BodyKind::Intersection { .. } => "intersection",
        }
    }

    /// A point known to lie in the body.
    pub fn witness(&self) -> Point {
        match &self.kind {
            BodyKind::Ball { center, .. } => center.clone(),
            BodyKind::Box { lo, hi } => (lo + hi) * 0.5,
            BodyKind::Halfspace { normal, offset } | BodyKind::Hyperplane { normal, offset } => {
                normal * (*offset / normal.norm_squared())
            }
            BodyKind::Polytope { vertices, .. } => {
                let sum = vertices.iter().fold(Point::zeros(self.space.dim()), |acc, v| acc + v);
                sum / vertices.len() as f64
            }
            BodyKind::Intersection { witness, .. } => witness.clone(),
        }
    }

    /// Axis-aligned bounding box, `None` for unbounded bodies.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        match &self.kind {
            // |x_i - c_i| <= ||x - c||_p for every p
            BodyKind::Ball { center, radius } => Some((center.add_scalar(-radius), center.add_scalar(*radius))),
            BodyKind::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            BodyKind::Halfspace { .. } => None,
            BodyKind::Hyperplane { normal, offset } => {
                if self.space.dim() == 1 {
                    let x = Point::from_element(1, offset / normal[0]);
                    Some((x.clone(), x))
                } else {
                    None
                }
            }
            BodyKind::Polytope { vertices, .. } => {
                let mut lo = vertices[0].clone();
                let mut hi = vertices[0].clone();
                for v in &vertices[1..] {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                Some((lo, hi))
            }
            BodyKind::Intersection { bodies, .. } => bodies
                .iter()
                .filter_map(|b| b.bounding_box())
                .reduce(|(l1, h1), (l2, h2)| (l1.sup(&l2), h1.inf(&h2))),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounding_box().is_some()
    }

    /// Extreme points for polytopal bodies (boxes up to 12 dimensions).
    pub fn vertices(&self) -> Option<Vec<Point>> {
        match &self.kind {
            BodyKind::Polytope { vertices, .. } => Some(vertices.clone()),
            BodyKind::Box { lo, hi } if lo.len() <= 12 => {
                let d = lo.len();
                Some(
                    (0..1usize << d)
                        .map(|mask| Point::from_fn(d, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Halfspace description, when the body is polyhedral.
    pub fn linear_constraints(&self) -> Option<Vec<LinearConstraint>> {
        let d = self.space.dim();
        match &self.kind {
            BodyKind::Ball { .. } => None,
            BodyKind::Box { lo, hi } => {
                let mut out = Vec::with_capacity(2 * d);
                for i in 0..d {
                    let e = Point::from_fn(d, |j, _| if j == i { 1.0 } else { 0.0 });
                    if lo[i] == hi[i] {
                        out.push(LinearConstraint::eq(e, lo[i]));
                    } else {
                        out.push(LinearConstraint::le(e.clone(), hi[i]));
                        out.push(LinearConstraint::le(-e, -lo[i]));
                    }
                }
                Some(out)
            }
            BodyKind::Halfspace { normal, offset } => {
                Some(vec![LinearConstraint::le(normal.clone(), *offset).normalized()])
            }
            BodyKind::Hyperplane { normal, offset } => {
                Some(vec![LinearConstraint::eq(normal.clone(), *offset).normalized()])
            }
            BodyKind::Polytope { constraints, .. } => Some(constraints.clone()),
            BodyKind::Intersection { bodies, .. } => {
                let mut out = Vec::new();
                for b in bodies {
                    out.extend(b.linear_constraints()?);
                }
                Some(out)
            }
        }
    }
}

fn interval_constraints(vertices: &[Point]) -> Vec<LinearConstraint> {
    let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    let e = Point::from_element(1, 1.0);
    if lo == hi {
        vec![LinearConstraint::eq(e, lo)]
    } else {
        vec![LinearConstraint::le(e.clone(), hi), LinearConstraint::le(-e, -lo)]
    }
}

/// Halfspace form of the convex hull of planar points (monotone chain).
/// Degenerate hulls become a segment (one equality, two bounds) or a point.
fn planar_constraints(vertices: &[Point]) -> Vec<LinearConstraint> {
    let hull = convex_hull_2d(vertices);
    let p2 = |x: f64, y: f64| Point::from_column_slice(&[x, y]);
    match hull.len() {
        1 => {
            let v = &hull[0];
            vec![
                LinearConstraint::eq(p2(1.0, 0.0), v[0]),
                LinearConstraint::eq(p2(0.0, 1.0), v[1]),
            ]
        }
        2 => {
            let (a, b) = (&hull[0], &hull[1]);
            let d = b - a;
            let n = p2(-d[1], d[0]);
            vec![
                LinearConstraint::eq(n.clone(), n.dot(a)).normalized(),
                LinearConstraint::le(d.clone(), d.dot(b)).normalized(),
                LinearConstraint::le(-&d, -d.dot(a)).normalized(),
            ]
        }
        k => (0..k)
            .map(|i| {
                let a = &hull[i];
                let b = &hull[(i + 1) % k];
                // counter-clockwise hull: outward normal is the edge rotated clockwise
                let n = p2(b[1] - a[1], a[0] - b[0]);
                LinearConstraint::le(n.clone(), n.dot(a)).normalized()
            })
            .collect(),
    }
}

fn convex_hull_2d(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|v| (v[0], v[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() <= 2 {
        return pts
            .into_iter()
            .map(|(x, y)| Point::from_column_slice(&[x, y]))
            .collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
        .into_iter()
        .map(|(x, y)| Point::from_column_slice(&[x, y]))
        .collect()
}
