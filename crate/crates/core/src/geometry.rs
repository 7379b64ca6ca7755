//! Planar primitives shared by the ultrasound and X-ray pipelines.
//!
//! Coordinates are raster-native: `x` grows to the right (image column) and
//! `y` grows downward (image row). Anatomical directions are never baked in
//! here; the modality pipelines derive them per case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("normal is not a unit vector orthogonal to the line direction")]
    BadNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Point2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn offset(self, v: Vec2) -> Point2 {
        Point2::new(self.x + v.x, self.y + v.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Free vector (displacement or direction).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }

    /// Rotate by +90° in the (x, y) plane: (x, y) -> (-y, x).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, radians: f64) -> Vec2 {
        let (s, c) = radians.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }
}

/// Infinite line with a unit direction. A line and its reversal are the same
/// line for every angle computation in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub anchor: Point2,
    pub direction: Vec2,
}

impl Line2 {
    pub fn new(anchor: Point2, direction: Vec2) -> Result<Self, GeometryError> {
        let direction = direction.normalized().ok_or(GeometryError::DegenerateInput("zero line direction"))?;
        Ok(Self { anchor, direction })
    }

    pub fn through(a: Point2, b: Point2) -> Result<Self, GeometryError> {
        Self::new(a, b.sub(a)).map_err(|_| GeometryError::DegenerateInput("coincident points"))
    }

    /// Unit normal obtained by rotating the direction by +90°.
    pub fn normal(&self) -> Vec2 {
        self.direction.perp()
    }

    pub fn project(&self, p: Point2) -> Point2 {
        let t = p.sub(self.anchor).dot(self.direction);
        self.anchor.offset(self.direction.scale(t))
    }

    /// Unsigned orthogonal distance.
    pub fn distance(&self, p: Point2) -> f64 {
        p.sub(self.anchor).cross(self.direction).abs()
    }

    pub fn perpendicular_through(&self, p: Point2) -> Line2 {
        Line2 { anchor: p, direction: self.direction.perp() }
    }

    pub fn intersect(&self, other: &Line2) -> Option<Point2> {
        let denom = self.direction.cross(other.direction);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = other.anchor.sub(self.anchor).cross(other.direction) / denom;
        Some(self.anchor.offset(self.direction.scale(t)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle2 {
    pub center: Point2,
    pub radius: f64,
}

/// Closed polyline; the closing edge runs from the last vertex to the first.
///
/// Orientation: the shoelace sum `Σ (x_i y_{i+1} − x_{i+1} y_i)` is positive.
/// In raster coordinates (y down) that is a traversal which runs left to right
/// along the top of a shape. Convex corners then have a positive turning cross
/// product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    vertices: Vec<Point2>,
}

impl Contour {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegenerateInput("contour needs at least 3 vertices"));
        }
        let n = vertices.len();
        if (0..n).any(|i| vertices[i] == vertices[(i + 1) % n]) {
            return Err(GeometryError::DegenerateInput("repeated consecutive vertex"));
        }
        let c = Self { vertices };
        if c.signed_area() <= 0.0 {
            return Err(GeometryError::DegenerateInput("contour area is not positive"));
        }
        Ok(c)
    }

    /// Traced boundaries of one-pixel-wide structures enclose no area; the
    /// raster module constructs those directly.
    pub(crate) fn from_trace(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Vertex `i` with cyclic indexing (negative offsets allowed).
    pub fn at(&self, i: isize) -> Point2 {
        let n = self.vertices.len() as isize;
        self.vertices[i.rem_euclid(n) as usize]
    }
}

pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn centroid(points: &[Point2]) -> Option<Point2> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Some(Point2::new(sx / n, sy / n))
}

/// Total-least-squares line: the principal axis through the centroid.
///
/// The direction sign is canonical (positive x, or positive y when vertical)
/// so the result does not depend on input order.
pub fn fit_line_tls(points: &[Point2]) -> Result<Line2, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::DegenerateInput("line fit needs at least 2 points"));
    }
    let c = centroid(points).expect("non-empty");
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p.sub(c);
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let n = points.len() as f64;
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    if sxx + syy <= f64::EPSILON * (c.x.abs() + c.y.abs() + 1.0).powi(2) {
        return Err(GeometryError::DegenerateInput("all points coincide"));
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = Vec2::new(theta.cos(), theta.sin());
    if dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0) {
        dir = dir.neg();
    }
    Ok(Line2 { anchor: c, direction: dir })
}

/// Algebraic (Kåsa) least-squares circle, solved in centroid-shifted
/// coordinates.
pub fn fit_circle(points: &[Point2]) -> Result<Circle2, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateInput("circle fit needs at least 3 points"));
    }
    let c = centroid(points).expect("non-empty");
    let n = points.len() as f64;
    let (mut suu, mut suv, mut svv, mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let d = p.sub(c);
        let (u, v) = (d.x, d.y);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let (suu, suv, svv) = (suu / n, suv / n, svv / n);
    let (suuu, svvv, suvv, svuu) = (suuu / n, svvv / n, suvv / n, svuu / n);
    let det = suu * svv - suv * suv;
    // Determinant of the normalised normal equations, relative to the spread
    // so the guard is scale free.
    let spread = (suu + svv).max(f64::MIN_POSITIVE);
    if det <= 1e-9 * spread * spread {
        return Err(GeometryError::DegenerateInput("points are collinear"));
    }
    let rhs_u = 0.5 * (suuu + suvv);
    let rhs_v = 0.5 * (svvv + svuu);
    let a = (rhs_u * svv - rhs_v * suv) / det;
    let b = (suu * rhs_v - suv * rhs_u) / det;
    let radius = (a * a + b * b + suu + svv).sqrt();
    Ok(Circle2 { center: Point2::new(c.x + a, c.y + b), radius })
}

/// Acute angle between two undirected lines, in degrees within [0, 90].
pub fn angle_between_deg(a: &Line2, b: &Line2) -> f64 {
    let cross = a.direction.cross(b.direction).abs();
    let dot = a.direction.dot(b.direction).abs();
    cross.atan2(dot).to_degrees()
}

/// Distance of `p` from `l`, positive on the side `positive_normal` points to.
pub fn signed_distance(p: Point2, l: &Line2, positive_normal: Vec2) -> Result<f64, GeometryError> {
    if (positive_normal.norm() - 1.0).abs() > 1e-9 || positive_normal.dot(l.direction).abs() > 1e-9 {
        return Err(GeometryError::BadNormal);
    }
    Ok(p.sub(l.anchor).dot(positive_normal))
}

/// Convex hull by monotone chain, counter-clockwise in math orientation,
/// collinear points dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Point2, a: Point2, b: Point2| a.sub(o).cross(b.sub(o));
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Rigid/similarity transform helper used by tests and the phantom generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation_rad: f64,
    pub scale: f64,
    pub translation: Vec2,
}

impl Similarity {
    pub fn apply(&self, p: Point2) -> Point2 {
        let v = Vec2::new(p.x, p.y).rotate(self.rotation_rad).scale(self.scale);
        Point2::new(v.x + self.translation.x, v.y + self.translation.y)
    }

    pub fn apply_line(&self, l: &Line2) -> Line2 {
        Line2 { anchor: self.apply(l.anchor), direction: l.direction.rotate(self.rotation_rad) }
    }
}
