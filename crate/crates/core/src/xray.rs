//! X-ray measurements from the per-side triangle segmentations.
//!
//! Each side's triangle yields three landmarks: the inner corner (most
//! medial), the h point (most inferior of the other two) and the outer
//! corner. Hilgenreiner's line joins the two inner corners, Perkin's line is
//! its perpendicular through each outer corner, and the diagonal leaves the
//! Hilgenreiner/Perkin intersection at 45° inferolaterally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_between_deg, centroid, convex_hull, fit_line_tls, Contour, Line2, Point2, Vec2};
use crate::raster::{largest_component, select_label, trace_contour, LabelMask};

/// Medial scores of the inner corner and the runner-up must differ by this.
pub const AMBIGUITY_MARGIN_PX: f64 = 2.0;
const MIN_TRIANGLE_AREA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XrayFailure {
    #[error("degenerate triangle (area {0:.2} px²)")]
    DegenerateTriangle(f64),
    #[error("ambiguous corners: medial scores differ by {0:.2} px")]
    AmbiguousCorners(f64),
    #[error("{0}")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideLandmarks {
    pub side: Side,
    pub inner: Point2,
    pub outer: Point2,
    pub h_point: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PelvisConstruction {
    pub hilgenreiner: Line2,
    pub perkin_left: Line2,
    pub perkin_right: Line2,
    pub diagonal_left: Line2,
    pub diagonal_right: Line2,
    /// Unit normal of Hilgenreiner's line pointing inferiorly.
    pub inferior: Vec2,
    /// Unit vectors along Hilgenreiner's line pointing away from the midline.
    pub lateral_left: Vec2,
    pub lateral_right: Vec2,
}

impl PelvisConstruction {
    pub fn perkin(&self, side: Side) -> &Line2 {
        match side {
            Side::Left => &self.perkin_left,
            Side::Right => &self.perkin_right,
        }
    }

    pub fn diagonal(&self, side: Side) -> &Line2 {
        match side {
            Side::Left => &self.diagonal_left,
            Side::Right => &self.diagonal_right,
        }
    }

    pub fn lateral(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.lateral_left,
            Side::Right => self.lateral_right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XrayLabels {
    pub left: u8,
    pub right: u8,
}

impl Default for XrayLabels {
    fn default() -> Self {
        Self { left: 1, right: 2 }
    }
}

impl XrayLabels {
    pub fn label(&self, side: Side) -> u8 {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XrayConfig {
    /// Replace hull corners by intersections of per-side edge fits.
    pub refine_corners: bool,
}

impl Default for XrayConfig {
    fn default() -> Self {
        Self { refine_corners: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideMeasurements {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acetabular_index_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wiberg_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ihdi_grade: Option<u8>,
    pub status: u8,
    pub experimental: bool,
}

impl SideMeasurements {
    fn failed() -> Self {
        Self { acetabular_index_deg: None, wiberg_deg: None, ihdi_grade: None, status: 0, experimental: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrayMeasurements {
    pub left: SideMeasurements,
    pub right: SideMeasurements,
}

impl XrayMeasurements {
    pub fn side(&self, side: Side) -> &SideMeasurements {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.left.status == 1 && self.right.status == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XrayAnalysis {
    pub measurements: XrayMeasurements,
    pub left: Option<SideLandmarks>,
    pub right: Option<SideLandmarks>,
    pub triangles: [Option<[Point2; 3]>; 2],
    pub construction: Option<PelvisConstruction>,
    pub messages: Vec<String>,
}

impl XrayAnalysis {
    pub fn landmarks(&self, side: Side) -> Option<&SideLandmarks> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }
}

fn tri_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * b.sub(a).cross(c.sub(a)).abs()
}

/// The three convex-hull vertices enclosing the largest triangle.
/// Exhaustive over hull vertices; ties keep the lexicographically smallest
/// index triple.
pub fn triangle_corners(c: &Contour) -> Result<[Point2; 3], XrayFailure> {
    let hull = convex_hull(c.vertices());
    let h = hull.len();
    let mut best = (0.0, [0usize; 3]);
    for i in 0..h {
        for j in i + 1..h {
            for k in j + 1..h {
                let a = tri_area(hull[i], hull[j], hull[k]);
                if a > best.0 + 1e-9 {
                    best = (a, [i, j, k]);
                }
            }
        }
    }
    if best.0 < MIN_TRIANGLE_AREA {
        return Err(XrayFailure::DegenerateTriangle(best.0));
    }
    Ok(best.1.map(|i| hull[i]))
}

/// Sharpens hull corners by intersecting total-least-squares fits of the
/// contour runs along each side. Falls back to the hull corner when a side
/// has too few samples or the intersection strays.
pub fn refine_triangle_corners(c: &Contour, corners: [Point2; 3]) -> [Point2; 3] {
    let side_line = |a: Point2, b: Point2| -> Option<Line2> {
        let chord = Line2::through(a, b).ok()?;
        let len = a.dist(b);
        let trim = (0.1 * len).max(3.0);
        let run: Vec<Point2> = c
            .vertices()
            .iter()
            .filter(|p| {
                let t = p.sub(a).dot(chord.direction);
                chord.distance(**p) <= 1.5 && t >= trim && t <= len - trim
            })
            .cloned()
            .collect();
        if run.len() < 5 {
            return Some(chord);
        }
        fit_line_tls(&run).ok()
    };
    let lines: Vec<Option<Line2>> = (0..3).map(|i| side_line(corners[i], corners[(i + 1) % 3])).collect();
    let mut out = corners;
    for i in 0..3 {
        // corner i sits between side (i-1, i) and side (i, i+1)
        let prev = &lines[(i + 2) % 3];
        let next = &lines[i];
        if let (Some(p), Some(n)) = (prev, next) {
            if let Some(x) = p.intersect(n) {
                if x.dist(corners[i]) <= 5.0 {
                    out[i] = x;
                }
            }
        }
    }
    out
}

/// Perpendicular of the medial direction that points toward image bottom.
pub fn inferior_direction(medial: Vec2) -> Vec2 {
    let p = medial.perp();
    if p.y > 0.0 || (p.y == 0.0 && p.x > 0.0) {
        p
    } else {
        p.neg()
    }
}

pub fn classify_corners(tri: [Point2; 3], side: Side, medial_direction: Vec2) -> Result<SideLandmarks, XrayFailure> {
    let medial = medial_direction.normalized().ok_or_else(|| XrayFailure::Missing("zero medial direction".into()))?;
    let score = |p: Point2| p.x * medial.x + p.y * medial.y;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| score(tri[b]).total_cmp(&score(tri[a])));
    let gap = score(tri[order[0]]) - score(tri[order[1]]);
    if gap < AMBIGUITY_MARGIN_PX {
        return Err(XrayFailure::AmbiguousCorners(gap));
    }
    let inner = tri[order[0]];
    let down = inferior_direction(medial);
    let (p, q) = (tri[order[1]], tri[order[2]]);
    let (h_point, outer) = if q.sub(p).dot(down) > 0.0 { (q, p) } else { (p, q) };
    Ok(SideLandmarks { side, inner, outer, h_point })
}

pub fn pelvis_construction(left: &SideLandmarks, right: &SideLandmarks) -> Result<PelvisConstruction, XrayFailure> {
    let hilgenreiner = Line2::through(left.inner, right.inner)
        .map_err(|_| XrayFailure::Missing("inner points coincide; Hilgenreiner line undefined".into()))?;
    let lateral_left = hilgenreiner.direction.neg();
    let lateral_right = hilgenreiner.direction;
    let inferior = inferior_direction(hilgenreiner.direction);
    let perkin_left = hilgenreiner.perpendicular_through(left.outer);
    let perkin_right = hilgenreiner.perpendicular_through(right.outer);
    let diag = |outer: Point2, lateral: Vec2| Line2 {
        anchor: hilgenreiner.project(outer),
        direction: lateral.add(inferior).scale(std::f64::consts::FRAC_1_SQRT_2),
    };
    Ok(PelvisConstruction {
        hilgenreiner,
        perkin_left,
        perkin_right,
        diagonal_left: diag(left.outer, lateral_left),
        diagonal_right: diag(right.outer, lateral_right),
        inferior,
        lateral_left,
        lateral_right,
    })
}

/// Acute angle between Hilgenreiner's line and the inner→outer roof line.
pub fn acetabular_index(lm: &SideLandmarks, h_line: &Line2) -> f64 {
    match Line2::through(lm.inner, lm.outer) {
        Ok(roof) => angle_between_deg(h_line, &roof),
        Err(_) => 0.0,
    }
}

/// Angle at the h point between the perpendicular to Hilgenreiner's line and
/// the line to the outer corner; positive when the outer corner is lateral.
pub fn wiberg_angle(lm: &SideLandmarks, h_line: &Line2) -> f64 {
    let t = h_line.direction;
    let lateral = if lm.outer.sub(lm.inner).dot(t) >= 0.0 { t } else { t.neg() };
    let v = lm.outer.sub(lm.h_point);
    let lat = v.dot(lateral);
    let vert = v.dot(t.perp());
    let angle = lat.abs().atan2(vert.abs()).to_degrees();
    if lat >= 0.0 {
        angle
    } else {
        -angle
    }
}

/// Position of the h point in this side's (lateral, inferior) frame anchored
/// at the Hilgenreiner/Perkin intersection.
pub fn ihdi_coordinates(h: Point2, side: Side, pc: &PelvisConstruction) -> (f64, f64) {
    let origin = pc.diagonal(side).anchor;
    let d = h.sub(origin);
    (d.dot(pc.lateral(side)), d.dot(pc.inferior))
}

/// IHDI grade 1–4. Boundary points take the lower grade.
pub fn ihdi_grade(lm: &SideLandmarks, pc: &PelvisConstruction) -> u8 {
    let (lateral, inferior) = ihdi_coordinates(lm.h_point, lm.side, pc);
    if lateral <= 0.0 {
        1
    } else if inferior < 0.0 {
        4
    } else if lateral <= inferior {
        2
    } else {
        3
    }
}

fn side_triangle(mask: &LabelMask, label: u8, cfg: &XrayConfig) -> Result<[Point2; 3], XrayFailure> {
    let bits =
        largest_component(&select_label(mask, label)).map_err(|_| XrayFailure::Missing(format!("triangle label {label} is empty")))?;
    let contour = trace_contour(&bits).map_err(|e| XrayFailure::Missing(e.to_string()))?;
    let corners = triangle_corners(&contour)?;
    Ok(if cfg.refine_corners { refine_triangle_corners(&contour, corners) } else { corners })
}

/// Full X-ray pipeline. Never fails: content problems become status 0.
pub fn analyze_xray(mask: &LabelMask, labels: XrayLabels, cfg: &XrayConfig) -> XrayAnalysis {
    let mut out = XrayAnalysis {
        measurements: XrayMeasurements { left: SideMeasurements::failed(), right: SideMeasurements::failed() },
        left: None,
        right: None,
        triangles: [None, None],
        construction: None,
        messages: Vec::new(),
    };
    let mut tris = [None, None];
    for (i, side) in Side::BOTH.into_iter().enumerate() {
        match side_triangle(mask, labels.label(side), cfg) {
            Ok(t) => tris[i] = Some(t),
            Err(e) => out.messages.push(format!("{}: {e}", side.name())),
        }
    }
    out.triangles = tris;
    let (Some(lt), Some(rt)) = (tris[0], tris[1]) else {
        out.messages.push("Hilgenreiner line needs both inner points".into());
        return out;
    };
    let (lc, rc) = (centroid(&lt).expect("3 points"), centroid(&rt).expect("3 points"));
    let left = classify_corners(lt, Side::Left, rc.sub(lc));
    let right = classify_corners(rt, Side::Right, lc.sub(rc));
    let (left, right) = match (left, right) {
        (Ok(l), Ok(r)) => (l, r),
        (l, r) => {
            for (side, res) in [(Side::Left, l), (Side::Right, r)] {
                match res {
                    Ok(lm) => match side {
                        Side::Left => out.left = Some(lm),
                        Side::Right => out.right = Some(lm),
                    },
                    Err(e) => out.messages.push(format!("{}: {e}", side.name())),
                }
            }
            out.messages.push("Hilgenreiner line needs both inner points".into());
            return out;
        }
    };
    let pc = match pelvis_construction(&left, &right) {
        Ok(pc) => pc,
        Err(e) => {
            out.messages.push(e.to_string());
            return out;
        }
    };
    for lm in [&left, &right] {
        let m = SideMeasurements {
            acetabular_index_deg: Some(acetabular_index(lm, &pc.hilgenreiner)),
            wiberg_deg: Some(wiberg_angle(lm, &pc.hilgenreiner)),
            ihdi_grade: Some(ihdi_grade(lm, &pc)),
            status: 1,
            experimental: true,
        };
        match lm.side {
            Side::Left => out.measurements.left = m,
            Side::Right => out.measurements.right = m,
        }
    }
    out.left = Some(left);
    out.right = Some(right);
    out.construction = Some(pc);
    out
}
