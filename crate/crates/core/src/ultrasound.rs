//! Ultrasound measurements: five landmarks, alpha angle and femoral-head
//! coverage from an ilium/acetabulum mask and a femoral-head mask.
//!
//! The ilium and acetabular roof form one structure whose traced contour
//! bends at the bony rim. The rim is the sharpest convex corner; the most
//! concave vertex marks the opposite side of the bend. Splitting the contour
//! at those two vertices yields two branches, and the one nearer the femoral
//! head is the acetabular branch. Each branch's outer edge is the supporting
//! line through the rim, refined by a total-least-squares fit of the contour
//! run lying on it. The refined rim is the intersection of the two edges.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_between_deg, centroid, fit_circle, fit_line_tls, signed_distance, Circle2, Contour, Line2, Point2, Vec2};
use crate::raster::{largest_component, most_concave_vertex, select_label, strongest_corner, trace_contour, LabelMask};

pub const MIN_RESOLUTION: usize = 128;
const MIN_CONTOUR_VERTICES: usize = 15;
const MIN_BRANCH_ANGLE_DEG: f64 = 10.0;
const MIN_APEX_DEPTH_PX: f64 = 2.0;
const MIN_CONCAVE_TURN_DEG: f64 = 10.0;
/// Vertices within this band of a supporting line count as its edge run.
const EDGE_BAND_PX: f64 = 2.0;
const REFIT_BAND_PX: f64 = 1.5;
/// Fallback apex: centroid of acetabular vertices this close to the maximal depth.
const APEX_BAND_PX: f64 = 1.0;
/// Depth band over which the roof bottom is fitted with a parabola.
const APEX_FIT_BAND_PX: f64 = 3.0;

#[derive(Debug, Error)]
pub enum UsError {
    #[error("mask is {width}x{height}; ultrasound analysis needs at least {MIN_RESOLUTION}x{MIN_RESOLUTION}")]
    ResolutionTooSmall { width: usize, height: usize },
}

/// Content failure; the pipeline reports it as status 0.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("landmark failure: {0}")]
pub struct LandmarkFailure(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, LandmarkFailure> {
    Err(LandmarkFailure(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoofLine {
    /// Two-point line from the rim to the apex.
    #[default]
    RimApex,
    /// Least-squares fit of the acetabular outer edge.
    BranchFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Fraction of the head diameter on the deep side of the baseline.
    #[default]
    Diameter,
    /// Fraction of the head disk area on the deep side.
    Area,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsLabels {
    pub ilium: u8,
    pub femoral_head: u8,
}

impl Default for UsLabels {
    fn default() -> Self {
        Self { ilium: 1, femoral_head: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsConfig {
    pub curvature_window: usize,
    pub roof_line: RoofLine,
    pub coverage_mode: CoverageMode,
    pub graf_class: bool,
}

impl Default for UsConfig {
    fn default() -> Self {
        Self { curvature_window: 7, roof_line: RoofLine::RimApex, coverage_mode: CoverageMode::Diameter, graf_class: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsLandmarks {
    pub baseline_superior: Point2,
    pub rim: Point2,
    pub apex: Point2,
    pub head_center: Point2,
    pub head_lateral: Point2,
    pub head_radius: f64,
}

/// Landmarks plus the lines they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct UsDerivation {
    pub landmarks: UsLandmarks,
    pub baseline: Line2,
    /// Unit normal of the baseline pointing into the acetabulum.
    pub deep_normal: Vec2,
    pub acetabular_edge: Line2,
    pub rim_vertex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrafClass {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "IIa/b")]
    IIab,
    #[serde(rename = "IIc/D")]
    IIcD,
    #[serde(rename = "III/IV")]
    IIIIV,
}

impl GrafClass {
    /// Standard Graf alpha cut-offs: 60, 50, 43 degrees.
    pub fn from_alpha(alpha_deg: f64) -> Self {
        if alpha_deg >= 60.0 {
            Self::I
        } else if alpha_deg >= 50.0 {
            Self::IIab
        } else if alpha_deg >= 43.0 {
            Self::IIcD
        } else {
            Self::IIIIV
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::IIab => "IIa/b",
            Self::IIcD => "IIc/D",
            Self::IIIIV => "III/IV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsMeasurements {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graf_class: Option<GrafClass>,
    pub status: u8,
    pub experimental: bool,
}

impl UsMeasurements {
    fn failed() -> Self {
        Self { alpha_deg: None, coverage: None, graf_class: None, status: 0, experimental: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsAnalysis {
    pub measurements: UsMeasurements,
    pub derivation: Option<UsDerivation>,
    pub head: Option<Circle2>,
    pub message: Option<String>,
}

impl UsAnalysis {
    pub fn landmarks(&self) -> Option<&UsLandmarks> {
        self.derivation.as_ref().map(|d| &d.landmarks)
    }

    fn failure(msg: impl Into<String>) -> Self {
        Self { measurements: UsMeasurements::failed(), derivation: None, head: None, message: Some(msg.into()) }
    }
}

/// Branch of the contour starting at the rim and walking in one direction
/// until the concave junction (inclusive).
fn branch(c: &Contour, from: usize, to: usize, forward: bool) -> Vec<Point2> {
    let n = c.len();
    let mut out = Vec::new();
    let mut i = from;
    loop {
        out.push(c.vertices()[i]);
        if i == to {
            break;
        }
        i = if forward { (i + 1) % n } else { (i + n - 1) % n };
    }
    out
}

/// Outer edge of a branch: the supporting line through `rim` on the side
/// facing away from `other`, refitted to the contour run lying on it.
fn outer_edge(points: &[Point2], rim: Point2, other: Point2) -> Result<Line2, LandmarkFailure> {
    let rough = fit_line_tls(points).map_err(|e| LandmarkFailure(format!("branch fit: {e}")))?;
    let mut t = rough.direction;
    let mean_ahead: f64 = points.iter().map(|p| p.sub(rim).dot(t)).sum();
    if mean_ahead < 0.0 {
        t = t.neg();
    }
    let own = centroid(points).expect("non-empty branch");
    let mut outward = t.perp();
    if outward.dot(other.sub(own)) > 0.0 {
        outward = outward.neg();
    }
    let pmax = points.iter().map(|p| p.sub(rim).dot(t)).fold(0.0, f64::max);
    let support = points
        .iter()
        .filter_map(|p| {
            let d = p.sub(rim);
            let along = d.dot(t);
            (along >= 0.4 * pmax && along > 0.0).then(|| (*p, d.dot(outward) / along))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p);
    let Some(support) = support else {
        return fail("branch has no extent beyond the rim");
    };
    let line = Line2::through(rim, support).map_err(|e| LandmarkFailure(e.to_string()))?;
    let run = edge_run(points, &line, rim, t, EDGE_BAND_PX);
    if run.len() < 5 {
        return fail("outer edge run too short");
    }
    fit_line_tls(&run).map_err(|e| LandmarkFailure(e.to_string()))
}

fn edge_run(points: &[Point2], line: &Line2, rim: Point2, ahead: Vec2, band: f64) -> Vec<Point2> {
    points.iter().filter(|p| line.distance(**p) <= band && p.sub(rim).dot(ahead) >= -1.0).cloned().collect()
}

fn refit(points: &[Point2], line: &Line2, rim: Point2) -> Result<Line2, LandmarkFailure> {
    let mut ahead = line.direction;
    if points.iter().map(|p| p.sub(rim).dot(ahead)).sum::<f64>() < 0.0 {
        ahead = ahead.neg();
    }
    let run = edge_run(points, line, rim, ahead, REFIT_BAND_PX);
    if run.len() < 5 {
        return Ok(*line);
    }
    fit_line_tls(&run).map_err(|e| LandmarkFailure(e.to_string()))
}

fn intersect(a: &Line2, b: &Line2) -> Result<Point2, LandmarkFailure> {
    if angle_between_deg(a, b) < MIN_BRANCH_ANGLE_DEG {
        return fail(format!("ilium and acetabular branches differ by {:.1} deg (< {MIN_BRANCH_ANGLE_DEG})", angle_between_deg(a, b)));
    }
    a.intersect(b).ok_or_else(|| LandmarkFailure("parallel branch edges".into()))
}

/// Least-squares parabola v = a u^2 + b u + c, returned as (a, b, c).
fn fit_parabola(uv: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(u, v) in uv {
        let basis = [u * u, u, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * v;
        }
    }
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(m);
    if d.abs() < 1e-12 * m[0][0].max(1.0).powi(2) {
        return None;
    }
    let solve = |col: usize| {
        let mut a = m;
        for i in 0..3 {
            a[i][col] = r[i];
        }
        det3(a) / d
    };
    Some((solve(0), solve(1), solve(2)))
}

/// Deepest point of the roof: the vertex of a parabola fitted to depth
/// against lateral position over the bottom band. Pixel rows make a plain
/// band centroid wander laterally by a pixel or more; the fit does not.
/// Falls back to the centroid when the band has no clean maximum.
fn roof_apex(points: &[Point2], rim: Point2, deep: Vec2, max_depth: f64) -> Point2 {
    let lateral = deep.perp();
    let local = |p: &Point2| {
        let d = p.sub(rim);
        (d.dot(lateral), d.dot(deep))
    };
    let band: Vec<(f64, f64)> = points.iter().map(local).filter(|(_, v)| *v >= max_depth - APEX_FIT_BAND_PX).collect();
    if band.len() >= 5 {
        let u0 = band.iter().map(|b| b.0).sum::<f64>() / band.len() as f64;
        let centred: Vec<(f64, f64)> = band.iter().map(|(u, v)| (u - u0, *v)).collect();
        let (lo, hi) = centred.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (u, _)| (lo.min(*u), hi.max(*u)));
        if let Some((a, b, c)) = fit_parabola(&centred) {
            let u = -b / (2.0 * a);
            if a < 0.0 && u > lo && u < hi {
                let v = c - b * b / (4.0 * a);
                return rim.offset(lateral.scale(u + u0)).offset(deep.scale(v));
            }
        }
    }
    let deepest: Vec<Point2> = points.iter().filter(|p| local(p).1 >= max_depth - APEX_BAND_PX).cloned().collect();
    centroid(&deepest).expect("at least the deepest vertex")
}

pub fn derive_us_landmarks(ilium: &Contour, head: &Circle2, cfg: &UsConfig) -> Result<UsDerivation, LandmarkFailure> {
    if ilium.len() < MIN_CONTOUR_VERTICES {
        return fail(format!("ilium contour has {} vertices (< {MIN_CONTOUR_VERTICES})", ilium.len()));
    }
    let w = cfg.curvature_window;
    let rim_idx = strongest_corner(ilium, w).map_err(|e| LandmarkFailure(e.to_string()))?;
    let (concave_idx, concave_turn) = most_concave_vertex(ilium, w).map_err(|e| LandmarkFailure(e.to_string()))?;
    if concave_turn > -MIN_CONCAVE_TURN_DEG {
        return fail("contour has no concave junction between ilium and acetabular roof");
    }
    let fwd = branch(ilium, rim_idx, concave_idx, true);
    let bwd = branch(ilium, rim_idx, concave_idx, false);
    if fwd.len() < 3 || bwd.len() < 3 {
        return fail("rim and concave junction are adjacent");
    }
    let cf = centroid(&fwd).expect("non-empty");
    let cb = centroid(&bwd).expect("non-empty");
    // The head sits in the angle opened by the roof, so the acetabular branch
    // is the one whose direction from the rim is closer to the head's.
    let rim_v = ilium.vertices()[rim_idx];
    let facing = |c: Point2| {
        let (d, h) = (c.sub(rim_v), head.center.sub(rim_v));
        d.dot(h) / (d.norm() * h.norm()).max(f64::MIN_POSITIVE)
    };
    let (ilium_pts, acet_pts, ilium_c, acet_c) = if facing(cf) > facing(cb) { (bwd, fwd, cb, cf) } else { (fwd, bwd, cf, cb) };

    let rim0 = rim_v;
    let base0 = outer_edge(&ilium_pts, rim0, acet_c)?;
    let edge0 = outer_edge(&acet_pts, rim0, ilium_c)?;
    let rim1 = intersect(&base0, &edge0)?;
    let baseline = refit(&ilium_pts, &base0, rim1)?;
    let acetabular_edge = refit(&acet_pts, &edge0, rim1)?;
    let rim = intersect(&baseline, &acetabular_edge)?;
    let baseline = Line2 { anchor: rim, direction: baseline.direction };
    let acetabular_edge = Line2 { anchor: rim, direction: acetabular_edge.direction };

    let mut deep = baseline.normal();
    if deep.dot(acet_c.sub(rim)) < 0.0 {
        deep = deep.neg();
    }
    let depth = |p: &Point2| p.sub(rim).dot(deep);
    let max_depth = acet_pts.iter().map(depth).fold(f64::NEG_INFINITY, f64::max);
    if max_depth < MIN_APEX_DEPTH_PX {
        return fail(format!("apex depth {max_depth:.2} px (< {MIN_APEX_DEPTH_PX})"));
    }
    let apex = roof_apex(&acet_pts, rim, deep, max_depth);

    // Superior end: the far end of the baseline run, projected onto the line.
    let mut along = baseline.direction;
    if along.dot(ilium_c.sub(rim)) < 0.0 {
        along = along.neg();
    }
    let far = ilium_pts
        .iter()
        .filter(|p| baseline.distance(**p) <= REFIT_BAND_PX)
        .max_by(|a, b| a.sub(rim).dot(along).total_cmp(&b.sub(rim).dot(along)))
        .cloned()
        .ok_or_else(|| LandmarkFailure("empty baseline run".into()))?;
    let baseline_superior = baseline.project(far);
    if baseline_superior.dist(rim) < 1.0 {
        return fail("baseline run collapses onto the rim");
    }

    Ok(UsDerivation {
        landmarks: UsLandmarks {
            baseline_superior,
            rim,
            apex,
            head_center: head.center,
            head_lateral: head.center.offset(deep.scale(-head.radius)),
            head_radius: head.radius,
        },
        baseline,
        deep_normal: deep,
        acetabular_edge,
        rim_vertex: rim_idx,
    })
}

/// Acute angle between the baseline (superior point to rim) and the bony
/// roof line (rim to apex).
pub fn alpha_angle(lm: &UsLandmarks) -> f64 {
    match (Line2::through(lm.baseline_superior, lm.rim), Line2::through(lm.rim, lm.apex)) {
        (Ok(b), Ok(r)) => angle_between_deg(&b, &r),
        _ => 0.0,
    }
}

/// Diameter fraction of the head on the deep side of the baseline.
pub fn coverage(head: &Circle2, baseline: &Line2, acetabular_normal: Vec2) -> f64 {
    let s = signed_distance(head.center, baseline, acetabular_normal).unwrap_or(0.0);
    ((head.radius + s) / (2.0 * head.radius)).clamp(0.0, 1.0)
}

/// Area fraction of the head disk on the deep side of the baseline.
pub fn coverage_area(head: &Circle2, baseline: &Line2, acetabular_normal: Vec2) -> f64 {
    let r = head.radius;
    let s = signed_distance(head.center, baseline, acetabular_normal).unwrap_or(0.0).clamp(-r, r);
    // Shallow-side part is a circular segment of height r - s.
    let shallow = r * r * (s / r).acos() - s * (r * r - s * s).max(0.0).sqrt();
    (1.0 - shallow / (std::f64::consts::PI * r * r)).clamp(0.0, 1.0)
}

/// Full ultrasound pipeline. Content problems come back as status 0; only
/// unusable inputs are errors.
pub fn analyze_us(mask: &LabelMask, labels: UsLabels, cfg: &UsConfig) -> Result<UsAnalysis, UsError> {
    if mask.width() < MIN_RESOLUTION || mask.height() < MIN_RESOLUTION {
        return Err(UsError::ResolutionTooSmall { width: mask.width(), height: mask.height() });
    }
    let contour_of = |label: u8, name: &str| -> Result<Contour, String> {
        let bits = largest_component(&select_label(mask, label)).map_err(|_| format!("{name} label {label} is empty"))?;
        trace_contour(&bits).map_err(|e| format!("{name}: {e}"))
    };
    let ilium = match contour_of(labels.ilium, "ilium/acetabulum") {
        Ok(c) => c,
        Err(m) => return Ok(UsAnalysis::failure(m)),
    };
    let head_contour = match contour_of(labels.femoral_head, "femoral head") {
        Ok(c) => c,
        Err(m) => return Ok(UsAnalysis::failure(m)),
    };
    let head = match fit_circle(head_contour.vertices()) {
        Ok(h) => h,
        Err(e) => return Ok(UsAnalysis::failure(format!("femoral head circle fit: {e}"))),
    };
    let derivation = match derive_us_landmarks(&ilium, &head, cfg) {
        Ok(d) => d,
        Err(e) => {
            let mut a = UsAnalysis::failure(e.0);
            a.head = Some(head);
            return Ok(a);
        }
    };
    let alpha = match cfg.roof_line {
        RoofLine::RimApex => alpha_angle(&derivation.landmarks),
        RoofLine::BranchFit => angle_between_deg(&derivation.baseline, &derivation.acetabular_edge),
    };
    if !(alpha > 0.0 && alpha <= 90.0) {
        let mut a = UsAnalysis::failure(format!("alpha angle {alpha:.3} outside (0, 90]"));
        a.head = Some(head);
        return Ok(a);
    }
    let cov = match cfg.coverage_mode {
        CoverageMode::Diameter => coverage(&head, &derivation.baseline, derivation.deep_normal),
        CoverageMode::Area => coverage_area(&head, &derivation.baseline, derivation.deep_normal),
    };
    Ok(UsAnalysis {
        measurements: UsMeasurements {
            alpha_deg: Some(alpha),
            coverage: Some(cov),
            graf_class: cfg.graf_class.then(|| GrafClass::from_alpha(alpha)),
            status: 1,
            experimental: true,
        },
        derivation: Some(derivation),
        head: Some(head),
        message: None,
    })
}
