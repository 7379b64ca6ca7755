//! Synthetic masks with exactly known geometry.
//!
//! Shapes are built in a local frame, rotated, centred in the image and
//! rasterised by scanline fill: a pixel belongs to a polygon when its centre
//! `(x, y)` lies inside (even-odd rule, half-open on the right edge).
//!
//! Ultrasound local frame: `u` runs along the ilium's outer edge from the rim
//! (origin) toward the superior end, `n` points deep into the joint.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Line2, Point2, Vec2};
use crate::raster::LabelMask;
use crate::ultrasound::{UsLabels, UsLandmarks};
use crate::xray::{acetabular_index, ihdi_coordinates, ihdi_grade, pelvis_construction, wiberg_angle, Side, SideLandmarks, XrayLabels};

pub const MARGIN_PX: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhantomError {
    #[error("phantom does not fit the image with a {MARGIN_PX} px margin: {0}")]
    SpecOutOfBounds(String),
    #[error("infeasible phantom spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
}

/// Fills a closed polygon into `mask` with `label`.
pub fn fill_polygon(mask: &mut LabelMask, poly: &[Point2], label: u8) {
    let n = poly.len();
    if n < 3 {
        return;
    }
    let (ymin, ymax) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let y0 = ymin.ceil().max(0.0) as usize;
    let y1 = (ymax.floor().min(mask.height() as f64 - 1.0)).max(-1.0);
    if y1 < 0.0 {
        return;
    }
    let mut xs: Vec<f64> = Vec::new();
    for y in y0..=y1 as usize {
        let yc = y as f64;
        xs.clear();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y) {
                xs.push(a.x + (yc - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = pair[0].ceil().max(0.0);
            let end = (pair[1].ceil() - 1.0).min(mask.width() as f64 - 1.0);
            if end < start {
                continue;
            }
            for x in start as usize..=end as usize {
                mask.set(x, y, label);
            }
        }
    }
}

fn arc(center: Point2, radius: f64, from: f64, sweep: f64, out: &mut Vec<Point2>) {
    // Interior samples only; the endpoints are emitted by the caller.
    let steps = ((sweep.abs() * radius).ceil() as usize).max(8);
    for k in 1..steps {
        let t = from + sweep * k as f64 / steps as f64;
        out.push(Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin()));
    }
}

fn circle_polygon(c: Point2, r: f64) -> Vec<Point2> {
    let n = ((2.0 * PI * r).ceil() as usize).max(64);
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Point2::new(c.x + r * t.cos(), c.y + r * t.sin())
        })
        .collect()
}

fn jitter(poly: &mut [Point2], amount: f64, rng: &mut ChaCha8Rng) {
    if amount <= 0.0 {
        return;
    }
    for p in poly {
        p.x += rng.random_range(-amount..=amount);
        p.y += rng.random_range(-amount..=amount);
    }
}

/// Rotation about the local origin followed by a translation that centres
/// the bounding box (plus `offset`) in a square image.
struct Placement {
    rotation: f64,
    shift: Vec2,
}

impl Placement {
    fn fit(points: &[Point2], circles: &[(Point2, f64)], rotation_deg: f64, size: usize, offset: [f64; 2]) -> Result<Self, PhantomError> {
        let rotation = rotation_deg.to_radians();
        let rot = |p: Point2| {
            let v = Vec2::new(p.x, p.y).rotate(rotation);
            Point2::new(v.x, v.y)
        };
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |p: Point2, r: f64| {
            lo.x = lo.x.min(p.x - r);
            lo.y = lo.y.min(p.y - r);
            hi.x = hi.x.max(p.x + r);
            hi.y = hi.y.max(p.y + r);
        };
        for p in points {
            grow(rot(*p), 0.0);
        }
        for (c, r) in circles {
            grow(rot(*c), *r);
        }
        let mid = (size as f64 - 1.0) / 2.0;
        let shift = Vec2::new(mid - (lo.x + hi.x) / 2.0 + offset[0], mid - (lo.y + hi.y) / 2.0 + offset[1]);
        let (x0, y0, x1, y1) = (lo.x + shift.x, lo.y + shift.y, hi.x + shift.x, hi.y + shift.y);
        let limit = size as f64 - 1.0 - MARGIN_PX;
        if x0 < MARGIN_PX || y0 < MARGIN_PX || x1 > limit || y1 > limit {
            return Err(PhantomError::SpecOutOfBounds(format!("extent [{x0:.1}, {x1:.1}] x [{y0:.1}, {y1:.1}] in a {size} px image")));
        }
        Ok(Self { rotation, shift })
    }

    fn apply(&self, p: Point2) -> Point2 {
        let v = Vec2::new(p.x, p.y).rotate(self.rotation);
        Point2::new(v.x + self.shift.x, v.y + self.shift.y)
    }
}

fn default_image_size() -> usize {
    512
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsPhantomSpec {
    pub alpha_deg: f64,
    pub coverage: f64,
    pub head_radius: f64,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default)]
    pub rotation_deg: f64,
    /// Extra translation of the whole construction, in pixels.
    #[serde(default)]
    pub offset: [f64; 2],
    /// Uniform boundary jitter amplitude (0 = noise-free).
    #[serde(default)]
    pub jitter_px: f64,
    #[serde(default)]
    pub seed: u64,
}

impl UsPhantomSpec {
    pub fn new(alpha_deg: f64, coverage: f64) -> Self {
        Self { alpha_deg, coverage, head_radius: 48.0, image_size: 512, rotation_deg: 0.0, offset: [0.0, 0.0], jitter_px: 0.0, seed: 0 }
    }

    /// Random noise-free spec in the ranges used for round-trip testing.
    pub fn random(rng: &mut impl Rng, image_size: usize) -> Self {
        let mut s = Self::new(rng.random_range(40.0..=75.0), rng.random_range(0.2..=0.9));
        s.image_size = image_size;
        s.head_radius = image_size as f64 * 0.09375;
        s.rotation_deg = rng.random_range(-30.0..=30.0);
        s.seed = rng.random();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsTruth {
    pub spec: UsPhantomSpec,
    pub labels: UsLabels,
    pub landmarks: UsLandmarks,
    pub alpha_deg: f64,
    pub coverage: f64,
    pub coverage_area: f64,
}

pub fn gen_us_phantom(spec: &UsPhantomSpec) -> Result<(LabelMask, UsTruth), PhantomError> {
    if !(35.0..=80.0).contains(&spec.alpha_deg) {
        return Err(PhantomError::InvalidSpec(format!("alpha_deg {} outside [35, 80]", spec.alpha_deg)));
    }
    if !(0.1..=0.95).contains(&spec.coverage) {
        return Err(PhantomError::InvalidSpec(format!("coverage {} outside [0.1, 0.95]", spec.coverage)));
    }
    if !(spec.head_radius.is_finite() && spec.head_radius >= 8.0) {
        return Err(PhantomError::InvalidSpec(format!("head_radius {} below 8 px", spec.head_radius)));
    }
    let r = spec.head_radius;
    // ilium half-thickness, limb tip radius
    let (rho_il, rho) = (0.5 * r, 0.375 * r);
    let (l_il, l_limb) = (2.5 * r, 4.0 * r);
    let alpha = spec.alpha_deg.to_radians();
    let origin = Point2::new(0.0, 0.0);

    let apex = Point2::new(-l_limb * alpha.cos(), l_limb * alpha.sin());
    let cap = Point2::new(apex.x, apex.y - rho);
    // Tangent from the rim to the limb cap on the side facing the head.
    let to_cap = cap.sub(origin);
    let d = to_cap.norm();
    let beta = (rho / d).asin();
    let phi = to_cap.y.atan2(to_cap.x);
    let u_axis = Vec2::new(1.0, 0.0);
    let (edge, ext) = [phi + beta, phi - beta]
        .into_iter()
        .map(|a| {
            let e = Vec2::new(a.cos(), a.sin());
            let m = if e.perp().dot(to_cap) < 0.0 { e.perp() } else { e.perp().neg() };
            (e, m)
        })
        .find(|(_, m)| m.dot(u_axis) < 0.0)
        .expect("one tangent has the head on its far side");
    let t1 = cap.offset(ext.scale(rho));
    let t2 = cap.offset(ext.scale(-rho));
    let inner_edge = Line2 { anchor: t2, direction: edge };
    let floor = Line2 { anchor: Point2::new(0.0, 2.0 * rho_il), direction: u_axis };
    let concave = inner_edge.intersect(&floor).ok_or_else(|| PhantomError::InfeasibleSpec("limb parallel to the ilium".into()))?;

    let mut bone = vec![origin, Point2::new(l_il, 0.0)];
    arc(Point2::new(l_il, rho_il), rho_il, -PI / 2.0, PI, &mut bone);
    bone.push(Point2::new(l_il, 2.0 * rho_il));
    bone.push(concave);
    bone.push(t2);
    let from = (-ext.y).atan2(-ext.x);
    let sweep = if ext.neg().perp().dot(edge) > 0.0 { PI } else { -PI };
    arc(cap, rho, from, sweep, &mut bone);
    bone.push(t1);

    let gap = (0.08 * r).max(3.0);
    let depth = r * (2.0 * spec.coverage - 1.0);
    let mut along = (r + gap - depth * ext.y) / ext.x;
    if Point2::new(along, depth).dist(origin) < r + gap {
        along = -((r + gap).powi(2) - depth * depth).max(0.0).sqrt();
    }
    let head = Point2::new(along, depth);

    let place = Placement::fit(&bone, &[(head, r)], spec.rotation_deg, spec.image_size, spec.offset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut bone_img: Vec<Point2> = bone.iter().map(|p| place.apply(*p)).collect();
    let head_img = place.apply(head);
    let mut head_poly = circle_polygon(head_img, r);
    jitter(&mut bone_img, spec.jitter_px, &mut rng);
    jitter(&mut head_poly, spec.jitter_px, &mut rng);

    let labels = UsLabels::default();
    let mut mask = LabelMask::zeros(spec.image_size, spec.image_size);
    fill_polygon(&mut mask, &bone_img, labels.ilium);
    fill_polygon(&mut mask, &head_poly, labels.femoral_head);

    let landmarks = UsLandmarks {
        baseline_superior: place.apply(Point2::new(l_il, 0.0)),
        rim: place.apply(origin),
        apex: place.apply(apex),
        head_center: head_img,
        head_lateral: place.apply(Point2::new(head.x, head.y - r)),
        head_radius: r,
    };
    let s = depth.clamp(-r, r);
    let coverage = ((r + s) / (2.0 * r)).clamp(0.0, 1.0);
    let coverage_area = 1.0 - (r * r * (s / r).acos() - s * (r * r - s * s).sqrt()) / (PI * r * r);
    Ok((mask, UsTruth { spec: *spec, labels, landmarks, alpha_deg: spec.alpha_deg, coverage, coverage_area }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XraySideSpec {
    pub acetabular_index_deg: f64,
    pub wiberg_deg: f64,
    pub ihdi_grade: u8,
}

impl XraySideSpec {
    pub fn new(acetabular_index_deg: f64, wiberg_deg: f64, ihdi_grade: u8) -> Self {
        Self { acetabular_index_deg, wiberg_deg, ihdi_grade }
    }
}

fn default_xray_size() -> usize {
    1024
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XrayPhantomSpec {
    pub left: XraySideSpec,
    pub right: XraySideSpec,
    /// Distance between the two inner points, in pixels.
    pub pelvis_span: f64,
    #[serde(default = "default_xray_size")]
    pub image_size: usize,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default)]
    pub offset: [f64; 2],
    #[serde(default)]
    pub jitter_px: f64,
    #[serde(default)]
    pub seed: u64,
}

impl XrayPhantomSpec {
    pub fn new(left: XraySideSpec, right: XraySideSpec) -> Self {
        Self { left, right, pelvis_span: 360.0, image_size: 1024, rotation_deg: 0.0, offset: [0.0, 0.0], jitter_px: 0.0, seed: 0 }
    }

    pub fn side(&self, side: Side) -> &XraySideSpec {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Random feasible spec: AI in [15, 35], Wiberg in [-10, 40], any grade
    /// the pair admits.
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let mut side = || {
                let grade = rng.random_range(1..=4u8);
                let wiberg = if grade == 1 { rng.random_range(5.0..=40.0) } else { rng.random_range(-10.0..=40.0) };
                XraySideSpec::new(rng.random_range(15.0..=35.0), wiberg, grade)
            };
            let (l, r) = (side(), side());
            let mut spec = Self::new(l, r);
            spec.rotation_deg = rng.random_range(-10.0..=10.0);
            spec.seed = rng.random();
            if Side::BOTH.iter().all(|s| side_geometry(spec.side(*s), *s, spec.pelvis_span).is_ok()) {
                return spec;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XraySideTruth {
    pub landmarks: SideLandmarks,
    pub acetabular_index_deg: f64,
    pub wiberg_deg: f64,
    pub ihdi_grade: u8,
    /// Distance of the h point from the nearest IHDI region boundary.
    pub boundary_distance_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrayTruth {
    pub spec: XrayPhantomSpec,
    pub labels: XrayLabels,
    pub left: XraySideTruth,
    pub right: XraySideTruth,
}

impl XrayTruth {
    pub fn side(&self, side: Side) -> &XraySideTruth {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Local corners (inner, outer, h) of one side. Hilgenreiner's line is
/// y = 0, patient left is image right, y points down.
fn side_geometry(spec: &XraySideSpec, side: Side, span: f64) -> Result<[Point2; 3], PhantomError> {
    if !(1..=4).contains(&spec.ihdi_grade) {
        return Err(PhantomError::InvalidSpec(format!("ihdi_grade {} outside 1..4", spec.ihdi_grade)));
    }
    if !(5.0..=45.0).contains(&spec.acetabular_index_deg) || !(-30.0..=60.0).contains(&spec.wiberg_deg) {
        return Err(PhantomError::InvalidSpec(format!(
            "acetabular index {} or Wiberg {} outside the supported range",
            spec.acetabular_index_deg, spec.wiberg_deg
        )));
    }
    let lat = if side == Side::Left { 1.0 } else { -1.0 };
    let ai = spec.acetabular_index_deg.to_radians();
    let w = spec.wiberg_deg.to_radians();
    let inner = Point2::new(lat * span / 2.0, 0.0);
    let roof = 0.42 * span;
    let outer = Point2::new(inner.x + lat * roof * ai.cos(), -roof * ai.sin());
    let (ox, oy) = (roof * ai.cos(), -roof * ai.sin()); // outer relative to inner, lateral-positive
    let margin = (0.015 * span).max(6.0);

    // h = outer + L (-sin w, cos w) in (lateral, inferior) coordinates.
    // Every requirement is linear in L: coef * L >= rhs.
    let a_coef = -w.sin(); // lateral offset from Perkin
    let b_coef = w.cos(); // depth below Hilgenreiner
    let mut cons: Vec<(f64, f64)> = vec![
        // inner stays the most medial corner
        (a_coef, margin.max(10.0) - ox),
        // h is clearly inferior to the outer corner
        (b_coef, margin),
    ];
    match spec.ihdi_grade {
        1 => {
            cons.push((-a_coef, margin));
            cons.push((b_coef, margin - oy));
        }
        2 => {
            cons.push((a_coef, margin));
            cons.push((b_coef, margin - oy));
            cons.push((b_coef - a_coef, margin * 2f64.sqrt() - oy));
        }
        3 => {
            cons.push((b_coef, margin - oy));
            cons.push((a_coef - b_coef, margin * 2f64.sqrt() + oy));
        }
        _ => {
            cons.push((a_coef, margin));
            cons.push((-b_coef, margin + oy));
        }
    }
    let (mut lo, mut hi) = (0.17 * span, 0.7 * span);
    for (c, rhs) in cons {
        if c.abs() < 1e-12 {
            if rhs > 0.0 {
                lo = f64::INFINITY;
            }
        } else if c > 0.0 {
            lo = lo.max(rhs / c);
        } else {
            hi = hi.min(rhs / c);
        }
    }
    if lo > hi {
        return Err(PhantomError::InfeasibleSpec(format!(
            "no h point realises Wiberg {}° with IHDI grade {} ({} side)",
            spec.wiberg_deg,
            spec.ihdi_grade,
            side.name()
        )));
    }
    let len = 0.5 * (lo + hi);
    let h = Point2::new(outer.x + lat * len * a_coef, oy + len * b_coef);
    // Keep the triangle well-formed for corner detection.
    let angles = [(inner, outer, h), (outer, h, inner), (h, inner, outer)].map(|(a, b, c)| {
        let (u, v) = (b.sub(a), c.sub(a));
        u.cross(v).abs().atan2(u.dot(v)).to_degrees()
    });
    if angles.iter().any(|a| *a < 10.0) {
        return Err(PhantomError::InfeasibleSpec(format!("triangle too thin (angles {:.1}/{:.1}/{:.1})", angles[0], angles[1], angles[2])));
    }
    Ok([inner, outer, h])
}

pub fn gen_xray_phantom(spec: &XrayPhantomSpec) -> Result<(LabelMask, XrayTruth), PhantomError> {
    if !(spec.pelvis_span.is_finite() && spec.pelvis_span >= 60.0) {
        return Err(PhantomError::InvalidSpec(format!("pelvis_span {} below 60 px", spec.pelvis_span)));
    }
    let left = side_geometry(&spec.left, Side::Left, spec.pelvis_span)?;
    let right = side_geometry(&spec.right, Side::Right, spec.pelvis_span)?;
    let all: Vec<Point2> = left.iter().chain(right.iter()).cloned().collect();
    let place = Placement::fit(&all, &[], spec.rotation_deg, spec.image_size, spec.offset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = XrayLabels::default();
    let mut mask = LabelMask::zeros(spec.image_size, spec.image_size);
    let mut lms = Vec::new();
    for (side, tri) in [(Side::Left, left), (Side::Right, right)] {
        let img = tri.map(|p| place.apply(p));
        let mut poly = img.to_vec();
        jitter(&mut poly, spec.jitter_px, &mut rng);
        fill_polygon(&mut mask, &poly, labels.label(side));
        lms.push(SideLandmarks { side, inner: img[0], outer: img[1], h_point: img[2] });
    }
    let pc = pelvis_construction(&lms[0], &lms[1]).map_err(|e| PhantomError::InfeasibleSpec(e.to_string()))?;
    let truth_side = |lm: &SideLandmarks| {
        let (a, b) = ihdi_coordinates(lm.h_point, lm.side, &pc);
        let boundary = if a <= 0.0 || b < 0.0 { a.abs().min(b.abs()) } else { a.abs().min(b.abs()).min((a - b).abs() / 2f64.sqrt()) };
        XraySideTruth {
            landmarks: *lm,
            acetabular_index_deg: acetabular_index(lm, &pc.hilgenreiner),
            wiberg_deg: wiberg_angle(lm, &pc.hilgenreiner),
            ihdi_grade: ihdi_grade(lm, &pc),
            boundary_distance_px: boundary,
        }
    };
    let truth = XrayTruth { spec: *spec, labels, left: truth_side(&lms[0]), right: truth_side(&lms[1]) };
    for side in Side::BOTH {
        if truth.side(side).ihdi_grade != spec.side(side).ihdi_grade {
            return Err(PhantomError::InfeasibleSpec(format!("{} h point landed outside the requested grade", side.name())));
        }
    }
    Ok((mask, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ultrasound::{analyze_us, UsConfig};
    use crate::xray::{analyze_xray, XrayConfig};

    #[test]
    fn fill_uses_pixel_centres() {
        let mut m = LabelMask::zeros(8, 8);
        let sq = [Point2::new(1.0, 1.0), Point2::new(4.0, 1.0), Point2::new(4.0, 3.0), Point2::new(1.0, 3.0)];
        fill_polygon(&mut m, &sq, 7);
        // rows 1..3 (half-open), columns 1..4 (half-open)
        let count = m.pixels().iter().filter(|v| **v == 7).count();
        assert_eq!(count, 6);
        assert_eq!(m.get(1, 1), 7);
        assert_eq!(m.get(4, 1), 0);
        assert_eq!(m.get(1, 3), 0);
    }

    #[test]
    fn us_truth_matches_spec() {
        let (_, t) = gen_us_phantom(&UsPhantomSpec::new(60.0, 0.55)).unwrap();
        assert!((crate::ultrasound::alpha_angle(&t.landmarks) - 60.0).abs() < 1e-9);
        assert!((t.coverage - 0.55).abs() < 1e-12);
        assert!((t.landmarks.head_radius - 48.0).abs() < 1e-12);
    }

    #[test]
    fn us_recovery_basic_and_rotated() {
        for rot in [0.0, 5.0, 30.0] {
            let mut spec = UsPhantomSpec::new(60.0, 0.5);
            spec.rotation_deg = rot;
            let (mask, truth) = gen_us_phantom(&spec).unwrap();
            let a = analyze_us(&mask, truth.labels, &UsConfig::default()).unwrap();
            assert_eq!(a.measurements.status, 1, "rotation {rot}: {:?}", a.message);
            assert!((a.measurements.alpha_deg.unwrap() - 60.0).abs() <= 1.5, "rotation {rot}: {:?}", a.measurements);
            assert!((a.measurements.coverage.unwrap() - 0.5).abs() <= 0.03);
            let lm = a.landmarks().unwrap();
            assert!(lm.rim.dist(truth.landmarks.rim) <= 3.0, "rim {:?} vs {:?}", lm.rim, truth.landmarks.rim);
            assert!(lm.apex.dist(truth.landmarks.apex) <= 3.0, "apex {:?} vs {:?}", lm.apex, truth.landmarks.apex);
        }
    }

    #[test]
    fn us_out_of_bounds() {
        let mut spec = UsPhantomSpec::new(35.0, 0.5);
        spec.head_radius = 120.0;
        assert!(matches!(gen_us_phantom(&spec), Err(PhantomError::SpecOutOfBounds(_))));
    }

    #[test]
    fn us_deterministic_per_seed() {
        let mut spec = UsPhantomSpec::new(55.0, 0.6);
        spec.jitter_px = 1.0;
        spec.seed = 9;
        let (a, _) = gen_us_phantom(&spec).unwrap();
        let (b, _) = gen_us_phantom(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 10;
        let (c, _) = gen_us_phantom(&spec).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn xray_recovery_grades_one() {
        let spec = XrayPhantomSpec::new(XraySideSpec::new(25.0, 30.0, 1), XraySideSpec::new(22.0, 30.0, 1));
        let (mask, truth) = gen_xray_phantom(&spec).unwrap();
        let a = analyze_xray(&mask, truth.labels, &XrayConfig::default());
        for side in Side::BOTH {
            let m = a.measurements.side(side);
            let t = truth.side(side);
            assert_eq!(m.status, 1, "{:?}", a.messages);
            assert!((m.acetabular_index_deg.unwrap() - spec.side(side).acetabular_index_deg).abs() <= 1.0, "{side:?} {m:?}");
            assert!((m.wiberg_deg.unwrap() - 30.0).abs() <= 1.0, "{side:?} {m:?}");
            assert_eq!(m.ihdi_grade, Some(1));
            assert!((t.acetabular_index_deg - spec.side(side).acetabular_index_deg).abs() < 1e-9);
            assert!((t.wiberg_deg - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn xray_grade_four_left_only() {
        let spec = XrayPhantomSpec::new(XraySideSpec::new(30.0, -10.0, 4), XraySideSpec::new(22.0, 25.0, 1));
        let (mask, _) = gen_xray_phantom(&spec).unwrap();
        let a = analyze_xray(&mask, XrayLabels::default(), &XrayConfig::default());
        assert_eq!(a.measurements.left.ihdi_grade, Some(4));
        assert_eq!(a.measurements.right.ihdi_grade, Some(1));
    }

    #[test]
    fn xray_infeasible_pair() {
        let spec = XrayPhantomSpec::new(XraySideSpec::new(25.0, 80.0, 1), XraySideSpec::new(22.0, 25.0, 1));
        assert!(matches!(gen_xray_phantom(&spec), Err(PhantomError::InfeasibleSpec(_)) | Err(PhantomError::InvalidSpec(_))));
    }
}
