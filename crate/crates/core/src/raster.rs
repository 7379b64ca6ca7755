//! Label masks, connected components and Moore-neighbour boundary tracing.
//!
//! Foreground is 8-connected and background 4-connected. Contour vertices
//! are pixel centres with integer coordinates.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{Contour, Point2};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("contour has {have} vertices, curvature window {window} needs at least {need}")]
    TooFewVertices { have: usize, need: usize, window: usize },
    #[error("mask dimensions {width}x{height} do not match {len} pixels")]
    BadDimensions { width: usize, height: usize, len: usize },
    #[error("unsupported PNG layout: {0}")]
    UnsupportedPng(String),
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major 8-bit label image; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width * height != pixels.len() {
            return Err(RasterError::BadDimensions { width, height, len: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.pixels[y * self.width + x] = label;
    }

    /// Distinct non-zero labels, ascending.
    pub fn labels_present(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &p in &self.pixels {
            seen[p as usize] = true;
        }
        (1..=255u8).filter(|&l| seen[l as usize]).collect()
    }

    /// Mirror about the vertical midline.
    pub fn flip_horizontal(&self) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Reads an 8-bit single-channel, non-interlaced PNG.
    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder.read_info()?;
        let info = reader.info();
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(RasterError::UnsupportedPng(format!("{:?} {:?}, expected 8-bit grayscale", info.color_type, info.bit_depth)));
        }
        if info.interlaced {
            return Err(RasterError::UnsupportedPng("interlaced".into()));
        }
        let (width, height) = (info.width as usize, info.height as usize);
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(width * height)];
        let frame = reader.next_frame(&mut buf)?;
        buf.truncate(frame.buffer_size());
        Self::new(width, height, buf)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_png(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_png<W: Write>(&self, w: W) -> Result<(), RasterError> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.pixels)?;
        writer.finish()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Out-of-frame coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// A set pixel with an unset 8-neighbour, or on the frame edge.
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        if !self.get(x, y) {
            return false;
        }
        let (x, y) = (x as i64, y as i64);
        NEIGHBOURS.iter().any(|&(dx, dy)| !self.get_signed(x + dx, y + dy))
    }
}

pub fn select_label(m: &LabelMask, label: u8) -> BitMask {
    debug_assert!(label != 0, "label 0 is background");
    BitMask { width: m.width, height: m.height, bits: m.pixels.iter().map(|&p| p == label).collect() }
}

/// Largest 8-connected component. Components are discovered in raster order,
/// so on equal pixel counts the one whose first pixel has the smallest
/// (row, column) wins.
pub fn largest_component(b: &BitMask) -> Result<BitMask, RasterError> {
    let (w, h) = (b.width, b.height);
    let mut label = vec![0u32; w * h];
    let mut best: Option<(u32, usize)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !b.bits[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in &NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if b.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
    }
    let (keep, _) = best.ok_or(RasterError::EmptyMask)?;
    Ok(BitMask { width: w, height: h, bits: label.iter().map(|&l| l == keep).collect() })
}

/// Clockwise on screen starting from west: W, NW, N, NE, E, SE, S, SW.
const NEIGHBOURS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    NEIGHBOURS.iter().position(|&d| d == (dx, dy)).expect("unit neighbour offset")
}

/// Moore-neighbour boundary trace of a single 8-connected component.
///
/// Starts at the top-left-most set pixel and walks so the shoelace area is
/// positive (left to right along the top edge). Pixels the walk revisits,
/// as happens along one-pixel-wide spurs, are kept only at their first
/// occurrence, so the vertex count equals the number of distinct boundary
/// pixels. A lone pixel yields a unit diamond around its centre.
pub fn trace_contour(b: &BitMask) -> Result<Contour, RasterError> {
    let start = b.bits.iter().position(|&v| v).ok_or(RasterError::EmptyMask)?;
    let start = ((start % b.width) as i64, (start / b.width) as i64);

    // The west neighbour of the first raster pixel is always background.
    let step = |cur: (i64, i64), back: (i64, i64)| -> Option<((i64, i64), (i64, i64))> {
        let bdir = dir_index(back.0 - cur.0, back.1 - cur.1);
        let mut prev = back;
        for k in 1..=8 {
            let (dx, dy) = NEIGHBOURS[(bdir + k) % 8];
            let cand = (cur.0 + dx, cur.1 + dy);
            if b.get_signed(cand.0, cand.1) {
                return Some((cand, prev));
            }
            prev = cand;
        }
        None
    };

    let Some((first_next, first_back)) = step(start, (start.0 - 1, start.1)) else {
        let (x, y) = (start.0 as f64, start.1 as f64);
        return Ok(Contour::from_trace(vec![
            Point2::new(x - 0.5, y),
            Point2::new(x, y - 0.5),
            Point2::new(x + 0.5, y),
            Point2::new(x, y + 0.5),
        ]));
    };

    let mut seen = vec![false; b.width * b.height];
    let mut out = Vec::new();
    let mut push = |p: (i64, i64), out: &mut Vec<Point2>| {
        let idx = p.1 as usize * b.width + p.0 as usize;
        if !seen[idx] {
            seen[idx] = true;
            out.push(Point2::new(p.0 as f64, p.1 as f64));
        }
    };
    push(start, &mut out);
    let (mut cur, mut back) = (first_next, first_back);
    let limit = 4 * b.width * b.height + 16;
    for _ in 0..limit {
        let (next, nback) = step(cur, back).expect("pixel reached by tracing has a neighbour");
        if cur == start && next == first_next {
            break;
        }
        push(cur, &mut out);
        cur = next;
        back = nback;
    }
    Ok(Contour::from_trace(out))
}

/// Signed discrete turning angle (degrees) at vertex `i` using the chords
/// from `i - window` and to `i + window`. Convex corners are positive.
pub fn turning_angle_deg(c: &Contour, i: usize, window: usize) -> f64 {
    let i = i as isize;
    let w = window as isize;
    let a = c.at(i).sub(c.at(i - w));
    let b = c.at(i + w).sub(c.at(i));
    a.cross(b).atan2(a.dot(b)).to_degrees()
}

fn check_window(c: &Contour, window: usize) -> Result<(), RasterError> {
    let need = 2 * window + 1;
    if window == 0 || c.len() < need {
        return Err(RasterError::TooFewVertices { have: c.len(), need, window });
    }
    Ok(())
}

const TIE_EPS_DEG: f64 = 1e-9;

/// Index of the sharpest convex corner (maximal signed turning angle); ties
/// go to the lowest index.
pub fn corner_of_max_curvature(c: &Contour, window: usize) -> Result<usize, RasterError> {
    check_window(c, window)?;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..c.len() {
        let t = turning_angle_deg(c, i, window);
        if t > best.1 + TIE_EPS_DEG {
            best = (i, t);
        }
    }
    Ok(best.0)
}

/// Convex corner strength `min(turn(w), 2·turn(w) − turn(2w))`: a true
/// corner keeps its full turning angle, while a circular arc (which turns
/// linearly with the window) scores about zero.
pub fn corner_strength_deg(c: &Contour, i: usize, window: usize) -> f64 {
    let t = turning_angle_deg(c, i, window);
    t.min(2.0 * t - turning_angle_deg(c, i, 2 * window))
}

/// Index of the strongest convex corner by [`corner_strength_deg`], averaged
/// over the vertex and its two neighbours (a staircase step on a tilted edge
/// spikes a single vertex; a real corner scores on several). Ties go to the
/// lowest index. Needs `4·window + 1` vertices.
pub fn strongest_corner(c: &Contour, window: usize) -> Result<usize, RasterError> {
    check_window(c, 2 * window)?;
    let n = c.len();
    let raw: Vec<f64> = (0..n).map(|i| corner_strength_deg(c, i, window)).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        let s = (raw[(i + n - 1) % n] + raw[i] + raw[(i + 1) % n]) / 3.0;
        if s > best.1 + TIE_EPS_DEG {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// Index and turning angle of the most concave vertex (minimal signed turning).
pub fn most_concave_vertex(c: &Contour, window: usize) -> Result<(usize, f64), RasterError> {
    check_window(c, window)?;
    let mut best = (0, f64::INFINITY);
    for i in 0..c.len() {
        let t = turning_angle_deg(c, i, window);
        if t < best.1 - TIE_EPS_DEG {
            best = (i, t);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(width: usize, height: usize, on: &[(usize, usize)]) -> BitMask {
        let mut b = BitMask::new(width, height);
        for &(x, y) in on {
            b.set(x, y, true);
        }
        b
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn select_label_examples() {
        let m = LabelMask::zeros(8, 8);
        assert!(select_label(&m, 1).is_empty());
        let mut m = LabelMask::zeros(8, 8);
        m.set(3, 4, 2);
        m.set(5, 5, 1);
        let b = select_label(&m, 2);
        assert_eq!(b.count(), 1);
        assert!(b.get(3, 4));
        assert!(!select_label(&m, 1).get(3, 4));
    }

    #[test]
    fn largest_component_examples() {
        let mut on: Vec<(usize, usize)> = (0..5).flat_map(|y| (0..5).map(move |x| (x + 2, y + 2))).collect();
        on.push((12, 12));
        let b = mask_from(16, 16, &on);
        let l = largest_component(&b).unwrap();
        assert_eq!(l.count(), 25);
        assert!(!l.get(12, 12));

        let single = mask_from(16, 16, &on[..25]);
        assert_eq!(largest_component(&single).unwrap(), single);

        let blocks = [(0, 0), (1, 0), (0, 1), (1, 1), (10, 10), (11, 10), (10, 11), (11, 11)];
        let l = largest_component(&mask_from(16, 16, &blocks)).unwrap();
        assert!(l.get(0, 0) && !l.get(10, 10));

        assert!(matches!(largest_component(&BitMask::new(4, 4)), Err(RasterError::EmptyMask)));
    }

    #[test]
    fn trace_3x3_square() {
        // Hand enumeration: the walk goes right along the top row, down the
        // right column, left along the bottom and up the left column.
        let on: Vec<_> = (0..3).flat_map(|y| (0..3).map(move |x| (x, y))).collect();
        let c = trace_contour(&mask_from(3, 3, &on)).unwrap();
        let expected = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0), (0.0, 2.0), (0.0, 1.0)]);
        assert_eq!(c.vertices(), &expected[..]);
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn trace_horizontal_bar() {
        // Out along the bar and back; the return leg revisits every pixel,
        // leaving the 5 distinct boundary pixels.
        let on: Vec<_> = (0..5).map(|x| (x + 1, 1)).collect();
        let c = trace_contour(&mask_from(7, 3, &on)).unwrap();
        let expected = pts(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]);
        assert_eq!(c.vertices(), &expected[..]);
    }

    #[test]
    fn trace_full_frame() {
        let (w, h) = (6, 4);
        let on: Vec<_> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect();
        let c = trace_contour(&mask_from(w, h, &on)).unwrap();
        assert_eq!(c.len(), 2 * (w + h) - 4);
        for v in c.vertices() {
            let (x, y) = (v.x as usize, v.y as usize);
            assert!(x == 0 || y == 0 || x == w - 1 || y == h - 1);
        }
        assert_eq!(c.vertices()[0], Point2::new(0.0, 0.0));
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn trace_single_pixel_diamond() {
        let c = trace_contour(&mask_from(5, 5, &[(2, 3)])).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.signed_area() - 0.5).abs() < 1e-12);
        assert!(matches!(trace_contour(&BitMask::new(3, 3)), Err(RasterError::EmptyMask)));
    }

    #[test]
    fn curvature_l_shape_corner() {
        // Right-angle corner at (0,0) joining two legs; the closing arc is a
        // circle centred at (4,4) so every other turn stays below 90 degrees.
        let mut v = vec![];
        for i in (1..=10).rev() {
            v.push((0.0, i as f64));
        }
        v.push((0.0, 0.0));
        for i in 1..=10 {
            v.push((i as f64, 0.0));
        }
        let (cx, cy) = (4.0f64, 4.0f64);
        let r = ((10.0 - cx).powi(2) + cy * cy).sqrt();
        let a0 = (0.0 - cy).atan2(10.0 - cx);
        let a1 = (10.0 - cy).atan2(0.0 - cx);
        for k in 1..20 {
            let t = a0 + (a1 - a0) * k as f64 / 20.0;
            v.push((cx + r * t.cos(), cy + r * t.sin()));
        }
        // Orient so the shoelace area is positive.
        let mut vs = pts(&v);
        if crate::geometry::signed_area(&vs) < 0.0 {
            vs.reverse();
        }
        let corner = vs.iter().position(|p| *p == Point2::new(0.0, 0.0)).unwrap();
        let c = Contour::new(vs).unwrap();
        assert_eq!(corner_of_max_curvature(&c, 1).unwrap(), corner);
        assert!((turning_angle_deg(&c, corner, 1) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn curvature_hexagon_tie_break() {
        let v: Vec<Point2> = (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 3.0;
                Point2::new(10.0 * t.cos(), 10.0 * t.sin())
            })
            .collect();
        let c = Contour::new(v).unwrap();
        assert_eq!(corner_of_max_curvature(&c, 1).unwrap(), 0);
    }

    #[test]
    fn curvature_too_few_vertices() {
        let c = Contour::new(pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert!(matches!(corner_of_max_curvature(&c, 7), Err(RasterError::TooFewVertices { .. })));
    }

    #[test]
    fn png_round_trip() {
        let mut m = LabelMask::zeros(9, 7);
        m.set(2, 3, 1);
        m.set(8, 6, 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        m.save_png(&p).unwrap();
        assert_eq!(LabelMask::load_png(&p).unwrap(), m);
        assert_eq!(m.labels_present(), vec![1, 2]);
    }

    fn arb_mask() -> impl Strategy<Value = BitMask> {
        (3usize..14, 3usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.55), w * h).prop_map(move |bits| BitMask { width: w, height: h, bits })
        })
    }

    proptest! {
        #[test]
        fn component_idempotent_and_contour_on_boundary(b in arb_mask()) {
            prop_assume!(!b.is_empty());
            let l = largest_component(&b).unwrap();
            prop_assert_eq!(&largest_component(&l).unwrap(), &l);
            let c = trace_contour(&l).unwrap();
            if l.count() > 1 {
                for v in c.vertices() {
                    prop_assert!(l.is_boundary(v.x as usize, v.y as usize));
                }
                let n = c.len();
                for i in 0..n {
                    prop_assert!(c.vertices()[i] != c.vertices()[(i + 1) % n]);
                }
            }
        }

        #[test]
        fn labels_disjoint(px in proptest::collection::vec(0u8..4, 64), a in 1u8..4, d in 1u8..3) {
            let b = (a - 1 + d) % 3 + 1;
            let m = LabelMask::new(8, 8, px).unwrap();
            let (sa, sb) = (select_label(&m, a), select_label(&m, b));
            for y in 0..8 { for x in 0..8 { prop_assert!(!(sa.get(x, y) && sb.get(x, y))); } }
        }
    }
}
