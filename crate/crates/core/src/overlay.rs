//! SVG overlays drawn over the source image (or the mask when no image is
//! available).

use std::fmt::Write;

use crate::geometry::{Line2, Point2};
use crate::pluginio::report::CaseReport;
use crate::ultrasound::UsAnalysis;
use crate::xray::{Side, XrayAnalysis};

const INNER: &str = "#f5d90a";
const OUTER: &str = "#1f6fe0";
const H_POINT: &str = "#2fb344";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    body: String,
    width: usize,
    height: usize,
}

impl Svg {
    fn new(width: usize, height: usize, image_href: Option<&str>) -> Self {
        let mut body = String::new();
        if let Some(href) = image_href {
            let _ = writeln!(body, r#"  <image href="{}" x="0" y="0" width="{width}" height="{height}" opacity="0.6"/>"#, escape(href));
        }
        Self { body, width, height }
    }

    fn segment(&mut self, a: Point2, b: Point2, color: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"  <line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            a.x, a.y, b.x, b.y
        );
    }

    /// Infinite line, long enough to cross the whole image; the viewBox clips.
    fn line(&mut self, l: &Line2, color: &str, class: &str) {
        let reach = (self.width + self.height) as f64;
        let d = l.direction.scale(reach);
        self.segment(l.anchor.offset(d.neg()), l.anchor.offset(d), color, class);
    }

    fn landmark(&mut self, p: Point2, color: &str, label: &str) {
        let _ = writeln!(
            self.body,
            r#"  <circle class="landmark" cx="{:.2}" cy="{:.2}" r="4" fill="{color}" stroke="black" stroke-width="0.75"><title>{label}</title></circle>"#,
            p.x, p.y
        );
        let _ = writeln!(self.body, r#"  <text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{label}</text>"#, p.x + 6.0, p.y - 6.0);
    }

    fn text_block(&mut self, lines: &[String]) {
        let _ = writeln!(
            self.body,
            r#"  <g class="measurements" font-family="monospace" font-size="13" fill="white" stroke="black" stroke-width="0.3">"#
        );
        for (i, line) in lines.iter().enumerate() {
            let _ = writeln!(self.body, r#"    <text x="8" y="{}">{}</text>"#, 18 + 16 * i, escape(line));
        }
        self.body.push_str("  </g>\n");
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn status_lines(report: &CaseReport) -> Vec<String> {
    let mut lines = vec![format!("{} status {}", report.case_id, report.status)];
    if let Some(m) = &report.message {
        lines.push(m.clone());
    }
    lines
}

/// Overlay for a case that never produced a usable mask.
pub fn failure_overlay(report: &CaseReport, width: usize, height: usize, image_href: Option<&str>) -> String {
    let mut svg = Svg::new(width.max(1), height.max(1), image_href);
    svg.text_block(&status_lines(report));
    svg.finish()
}

pub fn us_overlay(report: &CaseReport, analysis: &UsAnalysis, width: usize, height: usize, image_href: Option<&str>) -> String {
    let mut svg = Svg::new(width, height, image_href);
    if let Some(head) = &analysis.head {
        let _ = writeln!(
            svg.body,
            r#"  <circle class="femoral-head" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{OUTER}" stroke-dasharray="4 3"/>"#,
            head.center.x, head.center.y, head.radius
        );
    }
    if let Some(d) = &analysis.derivation {
        let lm = &d.landmarks;
        svg.line(&d.baseline, "#e03131", "baseline");
        svg.segment(lm.rim, lm.apex, "#f08c00", "roof-line");
        svg.landmark(lm.baseline_superior, "#e03131", "baseline superior");
        svg.landmark(lm.rim, "#f08c00", "rim");
        svg.landmark(lm.apex, "#f08c00", "apex");
        svg.landmark(lm.head_center, OUTER, "head centre");
        svg.landmark(lm.head_lateral, OUTER, "head lateral");
    }
    let mut lines = status_lines(report);
    if let Some(us) = &report.ultrasound {
        lines.push(format!("alpha {:.1}\u{b0} (experimental)", us.alpha_deg));
        lines.push(format!("coverage {:.1}% (experimental)", us.coverage * 100.0));
        if let Some(g) = us.graf_class {
            lines.push(format!("Graf {} (experimental)", g.label()));
        }
    }
    svg.text_block(&lines);
    svg.finish()
}

pub fn xray_overlay(report: &CaseReport, analysis: &XrayAnalysis, width: usize, height: usize, image_href: Option<&str>) -> String {
    let mut svg = Svg::new(width, height, image_href);
    for tri in analysis.triangles.iter().flatten() {
        let pts: Vec<String> = tri.iter().map(|p| format!("{:.2},{:.2}", p.x, p.y)).collect();
        let _ =
            writeln!(svg.body, r#"  <polygon class="triangle" points="{}" fill="none" stroke="white" stroke-width="1"/>"#, pts.join(" "));
    }
    if let Some(pc) = &analysis.construction {
        svg.line(&pc.hilgenreiner, "#e03131", "hilgenreiner");
        for side in Side::BOTH {
            svg.line(pc.perkin(side), "#ae3ec9", "perkin");
            svg.line(pc.diagonal(side), "#868e96", "diagonal");
        }
    }
    for side in Side::BOTH {
        if let Some(lm) = analysis.landmarks(side) {
            svg.landmark(lm.inner, INNER, &format!("{} inner", side.name()));
            svg.landmark(lm.outer, OUTER, &format!("{} outer", side.name()));
            svg.landmark(lm.h_point, H_POINT, &format!("{} h", side.name()));
        }
    }
    let mut lines = status_lines(report);
    if let Some(x) = &report.xray {
        for side in Side::BOTH {
            let s = x.side(side);
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}\u{b0}"));
            lines.push(format!(
                "{}: status {} AI {} Wiberg {} IHDI {} (experimental)",
                side.name(),
                s.status,
                fmt(s.acetabular_index_deg),
                fmt(s.wiberg_deg),
                s.ihdi_grade.map_or("-".to_string(), |g| g.to_string())
            ));
        }
    }
    svg.text_block(&lines);
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{gen_us_phantom, gen_xray_phantom, UsPhantomSpec, XrayPhantomSpec, XraySideSpec};
    use crate::ultrasound::{analyze_us, CoverageMode, UsConfig};
    use crate::xray::{analyze_xray, XrayConfig};

    #[test]
    fn us_overlay_has_five_landmarks_and_lines() {
        let (mask, truth) = gen_us_phantom(&UsPhantomSpec::new(60.0, 0.55)).unwrap();
        let a = analyze_us(&mask, truth.labels, &UsConfig::default()).unwrap();
        let r = CaseReport::from_us("c<1>", &a, CoverageMode::Diameter);
        let svg = us_overlay(&r, &a, mask.width(), mask.height(), Some("img.png"));
        assert_eq!(svg.matches("class=\"landmark\"").count(), 5);
        assert!(svg.contains("class=\"baseline\"") && svg.contains("class=\"roof-line\""));
        assert!(svg.contains("c&lt;1&gt;"));
        assert!(svg.contains("(experimental)"));
    }

    #[test]
    fn xray_overlay_colors_six_landmarks() {
        let spec = XrayPhantomSpec::new(XraySideSpec::new(22.0, 25.0, 1), XraySideSpec::new(25.0, 25.0, 1));
        let (mask, truth) = gen_xray_phantom(&spec).unwrap();
        let a = analyze_xray(&mask, truth.labels, &XrayConfig::default());
        let r = CaseReport::from_xray("x", &a);
        let svg = xray_overlay(&r, &a, mask.width(), mask.height(), None);
        assert_eq!(svg.matches("class=\"landmark\"").count(), 6);
        for color in [INNER, OUTER, H_POINT] {
            assert_eq!(svg.matches(&format!("fill=\"{color}\" stroke")).count(), 2);
        }
        assert_eq!(svg.matches("class=\"perkin\"").count(), 2);
        assert!(!svg.contains("<image"));
    }
}
