//! Per-case report documents and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::Modality;
use crate::geometry::Point2;
use crate::ultrasound::{CoverageMode, GrafClass, UsAnalysis, UsLandmarks};
use crate::xray::{Side, SideLandmarks, XrayAnalysis};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const OVERLAY_FILE: &str = "overlay.svg";
pub const VALIDATION_FILE: &str = "validation.json";

/// Serialized decimal places. Computation stays in full precision.
pub const ANGLE_DECIMALS: i32 = 1;
pub const COVERAGE_DECIMALS: i32 = 3;
pub const COORD_DECIMALS: i32 = 2;

pub fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    // `+ 0.0` folds -0.0 into 0.0 so both print the same.
    (v * scale).round() / scale + 0.0
}

fn round_point(p: Point2) -> Point2 {
    Point2 { x: round_to(p.x, COORD_DECIMALS), y: round_to(p.y, COORD_DECIMALS) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsReport {
    pub alpha_deg: f64,
    pub coverage: f64,
    pub coverage_mode: CoverageMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graf_class: Option<GrafClass>,
    pub landmarks: UsLandmarks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub status: u8,
    pub experimental: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acetabular_index_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiberg_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ihdi_grade: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<SideLandmarks>,
}

impl SideReport {
    fn failed() -> Self {
        Self { status: 0, experimental: true, acetabular_index_deg: None, wiberg_deg: None, ihdi_grade: None, landmarks: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XrayReport {
    pub left: SideReport,
    pub right: SideReport,
}

impl XrayReport {
    pub fn side(&self, side: Side) -> &SideReport {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub backend_version: String,
    pub confidence: BTreeMap<String, f64>,
}

/// Contents of `out/<case_id>/report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub schema_version: u32,
    pub case_id: String,
    pub modality: Modality,
    /// 1 when every measurement exists, 0 otherwise.
    pub status: u8,
    pub experimental: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ultrasound: Option<UsReport>,
    /// Present whenever landmarks were found on at least one side; each side
    /// carries its own status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xray: Option<XrayReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendInfo>,
}

impl CaseReport {
    pub fn failed(case_id: &str, modality: Modality, message: impl Into<String>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            case_id: case_id.to_string(),
            modality,
            status: 0,
            experimental: true,
            message: Some(message.into()),
            ultrasound: None,
            xray: None,
            backend: None,
        }
    }

    pub fn from_us(case_id: &str, a: &UsAnalysis, mode: CoverageMode) -> Self {
        let m = &a.measurements;
        match (m.status, m.alpha_deg, m.coverage, a.landmarks()) {
            (1, Some(alpha), Some(cov), Some(lm)) => Self {
                status: 1,
                message: None,
                ultrasound: Some(UsReport {
                    alpha_deg: round_to(alpha, ANGLE_DECIMALS),
                    coverage: round_to(cov, COVERAGE_DECIMALS),
                    coverage_mode: mode,
                    graf_class: m.graf_class,
                    landmarks: UsLandmarks {
                        baseline_superior: round_point(lm.baseline_superior),
                        rim: round_point(lm.rim),
                        apex: round_point(lm.apex),
                        head_center: round_point(lm.head_center),
                        head_lateral: round_point(lm.head_lateral),
                        head_radius: round_to(lm.head_radius, COORD_DECIMALS),
                    },
                }),
                ..Self::failed(case_id, Modality::Ultrasound, "")
            },
            _ => Self::failed(case_id, Modality::Ultrasound, a.message.clone().unwrap_or_else(|| "processing error".into())),
        }
    }

    pub fn from_xray(case_id: &str, a: &XrayAnalysis) -> Self {
        let side = |s: Side| {
            let m = a.measurements.side(s);
            if m.status != 1 {
                return SideReport { landmarks: a.landmarks(s).map(|l| round_landmarks(*l)), ..SideReport::failed() };
            }
            SideReport {
                status: 1,
                experimental: true,
                acetabular_index_deg: m.acetabular_index_deg.map(|v| round_to(v, ANGLE_DECIMALS)),
                wiberg_deg: m.wiberg_deg.map(|v| round_to(v, ANGLE_DECIMALS)),
                ihdi_grade: m.ihdi_grade,
                landmarks: a.landmarks(s).map(|l| round_landmarks(*l)),
            }
        };
        let (left, right) = (side(Side::Left), side(Side::Right));
        let ok = left.status == 1 && right.status == 1;
        let any = left.landmarks.is_some() || right.landmarks.is_some();
        let message = (!a.messages.is_empty()).then(|| a.messages.join("; "));
        Self {
            status: u8::from(ok),
            message: if ok { None } else { message.or(Some("processing error".into())) },
            xray: any.then_some(XrayReport { left, right }),
            ..Self::failed(case_id, Modality::Xray, "")
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn round_landmarks(l: SideLandmarks) -> SideLandmarks {
    SideLandmarks { side: l.side, inner: round_point(l.inner), outer: round_point(l.outer), h_point: round_point(l.h_point) }
}

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new().prefix(".hipmetrics-").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn case_dir(out_dir: &Path, case_id: &str) -> PathBuf {
    out_dir.join(case_id)
}

/// Writes `out/<case_id>/report.json` and `out/<case_id>/overlay.svg`.
pub fn write_case(out_dir: &Path, report: &CaseReport, overlay_svg: &str) -> std::io::Result<()> {
    let dir = case_dir(out_dir, &report.case_id);
    std::fs::create_dir_all(&dir)?;
    write_atomic(&dir.join(REPORT_FILE), report.to_json().as_bytes())?;
    write_atomic(&dir.join(OVERLAY_FILE), overlay_svg.as_bytes())
}

pub fn read_case_report(path: &Path) -> Result<CaseReport, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}
