//! Batch execution: masks in, report tree out.

use std::collections::BTreeMap;
use std::io;
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::overlay::{failure_overlay, us_overlay, xray_overlay};
use crate::phantom::{gen_us_phantom, gen_xray_phantom, UsPhantomSpec, XrayPhantomSpec};
use crate::pluginio::backend::{run_backend, BackendCommand, BackendRequest, DEFAULT_TIMEOUT};
use crate::pluginio::manifest::{
    CaseRecord, Expert, Manifest, Modality, SideExpert, FEMORAL_HEAD, ILIUM_ACETABULUM, LEFT_TRIANGLE, MANIFEST_SCHEMA_VERSION,
    RIGHT_TRIANGLE,
};
use crate::pluginio::report::{
    case_dir, read_case_report, write_atomic, write_case, BackendInfo, CaseReport, REPORT_FILE, VALIDATION_FILE,
};
use crate::raster::LabelMask;
use crate::ultrasound::{analyze_us, UsConfig, UsLabels};
use crate::validation::{validate, ValidationReport};
use crate::xray::{analyze_xray, Side, XrayConfig, XrayLabels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub workers: usize,
    pub us: UsConfig,
    pub xray: XrayConfig,
    pub backend: Option<BackendCommand>,
    pub timeout: Duration,
    pub alpha_level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            us: UsConfig::default(),
            xray: XrayConfig::default(),
            backend: None,
            timeout: DEFAULT_TIMEOUT,
            alpha_level: 0.05,
        }
    }
}

pub struct CaseResult {
    pub report: CaseReport,
    pub overlay: String,
}

/// `target` expressed relative to `base`, both resolved on disk.
fn relative_href(target: &Path, base: &Path) -> Option<String> {
    let target = target.canonicalize().ok()?;
    let base = base.canonicalize().ok()?;
    let t: Vec<Component> = target.components().collect();
    let b: Vec<Component> = base.components().collect();
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    Some(rel.to_string_lossy().replace('\\', "/"))
}

fn is_image(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("png" | "jpg" | "jpeg"))
}

fn failed(case: &CaseRecord, message: String, dir: &Path) -> CaseResult {
    let report = CaseReport::failed(&case.case_id, case.modality, message);
    let href = case.image_path.as_deref().filter(|p| is_image(p)).and_then(|p| relative_href(p, dir));
    let overlay = failure_overlay(&report, 512, 512, href.as_deref());
    CaseResult { report, overlay }
}

/// Runs one case end to end. Every content or backend problem becomes a
/// status-0 report; nothing here aborts the batch.
pub fn analyze_case(case: &CaseRecord, cfg: &RunConfig, out_dir: &Path) -> CaseResult {
    let dir = case_dir(out_dir, &case.case_id);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return failed(case, format!("cannot create {}: {e}", dir.display()), &dir);
    }
    let mut backend_info = None;
    let mask_path = match &cfg.backend {
        Some(cmd) => {
            let req = BackendRequest::for_case(case, &dir.join("backend"));
            match run_backend(cmd, &req, cfg.timeout) {
                Ok(resp) => {
                    backend_info = Some(BackendInfo { backend_version: resp.backend_version, confidence: resp.confidence });
                    resp.mask_path
                }
                Err(e) => return failed(case, e.to_string(), &dir),
            }
        }
        None => match &case.mask_path {
            Some(p) => p.clone(),
            None => return failed(case, "no mask_path and no backend configured".into(), &dir),
        },
    };
    let mask = match LabelMask::load_png(&mask_path) {
        Ok(m) => m,
        Err(e) => return failed(case, format!("cannot read mask {}: {e}", mask_path.display()), &dir),
    };
    if let Some(l) = mask.labels_present().into_iter().find(|l| *l != 0 && !case.label_map.contains_key(l)) {
        return failed(case, format!("mask contains label {l}, which the label_map does not name"), &dir);
    }
    let image = case.image_path.as_deref().filter(|p| is_image(p)).unwrap_or(&mask_path);
    let href = relative_href(image, &dir);
    let label = |s: &str| case.label_of(s).expect("manifest validation guarantees required structures");
    let (mut report, overlay) = match case.modality {
        Modality::Ultrasound => {
            let labels = UsLabels { ilium: label(ILIUM_ACETABULUM), femoral_head: label(FEMORAL_HEAD) };
            match analyze_us(&mask, labels, &cfg.us) {
                Ok(a) => {
                    let r = CaseReport::from_us(&case.case_id, &a, cfg.us.coverage_mode);
                    let svg = us_overlay(&r, &a, mask.width(), mask.height(), href.as_deref());
                    (r, svg)
                }
                Err(e) => {
                    let r = CaseReport::failed(&case.case_id, case.modality, e.to_string());
                    let svg = failure_overlay(&r, mask.width(), mask.height(), href.as_deref());
                    (r, svg)
                }
            }
        }
        Modality::Xray => {
            let labels = XrayLabels { left: label(LEFT_TRIANGLE), right: label(RIGHT_TRIANGLE) };
            let a = analyze_xray(&mask, labels, &cfg.xray);
            let r = CaseReport::from_xray(&case.case_id, &a);
            let svg = xray_overlay(&r, &a, mask.width(), mask.height(), href.as_deref());
            (r, svg)
        }
    };
    report.backend = backend_info;
    CaseResult { report, overlay }
}

/// One line per case for the terminal.
pub fn summary_line(r: &CaseReport) -> String {
    let mut s = format!("{} status={}", r.case_id, r.status);
    if let Some(u) = &r.ultrasound {
        s += &format!(" alpha={:.1}deg (experimental) coverage={:.1}% (experimental)", u.alpha_deg, u.coverage * 100.0);
        if let Some(g) = u.graf_class {
            s += &format!(" graf={} (experimental)", g.label());
        }
    }
    if let Some(x) = &r.xray {
        for side in Side::BOTH {
            let sr = x.side(side);
            if sr.status == 1 {
                s += &format!(
                    " {}: AI={:.1}deg (experimental) wiberg={:.1}deg (experimental) ihdi={} (experimental)",
                    side.name(),
                    sr.acetabular_index_deg.unwrap_or(f64::NAN),
                    sr.wiberg_deg.unwrap_or(f64::NAN),
                    sr.ihdi_grade.unwrap_or(0)
                );
            } else {
                s += &format!(" {}: status=0", side.name());
            }
        }
    }
    if r.status == 0 {
        if let Some(m) = &r.message {
            s += &format!(" [{m}]");
        }
    }
    s
}

pub struct BatchOutcome {
    /// Sorted by case_id.
    pub reports: Vec<CaseReport>,
    pub validation: ValidationReport,
}

impl BatchOutcome {
    pub fn all_ok(&self) -> bool {
        self.reports.iter().all(|r| r.status == 1)
    }
}

fn thread_pool(workers: usize) -> io::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(io::Error::other)
}

/// Analyzes every case, writes the per-case files and `validation.json`.
/// Errors are output failures only.
pub fn run_batch(manifest: &Manifest, cfg: &RunConfig, out_dir: &Path) -> io::Result<BatchOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let pool = thread_pool(cfg.workers)?;
    let mut reports = pool.install(|| {
        manifest
            .cases
            .par_iter()
            .map(|case| {
                let result = analyze_case(case, cfg, out_dir);
                write_case(out_dir, &result.report, &result.overlay)?;
                info!("{}", summary_line(&result.report));
                Ok(result.report)
            })
            .collect::<io::Result<Vec<_>>>()
    })?;
    reports.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let by_id: BTreeMap<String, CaseReport> = reports.iter().map(|r| (r.case_id.clone(), r.clone())).collect();
    let validation = validate(manifest, &by_id, cfg.alpha_level);
    write_atomic(&out_dir.join(VALIDATION_FILE), validation.to_json().as_bytes())?;
    Ok(BatchOutcome { reports, validation })
}

/// Reads `<dir>/<case_id>/report.json` for every manifest case. Unreadable
/// reports are skipped with a warning and count as processing errors.
pub fn load_predictions(manifest: &Manifest, dir: &Path) -> BTreeMap<String, CaseReport> {
    let mut out = BTreeMap::new();
    for c in &manifest.cases {
        let path = case_dir(dir, &c.case_id).join(REPORT_FILE);
        match read_case_report(&path) {
            Ok(r) if r.case_id == c.case_id && r.modality == c.modality => {
                out.insert(c.case_id.clone(), r);
            }
            Ok(_) => warn!("{}: report belongs to another case", path.display()),
            Err(e) => warn!("{e}"),
        }
    }
    out
}

/// Generates `n` seeded phantom cases under `out_dir` plus `manifest.json`
/// whose expert values are the construction ground truth. Each case's
/// `image_path` is its `truth.json`, which the phantom-oracle backend reads.
pub fn write_phantom_set(modality: Modality, n: usize, seed: u64, out_dir: &Path) -> io::Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n);
    for i in 0..n {
        let (case_id, mask, truth_json, label_map, expert) = match modality {
            Modality::Ultrasound => {
                let spec = UsPhantomSpec::random(&mut rng, 512);
                let (mask, truth) = gen_us_phantom(&spec).map_err(io::Error::other)?;
                let label_map = BTreeMap::from([
                    (truth.labels.ilium, ILIUM_ACETABULUM.to_string()),
                    (truth.labels.femoral_head, FEMORAL_HEAD.to_string()),
                ]);
                let expert = Expert { alpha_deg: Some(truth.alpha_deg), coverage: Some(truth.coverage), left: None, right: None };
                (format!("us-{i:04}"), mask, serde_json::to_string_pretty(&truth)?, label_map, expert)
            }
            Modality::Xray => {
                let spec = XrayPhantomSpec::random(&mut rng);
                let (mask, truth) = gen_xray_phantom(&spec).map_err(io::Error::other)?;
                let label_map =
                    BTreeMap::from([(truth.labels.left, LEFT_TRIANGLE.to_string()), (truth.labels.right, RIGHT_TRIANGLE.to_string())]);
                let side = |s: Side| {
                    let t = truth.side(s);
                    Some(SideExpert {
                        acetabular_index_deg: Some(t.acetabular_index_deg),
                        wiberg_deg: Some(t.wiberg_deg),
                        ihdi_grade: Some(t.ihdi_grade),
                    })
                };
                let expert = Expert { alpha_deg: None, coverage: None, left: side(Side::Left), right: side(Side::Right) };
                (format!("xr-{i:04}"), mask, serde_json::to_string_pretty(&truth)?, label_map, expert)
            }
        };
        let dir = out_dir.join(&case_id);
        std::fs::create_dir_all(&dir)?;
        let mut png = Vec::new();
        mask.write_png(&mut png).map_err(io::Error::other)?;
        write_atomic(&dir.join("mask.png"), &png)?;
        write_atomic(&dir.join("truth.json"), (truth_json + "\n").as_bytes())?;
        cases.push(CaseRecord {
            image_path: Some(PathBuf::from(format!("{case_id}/truth.json"))),
            mask_path: Some(PathBuf::from(format!("{case_id}/mask.png"))),
            case_id,
            modality,
            label_map,
            expert: Some(expert),
        });
    }
    let manifest = Manifest { schema_version: MANIFEST_SCHEMA_VERSION, cases };
    write_atomic(&out_dir.join("manifest.json"), manifest.to_json().as_bytes())?;
    Ok(manifest)
}
