//! Agreement between pipeline reports and expert reference values, written
//! as `validation.json`.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::pluginio::manifest::{Expert, Manifest, Modality, SideExpert};
use crate::pluginio::report::{CaseReport, REPORT_SCHEMA_VERSION};
use crate::stats::{
    confusion, icc_single, precision_recall_f1, screening_binarize, Averaging, ConfusionMatrix, IccKind, IccResult, RatingTable, Scores,
    Screen,
};
use crate::xray::Side;

/// Grades on the confusion axes; 0 is the processing-error result.
pub const IHDI_CLASSES: [u8; 5] = [0, 1, 2, 3, 4];
pub const MIN_CASES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub modality: Modality,
    /// None when no report exists for the case.
    pub status: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAgreement {
    /// Cases with both an expert value and a measurement.
    pub n: usize,
    /// Cases with an expert value but no measurement (status 0 or no report).
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute_agreement: Option<IccResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<IccResult>,
    /// Why no ICC was computed (too few cases, degenerate table).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideClassification {
    pub n: usize,
    pub confusion: ConfusionMatrix<u8>,
    #[serde(rename = "macro")]
    pub macro_scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    /// Hips scored, pooled over both sides.
    pub n: usize,
    pub status0: usize,
    pub positive: Screen,
    pub confusion: ConfusionMatrix<Screen>,
    pub binary: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhdiValidation {
    pub left: Option<SideClassification>,
    pub right: Option<SideClassification>,
    pub screening: ScreeningResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub experimental: bool,
    pub alpha_level: f64,
    pub cases: Vec<CaseSummary>,
    pub agreement: BTreeMap<String, MetricAgreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ihdi: Option<IhdiValidation>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("validation report serializes") + "\n"
    }
}

type Pick = fn(&Expert, &CaseReport) -> (Option<f64>, Option<f64>);

fn side_pick(
    e: &Expert,
    r: &CaseReport,
    side: Side,
    f: fn(&SideExpert) -> Option<f64>,
    g: fn(&crate::pluginio::report::SideReport) -> Option<f64>,
) -> (Option<f64>, Option<f64>) {
    let expert = match side {
        Side::Left => e.left.as_ref(),
        Side::Right => e.right.as_ref(),
    }
    .and_then(f);
    let pred = r.xray.as_ref().map(|x| x.side(side)).filter(|s| s.status == 1).and_then(g);
    (expert, pred)
}

fn metrics() -> Vec<(&'static str, Modality, Pick)> {
    vec![
        ("alpha_deg", Modality::Ultrasound, |e, r| (e.alpha_deg, r.ultrasound.as_ref().filter(|_| r.status == 1).map(|u| u.alpha_deg))),
        ("coverage", Modality::Ultrasound, |e, r| (e.coverage, r.ultrasound.as_ref().filter(|_| r.status == 1).map(|u| u.coverage))),
        ("acetabular_index_left", Modality::Xray, |e, r| {
            side_pick(e, r, Side::Left, |s| s.acetabular_index_deg, |s| s.acetabular_index_deg)
        }),
        ("acetabular_index_right", Modality::Xray, |e, r| {
            side_pick(e, r, Side::Right, |s| s.acetabular_index_deg, |s| s.acetabular_index_deg)
        }),
        ("wiberg_left", Modality::Xray, |e, r| side_pick(e, r, Side::Left, |s| s.wiberg_deg, |s| s.wiberg_deg)),
        ("wiberg_right", Modality::Xray, |e, r| side_pick(e, r, Side::Right, |s| s.wiberg_deg, |s| s.wiberg_deg)),
    ]
}

fn agreement(expert: &[f64], pred: &[f64], excluded: usize, alpha_level: f64) -> MetricAgreement {
    let mut out = MetricAgreement { n: expert.len(), excluded, absolute_agreement: None, consistency: None, error: None };
    if expert.len() < MIN_CASES {
        out.error = Some(format!("insufficient data: {} case(s), need at least {MIN_CASES}", expert.len()));
        return out;
    }
    let result = RatingTable::from_pairs(expert, pred)
        .and_then(|t| Ok((icc_single(&t, IccKind::AbsoluteAgreement, alpha_level)?, icc_single(&t, IccKind::Consistency, alpha_level)?)));
    match result {
        Ok((a, c)) => {
            out.absolute_agreement = Some(a);
            out.consistency = Some(c);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

fn side_expert(e: &Expert, side: Side) -> Option<u8> {
    match side {
        Side::Left => e.left.and_then(|s| s.ihdi_grade),
        Side::Right => e.right.and_then(|s| s.ihdi_grade),
    }
}

/// Predicted (grade, status) for one hip; a missing report is a processing error.
fn side_prediction(r: Option<&CaseReport>, side: Side) -> (Option<u8>, u8) {
    match r.and_then(|r| r.xray.as_ref()).map(|x| x.side(side)) {
        Some(s) if s.status == 1 => (s.ihdi_grade, 1),
        _ => (None, 0),
    }
}

fn ihdi(manifest: &Manifest, preds: &BTreeMap<String, CaseReport>) -> Option<IhdiValidation> {
    let mut pooled_truth = Vec::new();
    let mut pooled_pred = Vec::new();
    let mut per_side = BTreeMap::new();
    for side in Side::BOTH {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for c in manifest.cases.iter().filter(|c| c.modality == Modality::Xray) {
            let Some(t) = c.expert.as_ref().and_then(|e| side_expert(e, side)) else { continue };
            let p = side_prediction(preds.get(&c.case_id), side);
            truth.push(t);
            pred.push(p.0.filter(|_| p.1 == 1).unwrap_or(0));
            pooled_truth.push(if t == 1 { Screen::Normal } else { Screen::Abnormal });
            pooled_pred.push(p);
        }
        if truth.is_empty() {
            continue;
        }
        let m = confusion(&pred, &truth, &IHDI_CLASSES).ok()?;
        let macro_scores = precision_recall_f1(&m, Averaging::Macro).ok()?;
        per_side.insert(side, SideClassification { n: truth.len(), confusion: m, macro_scores });
    }
    if pooled_truth.is_empty() {
        return None;
    }
    let status0 = pooled_pred.iter().filter(|p| p.1 == 0).count();
    let screened = screening_binarize(&pooled_pred);
    let classes = [Screen::Normal, Screen::Abnormal];
    let m = confusion(&screened, &pooled_truth, &classes).ok()?;
    let binary = precision_recall_f1(&m, Averaging::BinaryPositive(1)).ok()?;
    Some(IhdiValidation {
        left: per_side.remove(&Side::Left),
        right: per_side.remove(&Side::Right),
        screening: ScreeningResult { n: pooled_truth.len(), status0, positive: Screen::Abnormal, confusion: m, binary },
    })
}

/// Builds the aggregate report. `preds` maps case_id to its report; cases
/// without one count as processing errors.
pub fn validate(manifest: &Manifest, preds: &BTreeMap<String, CaseReport>, alpha_level: f64) -> ValidationReport {
    let mut cases: Vec<CaseSummary> = manifest
        .cases
        .iter()
        .map(|c| CaseSummary { case_id: c.case_id.clone(), modality: c.modality, status: preds.get(&c.case_id).map(|r| r.status) })
        .collect();
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let mut agreement_map = BTreeMap::new();
    for (name, modality, pick) in metrics() {
        let mut expert = Vec::new();
        let mut pred = Vec::new();
        let mut excluded = 0;
        let mut any = false;
        let mut sorted: Vec<_> = manifest.cases.iter().filter(|c| c.modality == modality).collect();
        sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        for c in sorted {
            let Some(e) = &c.expert else { continue };
            let missing = CaseReport::failed(&c.case_id, modality, "no report");
            let r = preds.get(&c.case_id).unwrap_or(&missing);
            match pick(e, r) {
                (Some(x), Some(y)) => {
                    any = true;
                    expert.push(x);
                    pred.push(y);
                }
                (Some(_), None) => {
                    any = true;
                    excluded += 1;
                }
                _ => {}
            }
        }
        if any {
            agreement_map.insert(name.to_string(), agreement(&expert, &pred, excluded, alpha_level));
        }
    }
    ValidationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: ToolInfo::default(),
        experimental: true,
        alpha_level,
        cases,
        agreement: agreement_map,
        ihdi: ihdi(manifest, preds),
    }
}

fn icc_cell(r: &Option<IccResult>) -> String {
    r.map_or("-".into(), |r| format!("{:.3} [{:.3}, {:.3}]", r.icc, r.ci_low, r.ci_high))
}

/// Plain-text tables: agreement per modality, then classification.
pub fn render_tables(v: &ValidationReport) -> String {
    let mut s = String::new();
    let level = (1.0 - v.alpha_level) * 100.0;
    for (title, modality) in [("Ultrasound agreement", Modality::Ultrasound), ("X-ray agreement", Modality::Xray)] {
        let rows: Vec<_> = metrics()
            .into_iter()
            .filter(|(_, m, _)| *m == modality)
            .filter_map(|(name, _, _)| v.agreement.get(name).map(|a| (name, a)))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(s, "{title} (experimental)");
        let _ = writeln!(
            s,
            "{:<24} {:>4} {:>5}  {:<28} {:<28}",
            "metric",
            "n",
            "excl",
            format!("ICC absolute [{level:.0}% CI]"),
            format!("ICC consistency [{level:.0}% CI]")
        );
        for (name, a) in rows {
            let _ = write!(
                s,
                "{:<24} {:>4} {:>5}  {:<28} {:<28}",
                name,
                a.n,
                a.excluded,
                icc_cell(&a.absolute_agreement),
                icc_cell(&a.consistency)
            );
            if let Some(e) = &a.error {
                let _ = write!(s, " {e}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    if let Some(ihdi) = &v.ihdi {
        let _ = writeln!(s, "IHDI classification (experimental)");
        let _ = writeln!(s, "{:<32} {:>4} {:>9} {:>9} {:>9}", "task", "n", "precision", "recall", "f1");
        let mut row = |task: &str, n: usize, sc: &Scores| {
            let flag = if sc.zero_division { " (zero division)" } else { "" };
            let _ = writeln!(s, "{:<32} {:>4} {:>9.3} {:>9.3} {:>9.3}{flag}", task, n, sc.precision, sc.recall, sc.f1);
        };
        for (side, c) in [("left", &ihdi.left), ("right", &ihdi.right)] {
            if let Some(c) = c {
                row(&format!("{side} grades 0-4 (macro)"), c.n, &c.macro_scores);
            }
        }
        let sc = &ihdi.screening;
        row("grade 1 vs grades 2-4 (binary)", sc.n, &sc.binary);
        let _ = writeln!(s, "status-0 hips counted abnormal: {}", sc.status0);
    }
    s
}
