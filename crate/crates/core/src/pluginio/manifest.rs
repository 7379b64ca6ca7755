use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const ILIUM_ACETABULUM: &str = "ilium_acetabulum";
pub const FEMORAL_HEAD: &str = "femoral_head";
pub const LEFT_TRIANGLE: &str = "left_triangle";
pub const RIGHT_TRIANGLE: &str = "right_triangle";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest parse error at `{field}` (line {line}, column {column}): {message}")]
    Parse { field: String, line: usize, column: usize, message: String },
    #[error("duplicate case_id `{0}`")]
    DuplicateCaseId(String),
    #[error("case `{case_id}`: {message}")]
    Invalid { case_id: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ultrasound,
    Xray,
}

impl Modality {
    pub fn required_structures(self) -> &'static [&'static str] {
        match self {
            Modality::Ultrasound => &[ILIUM_ACETABULUM, FEMORAL_HEAD],
            Modality::Xray => &[LEFT_TRIANGLE, RIGHT_TRIANGLE],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Ultrasound => "ultrasound",
            Modality::Xray => "xray",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideExpert {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acetabular_index_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiberg_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ihdi_grade: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expert {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<SideExpert>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<SideExpert>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub case_id: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    /// Mask label value to structure name.
    pub label_map: BTreeMap<u8, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert: Option<Expert>,
}

impl CaseRecord {
    /// Label value carrying `structure`, if mapped.
    pub fn label_of(&self, structure: &str) -> Option<u8> {
        self.label_map.iter().find(|(_, s)| s.as_str() == structure).map(|(l, _)| *l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub cases: Vec<CaseRecord>,
}

fn valid_case_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: Manifest = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ManifestError::Parse { field, line: inner.line(), column: inner.column(), message: inner.to_string() }
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), ManifestError> {
        let invalid = |case_id: &str, message: String| ManifestError::Invalid { case_id: case_id.to_string(), message };
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(invalid("-", format!("unsupported schema_version {}", self.schema_version)));
        }
        let mut seen = HashSet::new();
        for c in &self.cases {
            if !valid_case_id(&c.case_id) {
                return Err(invalid(&c.case_id, "case_id may only contain ASCII letters, digits, '.', '_' and '-'".into()));
            }
            if !seen.insert(c.case_id.as_str()) {
                return Err(ManifestError::DuplicateCaseId(c.case_id.clone()));
            }
            if c.label_map.contains_key(&0) {
                return Err(invalid(&c.case_id, "label 0 is background and cannot name a structure".into()));
            }
            for s in c.modality.required_structures() {
                if c.label_of(s).is_none() {
                    return Err(invalid(&c.case_id, format!("label_map has no `{s}` structure")));
                }
            }
            let grades = c.expert.iter().flat_map(|e| [e.left, e.right]).flatten().filter_map(|s| s.ihdi_grade);
            if let Some(g) = grades.into_iter().find(|g| !(1..=4).contains(g)) {
                return Err(invalid(&c.case_id, format!("expert ihdi_grade {g} outside 1-4")));
            }
            let names: HashSet<&str> = c.label_map.values().map(String::as_str).collect();
            if names.len() != c.label_map.len() {
                return Err(invalid(&c.case_id, "label_map maps two labels to the same structure".into()));
            }
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        for c in &mut self.cases {
            fix(&mut c.image_path);
            fix(&mut c.mask_path);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Reads and validates a manifest; relative paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let mut m = Manifest::parse(&text)?;
    m.resolve(path.parent().unwrap_or(Path::new(".")));
    Ok(m)
}
