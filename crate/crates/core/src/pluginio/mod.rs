//! Dataset manifests, segmentation backends and report files.

pub mod backend;
pub mod manifest;
pub mod report;

pub use backend::{run_backend, BackendCommand, BackendFailure, BackendRequest, BackendResponse, FailureKind};
pub use manifest::{load_manifest, CaseRecord, Expert, Manifest, ManifestError, Modality, SideExpert};
pub use report::{write_atomic, write_case, CaseReport};
