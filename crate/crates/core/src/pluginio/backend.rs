//! Process-boundary segmentation backends.
//!
//! A backend is any executable that reads one [`BackendRequest`] JSON
//! document from stdin and writes one [`BackendResponse`] document to stdout,
//! then exits 0. Two backends ship inside the `hipmetrics` binary
//! (`hipmetrics backend precomputed` and `hipmetrics backend phantom-oracle`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::manifest::{CaseRecord, Modality};
use super::report::write_atomic;
use crate::phantom::{gen_us_phantom, gen_xray_phantom, UsPhantomSpec, XrayPhantomSpec};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub protocol_version: u32,
    pub case_id: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    pub label_map: BTreeMap<u8, String>,
    pub output_dir: PathBuf,
}

impl BackendRequest {
    pub fn for_case(case: &CaseRecord, output_dir: &Path) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            case_id: case.case_id.clone(),
            modality: case.modality,
            image_path: case.image_path.clone(),
            mask_path: case.mask_path.clone(),
            label_map: case.label_map.clone(),
            output_dir: output_dir.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub mask_path: PathBuf,
    /// Structure name to confidence in [0, 1].
    pub confidence: BTreeMap<String, f64>,
    pub backend_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Exit,
    Parse,
    Timeout,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("backend failure ({kind:?}): {message}")]
pub struct BackendFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl BackendFailure {
    fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

/// Executable plus leading arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl BackendCommand {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self { program: program.into(), args }
    }
}

fn drain<R: Read + Send + 'static>(mut r: R) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        let _ = tx.send(buf);
    });
    rx
}

fn tail(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes);
    let t = s.trim();
    let start = t.char_indices().rev().nth(400).map_or(0, |(i, _)| i);
    t[start..].to_string()
}

/// Runs one request through a backend process, killing it after `timeout`.
pub fn run_backend(cmd: &BackendCommand, req: &BackendRequest, timeout: Duration) -> Result<BackendResponse, BackendFailure> {
    let start = Instant::now();
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| BackendFailure::new(FailureKind::Exit, format!("cannot start {}: {e}", cmd.program.display())))?;
    let stdout = drain(child.stdout.take().expect("piped stdout"));
    let stderr = drain(child.stderr.take().expect("piped stderr"));
    if let Some(mut stdin) = child.stdin.take() {
        let body = serde_json::to_vec(req).expect("request serializes");
        // A backend that exits without reading its input shows up below.
        let _ = stdin.write_all(&body).and_then(|_| stdin.write_all(b"\n"));
    }
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(BackendFailure::new(FailureKind::Timeout, format!("no response within {:.1} s", timeout.as_secs_f64())));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(BackendFailure::new(FailureKind::Exit, format!("wait failed: {e}"))),
        }
    };
    // Grandchildren may keep the pipes open; never wait on them past the deadline.
    let grace = timeout.saturating_sub(start.elapsed()).max(Duration::from_millis(200));
    let out = stdout.recv_timeout(grace).unwrap_or_default();
    if !status.success() {
        let err = stderr.recv_timeout(Duration::from_millis(200)).unwrap_or_default();
        return Err(BackendFailure::new(FailureKind::Exit, format!("exited with {status}: {}", tail(&err))));
    }
    let mut resp: BackendResponse =
        serde_json::from_slice(&out).map_err(|e| BackendFailure::new(FailureKind::Parse, format!("malformed response: {e}")))?;
    if resp.mask_path.is_relative() {
        resp.mask_path = req.output_dir.join(&resp.mask_path);
    }
    for (name, c) in &resp.confidence {
        if !(0.0..=1.0).contains(c) {
            return Err(BackendFailure::new(FailureKind::Parse, format!("confidence {c} for `{name}` outside [0, 1]")));
        }
        if !req.label_map.values().any(|s| s == name) {
            return Err(BackendFailure::new(FailureKind::Parse, format!("confidence for unknown structure `{name}`")));
        }
    }
    Ok(resp)
}

fn full_confidence(req: &BackendRequest) -> BTreeMap<String, f64> {
    req.label_map.values().map(|s| (s.clone(), 1.0)).collect()
}

/// Echoes the manifest's mask.
pub fn precomputed(req: &BackendRequest) -> Result<BackendResponse, String> {
    let mask = req.mask_path.clone().ok_or("request has no mask_path")?;
    if !mask.is_file() {
        return Err(format!("mask {} does not exist", mask.display()));
    }
    Ok(BackendResponse {
        mask_path: mask,
        confidence: full_confidence(req),
        backend_version: format!("precomputed {}", env!("CARGO_PKG_VERSION")),
    })
}

/// Regenerates the phantom whose ground-truth record `image_path` points to.
pub fn phantom_oracle(req: &BackendRequest) -> Result<BackendResponse, String> {
    let truth_path = req.image_path.as_ref().ok_or("request has no image_path (phantom truth record)")?;
    let text = std::fs::read_to_string(truth_path).map_err(|e| format!("{}: {e}", truth_path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("truth record: {e}"))?;
    let spec = value.get("spec").cloned().ok_or("truth record has no `spec`")?;
    let mask = match req.modality {
        Modality::Ultrasound => {
            let spec: UsPhantomSpec = serde_json::from_value(spec).map_err(|e| format!("spec: {e}"))?;
            gen_us_phantom(&spec).map_err(|e| e.to_string())?.0
        }
        Modality::Xray => {
            let spec: XrayPhantomSpec = serde_json::from_value(spec).map_err(|e| format!("spec: {e}"))?;
            gen_xray_phantom(&spec).map_err(|e| e.to_string())?.0
        }
    };
    let mut png = Vec::new();
    mask.write_png(&mut png).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&req.output_dir).map_err(|e| e.to_string())?;
    let path = req.output_dir.join("mask.png");
    write_atomic(&path, &png).map_err(|e| e.to_string())?;
    Ok(BackendResponse {
        mask_path: PathBuf::from("mask.png"),
        confidence: full_confidence(req),
        backend_version: format!("phantom-oracle {}", env!("CARGO_PKG_VERSION")),
    })
}

/// Request/response loop body for an in-binary backend.
pub fn serve(
    handler: fn(&BackendRequest) -> Result<BackendResponse, String>,
    input: impl Read,
    mut output: impl Write,
) -> Result<(), String> {
    let req: BackendRequest = serde_json::from_reader(input).map_err(|e| format!("bad request: {e}"))?;
    let resp = handler(&req)?;
    serde_json::to_writer(&mut output, &resp).map_err(|e| e.to_string())?;
    output.write_all(b"\n").map_err(|e| e.to_string())
}
