//! Command-line front end. Exit codes: 0 all cases ok, 2 some cases status
//! 0, 1 hard error (unreadable inputs, unwritable outputs, bad usage).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::pipeline::{load_predictions, run_batch, summary_line, write_phantom_set, RunConfig};
use crate::pluginio::backend::{phantom_oracle, precomputed, serve, BackendCommand};
use crate::pluginio::manifest::{load_manifest, Modality};
use crate::pluginio::report::{write_atomic, VALIDATION_FILE};
use crate::ultrasound::CoverageMode;
use crate::validation::{render_tables, validate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HARD: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hipmetrics", version, about = "Rule-based hip dysplasia measurements from segmentation masks (experimental)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure every case of a manifest and write the report tree.
    Analyze(AnalyzeArgs),
    /// Compare existing reports against the manifest's expert values.
    Validate(ValidateArgs),
    /// Generate seeded phantom cases and a manifest for them.
    Phantom(PhantomArgs),
    /// Print the manifest, backend protocol and report formats.
    Formats,
    /// Run a bundled backend: one request on stdin, one response on stdout.
    Backend {
        #[arg(value_enum)]
        kind: BundledBackend,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BundledBackend {
    Precomputed,
    PhantomOracle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModalityArg {
    #[value(alias = "us")]
    Ultrasound,
    #[value(alias = "x-ray")]
    Xray,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Ultrasound => Modality::Ultrasound,
            ModalityArg::Xray => Modality::Xray,
        }
    }
}

/// Settings shared by flags and the `--config` file. Flags win.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Segmentation backend executable; masks come from the manifest when absent.
    #[arg(long)]
    pub backend: Option<PathBuf>,
    /// Extra argument passed to the backend (repeatable).
    #[arg(long = "backend-arg", allow_hyphen_values = true)]
    #[serde(default)]
    pub backend_args: Vec<String>,
    /// Backend timeout per case, seconds.
    #[arg(long)]
    pub timeout_s: Option<f64>,
    /// Turning-angle window for ultrasound corner detection, vertices.
    #[arg(long)]
    pub curvature_window: Option<usize>,
    /// Also report the Graf class from the alpha angle.
    #[arg(long)]
    #[serde(default)]
    pub graf_class: bool,
    #[arg(long, value_enum)]
    pub coverage_mode: Option<CoverageMode>,
    /// Two-sided significance level for ICC confidence intervals.
    #[arg(long)]
    pub alpha_level: Option<f64>,
}

impl Settings {
    fn merged(self, file: Settings) -> Settings {
        Settings {
            workers: self.workers.or(file.workers),
            backend: self.backend.or(file.backend),
            backend_args: if self.backend_args.is_empty() { file.backend_args } else { self.backend_args },
            timeout_s: self.timeout_s.or(file.timeout_s),
            curvature_window: self.curvature_window.or(file.curvature_window),
            graf_class: self.graf_class || file.graf_class,
            coverage_mode: self.coverage_mode.or(file.coverage_mode),
            alpha_level: self.alpha_level.or(file.alpha_level),
        }
    }

    pub fn to_run_config(&self) -> Result<RunConfig, String> {
        let workers = self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let mut cfg = RunConfig { workers, ..RunConfig::default() };
        if cfg.workers == 0 {
            return Err("--workers must be at least 1".into());
        }
        if let Some(t) = self.timeout_s {
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("--timeout-s {t} must be positive"));
            }
            cfg.timeout = Duration::from_secs_f64(t);
        }
        if let Some(w) = self.curvature_window {
            if w == 0 {
                return Err("--curvature-window must be at least 1".into());
            }
            cfg.us.curvature_window = w;
        }
        cfg.us.graf_class = self.graf_class;
        if let Some(m) = self.coverage_mode {
            cfg.us.coverage_mode = m;
        }
        if let Some(a) = self.alpha_level {
            if !(a > 0.0 && a < 1.0) {
                return Err(format!("--alpha-level {a} outside (0, 1)"));
            }
            cfg.alpha_level = a;
        }
        cfg.backend = self.backend.clone().map(|p| BackendCommand::new(p, self.backend_args.clone()));
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Case manifest (see `hipmetrics formats`)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for <case_id>/report.json, overlay.svg and validation.json
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with any of the settings below, keyed by their snake_case names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Case manifest with expert values
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report tree from `analyze` (default: --out).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Directory for validation.json
    #[arg(long)]
    pub out: PathBuf,
    /// Two-sided significance level for ICC confidence intervals (default 0.05)
    #[arg(long)]
    pub alpha_level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum)]
    pub modality: ModalityArg,
    /// Number of cases
    #[arg(long)]
    pub n: usize,
    /// Random seed; equal seeds give identical cases
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the cases and manifest.json
    #[arg(long)]
    pub out: PathBuf,
}

fn load_settings(path: &Path) -> Result<Settings, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let file = match a.config.as_deref().map(load_settings).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return hard(err, &e),
    };
    let cfg = match a.settings.merged(file).to_run_config() {
        Ok(c) => c,
        Err(e) => return hard(err, &e),
    };
    let manifest = match load_manifest(&a.manifest) {
        Ok(m) => m,
        Err(e) => return hard(err, &e.to_string()),
    };
    match run_batch(&manifest, &cfg, &a.out) {
        Ok(batch) => {
            for r in &batch.reports {
                let _ = writeln!(out, "{}", summary_line(r));
            }
            let failed = batch.reports.iter().filter(|r| r.status == 0).count();
            let _ = writeln!(out, "{} case(s), {} with status 0; reports in {}", batch.reports.len(), failed, a.out.display());
            if batch.all_ok() {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            }
        }
        Err(e) => hard(err, &format!("writing reports: {e}")),
    }
}

fn validate_cmd(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let alpha_level = a.alpha_level.unwrap_or(0.05);
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return hard(err, &format!("--alpha-level {alpha_level} outside (0, 1)"));
    }
    let manifest = match load_manifest(&a.manifest) {
        Ok(m) => m,
        Err(e) => return hard(err, &e.to_string()),
    };
    let pred_dir = a.predictions.as_deref().unwrap_or(&a.out);
    if !pred_dir.is_dir() {
        return hard(err, &format!("predictions directory {} does not exist", pred_dir.display()));
    }
    let preds = load_predictions(&manifest, pred_dir);
    let v = validate(&manifest, &preds, alpha_level);
    if let Err(e) = std::fs::create_dir_all(&a.out).and_then(|_| write_atomic(&a.out.join(VALIDATION_FILE), v.to_json().as_bytes())) {
        return hard(err, &format!("writing {}: {e}", a.out.join(VALIDATION_FILE).display()));
    }
    let _ = write!(out, "{}", render_tables(&v));
    EXIT_OK
}

fn phantom_cmd(a: PhantomArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if a.n == 0 {
        return hard(err, "--n must be at least 1");
    }
    match write_phantom_set(a.modality.into(), a.n, a.seed, &a.out) {
        Ok(m) => {
            let _ = writeln!(out, "{} phantom case(s) and manifest.json written to {}", m.cases.len(), a.out.display());
            EXIT_OK
        }
        Err(e) => hard(err, &format!("writing phantoms: {e}")),
    }
}

fn hard(err: &mut dyn Write, msg: &str) -> i32 {
    let _ = writeln!(err, "error: {msg}");
    EXIT_HARD
}

pub const FORMATS: &str = include_str!("formats.txt");

/// Runs the CLI with explicit streams; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_HARD;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Analyze(a) => analyze(a, out, err),
        Command::Validate(a) => validate_cmd(a, out, err),
        Command::Phantom(a) => phantom_cmd(a, out, err),
        Command::Formats => {
            let _ = write!(out, "{FORMATS}");
            EXIT_OK
        }
        Command::Backend { kind } => {
            let handler = match kind {
                BundledBackend::Precomputed => precomputed,
                BundledBackend::PhantomOracle => phantom_oracle,
            };
            match serve(handler, std::io::stdin().lock(), out) {
                Ok(()) => EXIT_OK,
                Err(e) => hard(err, &e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("hipmetrics").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_are_hard() {
        let (code, _, err) = run_str(&["phantom", "--modality", "us", "--n", "0", "--out", "/tmp/x"]);
        assert_eq!(code, EXIT_HARD);
        assert!(err.contains("--n"));
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_HARD);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_manifest_is_hard() {
        let (code, _, err) = run_str(&["analyze", "--manifest", "/nonexistent/m.json", "--out", "/tmp/never"]);
        assert_eq!(code, EXIT_HARD);
        assert!(err.contains("cannot read manifest"));
    }

    #[test]
    fn flags_override_config_file() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("c.json");
        std::fs::write(&p, r#"{"workers": 3, "curvature_window": 9, "coverage_mode": "area"}"#).unwrap();
        let flags = Settings { workers: Some(2), ..Default::default() };
        let cfg = flags.merged(load_settings(&p).unwrap()).to_run_config().unwrap();
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.us.curvature_window, 9);
        assert_eq!(cfg.us.coverage_mode, CoverageMode::Area);
        std::fs::write(&p, r#"{"wokers": 3}"#).unwrap();
        assert!(load_settings(&p).is_err());
    }

    #[test]
    fn formats_documents_every_file() {
        let (code, out, _) = run_str(&["formats"]);
        assert_eq!(code, EXIT_OK);
        for needle in ["manifest.json", "BackendRequest", "BackendResponse", "report.json", "validation.json", "overlay.svg"] {
            assert!(out.contains(needle), "{needle}");
        }
    }
}
