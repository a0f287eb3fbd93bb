use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentKind;
use crate::error::CliError;

pub const RECORD_FILE: &str = "run_record.json";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// Measured value; `None` when it is not finite.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scalars: BTreeMap<String, f64>,
    /// `(x, y)` pairs, e.g. `(t, C(t))` or `(N, e(T))`.
    pub series: BTreeMap<String, Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub status: Status,
    pub error: Option<String>,
    pub artifacts: Vec<Artifact>,
    pub assertions: Vec<Assertion>,
    pub metrics: Metrics,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = dir.as_ref().join(RECORD_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }

    /// `path -> sha256` for every artifact.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.artifacts.iter().map(|a| (a.path.clone(), a.sha256.clone())).collect()
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Number formatting shared by every text artifact: shortest round-trip
/// form, scientific outside `[1e-4, 1e6)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Output directory of one experiment while it runs.
pub struct RunContext {
    pub kind: ExperimentKind,
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    assertions: Vec<Assertion>,
    metrics: Metrics,
    started: u64,
}

impl RunContext {
    pub fn create(kind: ExperimentKind, dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let _ = std::fs::remove_file(dir.join(FAILED_MARKER));
        Ok(Self {
            kind,
            dir,
            artifacts: Vec::new(),
            assertions: Vec::new(),
            metrics: Metrics::default(),
            started: now_ms(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// One progress line on standard error.
    pub fn progress(&self, msg: impl std::fmt::Display) {
        eprintln!("[{}] {msg}", self.kind);
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.push_artifact(rel, bytes);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Other(e.to_string());
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
        self.write_bytes(rel, &bytes)
    }

    /// Records files something else wrote below `rel` (a file or a directory).
    pub fn adopt(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if path.is_dir() {
            let mut names: Vec<String> = std::fs::read_dir(&path)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect();
            names.sort();
            for n in names {
                self.adopt(&format!("{rel}/{n}"))?;
            }
        } else {
            let bytes = std::fs::read(&path)?;
            self.push_artifact(rel, &bytes);
        }
        Ok(())
    }

    fn push_artifact(&mut self, rel: &str, bytes: &[u8]) {
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Records a pass/fail line and echoes it to standard error.
    pub fn check(&mut self, name: &str, passed: bool, value: f64, threshold: Option<f64>, detail: impl Into<String>) -> bool {
        let detail = detail.into();
        self.progress(format!(
            "{} {name}: {}{}",
            if passed { "PASS" } else { "FAIL" },
            fmt_num(value),
            if detail.is_empty() { String::new() } else { format!(" ({detail})") }
        ));
        self.assertions.push(Assertion {
            name: name.to_string(),
            passed,
            value: finite(value),
            threshold: threshold.and_then(finite),
            detail,
        });
        passed
    }

    pub fn scalar(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.metrics.scalars.insert(name.to_string(), v);
        }
    }

    pub fn series(&mut self, name: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        let pts: Vec<[f64; 2]> = points
            .into_iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| [x, y])
            .collect();
        self.metrics.series.insert(name.to_string(), pts);
    }

    /// Writes the record; on `Err` also drops the failure marker.
    pub fn finish(mut self, seed: u64, config: serde_json::Value, error: Option<&CliError>) -> Result<RunRecord, CliError> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let status = if error.is_some() {
            Status::Error
        } else if self.assertions.iter().all(|a| a.passed) {
            Status::Passed
        } else {
            Status::Failed
        };
        let record = RunRecord {
            kind: self.kind.name().to_string(),
            seed,
            config,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            status,
            error: error.map(|e| e.to_string()),
            artifacts: self.artifacts,
            assertions: self.assertions,
            metrics: self.metrics,
        };
        let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Other(e.to_string()))?;
        std::fs::write(self.dir.join(RECORD_FILE), text + "\n")?;
        if let Some(e) = error {
            std::fs::write(self.dir.join(FAILED_MARKER), format!("{e}\n"))?;
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(2.5e8), "2.5e8");
    }

    #[test]
    fn record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = RunContext::create(ExperimentKind::KernelTable, dir.path()).unwrap();
        ctx.write_bytes("a/b.txt", b"hello").unwrap();
        ctx.check("ok", true, 1.0, Some(2.0), "");
        ctx.check("inf", false, f64::INFINITY, None, "not finite");
        ctx.series("s", [(1.0, 2.0), (f64::NAN, 1.0)]);
        let rec = ctx.finish(3, serde_json::json!({"seed": 3}), None).unwrap();
        assert_eq!(rec.status, Status::Failed);
        let back = RunRecord::load(dir.path()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.metrics.series["s"], vec![[1.0, 2.0]]);
        assert_eq!(back.artifacts[0].path, "a/b.txt");
        assert!(!dir.path().join(FAILED_MARKER).exists());
    }
}
