//! Artifacts, verdicts and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

/// Everything an experiment produces; files are written by the caller.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn file(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.artifacts.push((name.into(), contents.into()));
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            verdict: Verdict::from_bool(ok),
            detail: detail.into(),
        });
    }

    pub fn skip(&mut self, name: &str, why: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            verdict: Verdict::Skipped,
            detail: why.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    /// Every file of the output directory, this manifest included.
    pub files: Vec<String>,
    pub verdicts: BTreeMap<String, CheckRecord>,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

/// Prepares `dir` for a run: files listed by an earlier manifest are
/// removed, anything else makes the directory unusable.
pub fn prepare_output_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let old = dir.join(MANIFEST);
    if let Ok(text) = fs::read_to_string(&old) {
        if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
            for f in &m.files {
                let p = dir.join(f);
                if p.parent() == Some(dir) && p.is_file() {
                    fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
                }
            }
        }
    }
    let mut foreign: Vec<String> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    if !foreign.is_empty() {
        foreign.sort();
        return Err(CliError::Run(format!(
            "output directory {} holds files from another source: {foreign:?}",
            dir.display()
        )));
    }
    Ok(())
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| io_err(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_serialize_lowercase() {
        assert_eq!(serde_json::to_string(&Verdict::Skipped).unwrap(), "\"skipped\"");
        assert_eq!(Verdict::from_bool(false), Verdict::Fail);
    }

    #[test]
    fn skipped_checks_do_not_fail_a_run() {
        let mut o = Outcome::default();
        o.check("a", true, "");
        o.skip("b", "not applicable");
        assert!(o.all_pass());
        o.check("c", false, "");
        assert!(!o.all_pass());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn output_dir_reuse_and_foreign_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        prepare_output_dir(&dir).unwrap();
        write_file(&dir, "a.csv", "x\n").unwrap();
        let m = RunManifest {
            experiment: "mean-value".into(),
            config_sha256: String::new(),
            version: String::new(),
            seed: 0,
            threads: 1,
            wall_clock_seconds: 0.0,
            files: vec!["a.csv".into(), MANIFEST.into()],
            verdicts: BTreeMap::new(),
            warnings: Vec::new(),
            error: None,
        };
        write_file(&dir, MANIFEST, &serde_json::to_string(&m).unwrap()).unwrap();
        prepare_output_dir(&dir).unwrap();
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 0);
        write_file(&dir, "notes.txt", "mine").unwrap();
        assert!(matches!(prepare_output_dir(&dir), Err(CliError::Run(_))));
    }
}
