use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, ExperimentError};

/// One emitted data file, held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    pub files: Vec<DataFile>,
    pub results: serde_json::Value,
    /// Human-readable reason when the run stopped early or a check failed;
    /// the report is still emitted, then the CLI exits with status 3.
    pub halt: Option<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

/// Package version plus the `git describe` output captured at build time.
pub fn version_string() -> String {
    match option_env!("TOPOFLOCK_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("v{}-{d}", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Writes the data files, `summary.json` and `manifest.json` into `out_dir`.
/// The manifest lists every other file with its size and SHA-256.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Manifest, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let summary = serde_json::json!({
        "experiment": report.config.experiment,
        "version": version_string(),
        "rng_seed": report.config.rng_seed,
        "wall_clock_seconds": report.wall_clock_seconds,
        "halt": report.halt,
        "config": report.config,
        "data_files": report.files.iter().map(|f| &f.name).collect::<Vec<_>>(),
        "results": report.results,
    });
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)
        .map_err(|e| ExperimentError::io(&out_dir.join("summary.json"), e.into()))?;
    summary_bytes.push(b'\n');

    let mut entries = Vec::with_capacity(report.files.len() + 1);
    let summary_file = DataFile { name: "summary.json".into(), contents: summary_bytes };
    for f in report.files.iter().chain(std::iter::once(&summary_file)) {
        let path = out_dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| ExperimentError::io(&path, e))?;
        entries.push(ManifestEntry {
            name: f.name.clone(),
            bytes: f.contents.len() as u64,
            sha256: hex::encode(Sha256::digest(&f.contents)),
        });
    }
    let manifest = Manifest { files: entries };
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| ExperimentError::io(&path, e.into()))?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{parse_config, Experiment};

    fn empty_report() -> Report {
        let config = parse_config(r#"{"rng_seed": 5}"#, Some(Experiment::MetricsSelftest), None).unwrap();
        Report {
            config,
            files: vec![DataFile { name: "rows.csv".into(), contents: b"a,b\n".to_vec() }],
            results: serde_json::Value::Null,
            halt: None,
            wall_clock_seconds: 0.0,
        }
    }

    #[test]
    fn empty_results_still_produce_a_summary() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_report(&empty_report(), dir.path()).unwrap();
        let names: Vec<&str> = m.files.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["rows.csv", "summary.json"]);
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["rng_seed"], 5);
        assert_eq!(summary["config"]["experiment"], "metrics-selftest");
        assert!(summary["version"].as_str().unwrap().starts_with('v'));
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_report(&empty_report(), dir.path()).unwrap();
        for e in &m.files {
            let bytes = std::fs::read(dir.path().join(&e.name)).unwrap();
            assert_eq!(bytes.len() as u64, e.bytes);
            assert_eq!(hex::encode(Sha256::digest(&bytes)), e.sha256);
        }
        let on_disk: Manifest =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(on_disk, m);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = emit_report(&empty_report(), &blocker.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("sub"));
    }
}
