//! Run manifests: `<artifact>.manifest.json` beside every artifact.
//!
//! A manifest records the tool version, a hash of the settings that shaped
//! the artifact, and SHA-256 digests of the artifact and of every input.
//! Paths are relative to the artifact's directory and nothing time-dependent
//! is stored, so re-running a stage on unchanged inputs reproduces the
//! manifest byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const TOOL: &str = "nerforge";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub config_hash: String,
    pub artifact: FileDigest,
    pub inputs: Vec<FileDigest>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Digest of a file, or of a directory as the sorted list of its files'
/// names and digests.
pub fn sha256_path(path: &Path) -> Result<String, PipelineError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut h = Sha256::new();
        for e in entries {
            let name = e.file_name().unwrap_or_default().to_string_lossy().into_owned();
            h.update(name.as_bytes());
            h.update([0]);
            h.update(sha256_path(&e)?.as_bytes());
            h.update(b"\n");
        }
        Ok(hex(&h.finalize()))
    } else {
        let data = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Ok(sha256_bytes(&data))
    }
}

/// Hash of a stage's settings in canonical JSON form.
pub fn config_hash(settings: &serde_json::Value) -> String {
    sha256_bytes(settings.to_string().as_bytes())
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn relative_to(path: &Path, dir: &Path) -> String {
    let rel = pathdiff::diff_paths(absolute(path), absolute(dir)).unwrap_or_else(|| path.to_path_buf());
    rel.to_string_lossy().replace('\\', "/")
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(SUFFIX);
    artifact.with_file_name(name)
}

fn artifact_dir(artifact: &Path) -> PathBuf {
    match artifact.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes `data` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, data: &[u8]) -> Result<(), PipelineError> {
    let dir = artifact_dir(path);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(&dir, e))?;
    tmp.write_all(data).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Writes an artifact and its manifest.
pub fn write_artifact(
    path: &Path,
    data: &[u8],
    stage: &str,
    settings: &serde_json::Value,
    inputs: &[&Path],
) -> Result<Manifest, PipelineError> {
    let dir = artifact_dir(path);
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: relative_to(p, &dir),
                sha256: sha256_path(p)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    write_atomic(path, data)?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        stage: stage.into(),
        config_hash: config_hash(settings),
        artifact: FileDigest {
            path: relative_to(path, &dir),
            sha256: sha256_bytes(data),
        },
        inputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&manifest_path(path), text.as_bytes())?;
    Ok(manifest)
}

/// Freshness of one manifest's artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Freshness {
    pub manifest: String,
    pub artifact: String,
    /// Empty when the artifact is current.
    pub problems: Vec<String>,
}

impl Freshness {
    pub fn is_fresh(&self) -> bool {
        self.problems.is_empty()
    }
}

fn check_digest(dir: &Path, d: &FileDigest, role: &str) -> Option<String> {
    let p = dir.join(&d.path);
    if !p.exists() {
        return Some(format!("{role} {} is missing", d.path));
    }
    match sha256_path(&p) {
        Ok(h) if h == d.sha256 => None,
        Ok(_) => Some(format!("{role} {} changed", d.path)),
        Err(e) => Some(format!("{role} {}: {e}", d.path)),
    }
}

/// Checks one manifest against the files on disk.
pub fn check_manifest(manifest_file: &Path) -> Result<Freshness, PipelineError> {
    let text = std::fs::read_to_string(manifest_file).map_err(|e| io_err(manifest_file, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Input {
        path: manifest_file.display().to_string(),
        message: e.to_string(),
    })?;
    let dir = artifact_dir(manifest_file);
    let mut problems = Vec::new();
    if m.tool != TOOL || m.version != VERSION {
        problems.push(format!("written by {} {}, this is {TOOL} {VERSION}", m.tool, m.version));
    }
    problems.extend(check_digest(&dir, &m.artifact, "artifact"));
    for input in &m.inputs {
        problems.extend(check_digest(&dir, input, "input"));
    }
    Ok(Freshness {
        manifest: manifest_file.display().to_string(),
        artifact: m.artifact.path,
        problems,
    })
}

/// Checks every manifest in `dir`, in file-name order. An artifact built
/// from a stale artifact is stale too, however far downstream.
pub fn verify_dir(dir: &Path) -> Result<Vec<Freshness>, PipelineError> {
    let mut manifests: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(SUFFIX))
        .collect();
    manifests.sort();
    let mut checked = Vec::new();
    for m in &manifests {
        let text = std::fs::read_to_string(m).map_err(|e| io_err(m, e))?;
        let parsed: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Input {
            path: m.display().to_string(),
            message: e.to_string(),
        })?;
        let inputs: Vec<PathBuf> = parsed.inputs.iter().map(|i| absolute(&dir.join(&i.path))).collect();
        checked.push((absolute(&dir.join(&parsed.artifact.path)), inputs, check_manifest(m)?));
    }
    loop {
        let stale: Vec<PathBuf> = checked
            .iter()
            .filter(|(_, _, f)| !f.is_fresh())
            .map(|(a, _, _)| a.clone())
            .collect();
        let mut changed = false;
        for (_, inputs, f) in checked.iter_mut().filter(|(_, _, f)| f.is_fresh()) {
            if let Some(up) = inputs.iter().find(|i| stale.contains(i)) {
                let name = up.file_name().unwrap_or_default().to_string_lossy();
                f.problems.push(format!("input {name} is stale"));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(checked.into_iter().map(|(_, _, f)| f).collect())
}
