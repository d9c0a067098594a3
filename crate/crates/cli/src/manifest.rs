//! Run manifests: one JSON record per command invocation.
//!
//! A manifest lists the command, a snapshot of its effective settings, the
//! SHA-256 of every input and output, and timings. Its `input_key` hashes
//! command, settings and input hashes; a rerun with the same key names the
//! earlier manifest in `previous` and says whether the outputs came out
//! byte-identical.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use polemos_core::store::jsonl::write_atomic;
use polemos_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub command: String,
    pub config: Value,
    /// Input path to SHA-256 (directories hash their sorted file list).
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub input_key: String,
    /// File name of the latest earlier manifest with the same input key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<String>,
    /// Whether the outputs equal those recorded by `previous`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs_match_previous: Option<bool>,
    pub timings: Timings,
}

pub struct ManifestBuilder {
    command: String,
    config: Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    started_at: DateTime<Utc>,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_at: Utc::now(),
            clock: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(display(path), hash_path(path)?);
        Ok(())
    }

    /// Records an input by a digest of its content rather than a file.
    pub fn input_digest(&mut self, name: &str, digest: String) {
        self.inputs.insert(name.to_string(), digest);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes outputs, links the prior manifest and writes this one into
    /// `runs_dir`. Returns the manifest path.
    pub fn finish(self, runs_dir: &Path) -> Result<(PathBuf, RunManifest)> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            outputs.insert(display(p), hash_path(p)?);
        }
        let key_src = serde_json::to_string(&(&self.command, &self.config, &self.inputs))?;
        let input_key = hex(&Sha256::digest(key_src.as_bytes()));
        let prefix = format!("{}-{}-", self.command, &input_key[..12]);
        let prior = latest_with_prefix(runs_dir, &prefix)?;
        let (previous, outputs_match_previous, seq) = match &prior {
            Some((name, seq)) => {
                let old: RunManifest = serde_json::from_slice(
                    &std::fs::read(runs_dir.join(name)).map_err(|e| io(runs_dir.join(name), e))?,
                )?;
                (Some(name.clone()), Some(old.outputs == outputs), seq + 1)
            }
            None => (None, None, 1),
        };
        let finished_at = Utc::now();
        let manifest = RunManifest {
            version: MANIFEST_VERSION,
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs,
            input_key,
            previous,
            outputs_match_previous,
            timings: Timings {
                started_at: self.started_at,
                finished_at,
                elapsed_ms: self.clock.elapsed().as_millis(),
            },
        };
        let path = runs_dir.join(format!("{prefix}{seq:04}.json"));
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            w.write_all(b"\n").map_err(|e| io(&path, e))
        })?;
        Ok((path, manifest))
    }
}

fn latest_with_prefix(dir: &Path, prefix: &str) -> Result<Option<(String, u32)>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io(dir, e)),
    };
    let mut best: Option<(String, u32)> = None;
    for entry in entries {
        let name = entry.map_err(|e| io(dir, e))?.file_name().to_string_lossy().into_owned();
        let Some(seq) = name
            .strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|s| s.parse::<u32>().ok())
        else {
            continue;
        };
        if best.as_ref().map_or(true, |(_, b)| seq > *b) {
            best = Some((name, seq));
        }
    }
    Ok(best)
}

fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

/// SHA-256 of a file, or of a directory's sorted `(relative path, hash)` list.
pub fn hash_path(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return hash_file(path);
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for (rel, digest) in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update([b'\n']);
    }
    Ok(hex(&h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let p = entry.map_err(|e| io(dir, e))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().into_owned();
            out.push((rel, hash_file(&p)?));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reruns_link_to_previous_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "a").unwrap();
        std::fs::write(&output, "b").unwrap();
        let runs = dir.path().join("runs");
        let run = |out: &str| {
            std::fs::write(&output, out).unwrap();
            let mut m = ManifestBuilder::new("demo", serde_json::json!({"seed": 13}));
            m.input(&input).unwrap();
            m.output(&output);
            m.finish(&runs).unwrap()
        };
        let (p1, m1) = run("b");
        assert!(m1.previous.is_none());
        let (p2, m2) = run("b");
        assert_ne!(p1, p2);
        assert_eq!(m2.input_key, m1.input_key);
        assert_eq!(m2.previous.as_deref(), p1.file_name().and_then(|n| n.to_str()));
        assert_eq!(m2.outputs_match_previous, Some(true));
        let (_, m3) = run("c");
        assert_eq!(m3.outputs_match_previous, Some(false));
        std::fs::write(&input, "changed").unwrap();
        let (_, m4) = run("c");
        assert_ne!(m4.input_key, m1.input_key);
        assert!(m4.previous.is_none());
    }

    #[test]
    fn directory_hash_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a"), "1").unwrap();
        let h1 = hash_path(dir.path()).unwrap();
        std::fs::write(dir.path().join("a"), "2").unwrap();
        assert_ne!(h1, hash_path(dir.path()).unwrap());
        assert_eq!(
            hash_file(&dir.path().join("a")).unwrap(),
            hex(&Sha256::digest(b"2"))
        );
    }
}
