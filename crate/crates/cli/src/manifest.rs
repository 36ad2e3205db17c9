//! Run manifest and the artifact writer that feeds it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RunError};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputChecksum {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// A stage that read held-out rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestAccess {
    pub stage: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub inputs: Vec<InputChecksum>,
    pub stages: Vec<StageTiming>,
    /// Paths relative to the output directory, in emission order. Includes
    /// the manifest itself.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub test_access: Vec<TestAccess>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read(&path).map_err(|e| RunError::io(&path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn checksum_file(path: &Path) -> Result<InputChecksum> {
    let bytes = fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok(InputChecksum { path: path.to_path_buf(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// Writes files under one directory and remembers each relative path once.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    /// As [`ArtifactWriter::create`], but first removes the artifacts a
    /// previous run recorded in a manifest there.
    pub fn create_replacing(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        if let Ok(old) = RunManifest::read(dir) {
            for rel in old.artifacts {
                let path = dir.join(&rel);
                if path.is_file() {
                    fs::remove_file(&path).map_err(|e| RunError::io(&path, e))?;
                }
            }
        }
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[String] {
        &self.written
    }

    fn register(&mut self, rel: &str) -> Result<PathBuf> {
        if self.written.iter().any(|w| w == rel) {
            let e = std::io::Error::new(std::io::ErrorKind::AlreadyExists, "artifact already written in this run");
            return Err(RunError::io(rel, e));
        }
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn with_writer<F>(&mut self, rel: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.register(rel)?;
        let file = fs::File::create(&path).map_err(|e| RunError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| RunError::io(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.with_writer(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n").map_err(|e| RunError::io(rel, e))
        })
    }

    pub fn bytes(&mut self, rel: &str, data: &[u8]) -> Result<PathBuf> {
        self.with_writer(rel, |w| w.write_all(data).map_err(|e| RunError::io(rel, e)))
    }

    /// Writes the manifest last, listing itself among the artifacts.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        self.register(MANIFEST_NAME)?;
        manifest.artifacts = self.written.clone();
        let path = self.dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_manifest() -> RunManifest {
        RunManifest {
            tool: "t".into(),
            tool_version: "0".into(),
            config_sha256: String::new(),
            inputs: vec![],
            stages: vec![],
            artifacts: vec![],
            warnings: vec![],
            test_access: vec![],
        }
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn artifacts_listed_once_and_stale_files_removed() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create_replacing(dir.path()).unwrap();
        w.bytes("a.txt", b"x").unwrap();
        w.json("sub/b.json", &[1, 2]).unwrap();
        assert!(w.bytes("a.txt", b"y").is_err());
        let m = w.finish(empty_manifest()).unwrap();
        assert_eq!(m.artifacts, ["a.txt", "sub/b.json", "manifest.json"]);
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);

        fs::write(dir.path().join("keep.txt"), "mine").unwrap();
        ArtifactWriter::create(dir.path()).unwrap();
        assert!(dir.path().join("a.txt").exists());
        let mut w = ArtifactWriter::create_replacing(dir.path()).unwrap();
        assert!(!dir.path().join("a.txt").exists());
        assert!(dir.path().join("keep.txt").exists());
        w.bytes("c.txt", b"z").unwrap();
        w.finish(empty_manifest()).unwrap();
    }
}
