//! Content-addressed job records.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a job key from tagged fields.
#[derive(Clone)]
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        KeyBuilder(h)
    }

    pub fn field(mut self, name: &str, value: impl AsRef<[u8]>) -> Self {
        let v = value.as_ref();
        self.0.update([0u8]);
        self.0.update(name.as_bytes());
        self.0.update((v.len() as u64).to_le_bytes());
        self.0.update(v);
        self
    }

    pub fn finish(self) -> String {
        hex(&self.0.finalize())
    }
}

/// SHA-256 of a file, or of a directory's regular files (names and bytes, sorted).
pub fn content_hash(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut files: Vec<PathBuf> = if path.is_dir() {
        std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files.sort();
    let mut buf = vec![0u8; 1 << 16];
    for f in files {
        if path.is_dir() {
            h.update(f.file_name().map(|n| n.as_encoded_bytes().to_vec()).unwrap_or_default());
            h.update([0u8]);
        }
        let mut file = File::open(&f)?;
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
    }
    Ok(hex(&h.finalize()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub key: String,
    pub stage: String,
    pub label: String,
    pub status: JobStatus,
    pub artifacts: Vec<PathBuf>,
    /// Hash of the primary artifact, used in downstream keys.
    pub output_hash: String,
    #[serde(default)]
    pub result: serde_json::Value,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub error: Option<String>,
    pub wall_time_secs: f64,
}

pub struct JobCache {
    dir: PathBuf,
    hits: AtomicUsize,
    executed: AtomicUsize,
}

impl JobCache {
    pub fn open(dir: &Path) -> Result<JobCache> {
        std::fs::create_dir_all(dir)?;
        Ok(JobCache {
            dir: dir.to_path_buf(),
            hits: AtomicUsize::new(0),
            executed: AtomicUsize::new(0),
        })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A finished record whose artifacts still exist.
    pub fn lookup(&self, key: &str) -> Option<JobRecord> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let rec: JobRecord = serde_json::from_str(&text).ok()?;
        (rec.status == JobStatus::Done && rec.artifacts.iter().all(|a| a.exists())).then_some(rec)
    }

    pub fn store(&self, rec: &JobRecord) -> Result<()> {
        let tmp = self.dir.join(format!(".{}.tmp", rec.key));
        std::fs::write(&tmp, serde_json::to_string_pretty(rec)?)?;
        std::fs::rename(tmp, self.path(&rec.key))?;
        Ok(())
    }

    pub fn note_hit(&self) {
        self.hits.fetch_add(1, Ordering::Relaxed);
    }

    pub fn note_executed(&self) {
        self.executed.fetch_add(1, Ordering::Relaxed);
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn executed(&self) -> usize {
        self.executed.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_every_field() {
        let base = KeyBuilder::new("encode").field("template", "x {input}").field("bitrate", "600");
        let a = base.clone().finish();
        assert_eq!(a, base.clone().finish());
        assert_ne!(a, KeyBuilder::new("encode").field("template", "x {input} ").field("bitrate", "600").finish());
        assert_ne!(a, KeyBuilder::new("encode").field("template", "x {input}").field("bitrate", "601").finish());
        // field boundaries are unambiguous
        assert_ne!(
            KeyBuilder::new("s").field("a", "bc").finish(),
            KeyBuilder::new("s").field("ab", "c").finish()
        );
    }

    #[test]
    fn lookup_requires_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cache = JobCache::open(&dir.path().join("cache")).unwrap();
        let art = dir.path().join("a.bin");
        std::fs::write(&art, b"x").unwrap();
        let rec = JobRecord {
            key: "k".into(),
            stage: "encode".into(),
            label: "l".into(),
            status: JobStatus::Done,
            artifacts: vec![art.clone()],
            output_hash: content_hash(&art).unwrap(),
            result: serde_json::Value::Null,
            stdout: String::new(),
            stderr: String::new(),
            error: None,
            wall_time_secs: 0.1,
        };
        cache.store(&rec).unwrap();
        assert_eq!(cache.lookup("k"), Some(rec));
        std::fs::remove_file(&art).unwrap();
        assert_eq!(cache.lookup("k"), None);
    }

    #[test]
    fn directory_hash_sees_names_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("1.png"), b"a").unwrap();
        let h1 = content_hash(dir.path()).unwrap();
        std::fs::write(dir.path().join("2.png"), b"a").unwrap();
        let h2 = content_hash(dir.path()).unwrap();
        assert_ne!(h1, h2);
        std::fs::write(dir.path().join("2.png"), b"b").unwrap();
        assert_ne!(h2, content_hash(dir.path()).unwrap());
    }
}
