//! Run manifest: digests of every artifact plus stage timings, so two runs
//! of the same configuration can be compared file-by-file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration JSON.
    pub config_sha256: String,
    /// Unix timestamp (seconds) of manifest creation.
    pub generated_at: u64,
    /// Wall-clock seconds per executed stage.
    pub stage_seconds: BTreeMap<String, f64>,
    /// Relative artifact path -> SHA-256 of its bytes. The manifest itself
    /// is excluded.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel: PathBuf = path.strip_prefix(root).unwrap().to_path_buf();
            let rel = rel.to_string_lossy().replace('\\', "/");
            if rel == MANIFEST_FILE {
                continue;
            }
            out.insert(rel, sha256_hex(&std::fs::read(&path)?));
        }
    }
    Ok(())
}

/// Digest every file under `out_dir` (recursively), keyed by relative path.
pub fn digest_dir(out_dir: &Path) -> io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    walk(out_dir, out_dir, &mut out)?;
    Ok(out)
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
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
    fn digest_dir_is_recursive_and_skips_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.json"), b"{}").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/b.csv"), b"x,y\n").unwrap();
        std::fs::write(dir.path().join(MANIFEST_FILE), b"ignored").unwrap();
        let files = digest_dir(dir.path()).unwrap();
        assert_eq!(
            files.keys().collect::<Vec<_>>(),
            vec!["a.json", "sub/b.csv"]
        );
        assert_eq!(files["a.json"], sha256_hex(b"{}"));
    }
}
