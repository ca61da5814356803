use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::sim::{sha256_hex, FileHash};

/// Record of one invocation, written as `<subcommand>_manifest.json`.
/// Wall-clock times live in `<subcommand>_timings.json` so the manifest
/// itself is reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub module_versions: BTreeMap<String, String>,
    pub inputs: Vec<FileHash>,
    /// Every file written, relative to the output directory, sorted.
    pub outputs: Vec<FileHash>,
    pub timings: String,
}

pub fn manifest_file(subcommand: &str) -> String {
    format!("{subcommand}_manifest.json")
}

pub fn timings_file(subcommand: &str) -> String {
    format!("{subcommand}_timings.json")
}

pub fn module_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION");
    [
        "core-geometry",
        "flow",
        "rigid-planner",
        "kinematics",
        "trajopt",
        "deformable-mpc",
        "sim-harness",
        "cli",
    ]
    .into_iter()
    .map(|m| (m.to_string(), v.to_string()))
    .chain([("flow-binary-format".to_string(), crate::flow::io::FLOW_VERSION.to_string())])
    .collect()
}

/// Collects written files, input hashes and stage timings for one run.
pub struct Outputs {
    root: PathBuf,
    files: Vec<FileHash>,
    inputs: Vec<FileHash>,
    timings: Vec<(String, f64)>,
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            inputs: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileHash {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.put(rel, text.as_bytes())
    }

    /// Registers files another writer put under `root/prefix`.
    pub fn adopt(&mut self, prefix: &str, rels: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        for rel in rels {
            let rel = if prefix.is_empty() { rel } else { format!("{prefix}/{rel}") };
            let path = self.root.join(&rel);
            let bytes = fs::read(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            self.files.push(FileHash {
                path: rel,
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(())
    }

    pub fn input(&mut self, path: &Path) {
        if let Ok(bytes) = fs::read(path) {
            self.inputs.push(FileHash {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            });
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn finish(mut self, subcommand: &str, config_hash: String, seed: u64) -> Result<RunManifest, CliError> {
        let timings: BTreeMap<&str, f64> = self.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let mut text = serde_json::to_string_pretty(&timings).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(timings_file(subcommand));
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config_hash,
            seed,
            module_versions: module_versions(),
            inputs: self.inputs,
            outputs: self.files,
            timings: timings_file(subcommand),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(manifest_file(subcommand));
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_sorted_outputs_and_keeps_timings_apart() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.put("b.txt", b"two").unwrap();
        out.put("a.txt", b"one").unwrap();
        out.put("b.txt", b"three").unwrap();
        out.stage("work", |_| Ok(())).unwrap();
        let m = out.finish("demo", "h".into(), 4).unwrap();
        let paths: Vec<&str> = m.outputs.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.txt", "b.txt"]);
        assert_eq!(m.outputs[1].sha256, sha256_hex(b"three"));
        assert_eq!(m.timings, "demo_timings.json");
        let text = fs::read_to_string(dir.path().join("demo_manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(!text.contains("work"));
        assert!(fs::read_to_string(dir.path().join("demo_timings.json")).unwrap().contains("work"));
    }

    #[test]
    fn adopt_hashes_existing_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/x"), b"x").unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.adopt("sub", ["x".to_string()]).unwrap();
        assert!(out.adopt("sub", ["missing".to_string()]).is_err());
        let m = out.finish("t", String::new(), 0).unwrap();
        assert_eq!(m.outputs[0].path, "sub/x");
        assert_eq!(m.outputs[0].sha256, sha256_hex(b"x"));
    }
}
