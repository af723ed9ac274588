use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL_NAME: &str = "polarprop";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub timestamp: String,
    pub config: &'a RunConfig,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

/// Files read and written by one invocation. Outputs are recorded before
/// they are created so that a failed run can remove whatever it left.
#[derive(Debug)]
pub struct RunFiles {
    out_dir: PathBuf,
    inputs: BTreeSet<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunFiles {
    pub fn new(out_dir: &Path) -> Self {
        RunFiles {
            out_dir: out_dir.to_path_buf(),
            inputs: BTreeSet::new(),
            outputs: Vec::new(),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Path of an input that lives in the output directory (an earlier
    /// stage's artifact), or any other path read by the run.
    pub fn input(&mut self, path: &Path) -> PathBuf {
        // artifacts this same run produced are not inputs
        if !self.outputs.iter().any(|o| o == path) {
            self.inputs.insert(path.to_path_buf());
        }
        path.to_path_buf()
    }

    pub fn artifact_input(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.input(&p)
    }

    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        if !self.outputs.contains(&p) {
            self.outputs.push(p.clone());
        }
        p
    }

    pub fn outputs(&self) -> &[PathBuf] {
        &self.outputs
    }

    pub fn remove_outputs(&self) {
        for p in &self.outputs {
            let _ = std::fs::remove_file(p);
        }
    }

    /// Writes the manifest into the output directory and returns its path.
    pub fn write_manifest(&self, file_name: &str, command: &str, config: &RunConfig) -> Result<PathBuf, CliError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileEntry {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut outputs = self
            .outputs
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(&self.out_dir).unwrap_or(p);
                Ok(FileEntry {
                    path: rel.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command,
            timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            config,
            inputs,
            outputs,
        };
        let path = self.out_dir.join(file_name);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_files_relative_to_out_dir() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "x").unwrap();
        let mut files = RunFiles::new(dir.path());
        files.input(&input);
        let out = files.output("result.csv");
        std::fs::write(&out, "1\n").unwrap();
        let m = files.write_manifest("manifest.json", "test", &RunConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["outputs"][0]["path"], "result.csv");
        assert_eq!(v["command"], "test");
        assert_eq!(v["inputs"].as_array().unwrap().len(), 1);
        assert!(v["timestamp"].as_str().unwrap().ends_with('Z'));

        files.remove_outputs();
        assert!(!out.exists());
        assert!(input.exists());
    }
}
