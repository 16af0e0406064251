use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qmonitor::io::CsvTable;

use crate::error::CliResult;

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

/// Output directory that removes what it wrote unless `finish` is called.
pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<OutputEntry>,
    finished: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), created_root, written: Vec::new(), finished: false })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        fs::write(self.root.join(name), contents)?;
        self.written.retain(|e| e.file != name);
        self.written.push(OutputEntry {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> CliResult<()> {
        self.write(name, table.as_str())
    }

    /// Writes manifest.json listing every file with its hash.
    pub fn finish(mut self, command: &str, inputs: Value, results: Value) -> CliResult<PathBuf> {
        let manifest = json!({
            "tool": "qmonitor",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "created": chrono::Utc::now().to_rfc3339(),
            "inputs": inputs,
            "results": results,
            "outputs": self.written,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(self.root.join(MANIFEST), text)?;
        self.finished = true;
        Ok(self.root.join(MANIFEST))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for entry in &self.written {
            let _ = fs::remove_file(self.root.join(&entry.file));
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfinished_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("run");
        {
            let mut out = OutputDir::create(&root).unwrap();
            out.write("a.csv", "x\n1\n").unwrap();
            assert!(root.join("a.csv").exists());
        }
        assert!(!root.exists());
    }

    #[test]
    fn manifest_lists_hashes() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.write("a.csv", "abc").unwrap();
        let path = out.finish("test", json!({}), json!({})).unwrap();
        let manifest: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(
            manifest["outputs"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
