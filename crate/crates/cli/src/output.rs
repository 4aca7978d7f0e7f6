//! Run directories: fixed file layout, digests and the run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Bumped whenever a file name or column changes.
pub const LAYOUT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub layout_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_secs: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// An output directory being filled by one run.
pub struct RunDir {
    root: PathBuf,
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
}

impl RunDir {
    /// Refuses a non-empty directory unless `force` is set.
    pub fn create(root: &Path, force: bool) -> Result<RunDir, CliError> {
        if root.exists() {
            if !root.is_dir() {
                return Err(CliError::Exists(format!("{} exists and is not a directory", root.display())));
            }
            let occupied = fs::read_dir(root).map_err(|e| CliError::io(root, e))?.next().is_some();
            if occupied && !force {
                return Err(CliError::Exists(format!("{} is not empty (pass --force to overwrite)", root.display())));
            }
        }
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(RunDir { root: root.to_path_buf(), started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest { role: role.into(), path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes one artifact through `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(w).map_err(CliError::from)
        })
    }

    pub fn write_table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        self.write(name, |w| write_csv(w, header, rows))
    }

    /// Writes the manifest last, with digests of every artifact.
    pub fn finish(self, command: &str, config: serde_json::Value, seed: Option<u64>) -> Result<PathBuf, CliError> {
        let mut outputs = Vec::new();
        for name in &self.outputs {
            outputs.push(FileDigest { role: "output".into(), path: name.clone(), sha256: sha256_file(&self.path(name))? });
        }
        let manifest = RunManifest {
            layout_version: LAYOUT_VERSION,
            tool: "ernm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            seed,
            threads: rayon::current_num_threads(),
            inputs: self.inputs,
            outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self.root)
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(w: &mut dyn Write, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let line = |fields: &[String]| fields.iter().map(|f| quote(f)).collect::<Vec<_>>().join(",");
    writeln!(w, "{}", line(header))?;
    for r in rows {
        writeln!(w, "{}", line(r))?;
    }
    Ok(())
}

/// Shortest round-trip representation; `NA` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NA".into()
    }
}

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}
