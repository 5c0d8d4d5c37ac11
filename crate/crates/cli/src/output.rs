//! Artifact writing: atomic files in the output directory and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cmfg_core::{Error, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub struct Outputs {
    dir: Option<PathBuf>,
    argv: Vec<String>,
    inputs: Vec<Value>,
    written: Vec<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    start: Instant,
}

impl Outputs {
    pub fn new(dir: Option<PathBuf>, argv: Vec<String>, threads: Option<usize>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Outputs {
            dir,
            argv,
            inputs: Vec::new(),
            written: Vec::new(),
            seed: None,
            threads,
            start: Instant::now(),
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        self.inputs.push(json!({
            "path": path.display().to_string(),
            "sha256": hex::encode(Sha256::digest(text.as_bytes())),
        }));
        Ok(text)
    }

    /// Writes `name` into the output directory; without one, JSON goes to stdout
    /// and everything else is dropped.
    pub fn write(&mut self, name: &str, bytes: &[u8], to_stdout: bool) -> Result<()> {
        match &self.dir {
            Some(d) => {
                atomic_write(d, name, bytes)?;
                self.written.push(name.to_string());
            }
            None if to_stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
            }
            None => {}
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes(), true)
    }

    /// Like [`Outputs::json`] but never printed to stdout.
    pub fn json_file(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes(), false)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            w.write_record(r).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write(name, &bytes, false)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes(), false)
    }

    /// Writes `manifest.json` when an output directory is set.
    pub fn finish(self, exit_code: u8) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let manifest = json!({
            "argv": self.argv,
            "inputs": self.inputs,
            "seed": self.seed,
            "threads": self.threads,
            "versions": {
                "cmfg": env!("CARGO_PKG_VERSION"),
            },
            "outputs": self.written,
            "exit_code": exit_code,
            "wall_time_seconds": self.start.elapsed().as_secs_f64(),
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        atomic_write(dir, "manifest.json", text.as_bytes())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
