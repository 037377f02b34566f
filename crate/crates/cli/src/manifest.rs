use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_ctx, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to regenerate the files of one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, without `--out`; replayed by `rerun`.
    pub args: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = io_ctx(fs::read_to_string(path), path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Core {
            context: path.display().to_string(),
            source: auction_core::ParseError::Json(e).into(),
        })
    }
}

/// Drops `--out <dir>` / `--out=<dir>` from raw arguments.
pub fn strip_out(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

/// Collects output files and writes them plus the manifest into one directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        io_ctx(fs::create_dir_all(dir), dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        io_ctx(fs::write(&path, contents), &path)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<(), CliError> {
        self.written.sort();
        manifest.outputs = self.written.clone();
        manifest.output_dir = self.dir.clone();
        self.write_json(MANIFEST_FILE, &manifest)
    }
}
