use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const DEFAULT_OUTPUT_DIR: &str = "wavesym-out";

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes `name` through `fill` and records it for the manifest.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        fill(&mut out)?;
        out.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `<command>.json` holding versions, resolved parameters, results
    /// and the list of files produced; keys are sorted.
    pub fn manifest(mut self, command: &str, params: &impl Serialize, results: Value) -> Result<Value, CliError> {
        let mut files = std::mem::take(&mut self.written);
        files.sort();
        let doc = json!({
            "command": command,
            "versions": {
                "wavesym": wavesym::VERSION,
                "wavesym-cli": env!("CARGO_PKG_VERSION"),
            },
            "params": to_value(params)?,
            "results": results,
            "artifacts": files,
        });
        let name = format!("{command}.json");
        self.write(&name, |out| {
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(std::io::Error::other)?;
            writeln!(out)
        })?;
        Ok(doc)
    }
}

pub fn to_value(v: &impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(format!("cannot serialize: {e}")))
}
