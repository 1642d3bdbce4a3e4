//! Output directory bookkeeping: every file written goes through [`Output`]
//! so the manifest lists all of them.

use std::fs;
use std::path::{Path, PathBuf};

use dtqw_core::{StepWindow, WalkConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmittedFile {
    pub path: String,
    pub kind: FileKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Optimize,
    Compare,
    Decohere,
}

/// Enough to rerun the command: the resolved configuration, the
/// command-specific options and the files produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: &'static str,
    pub config: WalkConfig,
    pub window: StepWindow,
    pub restarts: usize,
    pub seed: u64,
    pub options: serde_json::Value,
    pub output_dir: PathBuf,
    pub emitted_files: Vec<EmittedFile>,
}

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Output {
    dir: PathBuf,
    emitted: Vec<EmittedFile>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            emitted: Vec::new(),
        })
    }

    fn record(&mut self, name: &str, kind: FileKind) -> PathBuf {
        self.emitted.push(EmittedFile {
            path: name.to_string(),
            kind,
        });
        self.dir.join(name)
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.record(name, FileKind::Csv);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.record(name, FileKind::Json);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn svg(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.record(name, FileKind::Svg);
        fs::write(path, content)?;
        Ok(())
    }

    /// Writes `manifest.json` listing every file, itself included.
    pub fn finish(
        mut self,
        command: Command,
        run: &RunConfig,
        options: serde_json::Value,
    ) -> Result<RunManifest, CliError> {
        self.record("manifest.json", FileKind::Json);
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: run.walk.clone(),
            window: run.window,
            restarts: run.restarts,
            seed: run.seed,
            options,
            output_dir: self.dir.clone(),
            emitted_files: self.emitted,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}
