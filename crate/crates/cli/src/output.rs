use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Record of one command invocation, written next to its primary output.
/// Replaying `args` from `cwd` regenerates every data file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub cwd: PathBuf,
    pub version: String,
    pub config: Value,
    pub seeds: Value,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// Per-invocation settings shared by every command.
pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub json: bool,
    pub args: Vec<String>,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    pub fn new(out_dir: PathBuf, seed: Option<u64>, json: bool, args: Vec<String>) -> Self {
        Self {
            out_dir,
            seed,
            json,
            args,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn path(&self, name: &Path) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Write `bytes` to `name` under the output directory via a temporary
    /// file and a rename.
    pub fn write(&mut self, name: &Path, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &Path, value: &T) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Write the manifest for `primary` once every output is in place.
    pub fn finish(&mut self, command: &str, primary: &Path, config: Value, seeds: Value) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            command: command.into(),
            args: self.args.clone(),
            cwd: std::env::current_dir()?,
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            seeds,
            outputs: self.outputs.clone(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = manifest_path(&self.path(primary));
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    /// Machine-readable summary under `--json`, otherwise `human`.
    pub fn report<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) -> CliResult<()> {
        let mut out = std::io::stdout().lock();
        if self.json {
            serde_json::to_writer(&mut out, value)?;
            writeln!(out)?;
        } else {
            writeln!(out, "{}", human())?;
        }
        Ok(())
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

/// Sibling of `path` with its extension replaced by `suffix`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
