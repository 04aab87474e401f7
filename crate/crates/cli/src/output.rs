use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Output directory, created on first use.
#[derive(Debug, Clone)]
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn new(path: PathBuf) -> Self {
        OutDir(path)
    }

    pub fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        let full = self.0.join(name);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(full)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub fn announce(path: &Path) {
    println!("wrote {}", path.display());
}
