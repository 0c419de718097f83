use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Artifacts collected in memory and written only once the command has
/// produced all of them.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Each file goes to a temporary name first and is renamed into place.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            fs::write(&tmp, bytes).map_err(io)?;
            fs::rename(&tmp, dir.join(name)).map_err(io)?;
        }
        Ok(())
    }
}

pub fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> dotswarm::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}
