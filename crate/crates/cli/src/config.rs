//! Config loading shared by the subcommands. Relative paths in a config file
//! resolve against the directory holding that file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::CliError;

pub struct Loaded<T> {
    pub value: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// An input the user supplies; absence is a config error.
    pub fn input(&self, p: &Path, what: &str) -> Result<PathBuf, CliError> {
        let path = self.resolve(p);
        if !path.is_file() {
            return Err(CliError::Config(format!("{what} {} does not exist", path.display())));
        }
        Ok(path)
    }

    /// An output of an earlier subcommand; absence is a missing artifact.
    pub fn artifact(&self, p: &Path, what: &str) -> Result<PathBuf, CliError> {
        let path = self.resolve(p);
        if !path.is_file() {
            return Err(CliError::MissingArtifact { path, what: what.into() });
        }
        Ok(path)
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { value, base })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn check_quantile(name: &str, q: f64) -> Result<(), CliError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie strictly between 0 and 1, got {q}")))
    }
}

/// Creates the output directory if needed.
pub fn output_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

pub fn create(dir: &Path, name: &str) -> Result<fs::File, CliError> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
