//! `key=value` configuration layered under command-line flags.

use std::path::{Path, PathBuf};

use volseg_core::pipeline::{parse_config, ParamOverrides};

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "VOLSEG_CONFIG";

/// Settings from a config file: pipeline keys plus `threads`.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub path: Option<PathBuf>,
    pub pipeline: ParamOverrides,
    pub threads: Option<usize>,
}

pub fn parse_threads(v: &str) -> CliResult<usize> {
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(CliError::usage(format!("threads must be a positive integer, got '{v}'"))),
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = FileConfig::default();
        for (key, value) in parse_config(text)? {
            if key == "threads" {
                cfg.threads = Some(parse_threads(&value)?);
            } else if !cfg.pipeline.apply(&key, &value)? {
                return Err(CliError::usage(format!("unknown config key '{key}'")));
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    /// `--config` if given, else `$VOLSEG_CONFIG` if set, else empty.
    pub fn load(explicit: Option<&Path>) -> CliResult<Self> {
        if let Some(p) = explicit {
            return Self::read(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::read(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }
}
