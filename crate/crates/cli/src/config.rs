//! Config files and flag merging.
//!
//! A config file is a JSON object holding the command's options plus the
//! shared `seed`, `out` and `format` keys. Flags given on the command line
//! override file values. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use everlab_core::emit::Format;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EVERLAB_OUT_DIR";

pub const DEFAULT_SEED: u64 = 0;

/// Settings shared by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Common {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl Common {
    fn or(self, base: Common) -> Common {
        Common {
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

/// Resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Options of one command. Implementations also accept the shared keys
/// `seed`, `out` and `format`, which only a config file sets.
pub trait Options: Serialize + DeserializeOwned {
    fn common(&self) -> Common;
}

/// Implements [`Options`] for structs with `seed`, `out` and `format` fields.
#[macro_export]
macro_rules! impl_options {
    ($($t:ty),* $(,)?) => {$(
        impl $crate::config::Options for $t {
            fn common(&self) -> $crate::config::Common {
                $crate::config::Common {
                    seed: self.seed,
                    out: self.out.clone(),
                    format: self.format.clone(),
                }
            }
        }
    )*};
}

fn config_error(path: &Path, e: serde_json::Error) -> CliError {
    CliError::Usage(format!("config `{}`: {e}", path.display()))
}

/// Overlays command-line options onto the config file and resolves the
/// shared settings. Flags win over file values, and `globals` (the shared
/// flags) win over the file's shared keys.
pub fn merge<T: Options>(flags: T, globals: Common, config: Option<&Path>) -> Result<(T, RunSettings), CliError> {
    let opts = match config {
        None => flags,
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
            let file: T = serde_json::from_str(&text).map_err(|e| config_error(path, e))?;
            let Value::Object(mut map) = serde_json::to_value(&file).expect("options serialize") else {
                return Err(CliError::Usage(format!("config `{}`: expected a JSON object", path.display())));
            };
            if let Value::Object(o) = serde_json::to_value(&flags).expect("options serialize") {
                for (k, v) in o {
                    if !v.is_null() {
                        map.insert(k, v);
                    }
                }
            }
            serde_json::from_value(Value::Object(map)).map_err(|e| config_error(path, e))?
        }
    };
    let common = globals.or(opts.common());
    Ok((opts, resolve(common)?))
}

fn resolve(common: Common) -> Result<RunSettings, CliError> {
    let format = match (&common.format, &common.out) {
        (Some(f), _) => f.parse().map_err(CliError::Usage)?,
        (None, Some(path)) => match path.extension().and_then(|e| e.to_str()) {
            Some(ext) => ext.parse().unwrap_or(Format::Json),
            None => Format::Json,
        },
        (None, None) => Format::Json,
    };
    Ok(RunSettings {
        seed: common.seed.unwrap_or(DEFAULT_SEED),
        out: common.out,
        format,
    })
}

/// Where a report goes: `out` as given when absolute, otherwise under the
/// directory named by [`OUT_DIR_ENV`] when that is set. Without `out`, the
/// directory plus `default_name` is used, or stdout when neither is set.
pub fn output_path(out: Option<&Path>, default_name: &str, format: Format) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(PathBuf::from);
    match (out, dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(format!("{default_name}.{}", extension(format)))),
        (None, None) => None,
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Table => "txt",
    }
}
