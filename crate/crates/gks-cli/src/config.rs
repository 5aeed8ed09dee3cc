//! Run configuration: a `key = value` file supplies parameter defaults,
//! command line flags override them, and every consumed parameter is echoed
//! into a manifest that reproduces the run.

use std::collections::BTreeMap;
use std::path::Path;

use gks_core::{GksError, Result};

/// Parsed configuration file. Keys are case sensitive and named after the
/// long flags of the command being run (`k`, `M`, `delta`, `k-min`, ..).
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Accepts blank lines and `#` comments; rejects malformed or repeated
    /// keys so typos surface instead of silently falling back to defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(GksError::format(format!(
                    "config line {} is not `key = value`: {raw:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(GksError::format(format!("config line {} has an empty key", idx + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(GksError::format(format!("config sets `{key}` twice")));
            }
        }
        Ok(Self { entries })
    }
}

/// Resolves one command's parameters. Precedence is flag, then config file,
/// then the built-in default; the resolved values accumulate into a manifest
/// whose `key = value` lines feed back through `--config` unchanged.
pub struct Resolver<'a> {
    cfg: &'a Config,
    consumed: Vec<String>,
    manifest: Vec<(String, String)>,
}

/// Resolved parameters of a run, written by `--emit-config`.
pub struct Manifest {
    pub command: &'static str,
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = format!("# gks {} manifest\n", self.command);
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

impl<'a> Resolver<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Resolver {
            cfg,
            consumed: Vec::new(),
            manifest: Vec::new(),
        }
    }

    fn file_value(&mut self, key: &str) -> Option<String> {
        self.consumed.push(key.to_string());
        self.cfg.entries.get(key).cloned()
    }

    fn record(&mut self, key: &str, value: String) {
        self.manifest.push((key.to_string(), value));
    }

    fn parse_f64(key: &str, text: &str) -> Result<f64> {
        text.parse::<f64>().map_err(|_| {
            GksError::invalid(format!("parameter `{key}`: cannot parse {text:?} as a number"))
        })
    }

    fn parse_usize(key: &str, text: &str) -> Result<usize> {
        text.parse::<usize>().map_err(|_| {
            GksError::invalid(format!("parameter `{key}`: cannot parse {text:?} as a count"))
        })
    }

    /// Optional float; present only when a flag or config entry supplies it.
    pub fn opt_f64(&mut self, key: &str, flag: Option<f64>) -> Result<Option<f64>> {
        let resolved = match (flag, self.file_value(key)) {
            (Some(v), _) => Some(v),
            (None, Some(text)) => Some(Self::parse_f64(key, &text)?),
            (None, None) => None,
        };
        if let Some(v) = resolved {
            self.record(key, format!("{v}"));
        }
        Ok(resolved)
    }

    pub fn req_f64(&mut self, key: &str, flag: Option<f64>) -> Result<f64> {
        self.opt_f64(key, flag)?.ok_or_else(|| {
            GksError::invalid(format!(
                "missing parameter `{key}`: pass --{key} or set `{key}` in the config file"
            ))
        })
    }

    pub fn f64_or(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key, flag)?.unwrap_or_else(|| {
            self.record(key, format!("{default}"));
            default
        }))
    }

    pub fn usize_or(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        let resolved = match (flag, self.file_value(key)) {
            (Some(v), _) => v,
            (None, Some(text)) => Self::parse_usize(key, &text)?,
            (None, None) => default,
        };
        self.record(key, format!("{resolved}"));
        Ok(resolved)
    }

    pub fn req_usize(&mut self, key: &str, flag: Option<usize>) -> Result<usize> {
        let resolved = match (flag, self.file_value(key)) {
            (Some(v), _) => v,
            (None, Some(text)) => Self::parse_usize(key, &text)?,
            (None, None) => {
                return Err(GksError::invalid(format!(
                    "missing parameter `{key}`: pass --{key} or set `{key}` in the config file"
                )))
            }
        };
        self.record(key, format!("{resolved}"));
        Ok(resolved)
    }

    /// Optional string; present only when a flag or config entry supplies it.
    pub fn opt_string(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let resolved = match (flag, self.file_value(key)) {
            (Some(v), _) => Some(v),
            (None, Some(text)) => Some(text),
            (None, None) => None,
        };
        if let Some(v) = &resolved {
            self.record(key, v.clone());
        }
        resolved
    }

    pub fn string_or(&mut self, key: &str, flag: Option<String>, default: &str) -> String {
        let resolved = match (flag, self.file_value(key)) {
            (Some(v), _) => v,
            (None, Some(text)) => text,
            (None, None) => default.to_string(),
        };
        self.record(key, resolved.clone());
        resolved
    }

    /// Rejects config keys no parameter consumed, then seals the manifest.
    pub fn finish(self, command: &'static str) -> Result<Manifest> {
        for key in self.cfg.entries.keys() {
            if !self.consumed.iter().any(|c| c == key) {
                return Err(GksError::invalid(format!(
                    "config key `{key}` is not a parameter of `{command}`"
                )));
            }
        }
        Ok(Manifest {
            command,
            entries: self.manifest,
        })
    }
}
