//! Run plumbing shared by the command-line stages: flat key=value
//! configuration with environment interpolation, per-stage seeds, run
//! manifests and a workspace lock.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_to_string};
use crate::nn::mix_seed;

/// Parsed configuration. Lines are `key = value`; `#` starts a comment line;
/// `${NAME}` in a value is replaced by the environment variable `NAME`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// Keys whose values name paths that must exist before a stage starts.
pub const INPUT_PATH_KEYS: &[&str] = &[
    "dataset",
    "bad_words",
    "child_words",
    "emoticons",
    "model",
    "fixtures",
    "keywords",
    "channels",
    "regions",
    "cluster_names",
];

fn interpolate(value: &str, line: usize, env: &dyn Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::new();
    let mut rest = value;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| Error::parse(format!("config line {line}"), "unterminated ${"))?;
        let name = &after[..end];
        let v = env(name).ok_or_else(|| Error::Config {
            key: name.to_string(),
            message: format!("environment variable referenced on line {line} is not set"),
        })?;
        out.push_str(&v);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_env(text, &|k| std::env::var(k).ok())
    }

    pub fn parse_with_env(text: &str, env: &dyn Fn(&str) -> Option<String>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("config line {}", i + 1), "expected key = value"))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::parse(format!("config line {}", i + 1), "empty key"));
            }
            let value = interpolate(v.trim(), i + 1, env)?;
            if values.insert(key.to_string(), value).is_some() {
                return Err(Error::Config {
                    key: key.into(),
                    message: "defined twice".into(),
                });
            }
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.values.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config {
            key: key.into(),
            message: "missing".into(),
        })
    }

    /// Parsed value of `key`, or `default` when absent.
    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| Error::Config {
                key: key.into(),
                message: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.parse_or("seed", 0)
    }

    /// Every configured input path must exist.
    pub fn validate_paths(&self) -> Result<()> {
        for key in INPUT_PATH_KEYS {
            if let Some(p) = self.get(key) {
                if !Path::new(p).exists() {
                    return Err(Error::Config {
                        key: key.to_string(),
                        message: format!("path `{p}` does not exist"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Config with values of secret-looking keys masked, for manifests.
    pub fn redacted(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .map(|(k, v)| {
                let secret = ["key", "token", "secret", "password"].iter().any(|s| k.contains(s));
                (k.clone(), if secret { "***".into() } else { v.clone() })
            })
            .collect()
    }
}

/// Seed for `stage`, derived from the master seed and a stable hash of the
/// stage name.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let h = Sha256::digest(stage.as_bytes());
    mix_seed(&[master, u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: Option<String>,
}

/// Machine-readable record of one stage run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub version: String,
    pub master_seed: u64,
    pub stage_seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(stage: &str, config: &RunConfig, master_seed: u64) -> Self {
        let now = chrono::Utc::now().to_rfc3339();
        RunManifest {
            stage: stage.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed,
            stage_seed: stage_seed(master_seed, stage),
            config: config.redacted(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now.clone(),
            finished_at: now,
        }
    }

    /// Record an input with the digest of its contents (files only).
    pub fn input(&mut self, path: impl AsRef<Path>) {
        let p = path.as_ref();
        let sha256 = std::fs::read(p).ok().map(|b| hex::encode(Sha256::digest(&b)));
        self.inputs.push(InputDigest {
            path: p.display().to_string(),
            sha256,
        });
    }

    pub fn output(&mut self, path: impl AsRef<Path>) {
        self.outputs.push(path.as_ref().display().to_string());
    }

    pub fn write(mut self, path: impl AsRef<Path>) -> Result<()> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        let json = serde_json::to_vec_pretty(&self).expect("manifest serializes");
        atomic_write(path, &json)
    }
}

/// Exclusive lock on a workspace directory, released on drop.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

pub const LOCK_FILE: &str = ".vidsafe.lock";

impl WorkspaceLock {
    pub fn acquire(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let holder = std::fs::read_to_string(&path).unwrap_or_default();
                Err(Error::InvalidArgument(format!(
                    "workspace is locked by process {} ({}); remove the lock file if that process is gone",
                    holder.trim(),
                    path.display()
                )))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Provider(_) => 3,
        Error::InvalidArgument(_) | Error::Config { .. } | Error::UnknownBaseline(_) => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(k: &str) -> Option<String> {
        (k == "API").then(|| "k1,k2".to_string())
    }

    #[test]
    fn parses_and_interpolates() {
        let c = RunConfig::parse_with_env("# comment\nseed = 7\napi_keys = ${API}\nname = a${API}b\n\n", &env).unwrap();
        assert_eq!(c.master_seed().unwrap(), 7);
        assert_eq!(c.get("api_keys"), Some("k1,k2"));
        assert_eq!(c.get("name"), Some("ak1,k2b"));
        assert_eq!(c.redacted()["api_keys"], "***");
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse_with_env("x = ${MISSING}", &env).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "MISSING"));
        let c = RunConfig::parse_with_env("seed = abc", &env).unwrap();
        assert!(matches!(c.master_seed(), Err(Error::Config { key, .. }) if key == "seed"));
        assert!(RunConfig::parse_with_env("a = 1\na = 2", &env).is_err());
        assert!(RunConfig::parse_with_env("novalue", &env).is_err());
        let c = RunConfig::parse_with_env("dataset = /no/such/dir", &env).unwrap();
        assert!(matches!(c.validate_paths(), Err(Error::Config { key, .. }) if key == "dataset"));
    }

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        assert_eq!(stage_seed(1, "train"), stage_seed(1, "train"));
        assert_ne!(stage_seed(1, "train"), stage_seed(1, "walk"));
        assert_ne!(stage_seed(1, "train"), stage_seed(2, "train"));
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let l = WorkspaceLock::acquire(dir.path()).unwrap();
        assert!(WorkspaceLock::acquire(dir.path()).is_err());
        drop(l);
        WorkspaceLock::acquire(dir.path()).unwrap();
    }
}
