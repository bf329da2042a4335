//! Server configuration: one TOML or JSON file, with the port overridable
//! through `LEXISCOPE_PORT`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Environment variable that overrides [`ServerConfig::port`].
pub const PORT_ENV: &str = "LEXISCOPE_PORT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Sweep output directory holding `state.json` and `models/`.
    pub run_dir: PathBuf,
    /// Base for relative paths in sweep configs posted to `/sweep`.
    /// Defaults to the run directory.
    pub data_dir: Option<PathBuf>,
    /// Overrides the cap stored in the sweep config.
    pub max_loaded_models: Option<usize>,
    pub sweep_parallelism: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 7878,
            run_dir: PathBuf::from("run"),
            data_dir: None,
            max_loaded_models: None,
            sweep_parallelism: 1,
        }
    }
}

impl ServerConfig {
    /// Read a `.json` or `.toml` file (anything else is parsed as TOML).
    /// Relative directories are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ServerConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?
        };
        if let Some(base) = path.parent() {
            if config.run_dir.is_relative() {
                config.run_dir = base.join(&config.run_dir);
            }
            if let Some(d) = config.data_dir.as_mut().filter(|d| d.is_relative()) {
                *d = base.join(&*d);
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Apply `LEXISCOPE_PORT` if it is set.
    pub fn apply_env(&mut self) -> Result<(), ServiceError> {
        self.apply_port_override(std::env::var(PORT_ENV).ok().as_deref())
    }

    pub fn apply_port_override(&mut self, value: Option<&str>) -> Result<(), ServiceError> {
        if let Some(v) = value {
            self.port = v
                .trim()
                .parse()
                .map_err(|_| ServiceError::Config(format!("{PORT_ENV}={v} is not a port number")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.sweep_parallelism == 0 {
            return Err(ServiceError::Config("sweep_parallelism must be at least 1".into()));
        }
        if self.max_loaded_models == Some(0) {
            return Err(ServiceError::Config("max_loaded_models must be at least 1".into()));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> &Path {
        self.data_dir.as_deref().unwrap_or(&self.run_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("server.toml");
        std::fs::write(&t, "port = 9000\nrun_dir = \"runs/a\"\nmax_loaded_models = 13\n").unwrap();
        let j = dir.path().join("server.json");
        std::fs::write(&j, r#"{"port": 9000, "run_dir": "runs/a", "max_loaded_models": 13}"#).unwrap();
        let a = ServerConfig::load(&t).unwrap();
        assert_eq!(a, ServerConfig::load(&j).unwrap());
        assert_eq!(a.run_dir, dir.path().join("runs/a"));
        assert_eq!(a.data_dir(), a.run_dir);
    }

    #[test]
    fn port_override() {
        let mut c = ServerConfig::default();
        c.apply_port_override(Some("8123")).unwrap();
        assert_eq!(c.port, 8123);
        c.apply_port_override(None).unwrap();
        assert_eq!(c.port, 8123);
        assert!(c.apply_port_override(Some("eighty")).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_zero_caps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        std::fs::write(&p, "prot = 1\n").unwrap();
        assert!(ServerConfig::load(&p).is_err());
        std::fs::write(&p, "max_loaded_models = 0\n").unwrap();
        assert!(ServerConfig::load(&p).is_err());
    }
}
