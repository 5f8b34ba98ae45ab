use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chartalk_core::agent::{AgentProfile, ProviderConfig, API_BASE_ENV, API_KEY_ENV};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid value for {var}: {message}")]
    Env { var: &'static str, message: String },
    #[error("storage directory {path} is not writable: {source}")]
    Storage {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Openai,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmKind {
    #[default]
    Off,
    Stub,
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub base_url: String,
    pub timeout_secs: u64,
    /// Scripted replies used when `kind = "mock"`.
    pub mock_transcript: Option<PathBuf>,
    pub vlm: VlmKind,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let p = ProviderConfig::default();
        Self {
            kind: ProviderKind::default(),
            base_url: p.base_url,
            timeout_secs: p.timeout_secs,
            mock_transcript: None,
            vlm: VlmKind::default(),
        }
    }
}

impl ProviderSettings {
    /// Connection settings; the key comes from the environment only.
    pub fn connection(&self) -> ProviderConfig {
        ProviderConfig {
            base_url: self.base_url.clone(),
            timeout_secs: self.timeout_secs,
            api_key: env(API_KEY_ENV),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub storage_dir: PathBuf,
    /// Allowed browser origins; empty allows any.
    pub cors_origins: Vec<String>,
    /// Upper bound on one streamed reply.
    pub turn_timeout_secs: u64,
    pub provider: ProviderSettings,
    pub agent: AgentDefaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentDefaults {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AgentDefaults {
    fn default() -> Self {
        let p = AgentProfile::default();
        Self {
            model: p.model,
            temperature: p.temperature,
            max_tokens: p.max_tokens,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            storage_dir: PathBuf::from("chartalk-data"),
            cors_origins: Vec::new(),
            turn_timeout_secs: 120,
            provider: ProviderSettings::default(),
            agent: AgentDefaults::default(),
        }
    }
}

fn env(var: &'static str) -> Option<String> {
    std::env::var(var).ok().filter(|v| !v.trim().is_empty())
}

impl ServiceConfig {
    /// Defaults, then the TOML file if given, then `CHARTALK_*` variables.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text).map_err(|source| ConfigError::Parse {
                    path: p.to_path_buf(),
                    source,
                })?
            }
            None => Self::default(),
        };
        c.apply_env()?;
        Ok(c)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Some(v) = env("CHARTALK_LISTEN") {
            self.listen = v.parse().map_err(|e: std::net::AddrParseError| ConfigError::Env {
                var: "CHARTALK_LISTEN",
                message: e.to_string(),
            })?;
        }
        if let Some(v) = env("CHARTALK_STORAGE_DIR") {
            self.storage_dir = v.into();
        }
        if let Some(v) = env("CHARTALK_CORS_ORIGINS") {
            self.cors_origins = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(v) = env("CHARTALK_PROVIDER") {
            self.provider.kind = match v.as_str() {
                "openai" => ProviderKind::Openai,
                "mock" => ProviderKind::Mock,
                other => {
                    return Err(ConfigError::Env {
                        var: "CHARTALK_PROVIDER",
                        message: format!("`{other}` (expected openai or mock)"),
                    })
                }
            };
        }
        if let Some(v) = env("CHARTALK_MOCK_TRANSCRIPT") {
            self.provider.mock_transcript = Some(v.into());
        }
        if let Some(v) = env(API_BASE_ENV) {
            self.provider.base_url = v;
        }
        if let Some(v) = env("CHARTALK_MODEL") {
            self.agent.model = v;
        }
        Ok(())
    }

    pub fn profile(&self, mode: chartalk_core::agent::AgentMode) -> AgentProfile {
        AgentProfile {
            mode,
            model: self.agent.model.clone(),
            temperature: self.agent.temperature,
            max_tokens: self.agent.max_tokens,
        }
    }

    /// Creates the storage directory and checks that it accepts writes.
    pub fn check_storage(&self) -> Result<(), ConfigError> {
        let err = |source| ConfigError::Storage {
            path: self.storage_dir.clone(),
            source,
        };
        std::fs::create_dir_all(&self.storage_dir).map_err(err)?;
        let probe = self.storage_dir.join(".write-probe");
        std::fs::write(&probe, b"ok").map_err(err)?;
        std::fs::remove_file(&probe).map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let c: ServiceConfig = toml::from_str(
            r#"
            listen = "0.0.0.0:9000"
            cors_origins = ["http://localhost:5173"]
            [provider]
            kind = "mock"
            mock_transcript = "t.json"
            [agent]
            temperature = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.provider.kind, ProviderKind::Mock);
        assert_eq!(c.agent.temperature, 0.5);
        assert_eq!(c.agent.model, "gpt-4o");
        assert_eq!(c.turn_timeout_secs, 120);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ServiceConfig>("api_key = \"x\"").is_err());
    }
}
