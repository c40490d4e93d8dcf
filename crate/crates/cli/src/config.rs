use std::path::{Path, PathBuf};

use anyhow::Context;
use cogpath_core::llm::LlmConfig;
use cogpath_service::RemoteEndpoint;
use serde::Deserialize;

/// Contents of the `--config` TOML file. Secrets are referenced by the name
/// of the environment variable that holds them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub remote: Option<RemoteEndpoint>,
    pub llm: Option<LlmConfig>,
    pub pathway: PathwaySection,
    pub service: ServiceSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathwaySection {
    pub separator: Option<String>,
    pub batch_size: Option<usize>,
    /// Prompt template file overriding the bundled one.
    pub prompt_template: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub addr: Option<String>,
    pub store_path: Option<PathBuf>,
    pub auth_token_env: Option<String>,
    pub cors_origins: Vec<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_example() {
        let c: FileConfig = toml::from_str(
            r#"
            seed = 7
            backend = "llm"
            [remote]
            url = "http://localhost:9000"
            token_env = "CLS_TOKEN"
            [llm]
            endpoint_url = "http://localhost:8000/v1/chat/completions"
            model = "some-model"
            language = "zh"
            [pathway]
            separator = ""
            [service]
            addr = "0.0.0.0:8080"
            cors_origins = ["http://localhost:5173"]
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        let llm = c.llm.unwrap();
        assert_eq!(llm.temperature, 0.7);
        assert_eq!(llm.model, "some-model");
        assert_eq!(c.pathway.separator.as_deref(), Some(""));
        assert_eq!(c.service.cors_origins.len(), 1);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("sed = 1").is_err());
    }
}
