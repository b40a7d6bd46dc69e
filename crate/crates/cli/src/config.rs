//! Run configuration. Three layers, later ones win: built-in defaults, an
//! optional flat `key = value` config file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use droidtriage_pipeline::{
    AgentSuite, CorpusIndex, LiveBackend, ReferenceIconSet, RiskLexicon,
};
use serde::Deserialize;

/// The only place the API credential may come from. Config files that try to
/// set one are rejected outright.
pub const CREDENTIAL_VAR: &str = "DROIDTRIAGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Deterministic rule tables, no network.
    Rule,
    /// Chat-completion agents against an OpenAI-compatible endpoint.
    Llm,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(text: &str) -> Result<Mode, String> {
        match text {
            "rule" => Ok(Mode::Rule),
            "llm" => Ok(Mode::Llm),
            other => Err(format!("unknown mode `{other}`, expected `rule` or `llm`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model_name: String,
    pub temperature: f64,
    pub endpoint_url: Option<String>,
    pub max_iterations: u32,
    pub worker_count: usize,
    pub lexicon_path: Option<PathBuf>,
    pub icon_set_path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            mode: Mode::Rule,
            model_name: "gpt-4o".to_string(),
            temperature: 0.5,
            endpoint_url: None,
            max_iterations: 3,
            worker_count: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(4),
            lexicon_path: None,
            icon_set_path: None,
            seed: 7,
        }
    }
}

/// Per-command flags mirroring the config file keys.
#[derive(Debug, Default, clap::Args)]
pub struct Overrides {
    /// Agent backend.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Model requested from the chat endpoint (llm mode).
    #[arg(long)]
    pub model_name: Option<String>,
    /// Sampling temperature for chat agents.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Chat-completions endpoint (llm mode).
    #[arg(long)]
    pub endpoint_url: Option<String>,
    /// Task-loop budget; the decision is forced at this iteration.
    #[arg(long)]
    pub max_iterations: Option<u32>,
    /// Parallel pipeline runs during evaluate.
    #[arg(long)]
    pub worker_count: Option<usize>,
    /// Replacement risk-term table (JSON).
    #[arg(long)]
    pub lexicon_path: Option<PathBuf>,
    /// Replacement reference-icon table (JSON).
    #[arg(long)]
    pub icon_set_path: Option<PathBuf>,
    /// Seed for the corpus split and fixture generation.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<String>,
    model_name: Option<String>,
    temperature: Option<f64>,
    endpoint_url: Option<String>,
    max_iterations: Option<u32>,
    worker_count: Option<usize>,
    lexicon_path: Option<PathBuf>,
    icon_set_path: Option<PathBuf>,
    seed: Option<u64>,
}

pub fn resolve(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let file = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file `{}`", path.display()))?;
            parse_file(&text)?
        }
        None => FileConfig::default(),
    };

    let mut config = RunConfig::default();
    if let Some(mode) = &file.mode {
        config.mode = mode.parse().map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = file.model_name {
        config.model_name = v;
    }
    if let Some(v) = file.temperature {
        config.temperature = v;
    }
    if let Some(v) = file.endpoint_url {
        config.endpoint_url = Some(v);
    }
    if let Some(v) = file.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = file.worker_count {
        config.worker_count = v;
    }
    if let Some(v) = file.lexicon_path {
        config.lexicon_path = Some(v);
    }
    if let Some(v) = file.icon_set_path {
        config.icon_set_path = Some(v);
    }
    if let Some(v) = file.seed {
        config.seed = v;
    }

    if let Some(v) = overrides.mode {
        config.mode = v;
    }
    if let Some(v) = &overrides.model_name {
        config.model_name = v.clone();
    }
    if let Some(v) = overrides.temperature {
        config.temperature = v;
    }
    if let Some(v) = &overrides.endpoint_url {
        config.endpoint_url = Some(v.clone());
    }
    if let Some(v) = overrides.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = overrides.worker_count {
        config.worker_count = v;
    }
    if let Some(v) = &overrides.lexicon_path {
        config.lexicon_path = Some(v.clone());
    }
    if let Some(v) = &overrides.icon_set_path {
        config.icon_set_path = Some(v.clone());
    }
    if let Some(v) = overrides.seed {
        config.seed = v;
    }

    if config.max_iterations == 0 {
        bail!("max_iterations must be at least 1");
    }
    if config.worker_count == 0 {
        bail!("worker_count must be at least 1");
    }
    if !(config.temperature.is_finite() && (0.0..=2.0).contains(&config.temperature)) {
        bail!("temperature {} is outside [0, 2]", config.temperature);
    }
    Ok(config)
}

fn parse_file(text: &str) -> Result<FileConfig> {
    let value: toml::Value = text
        .parse()
        .context("config file is not a valid flat key = value document")?;
    if let Some(table) = value.as_table() {
        for key in ["api_key", "apikey", "credential", "token"] {
            if table.contains_key(key) {
                bail!(
                    "config file sets `{key}`; the API credential is only read \
                     from the {CREDENTIAL_VAR} environment variable"
                );
            }
        }
    }
    value
        .try_into()
        .context("unsupported key or value in config file")
}

pub fn credential_from_env() -> Option<String> {
    std::env::var(CREDENTIAL_VAR).ok()
}

/// Assembles the agent team for the resolved config. The credential is
/// injected by the caller so nothing below main ever touches the process
/// environment.
pub fn build_suite(
    config: &RunConfig,
    index: CorpusIndex,
    now: DateTime<Utc>,
    credential: Option<String>,
) -> Result<AgentSuite> {
    let lexicon = match &config.lexicon_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading lexicon `{}`", path.display()))?;
            Arc::new(RiskLexicon::from_json(&text)?)
        }
        None => Arc::new(RiskLexicon::builtin().clone()),
    };
    let icons = match &config.icon_set_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading icon set `{}`", path.display()))?;
            Arc::new(ReferenceIconSet::from_json(&text)?)
        }
        None => Arc::new(ReferenceIconSet::builtin().clone()),
    };
    let index = Arc::new(index);
    match config.mode {
        Mode::Rule => Ok(AgentSuite::rule(lexicon, icons, index, now)),
        Mode::Llm => {
            let endpoint = config
                .endpoint_url
                .as_deref()
                .context("llm mode needs an endpoint_url (config file) or --endpoint-url")?;
            let Some(key) = credential.filter(|k| !k.is_empty()) else {
                bail!("llm mode needs the {CREDENTIAL_VAR} environment variable");
            };
            let backend = Arc::new(LiveBackend::new(endpoint, &config.model_name, Some(key))?);
            Ok(AgentSuite::chat(
                lexicon,
                icons,
                index,
                now,
                backend,
                config.temperature,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str, overrides: &Overrides) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, text).unwrap();
        resolve(Some(&path), overrides)
    }

    #[test]
    fn defaults_apply_without_file_or_flags() {
        let config = resolve(None, &Overrides::default()).unwrap();
        assert_eq!(config.mode, Mode::Rule);
        assert_eq!(config.temperature, 0.5);
        assert_eq!(config.max_iterations, 3);
        assert_eq!(config.seed, 7);
        assert_eq!(config.endpoint_url, None);
    }

    #[test]
    fn file_values_override_defaults() {
        let config = resolve_text(
            "temperature = 0.9\nmode = \"llm\"\nseed = 42\nendpoint_url = \"http://h/v1\"\n",
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(config.temperature, 0.9);
        assert_eq!(config.mode, Mode::Llm);
        assert_eq!(config.seed, 42);
        assert_eq!(config.endpoint_url.as_deref(), Some("http://h/v1"));
    }

    #[test]
    fn flags_override_file_values() {
        let overrides = Overrides {
            temperature: Some(0.1),
            seed: Some(3),
            ..Overrides::default()
        };
        let config = resolve_text("temperature = 0.9\nseed = 42\n", &overrides).unwrap();
        assert_eq!(config.temperature, 0.1);
        assert_eq!(config.seed, 3);
    }

    #[test]
    fn credential_keys_in_the_file_are_rejected() {
        let err = resolve_text("api_key = \"hunter2\"\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains(CREDENTIAL_VAR));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(resolve_text("turbo = true\n", &Overrides::default()).is_err());
    }

    #[test]
    fn bad_mode_is_rejected() {
        let err = resolve_text("mode = \"hybrid\"\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("hybrid"));
    }

    #[test]
    fn degenerate_numbers_are_rejected() {
        for text in [
            "max_iterations = 0\n",
            "worker_count = 0\n",
            "temperature = 9.5\n",
        ] {
            assert!(resolve_text(text, &Overrides::default()).is_err(), "{text}");
        }
    }

    #[test]
    fn llm_mode_requires_endpoint_and_credential() {
        let now = Utc::now();
        let mut config = RunConfig {
            mode: Mode::Llm,
            ..RunConfig::default()
        };
        let err = build_suite(&config, CorpusIndex::new(), now, None).err().unwrap();
        assert!(err.to_string().contains("endpoint_url"));

        config.endpoint_url = Some("http://127.0.0.1:9/v1/chat/completions".to_string());
        let err = build_suite(&config, CorpusIndex::new(), now, None).err().unwrap();
        assert!(err.to_string().contains(CREDENTIAL_VAR));

        let key = Some("k".to_string());
        assert!(build_suite(&config, CorpusIndex::new(), now, key).is_ok());
    }
}
