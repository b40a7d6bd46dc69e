//! Chat-completion plumbing: prompt templates, the backend abstraction
//! over an OpenAI-compatible endpoint, a scripted offline backend, and the
//! tolerant parser that turns raw model text into an [`AgentFinding`].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{AgentFinding, AgentId, Evidence, TaskKind};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt slot `{0}` missing from slot map")]
    MissingSlot(String),
    #[error("authentication rejected with status {0}")]
    AuthError(u16),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("completion timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no scripted response for key `{0}`")]
    ScriptMiss(String),
    #[error("script table unreadable: {0}")]
    BadScript(String),
    #[error("no parsable finding object in agent output")]
    Unparseable,
}

/// Prompt skeleton for one role. `{name}` references in the preamble and
/// task description are filled from a slot map at render time; the context
/// slot names the map entry appended as the final section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role_preamble: String,
    pub task_description: String,
    pub allowed_tools: Vec<String>,
    pub context_slot: String,
}

/// Renders a template into the user prompt. Sections appear in a fixed
/// order (preamble, task, tool list, context) so the output is a pure
/// function of template and slots.
pub fn render_prompt(
    template: &PromptTemplate,
    slots: &BTreeMap<String, String>,
) -> Result<String, GatewayError> {
    let mut sections = vec![
        substitute(&template.role_preamble, slots)?,
        substitute(&template.task_description, slots)?,
    ];
    if !template.allowed_tools.is_empty() {
        let tools = serde_json::to_string(&template.allowed_tools)
            .expect("string list always serializes");
        sections.push(format!("Tools available: {tools}"));
    }
    if !template.context_slot.is_empty() {
        let context = slots
            .get(&template.context_slot)
            .ok_or_else(|| GatewayError::MissingSlot(template.context_slot.clone()))?;
        sections.push(format!("Context:\n{context}"));
    }
    sections.retain(|s| !s.is_empty());
    Ok(sections.join("\n\n"))
}

/// A `{` opens a slot reference only when followed by an identifier and a
/// closing brace; everything else (JSON examples in particular) passes
/// through untouched.
fn substitute(text: &str, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let ident_len = tail
            .bytes()
            .take_while(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_')
            .count();
        if ident_len > 0 && tail.as_bytes().get(ident_len) == Some(&b'}') {
            let name = &tail[..ident_len];
            let value = slots
                .get(name)
                .ok_or_else(|| GatewayError::MissingSlot(name.to_string()))?;
            out.push_str(value);
            rest = &tail[ident_len + 1..];
        } else {
            out.push('{');
            rest = tail;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// One request/response round trip with a chat model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub response_text: Option<String>,
}

impl ChatExchange {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>) -> ChatExchange {
        ChatExchange {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: 0.5,
            max_output_tokens: 1024,
            response_text: None,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> ChatExchange {
        debug_assert!((0.0..=2.0).contains(&temperature));
        self.temperature = temperature;
        self
    }
}

/// Anything that can answer a chat exchange. The agent id travels with the
/// call so scripted backends can key their lookup table.
pub trait Backend: Send + Sync {
    fn complete_text(&self, agent_id: AgentId, exchange: &ChatExchange)
        -> Result<String, GatewayError>;
}

/// Runs one exchange to completion and returns it with `response_text`
/// populated.
pub fn complete(
    backend: &dyn Backend,
    agent_id: AgentId,
    exchange: &ChatExchange,
) -> Result<ChatExchange, GatewayError> {
    debug_assert!(!exchange.user_text.is_empty());
    let text = backend.complete_text(agent_id, exchange)?;
    let mut done = exchange.clone();
    done.response_text = Some(text);
    Ok(done)
}

/// Deterministic offline backend: responses looked up by agent id and the
/// SHA-256 of the user text. A missing entry is a loud failure, never a
/// silent default. A `<agent>:*` entry serves as a per-agent fallback when
/// no exact key matches, which keeps iteration-dependent prompts
/// scriptable.
pub struct ScriptedBackend {
    table: HashMap<String, String>,
}

impl ScriptedBackend {
    pub fn key(agent_id: AgentId, user_text: &str) -> String {
        let digest = Sha256::digest(user_text.as_bytes());
        format!("{}:{:x}", agent_id.as_str(), digest)
    }

    pub fn wildcard_key(agent_id: AgentId) -> String {
        format!("{}:*", agent_id.as_str())
    }

    pub fn from_table(table: HashMap<String, String>) -> ScriptedBackend {
        ScriptedBackend { table }
    }

    pub fn from_file(path: &Path) -> Result<ScriptedBackend, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::BadScript(format!("{}: {e}", path.display())))?;
        let table = serde_json::from_str(&text)
            .map_err(|e| GatewayError::BadScript(format!("{}: {e}", path.display())))?;
        Ok(ScriptedBackend { table })
    }
}

impl Backend for ScriptedBackend {
    fn complete_text(
        &self,
        agent_id: AgentId,
        exchange: &ChatExchange,
    ) -> Result<String, GatewayError> {
        let key = ScriptedBackend::key(agent_id, &exchange.user_text);
        if let Some(hit) = self.table.get(&key) {
            return Ok(hit.clone());
        }
        if let Some(hit) = self.table.get(&ScriptedBackend::wildcard_key(agent_id)) {
            return Ok(hit.clone());
        }
        Err(GatewayError::ScriptMiss(key))
    }
}

/// Blocking client for an OpenAI-compatible `/v1/chat/completions`
/// endpoint. Retries 429 and 5xx with exponential backoff (1s base, factor
/// 2, 3 attempts total); 401/403 fail immediately and a timed-out request
/// surfaces as [`GatewayError::Timeout`] so callers can downgrade it to an
/// abstention.
pub struct LiveBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    max_attempts: u32,
    backoff_base: Duration,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(
        endpoint_url: &str,
        model: &str,
        api_key: Option<String>,
    ) -> Result<LiveBackend, GatewayError> {
        LiveBackend::with_timeout(endpoint_url, model, api_key, Duration::from_secs(60))
    }

    pub fn with_timeout(
        endpoint_url: &str,
        model: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<LiveBackend, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let base = endpoint_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/chat/completions")
        };
        Ok(LiveBackend {
            url,
            model: model.to_string(),
            api_key,
            timeout,
            max_attempts: 3,
            backoff_base: Duration::from_secs(1),
            client,
        })
    }

    /// Shrinks the retry pause; only tests that assert retry counts rather
    /// than elapsed time have a reason to call this.
    pub fn with_backoff_base(mut self, base: Duration) -> LiveBackend {
        self.backoff_base = base;
        self
    }

    fn extract_content(body: serde_json::Value) -> Result<String, GatewayError> {
        body.get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Transport("malformed completion payload".into()))
    }
}

impl Backend for LiveBackend {
    fn complete_text(
        &self,
        _agent_id: AgentId,
        exchange: &ChatExchange,
    ) -> Result<String, GatewayError> {
        let payload = serde_json::json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": exchange.system_text},
                {"role": "user", "content": exchange.user_text},
            ],
            "temperature": exchange.temperature,
            "max_tokens": exchange.max_output_tokens,
        });
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut request = self.client.post(&self.url).json(&payload);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let response = match request.send() {
                Ok(r) => r,
                Err(e) if e.is_timeout() => return Err(GatewayError::Timeout(self.timeout)),
                Err(e) => return Err(GatewayError::Transport(e.to_string())),
            };
            let status = response.status().as_u16();
            match status {
                200 => {
                    let body: serde_json::Value = response.json().map_err(|e| {
                        if e.is_timeout() {
                            GatewayError::Timeout(self.timeout)
                        } else {
                            GatewayError::Transport(e.to_string())
                        }
                    })?;
                    return Ok(LiveBackend::extract_content(body)?);
                }
                401 | 403 => return Err(GatewayError::AuthError(status)),
                429 | 500..=599 if attempt < self.max_attempts => {
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
                }
                429 => return Err(GatewayError::RateLimited { attempts: attempt }),
                500..=599 => {
                    return Err(GatewayError::Transport(format!(
                        "server status {status} after {attempt} attempts"
                    )))
                }
                _ => return Err(GatewayError::Transport(format!("unexpected status {status}"))),
            }
        }
    }
}

/// Extracts the first JSON object carrying a numeric `risk_score` from
/// free-form model output. Objects missing the schema are skipped, scores
/// are clamped into [0, 1], malformed evidence entries are dropped, and
/// unknown `needs` values are dropped with a count. Input that yields no
/// finding at all is [`GatewayError::Unparseable`]; the caller treats that
/// as an abstention.
pub fn parse_agent_output(agent_id: AgentId, text: &str) -> Result<AgentFinding, GatewayError> {
    for (offset, _) in text.char_indices().filter(|(_, c)| *c == '{') {
        let mut stream =
            serde_json::Deserializer::from_str(&text[offset..]).into_iter::<serde_json::Value>();
        let Some(Ok(value)) = stream.next() else {
            continue;
        };
        let Some(object) = value.as_object() else {
            continue;
        };
        let Some(risk) = object.get("risk_score").and_then(serde_json::Value::as_f64) else {
            continue;
        };
        if !risk.is_finite() {
            continue;
        }

        let category_hint = object
            .get("category_hint")
            .and_then(serde_json::Value::as_str)
            .and_then(|s| s.parse().ok());
        let evidence = object
            .get("evidence")
            .and_then(serde_json::Value::as_array)
            .map(|items| items.iter().filter_map(evidence_entry).collect())
            .unwrap_or_default();
        let mut needs = Vec::new();
        let mut dropped_needs = 0;
        if let Some(items) = object.get("needs").and_then(serde_json::Value::as_array) {
            for item in items {
                match item.as_str().and_then(|s| s.parse::<TaskKind>().ok()) {
                    Some(kind) => needs.push(kind),
                    None => dropped_needs += 1,
                }
            }
        }

        return Ok(AgentFinding {
            agent_id,
            risk_score: Some(risk.clamp(0.0, 1.0)),
            category_hint,
            evidence,
            needs,
            raw_response: text.to_string(),
            dropped_needs,
        });
    }
    Err(GatewayError::Unparseable)
}

/// Accepts both the canonical pair form `["kind", "detail"]` and the
/// object form `{"kind": .., "detail": ..}` models tend to emit.
fn evidence_entry(value: &serde_json::Value) -> Option<Evidence> {
    if let Some(pair) = value.as_array() {
        if let [a, b] = pair.as_slice() {
            return Some(Evidence::new(a.as_str()?, b.as_str()?));
        }
        return None;
    }
    let object = value.as_object()?;
    Some(Evidence::new(
        object.get("kind")?.as_str()?,
        object.get("detail")?.as_str()?,
    ))
}
