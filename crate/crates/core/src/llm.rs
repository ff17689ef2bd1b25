//! LLM service clients.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;

/// A text completion service.
///
/// Implementations must tolerate concurrent calls from separate sessions,
/// either natively or by serializing internally.
pub trait LlmClient: Send + Sync {
    fn identity(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

/// Task tag on the first line of every bundled prompt (`### TASK: <name>`).
pub fn prompt_task(prompt: &str) -> Option<&str> {
    prompt.lines().next()?.trim().strip_prefix("### TASK:").map(str::trim)
}

/// Text between `BEGIN DRAFT` and `END DRAFT` of a refinement prompt.
pub fn prompt_draft(prompt: &str) -> Option<&str> {
    let start = prompt.find("BEGIN DRAFT\n")? + "BEGIN DRAFT\n".len();
    let end = prompt[start..].find("END DRAFT")? + start;
    Some(&prompt[start..end])
}

/// Client configuration. `provider` selects the backend: `http` for an
/// OpenAI-compatible chat completions endpoint, `replay` for canned answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default)]
    pub replay: Option<ReplayConfig>,
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub emotion: String,
    /// Completions returned to successive generation prompts; the last one repeats.
    pub responses: Vec<String>,
}

impl LlmConfig {
    pub fn build(&self) -> Result<Box<dyn LlmClient>, LlmError> {
        match self.provider.as_str() {
            "http" => Ok(Box::new(HttpLlmClient::new(self)?)),
            "replay" => {
                let replay = self.replay.clone().ok_or_else(|| LlmError::Request("replay provider needs a [replay] table".into()))?;
                Ok(Box::new(ReplayLlm::new(replay.emotion, replay.responses)))
            }
            other => Err(LlmError::Request(format!("unknown provider '{other}'"))),
        }
    }
}

pub struct HttpLlmClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(config: &LlmConfig) -> Result<Self, LlmError> {
        let endpoint = config.endpoint.clone().ok_or_else(|| LlmError::Request("http provider needs an endpoint".into()))?;
        let model = config.model.clone().ok_or_else(|| LlmError::Request("http provider needs a model".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingKey(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Request(e.to_string()))?;
        Ok(Self { endpoint, model, api_key, client })
    }
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

impl LlmClient for HttpLlmClient {
    fn identity(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().and_then(|r| r.error_for_status()).map_err(|e| LlmError::Request(e.to_string()))?;
        let parsed: ChatResponse = resp.json().map_err(|e| LlmError::Response(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::Response("no choices in response".into()))
    }
}

/// Canned client: a fixed emotion, a list of generation answers, and refinement
/// prompts echoed back unchanged.
pub struct ReplayLlm {
    emotion: String,
    responses: Vec<String>,
    served: Mutex<usize>,
}

impl ReplayLlm {
    pub fn new(emotion: impl Into<String>, responses: Vec<String>) -> Self {
        Self { emotion: emotion.into(), responses, served: Mutex::new(0) }
    }
}

impl LlmClient for ReplayLlm {
    fn identity(&self) -> String {
        "replay".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        match prompt_task(prompt) {
            Some("lyrics2emo") => Ok(self.emotion.clone()),
            Some("refine") => Ok(prompt_draft(prompt).unwrap_or_default().to_string()),
            _ => {
                let mut served = self.served.lock().expect("replay lock");
                let i = (*served).min(self.responses.len().saturating_sub(1));
                *served += 1;
                self.responses.get(i).cloned().ok_or(LlmError::ScriptExhausted(*served))
            }
        }
    }
}

type Handler = dyn Fn(&str, usize) -> Result<String, LlmError> + Send + Sync;

/// Test double that answers through a closure and records every prompt.
pub struct ScriptedLlm {
    handler: Box<Handler>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedLlm {
    /// `handler(prompt, call_index)` produces each completion.
    pub fn new(handler: impl Fn(&str, usize) -> Result<String, LlmError> + Send + Sync + 'static) -> Self {
        Self { handler: Box::new(handler), prompts: Mutex::new(Vec::new()) }
    }

    /// Answers `lyrics2emo` with `emotion`, echoes refinement drafts, and
    /// serves `drafts` in order to generation prompts.
    pub fn sequence(emotion: &str, drafts: Vec<String>) -> Self {
        let emotion = emotion.to_string();
        let queue = Mutex::new(drafts.into_iter().collect::<VecDeque<_>>());
        Self::new(move |prompt, call| match prompt_task(prompt) {
            Some("lyrics2emo") => Ok(emotion.clone()),
            Some("refine") => Ok(prompt_draft(prompt).unwrap_or_default().to_string()),
            _ => queue.lock().expect("script lock").pop_front().ok_or(LlmError::ScriptExhausted(call)),
        })
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }

    /// Prompts whose task tag equals `task`.
    pub fn prompts_for(&self, task: &str) -> Vec<String> {
        self.prompts().into_iter().filter(|p| prompt_task(p) == Some(task)).collect()
    }
}

impl LlmClient for ScriptedLlm {
    fn identity(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let call = {
            let mut log = self.prompts.lock().expect("prompt log");
            log.push(prompt.to_string());
            log.len() - 1
        };
        (self.handler)(prompt, call)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_and_draft_extraction() {
        let p = "### TASK: refine\nabc\nBEGIN DRAFT\nline1\nline2\nEND DRAFT\nx";
        assert_eq!(prompt_task(p), Some("refine"));
        assert_eq!(prompt_draft(p), Some("line1\nline2\n"));
        assert_eq!(prompt_task("hello"), None);
    }

    #[test]
    fn replay_serves_in_order_and_repeats_last() {
        let r = ReplayLlm::new("tender", vec!["a".into(), "b".into()]);
        assert_eq!(r.complete("### TASK: lyrics2emo\n").unwrap(), "tender");
        assert_eq!(r.complete("### TASK: emo2subs\n").unwrap(), "a");
        assert_eq!(r.complete("### TASK: emo2subs\n").unwrap(), "b");
        assert_eq!(r.complete("### TASK: emo2subs\n").unwrap(), "b");
    }

    #[test]
    fn config_selects_backend() {
        let cfg = LlmConfig {
            provider: "replay".into(),
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_secs: 5,
            retries: 0,
            replay: Some(ReplayConfig { emotion: "calm".into(), responses: vec!["x".into()] }),
        };
        assert_eq!(cfg.build().unwrap().identity(), "replay");
        let http = LlmConfig { provider: "http".into(), replay: None, ..cfg.clone() };
        assert!(http.build().is_err());
        let missing_key = LlmConfig {
            provider: "http".into(),
            endpoint: Some("http://127.0.0.1:9".into()),
            model: Some("m".into()),
            api_key_env: Some("SINGSUB_TEST_UNSET_KEY".into()),
            ..cfg
        };
        assert!(matches!(missing_key.build(), Err(LlmError::MissingKey(_))));
    }
}
