//! OpenAI-compatible chat-completions client and the remote engine built on it.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendKind, Engine, EngineError};
use crate::answer::{parse_cited_answer, CitedAnswer};
use crate::genotype::Strategy;
use crate::types::{CandidateSet, Document, Query};

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "GEO_API_KEY";

/// System prompt used for cited-answer synthesis.
pub const ANSWER_SYNTHESIS_PROMPT: &str = "Write an accurate and concise answer for the given user question.
using only the provided summarized web search results.
The answer should be correct, high-quality, and written by an expert
using an unbiased and journalistic tone.
The user's language of choice, such as English, Français, Español, or Deutsch
should be used.
The answer should be informative, interesting, and engaging.
The answer's logic and reasoning should be rigorous and defensible.
Every sentence in the answer should be immediately followed by an in-line
citation to the search result(s).
The cited search result(s) should fully support all the information in the
sentence.
Search results need to be cited using [index].
When citing several search results, use [1][2][3] format rather than [1, 2, 3].
You can use multiple search results to respond comprehensively while avoiding
irrelevant search results.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteParams {
    /// Base URL up to but excluding `/chat/completions`, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub temperature: f64,
}

impl Default for RemoteParams {
    fn default() -> Self {
        RemoteParams {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            timeout_secs: 60,
            max_retries: 3,
            initial_backoff_ms: 500,
            temperature: 0.0,
        }
    }
}

/// Blocking chat-completions client with bounded exponential-backoff retries.
#[derive(Debug)]
pub struct ChatClient {
    params: RemoteParams,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl ChatClient {
    /// Reads the API key from `GEO_API_KEY` if set.
    pub fn new(params: RemoteParams) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_api_key(params, key)
    }

    pub fn with_api_key(params: RemoteParams, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(params.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build();
        ChatClient {
            params,
            api_key,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn params(&self) -> &RemoteParams {
        &self.params
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.params.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<String, EngineError> {
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| EngineError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| EngineError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(EngineError::Http { status, body: text });
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| EngineError::Malformed(format!("response is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| EngineError::Malformed("missing choices[0].message.content".into()))
    }

    /// Sends one system + user exchange and returns the assistant text.
    pub fn chat(&self, system: &str, user: &str) -> Result<String, EngineError> {
        let body = json!({
            "model": self.params.model,
            "temperature": self.params.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let attempts = self.params.max_retries + 1;
        let mut backoff = Duration::from_millis(self.params.initial_backoff_ms);
        let mut last = None;
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() => {
                    log::warn!("chat attempt {attempt}/{attempts} failed: {e}");
                    last = Some(e);
                    if attempt < attempts {
                        std::thread::sleep(backoff);
                        backoff = backoff.saturating_mul(2);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(EngineError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt ran")),
        })
    }
}

pub fn rewrite_user_message(query: &Query, doc: &Document) -> String {
    format!("Query: {}\n\nSource:\n{}", query.text, doc.text)
}

pub fn synthesis_user_message(query: &Query, candidates: &CandidateSet) -> String {
    let mut s = format!("Question: {}\n\nSearch Results:\n", query.text);
    for (i, d) in candidates.docs.iter().enumerate() {
        s.push_str(&format!("[{}] {}\n", i + 1, d.text.trim()));
    }
    s
}

#[derive(Debug)]
pub struct RemoteEngine {
    client: ChatClient,
}

impl RemoteEngine {
    pub fn new(client: ChatClient) -> Self {
        RemoteEngine { client }
    }

    pub fn client(&self) -> &ChatClient {
        &self.client
    }
}

impl Engine for RemoteEngine {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn rewrite(&self, doc: &Document, strategy: &Strategy, query: &Query) -> Result<Document, EngineError> {
        let prompt = strategy.prompt();
        if prompt.trim().is_empty() {
            return Err(EngineError::InvalidRequest("strategy renders to an empty prompt".into()));
        }
        let reply = self.client.chat(&prompt, &rewrite_user_message(query, doc))?;
        let reply = reply.trim();
        if reply.is_empty() {
            return Err(EngineError::EmptyRewrite);
        }
        Ok(doc.with_text(reply))
    }

    fn synthesize_answer(&self, query: &Query, candidates: &CandidateSet) -> Result<CitedAnswer, EngineError> {
        if candidates.is_empty() {
            return Err(EngineError::InvalidRequest("empty candidate set".into()));
        }
        let reply = self
            .client
            .chat(ANSWER_SYNTHESIS_PROMPT, &synthesis_user_message(query, candidates))?;
        Ok(parse_cited_answer(&reply, candidates.len()))
    }
}
