//! Chat-completion backend for real language models.
//!
//! Requests are `{"model", "messages": [{"role", "content"}], "temperature": 0}`
//! posted to the configured endpoint; the first choice's message content is
//! the reply. Every exchange is appended to a JSON-lines transcript.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Answer, Answerer, Exam, Expected, Memory, MemoryItem, QaPair, Question, Questioner, SyntheticOracle, Template};
use crate::error::{Error, RemoteError, Result};

/// Environment variable holding the bearer token unless overridden.
pub const DEFAULT_API_KEY_ENV: &str = "MCPA_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable with the token. Unset means no
    /// `Authorization` header.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Memory records sent as context with each question.
    pub context_items: usize,
    pub transcript_path: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "qwen3-8b".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60.0,
            max_retries: 3,
            retry_backoff_ms: 500,
            max_in_flight: 4,
            context_items: 24,
            transcript_path: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
    transcript: Option<Mutex<File>>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl RemoteBackend {
    /// Reads the token from `config.api_key_env`.
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if key.is_none() {
            log::warn!("`{}` is not set; requests are sent without credentials", config.api_key_env);
        }
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: RemoteConfig, api_key: Option<String>) -> Result<Self> {
        if !(config.timeout_s > 0.0) {
            return Err(Error::invalid("timeout_s", "must be > 0"));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .build()
            .into();
        let transcript = match &config.transcript_path {
            Some(path) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path)?)),
            None => None,
        };
        Ok(Self { slots: Slots::new(config.max_in_flight), config, api_key, agent, transcript })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// One chat exchange with retries on transport errors, 429 and 5xx.
    pub fn chat(&self, system: &str, user: &str) -> std::result::Result<String, RemoteError> {
        let messages = [Message { role: "system", content: system }, Message { role: "user", content: user }];
        let body = json!({ "model": self.config.model, "messages": messages, "temperature": 0 });

        let _slot = self.slots.acquire();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let result = self.send_once(&body, attempt);
            self.log_exchange(&body, attempt, &result);
            match result {
                Err(err) if err.is_retryable() && attempt <= self.config.max_retries => {
                    let wait = self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                    std::thread::sleep(Duration::from_millis(wait));
                }
                other => return other,
            }
        }
    }

    fn send_once(&self, body: &Value, attempt: u32) -> std::result::Result<String, RemoteError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        match request.send_json(body) {
            Ok(mut response) => {
                let parsed: ChatResponse = response
                    .body_mut()
                    .read_json()
                    .map_err(|e| RemoteError::Parse(format!("response body: {e}")))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| RemoteError::Parse("response has no choices".into()))
            }
            Err(ureq::Error::StatusCode(status)) => Err(RemoteError::Status { status }),
            Err(e) => Err(RemoteError::Transport { attempts: attempt, message: e.to_string() }),
        }
    }

    fn log_exchange(&self, request: &Value, attempt: u32, result: &std::result::Result<String, RemoteError>) {
        let Some(file) = &self.transcript else { return };
        let entry = match result {
            Ok(content) => json!({ "attempt": attempt, "request": request, "response": content }),
            Err(e) => json!({ "attempt": attempt, "request": request, "error": e.to_string() }),
        };
        let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(file, "{entry}") {
            log::warn!("could not write transcript: {e}");
        }
    }
}

fn caption(item: &MemoryItem) -> String {
    let p = &item.pose;
    let seen = if item.tags.is_empty() {
        "nothing notable".to_string()
    } else {
        item.tags.iter().map(|t| t.replace('_', " ")).collect::<Vec<_>>().join(", ")
    };
    format!(
        "t={:.2}s drone={} pose=[{:.1}, {:.1}, {:.1}, {:.3}, {:.3}, {:.3}] sees: {seen}",
        item.timestamp_s, item.robot, p.x, p.y, p.z, p.roll, p.pitch, p.yaw
    )
}

const EXAM_SYSTEM: &str = "You write exam questions about what a drone camera recorded. \
Reply with a JSON array only, no prose.";

const ANSWER_SYSTEM: &str = "You answer questions about what drones observed, using only the memory records given. \
Reply with a JSON object {\"answer\": ...} only.";

fn exam_prompt(pilot: &[MemoryItem], num_questions: usize) -> String {
    let mut prompt = String::from("Memory records:\n");
    for item in pilot {
        prompt.push_str(&caption(item));
        prompt.push('\n');
    }
    prompt.push_str(&format!(
        "\nWrite {num_questions} question-answer pairs about objects in these records. Cycle through three \
templates in order: presence (\"Is there a <object>?\", answer \"YES\"), location (\"Where is the <object>?\", \
answer [x, y, yaw] of a record showing it), reporter (\"Which drone sees the <object>?\", answer the drone id). \
Format: [{{\"template\": \"presence|location|reporter\", \"object\": \"<object>\", \"answer\": ...}}]"
    ));
    prompt
}

fn answer_prompt(question: &Question, memory: &Memory<'_>, limit: usize) -> String {
    let subject = question.subject.as_deref();
    let mut context: Vec<&MemoryItem> = match subject {
        Some(tag) => memory.iter().filter(|i| i.has_tag(tag)).take(limit).collect(),
        None => Vec::new(),
    };
    if context.is_empty() {
        let mut recent: Vec<&MemoryItem> = memory.iter().filter(|i| !i.tags.is_empty()).collect();
        recent.sort_by(|a, b| b.timestamp_s.total_cmp(&a.timestamp_s));
        recent.truncate(limit);
        context = recent;
    }
    let mut prompt = String::from("Memory records:\n");
    if context.is_empty() {
        prompt.push_str("(none)\n");
    }
    for item in context {
        prompt.push_str(&caption(item));
        prompt.push('\n');
    }
    let format = match question.template {
        Template::Presence => "\"YES\" or \"NO\"",
        Template::Location => "[x, y, yaw]",
        Template::Reporter => "the drone id as an integer",
    };
    prompt.push_str(&format!("\nQuestion: {question}\nAnswer format: {format}"));
    prompt
}

/// Strip code fences and surrounding prose, keeping the outermost JSON value
/// that starts with `open`.
fn extract_json(raw: &str, open: char, close: char) -> Option<&str> {
    let start = raw.find(open)?;
    let end = raw.rfind(close)?;
    (end > start).then(|| &raw[start..=end])
}

fn parse_yes_no(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(true),
            "no" | "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn parse_coords(v: &Value) -> Option<[f64; 3]> {
    let values: Vec<f64> = match v {
        Value::Array(items) => items.iter().map(Value::as_f64).collect::<Option<_>>()?,
        Value::String(s) => s
            .trim_matches(|c: char| c == '[' || c == ']' || c.is_whitespace())
            .split(',')
            .map(|p| p.trim().parse().ok())
            .collect::<Option<_>>()?,
        _ => return None,
    };
    match values.as_slice() {
        [x, y] => Some([*x, *y, 0.0]),
        [x, y, yaw, ..] => Some([*x, *y, *yaw]),
        _ => None,
    }
}

fn parse_robot(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::String(s) => s.trim().trim_start_matches(|c: char| !c.is_ascii_digit()).parse().ok(),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
struct RawQa {
    template: String,
    object: String,
    answer: Value,
}

/// Parse a generated exam. Entries that do not fit a template are dropped.
pub(crate) fn parse_exam(robot_id: usize, raw: &str, num_questions: usize) -> std::result::Result<Exam, RemoteError> {
    let json = extract_json(raw, '[', ']').ok_or_else(|| RemoteError::Parse("no JSON array in exam".into()))?;
    let entries: Vec<RawQa> = serde_json::from_str(json).map_err(|e| RemoteError::Parse(format!("exam: {e}")))?;
    let qa_pairs: Vec<QaPair> = entries
        .into_iter()
        .filter_map(|e| {
            let template = Template::parse(&e.template)?;
            let tag = e.object.trim().to_ascii_lowercase().replace(' ', "_");
            let expected = match template {
                Template::Presence => Expected::Presence(parse_yes_no(&e.answer)?),
                Template::Location => {
                    let [x, y, yaw] = parse_coords(&e.answer)?;
                    Expected::Location { x, y, yaw }
                }
                Template::Reporter => Expected::Reporter(BTreeSet::from([parse_robot(&e.answer)?])),
            };
            Some(QaPair { question: Question::new(template, tag), expected })
        })
        .take(num_questions)
        .collect();
    if qa_pairs.is_empty() {
        return Err(RemoteError::Parse("exam contains no usable question".into()));
    }
    Ok(Exam { robot_id, qa_pairs })
}

/// Parse an answer after case-folding and trimming. Anything unusable
/// becomes [`Answer::Unparsed`].
pub(crate) fn parse_answer(template: Template, raw: &str) -> Answer {
    let value = extract_json(raw, '{', '}')
        .and_then(|j| serde_json::from_str::<Value>(j).ok())
        .and_then(|v| v.get("answer").cloned())
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parsed = match template {
        Template::Presence => parse_yes_no(&value).map(Answer::Presence),
        Template::Location => parse_coords(&value).map(|[x, y, _]| Answer::Locations(vec![[x, y]])),
        Template::Reporter => parse_robot(&value).map(|r| Answer::Reporters(BTreeSet::from([r]))),
    };
    parsed.unwrap_or_else(|| Answer::Unparsed(raw.to_string()))
}

impl Questioner for RemoteBackend {
    fn generate_exam(&self, robot_id: usize, pilot: &[MemoryItem], num_questions: usize, seed: u64) -> Result<Exam> {
        if pilot.iter().all(|i| i.tags.is_empty()) {
            return SyntheticOracle.generate_exam(robot_id, pilot, num_questions, seed);
        }
        let reply = self.chat(EXAM_SYSTEM, &exam_prompt(pilot, num_questions))?;
        Ok(parse_exam(robot_id, &reply, num_questions)?)
    }
}

impl Answerer for RemoteBackend {
    fn answer(&self, question: &Question, memory: &Memory<'_>) -> Result<Answer> {
        let reply = self.chat(ANSWER_SYSTEM, &answer_prompt(question, memory, self.config.context_items))?;
        Ok(parse_answer(question.template, &reply))
    }
}
