//! Selection clients: given a marked image and an expression, return text.

use std::collections::HashMap;
use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOKEN_ENV: &str = "CHARTFORGE_CLIENT_TOKEN";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ClientError(pub String);

pub struct SelectionRequest<'a> {
    pub sample_id: &'a str,
    pub marked_image: &'a RgbImage,
    pub expression: &'a str,
    pub candidate_count: usize,
}

pub trait SelectionClient: Sync {
    fn select(&self, request: &SelectionRequest<'_>) -> Result<String, ClientError>;
}

/// Default instruction sent alongside the marked image.
pub fn default_prompt(expression: &str, candidate_count: usize) -> String {
    format!(
        "The chart has {candidate_count} candidate regions, each labelled with a red numbered mark. \
         Select every region that the expression refers to.\n\
         Expression: {expression}\n\
         Answer with the mark numbers as a list at the end of your reply, e.g. [1, 3]."
    )
}

/// Returns canned responses, per sample or a single fallback.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    responses: HashMap<String, String>,
    fallback: Option<String>,
}

impl ScriptedClient {
    pub fn fixed(text: impl Into<String>) -> Self {
        Self {
            responses: HashMap::new(),
            fallback: Some(text.into()),
        }
    }

    pub fn per_sample(responses: HashMap<String, String>) -> Self {
        Self {
            responses,
            fallback: None,
        }
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, text: impl Into<String>) {
        self.responses.insert(sample_id.into(), text.into());
    }
}

impl SelectionClient for ScriptedClient {
    fn select(&self, request: &SelectionRequest<'_>) -> Result<String, ClientError> {
        self.responses
            .get(request.sample_id)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| ClientError(format!("no scripted response for {}", request.sample_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub sample_id: String,
    pub response: String,
}

/// Replays cached responses from a JSONL file of `{sample_id, response}`.
#[derive(Debug, Clone)]
pub struct ReplayClient(ScriptedClient);

impl ReplayClient {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ClientError(format!("{}: {e}", path.display())))?;
        let mut responses = HashMap::new();
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let e: ReplayEntry = serde_json::from_str(line)
                .map_err(|e| ClientError(format!("{}:{}: {e}", path.display(), n + 1)))?;
            responses.insert(e.sample_id, e.response);
        }
        Ok(Self(ScriptedClient::per_sample(responses)))
    }
}

impl SelectionClient for ReplayClient {
    fn select(&self, request: &SelectionRequest<'_>) -> Result<String, ClientError> {
        self.0.select(request)
    }
}

/// POSTs `{sample_id, expression, candidate_count, prompt, image_png_base64}`
/// to an endpoint. The reply's `text` field is used when the body is a JSON
/// object carrying one, otherwise the raw body.
#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: String,
    token: Option<String>,
    timeout: Duration,
}

#[derive(Serialize)]
struct HttpPayload<'a> {
    sample_id: &'a str,
    expression: &'a str,
    candidate_count: usize,
    prompt: String,
    image_png_base64: String,
}

impl HttpClient {
    /// Reads the bearer token from `CHARTFORGE_CLIENT_TOKEN` when set.
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            timeout,
        }
    }
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>, ClientError> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| ClientError(e.to_string()))?;
    Ok(buf.into_inner())
}

impl SelectionClient for HttpClient {
    fn select(&self, request: &SelectionRequest<'_>) -> Result<String, ClientError> {
        let payload = HttpPayload {
            sample_id: request.sample_id,
            expression: request.expression,
            candidate_count: request.candidate_count,
            prompt: default_prompt(request.expression, request.candidate_count),
            image_png_base64: base64::engine::general_purpose::STANDARD
                .encode(encode_png(request.marked_image)?),
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(&payload)
            .map_err(|e| ClientError(format!("{}: {e}", self.endpoint)))?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError(e.to_string()))?;
        Ok(match serde_json::from_str::<serde_json::Value>(&body) {
            Ok(serde_json::Value::Object(map)) => match map.get("text") {
                Some(serde_json::Value::String(t)) => t.clone(),
                _ => body,
            },
            _ => body,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(id: &'a str, img: &'a RgbImage) -> SelectionRequest<'a> {
        SelectionRequest {
            sample_id: id,
            marked_image: img,
            expression: "the tallest bar",
            candidate_count: 3,
        }
    }

    #[test]
    fn scripted_lookup() {
        let img = RgbImage::new(2, 2);
        let mut c = ScriptedClient::default();
        c.insert("s1", "[1]");
        assert_eq!(c.select(&req("s1", &img)).unwrap(), "[1]");
        assert!(c.select(&req("s2", &img)).is_err());
        assert_eq!(
            ScriptedClient::fixed("none")
                .select(&req("s9", &img))
                .unwrap(),
            "none"
        );
    }

    #[test]
    fn replay_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        fs::write(&p, "{\"sample_id\":\"a\",\"response\":\"I pick [2]\"}\n\n").unwrap();
        let c = ReplayClient::load(&p).unwrap();
        let img = RgbImage::new(2, 2);
        assert_eq!(c.select(&req("a", &img)).unwrap(), "I pick [2]");
    }

    #[test]
    fn png_encoding_is_stable() {
        let img = RgbImage::from_pixel(3, 2, image::Rgb([1, 2, 3]));
        let a = encode_png(&img).unwrap();
        assert_eq!(a, encode_png(&img).unwrap());
        assert_eq!(&a[1..4], b"PNG");
    }

    #[test]
    fn prompt_mentions_expression() {
        assert!(default_prompt("left bar", 4).contains("left bar"));
    }
}
