//! HTTP clients. Both POST JSON to a fixed URL: the verifier sends
//! `{"scene", "prompt"}` and expects a [`VerifierAction`]; the editor sends
//! `{"scene", "prompt", "actions"}` and expects a scene graph.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{AgentError, EditorClient, SemanticAction, VerifierAction, VerifierClient};
use crate::types::SceneGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig {
            url: url.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
        }
    }
}

struct Http {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

impl Http {
    fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Http { cfg, agent }
    }

    fn once<B: Serialize, T: DeserializeOwned>(&self, body: &B) -> Result<T, AgentError> {
        let mut resp = self
            .agent
            .post(&self.cfg.url)
            .send_json(body)
            .map_err(|e| AgentError::Client(format!("{}: {e}", self.cfg.url)))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(AgentError::Client(format!("{}: HTTP {status}", self.cfg.url)));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AgentError::Client(format!("{}: {e}", self.cfg.url)))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Client(format!("{}: bad response: {e}", self.cfg.url)))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, body: &B) -> Result<T, AgentError> {
        let mut last = None;
        for _ in 0..=self.cfg.retries {
            match self.once(body) {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

#[derive(Serialize)]
struct VerifyRequest<'a> {
    scene: &'a SceneGraph,
    prompt: &'a str,
}

#[derive(Serialize)]
struct EditRequest<'a> {
    scene: &'a SceneGraph,
    prompt: &'a str,
    actions: &'a [SemanticAction],
}

pub struct RemoteVerifier(Http);

impl RemoteVerifier {
    pub fn new(cfg: RemoteConfig) -> Self {
        RemoteVerifier(Http::new(cfg))
    }
}

impl VerifierClient for RemoteVerifier {
    fn act(&self, scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError> {
        let a: VerifierAction = self.0.post(&VerifyRequest { scene, prompt })?;
        a.validate().map_err(|e| AgentError::Client(format!("{}: {e}", self.0.cfg.url)))?;
        Ok(a)
    }
}

/// The edit contract carries the prompt; it is fixed per editor because
/// [`EditorClient::edit`] does not pass it.
pub struct RemoteEditor {
    http: Http,
    prompt: String,
}

impl RemoteEditor {
    pub fn new(cfg: RemoteConfig, prompt: impl Into<String>) -> Self {
        RemoteEditor {
            http: Http::new(cfg),
            prompt: prompt.into(),
        }
    }
}

impl EditorClient for RemoteEditor {
    fn edit(&self, scene: &SceneGraph, actions: &[SemanticAction]) -> Result<SceneGraph, AgentError> {
        self.http.post(&EditRequest {
            scene,
            prompt: &self.prompt,
            actions,
        })
    }
}
