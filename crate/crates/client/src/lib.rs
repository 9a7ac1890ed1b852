//! Thin async client for the commute-grid HTTP API.

use commute_grid::api::{CapacityResponse, ErrorBody, MetaResponse, ScenarioRequest, ScenarioResponse};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {}", match &.body.field { Some(f) => format!("{f}: {}", .body.error), None => .body.error.clone() })]
    Api { status: StatusCode, body: ErrorBody },
    #[error("invalid response body")]
    Decode(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn text(resp: reqwest::Response) -> Result<String, ClientError> {
        let status = resp.status();
        let body = resp.text().await?;
        if status.is_success() {
            return Ok(body);
        }
        let body = serde_json::from_str(&body).unwrap_or(ErrorBody { error: body, field: None });
        Err(ClientError::Api { status, body })
    }

    fn decode<T: DeserializeOwned>(text: &str) -> Result<T, ClientError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Response body exactly as sent by the server.
    pub async fn scenario_raw(&self, req: &ScenarioRequest) -> Result<String, ClientError> {
        Self::text(self.http.post(self.url("/api/scenario")).json(req).send().await?).await
    }

    pub async fn scenario(&self, req: &ScenarioRequest) -> Result<ScenarioResponse, ClientError> {
        Self::decode(&self.scenario_raw(req).await?)
    }

    pub async fn capacity_raw(&self, lambda: Option<f64>) -> Result<String, ClientError> {
        let url = match lambda {
            Some(l) => format!("{}?lambda={l}", self.url("/api/capacity")),
            None => self.url("/api/capacity"),
        };
        Self::text(self.http.get(url).send().await?).await
    }

    pub async fn capacity(&self, lambda: Option<f64>) -> Result<CapacityResponse, ClientError> {
        Self::decode(&self.capacity_raw(lambda).await?)
    }

    pub async fn meta(&self) -> Result<MetaResponse, ClientError> {
        Self::decode(&Self::text(self.http.get(self.url("/api/meta")).send().await?).await?)
    }
}
