//! Thin typed client for the provisim HTTP service.
//!
//! ```no_run
//! # async fn demo() -> Result<(), provisim_client::ClientError> {
//! use provisim_client::Client;
//! use provisim_core::api::{RunRequest, ScenarioSource};
//!
//! let client = Client::new("http://127.0.0.1:8087")?;
//! let out = client
//!     .run(&RunRequest {
//!         source: ScenarioSource {
//!             scenario: "controller.filter = hinf\n".into(),
//!             ..Default::default()
//!         },
//!     })
//!     .await?;
//! println!("AmRT {}", out.metrics.avg_mrt);
//! # Ok(())
//! # }
//! ```

use provisim_core::api::*;
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server URL '{0}'")]
    Url(String),

    /// The server answered with an error body.
    #[error("server returned {status}: {body}")]
    Api { status: StatusCode, body: ApiError },

    #[error("cannot reach server: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("unexpected {status} response: {text}")]
    Unexpected { status: StatusCode, text: String },
}

impl ClientError {
    /// True when the request itself was at fault (HTTP 4xx other than 404),
    /// i.e. a usage, parse, schema or input error.
    pub fn is_usage(&self) -> bool {
        match self {
            ClientError::Api { status, .. } => {
                status.is_client_error() && *status != StatusCode::NOT_FOUND
            }
            ClientError::Url(_) => true,
            _ => false,
        }
    }

    pub fn api_error(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api { body, .. } => Some(body),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let base = base_url.trim_end_matches('/').to_string();
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(ClientError::Url(base_url.to_string()));
        }
        Ok(Client {
            base,
            http: reqwest::Client::new(),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize + ?Sized>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<reqwest::Response, ClientError> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let text = resp.text().await?;
        match serde_json::from_str::<ApiError>(&text) {
            Ok(body) => Err(ClientError::Api { status, body }),
            Err(_) => Err(ClientError::Unexpected { status, text }),
        }
    }

    async fn call<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        Ok(self.send(method, path, body).await?.json().await?)
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.call::<(), _>(Method::GET, "/healthz", None).await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
        self.call(Method::POST, "/v1/run", Some(req)).await
    }

    pub async fn compare(&self, req: &CompareRequest) -> Result<CompareResponse, ClientError> {
        self.call(Method::POST, "/v1/compare", Some(req)).await
    }

    pub async fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse, ClientError> {
        self.call(Method::POST, "/v1/sweep", Some(req)).await
    }

    pub async fn replay(&self, req: &ReplayRequest) -> Result<ReplayResponse, ClientError> {
        self.call(Method::POST, "/v1/replay", Some(req)).await
    }

    pub async fn create_loop(&self, req: &CreateLoopRequest) -> Result<LoopStatus, ClientError> {
        self.call(Method::POST, "/v1/loops", Some(req)).await
    }

    pub async fn get_loop(&self, id: u64) -> Result<LoopStatus, ClientError> {
        self.call::<(), _>(Method::GET, &format!("/v1/loops/{id}"), None)
            .await
    }

    pub async fn observe(&self, id: u64, observation: &[f64]) -> Result<ObserveResponse, ClientError> {
        let body = ObserveRequest::Observation {
            observation: observation.to_vec(),
        };
        self.call(Method::POST, &format!("/v1/loops/{id}/observe"), Some(&body))
            .await
    }

    /// Sends raw sub-interval samples; the server averages them.
    pub async fn observe_samples(
        &self,
        id: u64,
        samples: &[Vec<f64>],
    ) -> Result<ObserveResponse, ClientError> {
        let body = ObserveRequest::Samples {
            samples: samples.to_vec(),
        };
        self.call(Method::POST, &format!("/v1/loops/{id}/observe"), Some(&body))
            .await
    }

    pub async fn reset_loop(&self, id: u64) -> Result<LoopStatus, ClientError> {
        self.call::<(), _>(Method::POST, &format!("/v1/loops/{id}/reset"), None)
            .await
    }

    pub async fn delete_loop(&self, id: u64) -> Result<(), ClientError> {
        self.send::<()>(Method::DELETE, &format!("/v1/loops/{id}"), None)
            .await?;
        Ok(())
    }
}
