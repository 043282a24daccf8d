//! Typed async client for the session service.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use xeff_core::api::{
    CatalogEntry, CreateSession, EfficacyView, ErrorBody, ExplanationView, FeedbackRequest, FeedbackResponse,
    QuizRequest, QuizView, SatisfactionRequest, SessionInfo,
};
use xeff_core::catalog::ItemId;
use xeff_core::efficacy::{EfficacyScore, SatisfactionMark};
use xeff_core::feedback::FeedbackEvent;
use xeff_core::recommend::RegressionTree;
use xeff_core::session::{QuizAnswer, RecommendationList, SelfAssessment};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The server answered with a non-success status.
    #[error("{status} {kind}: {message}")]
    Api {
        status: StatusCode,
        kind: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    async fn send(&self, method: Method, path: &str, body: Option<&impl Serialize>) -> Result<reqwest::Response> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let (kind, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.kind, b.error),
            Err(_) => ("http".to_string(), text),
        };
        Err(ClientError::Api { status, kind, message })
    }

    async fn json<T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&impl Serialize>) -> Result<T> {
        Ok(self.send(method, path, body).await?.json().await?)
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.json(Method::GET, path, None::<&()>).await
    }

    pub async fn health(&self) -> Result<Value> {
        self.get("/health").await
    }

    pub async fn onboarding(&self, count: usize) -> Result<Vec<CatalogEntry>> {
        self.get(&format!("/catalog/onboarding?count={count}")).await
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<RecommendationList> {
        self.json(Method::POST, "/sessions", Some(req)).await
    }

    pub async fn sessions(&self) -> Result<Vec<SessionInfo>> {
        self.get("/sessions").await
    }

    pub async fn recommendations(&self, session: &str) -> Result<RecommendationList> {
        self.get(&format!("/sessions/{session}/recommendations")).await
    }

    /// Closes the current trial and opens the next one.
    pub async fn next_trial(&self, session: &str) -> Result<RecommendationList> {
        self.json(Method::POST, &format!("/sessions/{session}/recommendations:next"), None::<&()>)
            .await
    }

    /// Opens an item's explanation; the server logs the view.
    pub async fn explanation(&self, session: &str, item: ItemId) -> Result<ExplanationView> {
        self.get(&format!("/sessions/{session}/items/{}/explanation", item.0)).await
    }

    pub async fn feedback(&self, session: &str, events: Vec<FeedbackEvent>) -> Result<FeedbackResponse> {
        self.json(Method::POST, &format!("/sessions/{session}/feedback"), Some(&FeedbackRequest { events }))
            .await
    }

    pub async fn satisfaction(&self, session: &str, marks: Vec<SatisfactionMark>) -> Result<EfficacyScore> {
        self.json(Method::POST, &format!("/sessions/{session}/satisfaction"), Some(&SatisfactionRequest { marks }))
            .await
    }

    pub async fn quiz(&self, session: &str) -> Result<QuizView> {
        self.get(&format!("/sessions/{session}/quiz")).await
    }

    pub async fn submit_quiz(&self, session: &str, answers: Vec<QuizAnswer>) -> Result<EfficacyScore> {
        self.json(Method::POST, &format!("/sessions/{session}/quiz"), Some(&QuizRequest { answers }))
            .await
    }

    pub async fn assessment(&self, session: &str, a: &SelfAssessment) -> Result<()> {
        self.send(Method::POST, &format!("/sessions/{session}/assessment"), Some(a)).await?;
        Ok(())
    }

    pub async fn efficacy(&self, session: &str) -> Result<EfficacyView> {
        self.get(&format!("/sessions/{session}/efficacy")).await
    }

    pub async fn tree(&self, session: &str) -> Result<RegressionTree> {
        self.get(&format!("/sessions/{session}/tree")).await
    }
}
