use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::Value;

use crate::api::{JobAccepted, JobStatus, JobView};
use crate::error::ApiError;
use crate::AppState;

struct JobRecord {
    kind: String,
    outcome: Option<Result<Value, ApiError>>,
    finished: Option<Instant>,
}

#[derive(Default)]
pub(crate) struct Jobs {
    map: Mutex<HashMap<String, JobRecord>>,
}

impl Jobs {
    fn create(&self, kind: &str) -> String {
        let id = crate::store::new_id('j');
        self.map.lock().unwrap().insert(
            id.clone(),
            JobRecord {
                kind: kind.into(),
                outcome: None,
                finished: None,
            },
        );
        id
    }

    fn finish(&self, id: &str, outcome: Result<Value, ApiError>) {
        if let Some(job) = self.map.lock().unwrap().get_mut(id) {
            job.outcome = Some(outcome);
            job.finished = Some(Instant::now());
        }
    }

    fn remove(&self, id: &str) {
        self.map.lock().unwrap().remove(id);
    }

    pub fn view(&self, id: &str) -> Option<JobView> {
        let map = self.map.lock().unwrap();
        let job = map.get(id)?;
        let (status, result, error, http_status) = match &job.outcome {
            None => (JobStatus::Running, None, None, None),
            Some(Ok(v)) => (JobStatus::Succeeded, Some(v.clone()), None, Some(200)),
            Some(Err(e)) => (JobStatus::Failed, None, Some(e.body.clone()), Some(e.status.as_u16())),
        };
        Some(JobView {
            job_id: id.into(),
            kind: job.kind.clone(),
            status,
            result,
            error,
            http_status,
        })
    }

    pub fn expire(&self, ttl: Duration) {
        let now = Instant::now();
        self.map
            .lock()
            .unwrap()
            .retain(|_, j| j.finished.is_none_or(|t| now.duration_since(t) <= ttl));
    }
}

/// Run blocking work on the worker pool, serialized behind `lock` when
/// given. Answers synchronously if it finishes within the configured
/// window, otherwise 202 with a job to poll. The work runs to completion
/// either way.
pub(crate) async fn run_long<F>(
    state: &AppState,
    kind: &str,
    lock: Option<Arc<tokio::sync::Mutex<()>>>,
    work: F,
) -> Result<Response, ApiError>
where
    F: FnOnce() -> Result<Value, ApiError> + Send + 'static,
{
    let id = state.inner.jobs.create(kind);
    let inner = state.inner.clone();
    let job_id = id.clone();
    let task = tokio::spawn(async move {
        let _guard = match lock {
            Some(l) => Some(l.lock_owned().await),
            None => None,
        };
        let _permit = inner.pool.clone().acquire_owned().await.map_err(ApiError::internal)?;
        let outcome = match tokio::task::spawn_blocking(work).await {
            Ok(r) => r,
            Err(e) => Err(ApiError::internal(e)),
        };
        inner.jobs.finish(&job_id, outcome.clone());
        outcome
    });
    match tokio::time::timeout(state.inner.config.long_operation, task).await {
        Ok(joined) => {
            state.inner.jobs.remove(&id);
            let value = joined.map_err(ApiError::internal)??;
            Ok(Json(value).into_response())
        }
        Err(_) => {
            let body = JobAccepted {
                poll: format!("/jobs/{id}"),
                job_id: id,
                status: JobStatus::Running,
            };
            Ok((StatusCode::ACCEPTED, Json(body)).into_response())
        }
    }
}
