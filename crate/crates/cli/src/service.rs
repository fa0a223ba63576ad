//! HTTP service over one or more persisted collections.
//!
//! Each collection sits behind a reader-writer lock. Queries share the read
//! lock; a mutation holds the write lock until the new state has been saved
//! to disk, so acknowledgment order equals persistence order.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use knnvault::store;
use knnvault::{classify, Collection, EngineConfig, Error, Predicate};
use serde::de::DeserializeOwned;

use crate::api::{
    ApiError, DeleteRequest, DeleteResponse, InsertRequest, InsertResponse, QueryRequest, QueryResponse, StatsResponse,
};

struct Entry {
    dir: PathBuf,
    collection: RwLock<Collection>,
}

#[derive(Clone)]
pub struct AppState {
    entries: Arc<HashMap<String, Arc<Entry>>>,
    default_k: usize,
}

impl AppState {
    /// Loads every collection directory; names must be unique.
    pub fn open(dirs: &[PathBuf], default_k: usize) -> knnvault::Result<Self> {
        EngineConfig::new(default_k)?;
        let mut entries = HashMap::new();
        for dir in dirs {
            let collection = store::load(dir)?;
            let name = collection.name().to_owned();
            if entries.contains_key(&name) {
                return Err(Error::DuplicateCollection { name });
            }
            entries.insert(
                name,
                Arc::new(Entry {
                    dir: dir.clone(),
                    collection: RwLock::new(collection),
                }),
            );
        }
        Ok(Self {
            entries: Arc::new(entries),
            default_k,
        })
    }

    fn entry(&self, name: &str) -> Result<Arc<Entry>, ApiError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::from_error(Error::UnknownCollection { name: name.to_owned() }, "name"))
    }

    pub fn collection_dir(&self, name: &str) -> Option<&Path> {
        self.entries.get(name).map(|e| e.dir.as_path())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/collections/{name}/query", post(query))
        .route("/collections/{name}/records", post(insert).delete(delete))
        .route("/collections/{name}/stats", get(stats))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_json)
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string(), None))?
}

fn poisoned() -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", "collection lock poisoned", None)
}

async fn query(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Result<Json<QueryResponse>, ApiError> {
    let entry = state.entry(&name)?;
    let req: QueryRequest = parse(&body)?;
    let cfg = EngineConfig::new(req.k.unwrap_or(state.default_k)).map_err(|e| ApiError::from_error(e, "k"))?;
    blocking(move || {
        let c = entry.collection.read().map_err(|_| poisoned())?;
        let result = classify(&c, &req.vector, cfg).map_err(|e| ApiError::from_error(e, "vector"))?;
        Ok(Json(QueryResponse {
            generation: c.generation(),
            result,
        }))
    })
    .await
}

fn persist(entry: &Entry, c: &Collection) -> Result<(), ApiError> {
    store::save(c, &entry.dir).map_err(|e| {
        tracing::error!(error = %e, dir = %entry.dir.display(), "persisting mutation failed");
        ApiError::from_error(e, "")
    })?;
    Ok(())
}

async fn insert(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Result<Json<InsertResponse>, ApiError> {
    let entry = state.entry(&name)?;
    let req: InsertRequest = parse(&body)?;
    blocking(move || {
        let mut c = entry.collection.write().map_err(|_| poisoned())?;
        let inserted = c.insert(req.records).map_err(|e| ApiError::from_error(e, "records"))?;
        if inserted > 0 {
            persist(&entry, &c)?;
        }
        Ok(Json(InsertResponse {
            inserted,
            generation: c.generation(),
        }))
    })
    .await
}

async fn delete(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Result<Json<DeleteResponse>, ApiError> {
    let entry = state.entry(&name)?;
    let req: DeleteRequest = parse(&body)?;
    let predicate = match (&req.ids, &req.predicate) {
        (Some(_), None) => None,
        (None, Some(p)) => Some(p.parse::<Predicate>().map_err(|e| ApiError::from_error(e, "predicate"))?),
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "INVALID_REQUEST",
                "give exactly one of `ids` or `predicate`",
                Some("body"),
            ))
        }
    };
    blocking(move || {
        let mut c = entry.collection.write().map_err(|_| poisoned())?;
        let ids = match predicate {
            Some(p) => c.select(&p),
            None => req.ids.unwrap_or_default(),
        };
        let outcome = c.delete(&ids);
        if outcome.deleted > 0 {
            persist(&entry, &c)?;
        }
        Ok(Json(DeleteResponse {
            deleted: outcome.deleted,
            not_found: outcome.not_live,
            generation: c.generation(),
        }))
    })
    .await
}

async fn stats(State(state): State<AppState>, UrlPath(name): UrlPath<String>) -> Result<Json<StatsResponse>, ApiError> {
    let entry = state.entry(&name)?;
    let c = entry.collection.read().map_err(|_| poisoned())?;
    Ok(Json(StatsResponse {
        name: c.name().to_owned(),
        count: c.len(),
        dimension: c.dimension(),
        labels: c.labels().to_vec(),
        generation: c.generation(),
    }))
}
