//! HTTP/JSON routes. Every endpoint is a GET over immutable state.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use embdiff_core::domino::DEFAULT_PAGE_LIMIT;
use embdiff_core::lns::{DEFAULT_BINS, DEFAULT_K};
use embdiff_core::{DominoQuery, RankOrder};
use serde::Serialize;

use crate::state::{PairParams, Service, ServiceError, ServiceResult};

pub const DEFAULT_SEARCH_LIMIT: usize = 20;

type Params = Query<HashMap<String, String>>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        #[derive(Serialize)]
        struct Body {
            error: String,
        }
        json(status, &Body { error: self.to_string() })
    }
}

fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> ServiceResult<&'a str> {
    q.get(key).map(String::as_str).ok_or_else(|| ServiceError::BadRequest(format!("missing query parameter {key:?}")))
}

fn parsed<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: T) -> ServiceResult<T> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ServiceError::BadRequest(format!("invalid value {v:?} for {key:?}"))),
    }
}

fn pair_params(q: &HashMap<String, String>) -> ServiceResult<PairParams> {
    Ok(PairParams {
        dataset: required(q, "dataset")?.to_owned(),
        model_a: required(q, "a")?.to_owned(),
        model_b: required(q, "b")?.to_owned(),
        k: parsed(q, "k", DEFAULT_K)?,
        metric: q.get("metric").cloned().unwrap_or_else(|| "cosine".to_owned()),
    })
}

fn domino_query(q: &HashMap<String, String>) -> ServiceResult<DominoQuery> {
    let order: RankOrder = parsed(q, "sort", RankOrder::Least)?;
    let score_range = match (q.get("lo"), q.get("hi")) {
        (None, None) => None,
        _ => Some((parsed(q, "lo", 0.0)?, parsed(q, "hi", 1.0)?)),
    };
    let selection = match q.get("selection") {
        None => None,
        Some(s) if s.is_empty() => Some(Vec::new()),
        Some(s) => Some(
            s.split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| ServiceError::BadRequest(format!("invalid selection index {t:?}"))))
                .collect::<ServiceResult<Vec<_>>>()?,
        ),
    };
    Ok(DominoQuery {
        order,
        score_range,
        selection,
        search: q.get("search").cloned(),
        offset: parsed(q, "offset", 0)?,
        limit: parsed(q, "limit", DEFAULT_PAGE_LIMIT)?,
    })
}

/// Runs a blocking query off the async workers and serializes the result.
async fn respond<T, F>(service: Arc<Service>, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service) -> ServiceResult<T> + Send + 'static,
{
    let out = tokio::task::spawn_blocking(move || f(&service).map(|v| serde_json::to_vec(&v))).await;
    match out {
        Ok(Ok(Ok(bytes))) => (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Ok(Ok(Err(e))) => ServiceError::Internal(e.to_string()).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(format!("worker failed: {e}")).into_response(),
    }
}

async fn datasets(State(s): State<Arc<Service>>) -> Response {
    json(StatusCode::OK, &s.datasets())
}

async fn projection(State(s): State<Arc<Service>>, UrlPath(id): UrlPath<String>, Query(q): Params) -> Response {
    let model = match required(&q, "model") {
        Ok(m) => m.to_owned(),
        Err(e) => return e.into_response(),
    };
    match s.projection(&id, &model) {
        Ok(p) => json(StatusCode::OK, &p),
        Err(e) => e.into_response(),
    }
}

async fn compare(State(s): State<Arc<Service>>, Query(q): Params) -> Response {
    respond(s, move |s| {
        let p = pair_params(&q)?;
        s.compare(&p, parsed(&q, "bins", DEFAULT_BINS)?)
    })
    .await
}

async fn dominoes(State(s): State<Arc<Service>>, Query(q): Params) -> Response {
    respond(s, move |s| s.dominoes(&pair_params(&q)?, &domino_query(&q)?)).await
}

async fn domino(State(s): State<Arc<Service>>, UrlPath(token): UrlPath<String>, Query(q): Params) -> Response {
    respond(s, move |s| s.domino(&pair_params(&q)?, &token)).await
}

async fn search(State(s): State<Arc<Service>>, Query(q): Params) -> Response {
    respond(s, move |s| {
        let limit = parsed(&q, "limit", DEFAULT_SEARCH_LIMIT)?;
        s.search(required(&q, "dataset")?, q.get("q").map(String::as_str).unwrap_or(""), limit)
    })
    .await
}

async fn not_found() -> Response {
    ServiceError::NotFound("no such endpoint".into()).into_response()
}

/// API routes, plus static files from `static_dir` for every other path.
pub fn router(service: Arc<Service>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/datasets", get(datasets))
        .route("/api/datasets/{id}/projection", get(projection))
        .route("/api/compare", get(compare))
        .route("/api/dominoes", get(dominoes))
        .route("/api/domino/{token}", get(domino))
        .route("/api/search", get(search))
        .route("/api/{*rest}", get(not_found))
        .with_state(service);
    match static_dir {
        Some(dir) => {
            let root = Arc::new(dir.to_path_buf());
            api.fallback(get(move |uri: Uri| static_file(root.clone(), uri)))
        }
        None => api.fallback(not_found),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("wasm") => "application/wasm",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

/// Maps a request path under `root`, refusing anything but plain segments.
fn resolve_static(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() || rel.ends_with('/') { format!("{rel}index.html") } else { rel.to_owned() };
    let rel = Path::new(&rel);
    if rel.components().all(|c| matches!(c, Component::Normal(_))) {
        Some(root.join(rel))
    } else {
        None
    }
}

async fn static_file(root: Arc<PathBuf>, uri: Uri) -> Response {
    let Some(path) = resolve_static(&root, uri.path()) else {
        return ServiceError::NotFound("no such file".into()).into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => (StatusCode::OK, [(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => ServiceError::NotFound("no such file".into()).into_response(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use axum::http::Request;
    use embdiff_core::{AlignedModel, Dataset};
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    fn toy() -> Arc<Service> {
        let vocab: Vec<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
        let a = AlignedModel::new("toy", "A", 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        let b = AlignedModel::new("toy", "B", 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 2.5]).unwrap();
        Arc::new(Service::from_datasets(vec![Dataset::from_aligned("toy", vocab, vec![a, b]).unwrap()], 5).unwrap())
    }

    async fn get_json(app: Router, uri: &str) -> (StatusCode, serde_json::Value) {
        let res = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    #[tokio::test]
    async fn datasets_lists_models() {
        let (status, body) = get_json(router(toy(), None), "/api/datasets").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["datasets"][0]["id"], "toy");
        assert_eq!(body["datasets"][0]["models"][1]["name"], "B");
        assert_eq!(body["datasets"][0]["default_k"], 5);
    }

    #[tokio::test]
    async fn compare_histogram_counts_sum_to_vocabulary() {
        let (status, body) = get_json(router(toy(), None), "/api/compare?dataset=toy&a=A&b=B&k=2&metric=euclidean").await;
        assert_eq!(status, StatusCode::OK);
        let total: u64 = body["histogram"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
        assert_eq!(total, 6);
        assert_eq!(body["histogram"].as_array().unwrap().len(), 20);
        assert_eq!(body["scores"].as_array().unwrap().len(), 6);
    }

    #[tokio::test]
    async fn dominoes_page_and_filters() {
        let app = router(toy(), None);
        let (_, body) = get_json(app.clone(), "/api/dominoes?dataset=toy&a=A&b=B&k=2&metric=euclidean&sort=least&limit=2").await;
        assert_eq!(body["total"], 6);
        assert_eq!(body["items"].as_array().unwrap().len(), 2);
        let (_, body) = get_json(app.clone(), "/api/dominoes?dataset=toy&a=A&b=B&k=2&metric=euclidean&selection=").await;
        assert_eq!(body["total"], 0);
        let (_, body) = get_json(app.clone(), "/api/dominoes?dataset=toy&a=A&b=B&k=2&metric=euclidean&selection=5,0&search=f").await;
        assert_eq!(body["total"], 1);
        assert_eq!(body["items"][0]["object"], "f");
        let (status, _) = get_json(app, "/api/dominoes?dataset=toy&a=A&b=B&k=2&metric=euclidean&lo=0.9&hi=0.1").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }

    #[tokio::test]
    async fn domino_search_and_projection() {
        let app = router(toy(), None);
        let (status, body) = get_json(app.clone(), "/api/domino/f?dataset=toy&a=A&b=B&k=2&metric=euclidean").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["common"][0]["token"], "d");
        let (_, body) = get_json(app.clone(), "/api/search?dataset=toy&q=F").await;
        assert_eq!(body["results"][0]["token"], "f");
        let (_, body) = get_json(app.clone(), "/api/datasets/toy/projection?model=A").await;
        assert_eq!(body["coords"].as_array().unwrap().len(), 6);
        assert_eq!(body["tokens"][5], "f");
    }

    #[tokio::test]
    async fn errors_are_json() {
        let app = router(toy(), None);
        let (status, body) = get_json(app.clone(), "/api/compare?dataset=nope&a=A&b=B").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert!(body["error"].as_str().unwrap().contains("nope"));
        let (status, _) = get_json(app.clone(), "/api/compare?dataset=toy&a=A").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let (status, _) = get_json(app.clone(), "/api/compare?dataset=toy&a=A&b=B&k=abc").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let (status, _) = get_json(app, "/api/nothing").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn identical_requests_give_identical_bytes() {
        let app = router(toy(), None);
        let uri = "/api/dominoes?dataset=toy&a=A&b=B&k=3&metric=cosine&sort=most";
        let body = |app: Router| async move {
            let res = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
            res.into_body().collect().await.unwrap().to_bytes()
        };
        assert_eq!(body(app.clone()).await, body(app).await);
    }

    #[tokio::test]
    async fn static_files_stay_inside_their_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.html"), "<p>hi</p>").unwrap();
        let app = router(toy(), Some(dir.path()));
        let res = app.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
        assert_eq!(res.status(), StatusCode::OK);
        let res = app.oneshot(Request::get("/../Cargo.toml").body(Body::empty()).unwrap()).await.unwrap();
        assert_ne!(res.status(), StatusCode::OK);
    }

    #[test]
    fn static_paths_reject_traversal() {
        let root = Path::new("/srv/www");
        assert_eq!(resolve_static(root, "/"), Some(root.join("index.html")));
        assert_eq!(resolve_static(root, "/js/main.js"), Some(root.join("js/main.js")));
        assert_eq!(resolve_static(root, "/../etc/passwd"), None);
        assert_eq!(resolve_static(root, "/a/./b"), Some(root.join("a/b")));
        assert_eq!(resolve_static(root, "//etc/passwd"), Some(root.join("etc/passwd")));
    }
}
