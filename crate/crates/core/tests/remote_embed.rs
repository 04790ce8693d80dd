//! Remote embedding client against a loopback server.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use ebm_triage::embed::{
    build_provider, EmbedError, EmbedRequest, EmbedResponse, EmbeddingProvider, ProviderConfig,
    ProviderMode, RemoteProvider,
};

#[derive(Clone, Copy)]
enum Behaviour {
    Echo,
    FailTwiceThenEcho,
    AlwaysUnavailable,
    BadRequest,
    ShortVectorAt(usize),
    Slow,
}

struct Server {
    behaviour: Behaviour,
    hits: AtomicUsize,
    batch_sizes: Mutex<Vec<usize>>,
}

const DIM: usize = 3;

fn echo(texts: &[String]) -> EmbedResponse {
    EmbedResponse {
        embeddings: texts
            .iter()
            .map(|t| vec![t.len() as f64, t.bytes().map(f64::from).sum(), 1.0])
            .collect(),
        dimension: DIM,
    }
}

async fn embed(
    State(server): State<Arc<Server>>,
    Json(req): Json<EmbedRequest>,
) -> Result<Json<EmbedResponse>, (StatusCode, String)> {
    let hit = server.hits.fetch_add(1, Ordering::SeqCst);
    server.batch_sizes.lock().unwrap().push(req.texts.len());
    match server.behaviour {
        Behaviour::Echo => Ok(Json(echo(&req.texts))),
        Behaviour::FailTwiceThenEcho if hit < 2 => {
            Err((StatusCode::SERVICE_UNAVAILABLE, "warming up".into()))
        }
        Behaviour::FailTwiceThenEcho => Ok(Json(echo(&req.texts))),
        Behaviour::AlwaysUnavailable => Err((StatusCode::INTERNAL_SERVER_ERROR, "down".into())),
        Behaviour::BadRequest => Err((StatusCode::BAD_REQUEST, "no".into())),
        Behaviour::ShortVectorAt(i) => {
            let mut r = echo(&req.texts);
            r.embeddings[i].pop();
            Ok(Json(r))
        }
        Behaviour::Slow => {
            tokio::time::sleep(Duration::from_millis(400)).await;
            Ok(Json(echo(&req.texts)))
        }
    }
}

/// Start a server on an ephemeral port; returns its base URL.
fn serve(behaviour: Behaviour) -> (String, Arc<Server>) {
    let server = Arc::new(Server {
        behaviour,
        hits: AtomicUsize::new(0),
        batch_sizes: Default::default(),
    });
    let state = Arc::clone(&server);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/embed", post(embed)).with_state(state);
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}"), server)
}

fn config(endpoint: String) -> ProviderConfig {
    ProviderConfig {
        mode: ProviderMode::Remote,
        endpoint: Some(endpoint),
        dimension: DIM,
        timeout_ms: 2_000,
        max_batch: 4,
        retry_backoff_ms: 10,
        ..Default::default()
    }
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("text number {i}{}", "x".repeat(i))).collect()
}

#[test]
fn batches_preserve_input_order() {
    let (url, server) = serve(Behaviour::Echo);
    let provider = RemoteProvider::new(config(url)).unwrap();
    let input = texts(10);
    let out = provider.embed_batch(&input).unwrap();
    assert_eq!(out.len(), 10);
    for (t, e) in input.iter().zip(&out) {
        assert_eq!(e.values()[0], t.len() as f64);
    }
    assert_eq!(*server.batch_sizes.lock().unwrap(), vec![4, 4, 2]);
}

#[test]
fn transient_failures_are_retried() {
    let (url, server) = serve(Behaviour::FailTwiceThenEcho);
    let provider = RemoteProvider::new(config(url)).unwrap();
    let out = provider.embed_remote(&texts(2)).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_server_errors_give_up_after_three_attempts() {
    let (url, server) = serve(Behaviour::AlwaysUnavailable);
    let provider = RemoteProvider::new(config(url)).unwrap();
    let err = provider.embed_remote(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbedError::Status { status: 500, .. }), "{err}");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, server) = serve(Behaviour::BadRequest);
    let provider = RemoteProvider::new(config(url)).unwrap();
    let err = provider.embed_remote(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbedError::Status { status: 400, .. }));
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn wrong_dimension_names_the_item() {
    let (url, _server) = serve(Behaviour::ShortVectorAt(2));
    let provider = RemoteProvider::new(config(url)).unwrap();
    let err = provider.embed_remote(&texts(4)).unwrap_err();
    assert!(
        matches!(err, EmbedError::BadDimension { index: 2, expected: 3, actual: 2 }),
        "{err}"
    );
}

#[test]
fn slow_server_times_out() {
    let (url, server) = serve(Behaviour::Slow);
    let provider = RemoteProvider::new(ProviderConfig {
        timeout_ms: 100,
        ..config(url)
    })
    .unwrap();
    let err = provider.embed_remote(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbedError::Timeout { attempts: 3 }), "{err}");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let provider = RemoteProvider::new(config(url)).unwrap();
    let err = provider.embed_remote(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbedError::Transport { attempts: 3, .. }), "{err}");
}

#[test]
fn cached_provider_skips_the_network_on_hits() {
    let (url, server) = serve(Behaviour::Echo);
    let dir = tempfile::tempdir().unwrap();
    let provider = build_provider(&ProviderConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..config(url)
    })
    .unwrap();
    let first = provider.embed_batch(&texts(3)).unwrap();
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    let mut mixed = texts(3);
    mixed.push("a brand new text".into());
    let second = provider.embed_batch(&mixed).unwrap();
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
    assert_eq!(*server.batch_sizes.lock().unwrap(), vec![3, 1]);
    assert_eq!(&second[..3], &first[..]);
}
