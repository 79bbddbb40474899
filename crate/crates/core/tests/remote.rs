use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use fishbone_core::embedding::{CachedEmbedder, EmbedError, EmbeddingProvider, RemoteEmbedder, RemoteEmbeddingConfig};
use fishbone_core::summarizer::{RemoteChat, RemoteChatConfig, Summarizer};
use serde_json::{json, Value};

/// One captured request: the Authorization header and the body.
#[derive(Debug, Clone)]
struct Seen {
    auth: Option<String>,
    body: String,
}

/// Serves scripted `(status, body)` replies in order, one per connection;
/// the last reply repeats once the script runs out.
fn stub_server(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut auth = None;
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0u8; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                auth,
                body: String::from_utf8(body).unwrap(),
            });
            let (status, reply) = &script[n.min(script.len() - 1)];
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    (url, seen)
}

fn embed_config(url: &str, dimension: usize) -> RemoteEmbeddingConfig {
    RemoteEmbeddingConfig {
        retry_backoff_ms: 1,
        timeout_ms: 5_000,
        ..RemoteEmbeddingConfig::new(url, dimension)
    }
}

fn chat_config(url: &str) -> RemoteChatConfig {
    RemoteChatConfig {
        retry_backoff_ms: 1,
        timeout_ms: 5_000,
        ..RemoteChatConfig::new(url)
    }
}

fn chat_reply(content: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

#[test]
fn embedding_retries_once_after_503() {
    let ok = json!({"embeddings": [[3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]}).to_string();
    let (url, seen) = stub_server(vec![(503, "busy".into()), (200, ok)]);
    let e = RemoteEmbedder::with_token(embed_config(&url, 8), "secret");
    let v = e.embed("hello").unwrap();
    assert_eq!(&v.values()[..2], &[0.6, 0.8]);
    let st = e.stats();
    assert_eq!((st.remote_calls, st.retries), (1, 1));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[1].auth.as_deref(), Some("Bearer secret"));
    let body: Value = serde_json::from_str(&seen[1].body).unwrap();
    assert_eq!(body, json!({"input": ["hello"]}));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = stub_server(vec![(400, "bad".into())]);
    let e = RemoteEmbedder::with_token(embed_config(&url, 8), "t");
    assert!(matches!(e.embed("x"), Err(EmbedError::Provider { .. })));
    assert_eq!(e.stats().retries, 0);
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn wrong_dimension_is_rejected() {
    let (url, _) = stub_server(vec![(200, json!({"embeddings": [[1.0, 2.0]]}).to_string())]);
    let e = RemoteEmbedder::with_token(embed_config(&url, 8), "t");
    assert!(matches!(
        e.embed("x"),
        Err(EmbedError::DimensionMismatch { expected: 8, got: 2 })
    ));
}

#[test]
fn every_batch_is_sent_once() {
    // Replies follow arrival order, which concurrency makes arbitrary, so
    // only coverage is checked here.
    let replies = (0..4)
        .map(|i| {
            let mut v = vec![0.0; 8];
            v[i] = 1.0;
            (200, json!({"embeddings": [v]}).to_string())
        })
        .collect();
    let (url, seen) = stub_server(replies);
    let cfg = RemoteEmbeddingConfig {
        batch_size: 1,
        max_in_flight: 2,
        ..embed_config(&url, 8)
    };
    let e = RemoteEmbedder::with_token(cfg, "t");
    let out = e.embed_batch(&["a", "b", "c", "d"]).unwrap();
    assert_eq!(out.len(), 4);
    assert_eq!(e.stats().remote_calls, 4);
    let mut inputs: Vec<String> = seen
        .lock()
        .unwrap()
        .iter()
        .map(|s| {
            serde_json::from_str::<Value>(&s.body).unwrap()["input"][0]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    inputs.sort();
    assert_eq!(inputs, ["a", "b", "c", "d"]);
}

#[test]
fn cached_remote_embedding_is_fetched_once() {
    let ok = json!({"embeddings": [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]}).to_string();
    let (url, seen) = stub_server(vec![(200, ok)]);
    let dir = tempfile::tempdir().unwrap();
    let e = CachedEmbedder::new(RemoteEmbedder::with_token(embed_config(&url, 8), "t"), dir.path()).unwrap();
    let a = e.embed("same text").unwrap();
    let b = e.embed("same text").unwrap();
    assert_eq!(a, b);
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert_eq!(e.stats().cache_hits, 1);
}

#[test]
fn chat_retries_once_after_503() {
    let (url, seen) = stub_server(vec![
        (503, "busy".into()),
        (200, chat_reply("Neural Reading Comprehension")),
    ]);
    let s = Summarizer::with_backend(Box::new(RemoteChat::with_token(chat_config(&url), "k")));
    let name = s.name_task(&["Question answering reads passages."]).unwrap();
    assert_eq!(name, "Neural Reading Comprehension");
    let st = s.stats();
    assert_eq!((st.remote_calls, st.retries, st.fallbacks), (1, 1, 0));
    let body: Value = serde_json::from_str(&seen.lock().unwrap()[1].body).unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "user");
    assert!(body["messages"][0]["content"]
        .as_str()
        .unwrap()
        .ends_with("Question answering reads passages."));
}

#[test]
fn long_chat_answers_are_cut_to_the_limit() {
    let (url, _) = stub_server(vec![(200, chat_reply("one two three four five six seven"))]);
    let s = Summarizer::with_backend(Box::new(RemoteChat::with_token(chat_config(&url), "k")));
    let name = s.name_task(&["Some sentence."]).unwrap();
    assert!(name.split_whitespace().count() <= 5, "{name}");
}

#[test]
fn unreachable_chat_falls_back_to_stub() {
    // Bind then drop a listener so the port is very likely closed.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = RemoteChatConfig {
        max_retries: 1,
        ..chat_config(&format!("http://127.0.0.1:{port}/v1"))
    };
    let s = Summarizer::with_backend(Box::new(RemoteChat::with_token(cfg, "k")));
    let sentences = [
        "Question answering reads passages.",
        "Answering questions needs passages.",
    ];
    let name = s.name_task(&sentences).unwrap();
    assert_eq!(name, Summarizer::stub().name_task(&sentences).unwrap());
    let st = s.stats();
    assert_eq!((st.fallbacks, st.retries), (1, 1));
    assert!(!s.warnings().is_empty());
}

#[test]
fn chat_cache_answers_repeat_prompts() {
    let (url, seen) = stub_server(vec![(200, chat_reply("Cached Name"))]);
    let dir = tempfile::tempdir().unwrap();
    let s = Summarizer::with_backend(Box::new(RemoteChat::with_token(chat_config(&url), "k"))).with_cache(dir.path());
    assert_eq!(s.name_task(&["A sentence."]).unwrap(), "Cached Name");
    assert_eq!(s.name_task(&["A sentence."]).unwrap(), "Cached Name");
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert_eq!(s.stats().cache_hits, 1);

    // A fresh summarizer over the same directory needs no network either.
    let again =
        Summarizer::with_backend(Box::new(RemoteChat::with_token(chat_config(&url), "k"))).with_cache(dir.path());
    assert_eq!(again.name_task(&["A sentence."]).unwrap(), "Cached Name");
    assert_eq!(again.stats().remote_calls, 0);
    assert_eq!(seen.lock().unwrap().len(), 1);
}
