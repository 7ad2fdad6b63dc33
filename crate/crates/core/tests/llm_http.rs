//! HTTP backend against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use procure::llm::{generate_candidate, BackendConfig, HttpBackend, LlmError};

/// Serves one request with the given status and body; returns the URL and
/// a handle yielding the request headers and body.
fn serve_once(status: &'static str, body: String) -> (String, thread::JoinHandle<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        let mut headers = String::new();
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            headers.push_str(&line);
        }
        let mut request = vec![0; length];
        reader.read_exact(&mut request).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        (headers, String::from_utf8(request).unwrap())
    });
    (url, handle)
}

fn config(url: String) -> BackendConfig {
    BackendConfig {
        endpoint: url,
        model: "test-model".into(),
        auth_env: "PROCURE_TEST_UNSET_KEY".into(),
        request_timeout_secs: 10,
        ..Default::default()
    }
}

#[test]
fn server_error_is_transport_error() {
    let (url, handle) = serve_once("500 Internal Server Error", "{}".into());
    let cfg = config(url);
    let err = generate_candidate("prompt", &cfg, &HttpBackend::new(&cfg)).unwrap_err();
    assert!(matches!(err, LlmError::Transport(_)), "{err:?}");
    handle.join().unwrap();
}

#[test]
fn chat_completion_is_parsed() {
    let reply = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "```python\ndef f():\n    return 2\n```"}}],
        "usage": {"prompt_tokens": 30, "completion_tokens": 12, "total_tokens": 42}
    });
    let (url, handle) = serve_once("200 OK", reply.to_string());
    let cfg = config(url);
    let got = generate_candidate("make it so", &cfg, &HttpBackend::new(&cfg)).unwrap();
    assert_eq!(got.code, "def f():\n    return 2\n");
    assert_eq!(got.tokens, Some(42));
    let (headers, body) = handle.join().unwrap();
    assert!(!headers.to_ascii_lowercase().contains("authorization"));
    let body: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["content"], "make it so");
    assert_eq!(body["temperature"], 1.0);
}
