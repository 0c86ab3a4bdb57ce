//! Remote chat-completion backend: single-turn requests against an
//! OpenAI-compatible endpoint, with bounded retry, a global concurrency cap
//! and a per-minute rate limit shared across trials.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendError, LlmBackend};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "LLMO_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Request timeout in seconds.
    pub timeout_s: u64,
    /// Total attempts per completion (1 initial + retries).
    pub max_attempts: u32,
    /// Base delay of the exponential backoff between attempts.
    pub retry_backoff_ms: u64,
    /// Global cap on in-flight requests across all trials.
    pub max_concurrent: usize,
    /// Sliding-window request budget; 0 disables the limit.
    pub requests_per_minute: u32,
    /// Sampling temperature, passed through verbatim when set.
    pub temperature: Option<f64>,
    /// Bearer token; not serialized, populated from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> RemoteConfig {
        RemoteConfig {
            endpoint: String::new(),
            model: String::new(),
            timeout_s: 30,
            max_attempts: 3,
            retry_backoff_ms: 500,
            max_concurrent: 4,
            requests_per_minute: 0,
            temperature: None,
            api_key: None,
        }
    }
}

impl RemoteConfig {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn with_key_from_env(mut self) -> RemoteConfig {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

/// Counting semaphore over Mutex/Condvar.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().expect("semaphore poisoned") += 1;
        self.available.notify_one();
    }
}

/// Sliding one-minute window of request timestamps.
struct RateWindow {
    per_minute: u32,
    sent: Mutex<VecDeque<Instant>>,
}

impl RateWindow {
    fn new(per_minute: u32) -> RateWindow {
        RateWindow {
            per_minute,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    fn wait_for_slot(&self) {
        if self.per_minute == 0 {
            return;
        }
        loop {
            let wait = {
                let mut sent = self.sent.lock().expect("rate window poisoned");
                let cutoff = Instant::now() - Duration::from_secs(60);
                while sent.front().is_some_and(|&t| t < cutoff) {
                    sent.pop_front();
                }
                if sent.len() < self.per_minute as usize {
                    sent.push_back(Instant::now());
                    return;
                }
                Duration::from_secs(60) - sent.front().expect("non-empty").elapsed()
            };
            std::thread::sleep(wait.min(Duration::from_millis(250)));
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    concurrency: Semaphore,
    rate: RateWindow,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> RemoteBackend {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .expect("client construction cannot fail with static options");
        RemoteBackend {
            concurrency: Semaphore::new(config.max_concurrent),
            rate: RateWindow::new(config.requests_per_minute),
            client,
            config,
        }
    }

    fn request_once(&self, key: &str, prompt: &str) -> Result<String, BackendError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout(self.config.timeout_s)
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("endpoint returned {status}")));
        }
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Transport(format!("endpoint returned {status}")));
        }
        let payload: serde_json::Value = response
            .json()
            .map_err(|e| BackendError::Transport(format!("bad response body: {e}")))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::Transport("response carries no message content".to_string())
            })
    }
}

impl LlmBackend for RemoteBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        // Fail before any network activity when no key is configured.
        let key = self
            .config
            .api_key
            .clone()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| {
                BackendError::Auth(format!("no API key configured (set {API_KEY_ENV})"))
            })?;

        self.concurrency.acquire();
        let result = (|| {
            let mut last = None;
            for attempt in 0..self.config.max_attempts.max(1) {
                if attempt > 0 {
                    let delay = self.config.retry_backoff_ms << (attempt - 1);
                    std::thread::sleep(Duration::from_millis(delay));
                }
                self.rate.wait_for_slot();
                match self.request_once(&key, prompt) {
                    Ok(text) => return Ok(text),
                    Err(e) if e.retryable() => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one attempt"))
        })();
        self.concurrency.release();
        result
    }

    fn name(&self) -> &str {
        "remote"
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn test_config(endpoint: String) -> RemoteConfig {
        RemoteConfig {
            endpoint,
            model: "test-model".into(),
            timeout_s: 5,
            max_attempts: 3,
            retry_backoff_ms: 1,
            max_concurrent: 2,
            requests_per_minute: 0,
            temperature: None,
            api_key: Some("test-key".into()),
        }
    }

    #[test]
    fn missing_api_key_fails_before_network() {
        // Unroutable endpoint: any network attempt would error differently.
        let mut config = test_config("http://127.0.0.1:1/v1/chat".into());
        config.api_key = None;
        let backend = RemoteBackend::new(config);
        match backend.complete("hello") {
            Err(BackendError::Auth(msg)) => assert!(msg.contains(API_KEY_ENV)),
            other => panic!("expected Auth error, got {other:?}"),
        }
    }

    /// Serves `hits` connections: all but the last are dropped immediately
    /// (transport errors), the last answers with a valid completion payload.
    fn stub_server(failures: usize) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let connections = Arc::new(AtomicUsize::new(0));
        let seen = connections.clone();
        let handle = std::thread::spawn(move || {
            for i in 0..=failures {
                let (mut stream, _) = listener.accept().unwrap();
                seen.fetch_add(1, Ordering::SeqCst);
                if i < failures {
                    drop(stream); // connection reset -> transport error
                    continue;
                }
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let body = serde_json::json!({
                    "choices": [{"message": {"role": "assistant",
                                              "content": "ok [1,1,1,1,1,1]"}}]
                })
                .to_string();
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1/chat/completions"), connections, handle)
    }

    #[test]
    fn retries_transport_errors_then_succeeds() {
        let (endpoint, connections, handle) = stub_server(2);
        let backend = RemoteBackend::new(test_config(endpoint));
        let text = backend.complete("prompt").unwrap();
        assert_eq!(text, "ok [1,1,1,1,1,1]");
        assert_eq!(connections.load(Ordering::SeqCst), 3, "three total attempts");
        handle.join().unwrap();
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let (endpoint, connections, handle) = stub_server(10);
        let host = endpoint
            .trim_start_matches("http://")
            .split('/')
            .next()
            .unwrap()
            .to_string();
        let backend = RemoteBackend::new(test_config(endpoint));
        let err = backend.complete("prompt").unwrap_err();
        assert!(matches!(err, BackendError::Transport(_)));
        assert_eq!(connections.load(Ordering::SeqCst), 3);
        // Drain the listener thread: it still waits for more connections.
        for _ in 0..8 {
            let _ = std::net::TcpStream::connect(&host);
        }
        let _ = handle.join();
    }

    #[test]
    fn auth_status_is_not_retried() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let connections = Arc::new(AtomicUsize::new(0));
        let seen = connections.clone();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            seen.fetch_add(1, Ordering::SeqCst);
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            stream
                .write_all(b"HTTP/1.1 401 Unauthorized\r\ncontent-length: 0\r\nconnection: close\r\n\r\n")
                .unwrap();
        });
        let backend = RemoteBackend::new(test_config(format!("http://{addr}/v1/chat")));
        let err = backend.complete("prompt").unwrap_err();
        assert!(matches!(err, BackendError::Auth(_)));
        assert_eq!(connections.load(Ordering::SeqCst), 1, "no retry on auth");
        handle.join().unwrap();
    }
}
