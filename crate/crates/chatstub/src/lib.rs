//! Minimal scripted HTTP server for exercising the chat-completion client
//! in tests: serves a fixed sequence of responses on a loopback port and
//! records every request body it saw. Test-only; not part of the shipped
//! pipeline.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// One scripted response. Steps are served in order; the last step
/// repeats if more requests arrive.
pub struct Step {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Step {
    /// 200 with a well-formed chat-completion envelope around `content`.
    pub fn ok(content: &str) -> Step {
        Step {
            status: 200,
            body: chat_body(content),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16, body: &str) -> Step {
        Step {
            status,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(content: &str, delay: Duration) -> Step {
        Step {
            status: 200,
            body: chat_body(content),
            delay,
        }
    }
}

/// The response envelope a chat-completions endpoint wraps around model
/// text.
pub fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

pub struct StubServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<serde_json::Value>>>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(steps: Vec<Step>) -> StubServer {
        assert!(!steps.is_empty(), "stub needs at least one step");
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().expect("local addr");
        let requests = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));

        let thread_requests = Arc::clone(&requests);
        let thread_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            let mut served = 0usize;
            loop {
                let Ok((stream, _)) = listener.accept() else {
                    break;
                };
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let step = &steps[served.min(steps.len() - 1)];
                served += 1;
                // A hung client or a refused write only affects this one
                // exchange; keep serving.
                let _ = serve_one(stream, step, &thread_requests);
            }
        });

        StubServer {
            addr,
            requests,
            shutdown,
            handle: Some(handle),
        }
    }

    /// Base URL for the client under test, e.g. `http://127.0.0.1:4132`.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Parsed JSON bodies of every request received so far.
    pub fn requests(&self) -> Vec<serde_json::Value> {
        self.requests.lock().expect("requests lock").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("requests lock").len()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(
    stream: TcpStream,
    step: &Step,
    requests: &Mutex<Vec<serde_json::Value>>,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    if let Ok(value) = serde_json::from_slice(&body) {
        requests.lock().expect("requests lock").push(value);
    }

    if !step.delay.is_zero() {
        std::thread::sleep(step.delay);
    }
    let reason = match step.status {
        200 => "OK",
        401 => "Unauthorized",
        403 => "Forbidden",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let mut stream = reader.into_inner();
    write!(
        stream,
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        step.status,
        reason,
        step.body.len(),
        step.body
    )?;
    stream.flush()
}
