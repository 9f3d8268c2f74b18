use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use menter_llm::{BackendConfig, ChatBackend, ChatMessage, HttpBackend, LlmError, TokenUsage};
use serde_json::Value;

#[derive(Clone)]
enum Reply {
    Status(u16, String),
    Stall(Duration),
}

struct Captured {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Minimal HTTP/1.1 server that answers each connection with the next queued
/// reply (repeating the last one) and records what it received.
fn stub(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(stream) = stream else { break };
            let log = log.clone();
            let reply = replies[i.min(replies.len() - 1)].clone();
            // One thread per connection so a stalled reply does not block the next attempt.
            thread::spawn(move || serve(stream, reply, log));
        }
    });
    (addr, seen)
}

fn serve(mut stream: TcpStream, reply: Reply, log: Arc<Mutex<Vec<Captured>>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
    let (mut len, mut auth) = (0usize, None);
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        if h.trim().is_empty() {
            break;
        }
        let (k, v) = h.split_once(':').unwrap();
        match k.to_ascii_lowercase().as_str() {
            "content-length" => len = v.trim().parse().unwrap(),
            "authorization" => auth = Some(v.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    log.lock().unwrap().push(Captured {
        path,
        auth,
        body: serde_json::from_slice(&body).unwrap_or(Value::Null),
    });
    match reply {
        Reply::Stall(d) => thread::sleep(d),
        Reply::Status(code, text) => {
            let resp = format!(
                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    }
}

fn ok_body(content: &str, p: u64, c: u64) -> Reply {
    Reply::Status(
        200,
        serde_json::json!({
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": p, "completion_tokens": c, "total_tokens": p + c}
        })
        .to_string(),
    )
}

fn config(addr: &str, retries: u32) -> BackendConfig {
    let mut c = BackendConfig::http(addr, "gpt-4o");
    c.max_retries = retries;
    c.retry_base_ms = 1;
    c.timeout_s = 2.0;
    c.api_key_env = "MENTER_TEST_UNSET_KEY".into();
    c
}

fn convo() -> Vec<ChatMessage> {
    vec![ChatMessage::system("You design circuits."), ChatMessage::user("Task 1")]
}

#[test]
fn reports_backend_usage_and_sends_wire_shape() {
    let (addr, seen) = stub(vec![ok_body("netlist here", 1330, 269)]);
    let mut cfg = config(&addr, 0);
    cfg.api_key_env = "MENTER_TEST_KEY_WIRE".into();
    std::env::set_var("MENTER_TEST_KEY_WIRE", "sk-test");
    let mut b = HttpBackend::new(&cfg).unwrap();
    let c = b.complete(&convo()).unwrap();
    assert_eq!(c.content, "netlist here");
    assert_eq!(c.usage, TokenUsage::new(1330, 269));
    assert_eq!(c.backend_id, "gpt-4o");

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Task 1");
    assert_eq!(body.as_object().unwrap().len(), 3);
}

#[test]
fn retries_5xx_then_succeeds() {
    let (addr, seen) = stub(vec![
        Reply::Status(503, "{}".into()),
        Reply::Status(500, "{}".into()),
        ok_body("ok", 1, 1),
    ]);
    let mut b = HttpBackend::new(&config(&addr, 3)).unwrap();
    assert_eq!(b.complete(&convo()).unwrap().content, "ok");
    assert_eq!(b.attempts(), 3);
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert!(seen.lock().unwrap()[0].auth.is_none());
}

#[test]
fn attempts_never_exceed_retry_ceiling() {
    for retries in [0u32, 1, 4] {
        let (addr, seen) = stub(vec![Reply::Status(502, "{}".into())]);
        let mut b = HttpBackend::new(&config(&addr, retries)).unwrap();
        match b.complete(&convo()) {
            Err(LlmError::BackendUnavailable { attempts, .. }) => assert_eq!(attempts, retries + 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(seen.lock().unwrap().len() as u32, retries + 1);
    }
}

#[test]
fn unauthorized_is_not_retried() {
    let (addr, seen) = stub(vec![Reply::Status(401, r#"{"error":"bad key"}"#.into())]);
    let mut b = HttpBackend::new(&config(&addr, 5)).unwrap();
    assert!(matches!(b.complete(&convo()), Err(LlmError::AuthError)));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn client_errors_are_not_retried() {
    let (addr, seen) = stub(vec![Reply::Status(400, "nope".into())]);
    let mut b = HttpBackend::new(&config(&addr, 5)).unwrap();
    assert!(matches!(b.complete(&convo()), Err(LlmError::Rejected { status: 400, .. })));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn timeouts_are_retried() {
    let (addr, seen) = stub(vec![Reply::Stall(Duration::from_millis(600)), ok_body("late", 2, 3)]);
    let mut cfg = config(&addr, 1);
    cfg.timeout_s = 0.2;
    let mut b = HttpBackend::new(&cfg).unwrap();
    assert_eq!(b.complete(&convo()).unwrap().usage, TokenUsage::new(2, 3));
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn connection_refused_exhausts_retries() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}", l.local_addr().unwrap())
    };
    let mut b = HttpBackend::new(&config(&addr, 2)).unwrap();
    assert!(matches!(
        b.complete(&convo()),
        Err(LlmError::BackendUnavailable { attempts: 3, .. })
    ));
    assert_eq!(b.attempts(), 3);
}

#[test]
fn malformed_body_is_a_protocol_error() {
    let (addr, _) = stub(vec![Reply::Status(200, r#"{"choices": []}"#.into())]);
    let mut b = HttpBackend::new(&config(&addr, 0)).unwrap();
    assert!(matches!(b.complete(&convo()), Err(LlmError::Protocol(_))));
}

#[test]
fn guards_run_before_any_request() {
    let (addr, seen) = stub(vec![ok_body("x", 0, 0)]);
    let mut b = HttpBackend::new(&config(&addr, 0)).unwrap();
    assert!(matches!(b.complete(&[]), Err(LlmError::EmptyConversation)));
    assert!(seen.lock().unwrap().is_empty());
}
