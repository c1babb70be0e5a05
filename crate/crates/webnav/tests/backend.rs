use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};
use webnav::backend::{BackendError, HttpBackend, ModelBackend, PromptPart};
use webnav::Png;

struct Captured {
    request_line: String,
    headers: Vec<(String, String)>,
    body: Value,
}

/// Answers one request with `status` and `reply`, handing the request back.
fn one_shot(status: u16, reply: &'static str) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/complete", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let mut headers = Vec::new();
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let (k, v) = line.split_once(':').unwrap();
            headers.push((k.to_ascii_lowercase(), v.trim().to_string()));
        }
        let len: usize = headers
            .iter()
            .find(|(k, _)| k == "content-length")
            .map(|(_, v)| v.parse().unwrap())
            .unwrap_or(0);
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        tx.send(Captured {
            request_line: request_line.trim_end().to_string(),
            headers,
            body: serde_json::from_slice(&body).unwrap(),
        })
        .unwrap();
    });
    (url, rx)
}

fn png() -> Png {
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, 1, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.write_header().unwrap().write_image_data(&[0x80]).unwrap();
    }
    Png::new(bytes).unwrap()
}

#[test]
fn posts_parts_with_bearer_key() {
    let (url, rx) = one_shot(200, r#"{"text": "Click [2]"}"#);
    let backend = HttpBackend::new(url, "sekret", Duration::from_secs(5));
    let image = png();
    let reply = backend
        .complete(&[PromptPart::text("pick one"), PromptPart::Image(image.clone())])
        .unwrap();
    assert_eq!(reply, "Click [2]");

    let got = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert!(got.request_line.starts_with("POST /complete "), "{}", got.request_line);
    let header = |name: &str| got.headers.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str());
    assert_eq!(header("authorization"), Some("Bearer sekret"));
    assert_eq!(header("content-type"), Some("application/json"));
    assert_eq!(
        got.body,
        json!({"parts": [
            {"type": "text", "text": "pick one"},
            {
                "type": "image",
                "mime_type": "image/png",
                "data": base64::engine::general_purpose::STANDARD.encode(image.as_bytes()),
            },
        ]})
    );
}

#[test]
fn error_status_is_a_bad_response() {
    let (url, _rx) = one_shot(500, r#"{"error": "overloaded"}"#);
    let backend = HttpBackend::new(url, "k", Duration::from_secs(5));
    match backend.complete(&[PromptPart::text("x")]) {
        Err(BackendError::BadResponse(m)) => assert!(m.contains("500"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn reply_without_text_is_a_bad_response() {
    let (url, _rx) = one_shot(200, r#"{"choices": []}"#);
    let backend = HttpBackend::new(url, "k", Duration::from_secs(5));
    assert!(matches!(
        backend.complete(&[PromptPart::text("x")]),
        Err(BackendError::BadResponse(_))
    ));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let backend = HttpBackend::new("http://127.0.0.1:1/", "k", Duration::from_secs(2));
    assert!(matches!(
        backend.complete(&[PromptPart::text("x")]),
        Err(BackendError::Transport(_))
    ));
}
