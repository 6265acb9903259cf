//! Minimal chat-completion stub server for hermetic provider tests.
//!
//! Fixtures map a 64-bit FNV-1a hash of the prompt to a canned completion.
//! The server answers each request with the canned text wrapped in the
//! chat-completion JSON shape, or 404 when no fixture matches.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::thread::JoinHandle;

use crate::error::Result;

/// FNV-1a hash of a prompt, the fixture key.
pub fn request_hash(prompt: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in prompt.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Fixture file format: a JSON object mapping the hex request hash to the
/// canned completion text.
pub fn load_fixtures(path: &Path) -> Result<HashMap<u64, String>> {
    let text = std::fs::read_to_string(path)?;
    let raw: HashMap<String, String> = serde_json::from_str(&text)?;
    let mut out = HashMap::new();
    for (key, value) in raw {
        let hash = u64::from_str_radix(&key, 16).map_err(|e| {
            crate::error::EvoPathError::Config(format!("bad fixture key '{key}': {e}"))
        })?;
        out.insert(hash, value);
    }
    Ok(out)
}

pub fn save_fixtures(path: &Path, fixtures: &HashMap<u64, String>) -> Result<()> {
    let raw: std::collections::BTreeMap<String, &String> = fixtures
        .iter()
        .map(|(k, v)| (format!("{k:016x}"), v))
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&raw)?)?;
    Ok(())
}

pub struct StubServer {
    addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serve exactly `requests` requests on an ephemeral local port.
    pub fn start(fixtures: HashMap<u64, String>, requests: usize) -> std::io::Result<StubServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = std::thread::spawn(move || {
            for _ in 0..requests {
                match listener.accept() {
                    Ok((stream, _)) => handle_connection(stream, &fixtures),
                    Err(_) => break,
                }
            }
        });
        Ok(StubServer {
            addr,
            handle: Some(handle),
        })
    }

    /// Serve the same canned completion for every prompt.
    pub fn start_echo(canned: &str, requests: usize) -> std::io::Result<(StubServer, String)> {
        let canned = canned.to_owned();
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = std::thread::spawn(move || {
            for _ in 0..requests {
                match listener.accept() {
                    Ok((mut stream, _)) => {
                        if read_prompt(&mut stream).is_some() {
                            respond_completion(&mut stream, &canned);
                        } else {
                            respond_status(&mut stream, 400);
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        let endpoint = format!("http://{addr}");
        Ok((
            StubServer {
                addr,
                handle: Some(handle),
            },
            endpoint,
        ))
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        // Unblock a pending accept so the thread can exit.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, fixtures: &HashMap<u64, String>) {
    match read_prompt(&mut stream) {
        Some(prompt) => match fixtures.get(&request_hash(&prompt)) {
            Some(canned) => respond_completion(&mut stream, canned),
            None => respond_status(&mut stream, 404),
        },
        None => respond_status(&mut stream, 400),
    }
}

fn read_prompt(stream: &mut TcpStream) -> Option<String> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            break;
        }
        if let Some(value) = trimmed
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .and_then(|v| v.parse::<usize>().ok())
        {
            content_length = value;
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    let value: serde_json::Value = serde_json::from_slice(&body).ok()?;
    value
        .get("messages")?
        .get(0)?
        .get("content")?
        .as_str()
        .map(str::to_owned)
}

fn respond_completion(stream: &mut TcpStream, canned: &str) {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": canned}}],
        "usage": {"prompt_tokens": 0, "completion_tokens": 0},
    })
    .to_string();
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        body.len(),
        body
    );
    let _ = stream.write_all(response.as_bytes());
}

fn respond_status(stream: &mut TcpStream, status: u16) {
    let response =
        format!("HTTP/1.1 {status} ERR\r\ncontent-length: 0\r\nconnection: close\r\n\r\n");
    let _ = stream.write_all(response.as_bytes());
}
