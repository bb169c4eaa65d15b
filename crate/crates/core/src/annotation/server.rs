//! HTTP endpoints for the labelling UI. Payloads are JSON.
//!
//! * `GET /tasks/next?annotator=ID` - `{"task": TaskPayload | null, "completed": n}`
//! * `POST /annotations` - body is an annotation record; `submitted_at` is
//!   optional and defaults to the server clock
//! * `GET /progress` - vote counts
//! * `GET /export` - one ground-truth entry per line, excluded videos included
//!
//! Requests are handled one at a time, which serializes writes to the store.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::json;
use tiny_http::{Header, Method, Request, Response, Server};

use super::AnnotationStore;
use crate::error::{Error, Result};
use crate::model::{AnnotationRecord, Label};

pub struct ServerHandle {
    server: Arc<Server>,
    thread: Option<JoinHandle<()>>,
    addr: SocketAddr,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Block until the server stops.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Start serving on `addr` (port 0 picks a free port).
pub fn serve(store: Arc<Mutex<AnnotationStore>>, addr: &str) -> Result<ServerHandle> {
    let server = Server::http(addr).map_err(|e| Error::InvalidArgument(format!("cannot listen on {addr}: {e}")))?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::InvalidArgument("server is not bound to an IP address".into()))?;
    let server = Arc::new(server);
    let s = server.clone();
    let thread = std::thread::spawn(move || {
        for req in s.incoming_requests() {
            handle(&store, req);
        }
    });
    log::info!("annotation server listening on http://{addr}");
    Ok(ServerHandle {
        server,
        thread: Some(thread),
        addr,
    })
}

#[derive(Deserialize)]
struct Submission {
    video_id: String,
    annotator_id: String,
    label: Label,
    #[serde(default)]
    submitted_at: Option<DateTime<Utc>>,
}

type Reply = (u16, &'static str, String);

fn json_reply(status: u16, v: serde_json::Value) -> Reply {
    (status, "application/json", v.to_string())
}

fn error_reply(e: &Error) -> Reply {
    let status = match e {
        Error::UnknownAnnotator(_) => 404,
        Error::Io { .. } => 500,
        _ => 422,
    };
    json_reply(status, json!({ "error": e.to_string() }))
}

fn query_param(url: &str, key: &str) -> Option<String> {
    let query = url.split_once('?')?.1;
    query.split('&').find_map(|pair| {
        let (k, v) = pair.split_once('=')?;
        (k == key).then(|| percent_decode(v))
    })
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).ok();
                match hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                    Some(b) => {
                        out.push(b);
                        i += 2;
                    }
                    None => out.push(b'%'),
                }
            }
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn route(store: &Mutex<AnnotationStore>, method: &Method, url: &str, body: &str) -> Reply {
    let path = url.split('?').next().unwrap_or_default();
    let mut store = store.lock().unwrap_or_else(|p| p.into_inner());
    match (method, path) {
        (Method::Options, _) => (204, "text/plain", String::new()),
        (Method::Get, "/tasks/next") => {
            let Some(annotator) = query_param(url, "annotator") else {
                return json_reply(400, json!({ "error": "missing annotator parameter" }));
            };
            match store.next_task(&annotator) {
                Ok(task) => {
                    let completed = store.progress().per_annotator.get(&annotator).copied().unwrap_or(0);
                    json_reply(200, json!({ "task": task, "completed": completed }))
                }
                Err(e) => error_reply(&e),
            }
        }
        (Method::Post, "/annotations") => {
            let sub: Submission = match serde_json::from_str(body) {
                Ok(s) => s,
                Err(e) => return json_reply(400, json!({ "error": format!("bad annotation body: {e}") })),
            };
            let record = AnnotationRecord {
                video_id: sub.video_id,
                annotator_id: sub.annotator_id,
                label: sub.label,
                submitted_at: sub.submitted_at.unwrap_or_else(Utc::now),
            };
            match store.submit(record) {
                Ok(outcome) => json_reply(201, json!({ "status": outcome })),
                Err(e) => error_reply(&e),
            }
        }
        (Method::Get, "/progress") => json_reply(200, json!(store.progress())),
        (Method::Get, "/export") => {
            let export = store.export();
            let mut entries = export.entries;
            entries.extend(export.excluded);
            entries.sort_by(|a, b| a.video_id.cmp(&b.video_id));
            match crate::io::to_jsonl(&entries) {
                Ok(text) => (200, "application/x-ndjson", text),
                Err(e) => error_reply(&e),
            }
        }
        _ => json_reply(404, json!({ "error": format!("no route for {method} {path}") })),
    }
}

fn handle(store: &Mutex<AnnotationStore>, mut req: Request) {
    let mut body = String::new();
    let reply = match req.as_reader().read_to_string(&mut body) {
        Ok(_) => route(store, req.method(), req.url(), &body),
        Err(e) => json_reply(400, json!({ "error": format!("unreadable body: {e}") })),
    };
    let (status, content_type, text) = reply;
    let header = |k: &str, v: &str| Header::from_bytes(k.as_bytes(), v.as_bytes()).expect("static header");
    let resp = Response::from_string(text)
        .with_status_code(status)
        .with_header(header("Content-Type", content_type))
        .with_header(header("Access-Control-Allow-Origin", "*"))
        .with_header(header("Access-Control-Allow-Methods", "GET, POST, OPTIONS"))
        .with_header(header("Access-Control-Allow-Headers", "Content-Type"));
    if let Err(e) = req.respond(resp) {
        log::warn!("failed to send response: {e}");
    }
}
