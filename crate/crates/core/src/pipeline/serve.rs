//! Read-only static file server for a bundle directory.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use log::{debug, warn};
use tiny_http::{Header, Method, Request, Response, StatusCode};

use crate::error::{Result, RexError};

const WORKERS: usize = 4;

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("json") => "application/json",
        Some("wav") => "audio/wav",
        Some("png") => "image/png",
        Some("html" | "htm") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("svg") => "image/svg+xml",
        Some("txt") => "text/plain; charset=utf-8",
        Some("map") => "application/json",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

fn percent_decode(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Maps a request URL onto a path below `root`, or `None` when it would
/// leave the root. `/` maps to `index.html`.
pub fn resolve(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let decoded = percent_decode(path)?;
    if decoded.contains('\\') || decoded.contains('\0') {
        return None;
    }
    let rel = decoded.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let mut out = root.to_path_buf();
    for c in Path::new(rel).components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

/// A bound server. Dropping it does not stop the workers; use
/// [`ServerHandle::stop`].
pub struct StaticServer {
    server: Arc<tiny_http::Server>,
    root: PathBuf,
}

impl StaticServer {
    /// Binds `127.0.0.1:port` (port 0 picks a free one). A busy port is an
    /// error.
    pub fn bind(root: &Path, port: u16) -> Result<Self> {
        Self::bind_addr(root, &format!("127.0.0.1:{port}"))
    }

    pub fn bind_addr(root: &Path, addr: &str) -> Result<Self> {
        let root = root.canonicalize().map_err(|e| RexError::io(root, e))?;
        if !root.join("index.json").is_file() {
            return Err(RexError::InvalidArgument(format!(
                "{} has no index.json; run `rexnet explain` first",
                root.display()
            )));
        }
        let server = tiny_http::Server::http(addr)
            .map_err(|e| RexError::InvalidArgument(format!("cannot listen on {addr}: {e}")))?;
        Ok(Self {
            server: Arc::new(server),
            root,
        })
    }

    pub fn port(&self) -> u16 {
        self.server.server_addr().to_ip().map(|a| a.port()).unwrap_or(0)
    }

    /// Starts the worker threads and returns immediately.
    pub fn spawn(self) -> ServerHandle {
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&self.server);
                let root = self.root.clone();
                std::thread::spawn(move || {
                    for req in server.incoming_requests() {
                        handle(&root, req);
                    }
                })
            })
            .collect();
        ServerHandle {
            server: self.server,
            workers,
            port: 0,
        }
        .with_port()
    }

    /// Serves until the process is killed.
    pub fn run(self) {
        self.spawn().join();
    }
}

pub struct ServerHandle {
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
    port: u16,
}

impl ServerHandle {
    fn with_port(mut self) -> Self {
        self.port = self.server.server_addr().to_ip().map(|a| a.port()).unwrap_or(0);
        self
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn stop(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        self.join();
    }

    fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header")
}

fn handle(root: &Path, req: Request) {
    let method = req.method().clone();
    let url = req.url().to_string();
    let result = match method {
        Method::Get | Method::Head => serve_file(root, &url, method == Method::Head, req),
        _ => req.respond(
            Response::from_string("method not allowed\n")
                .with_status_code(StatusCode(405))
                .with_header(header("Allow", "GET, HEAD")),
        ),
    };
    if let Err(e) = result {
        warn!("{method} {url}: {e}");
    }
}

fn not_found(req: Request) -> std::io::Result<()> {
    req.respond(
        Response::from_string("not found\n")
            .with_status_code(StatusCode(404))
            .with_header(header("Content-Type", "text/plain; charset=utf-8")),
    )
}

fn serve_file(root: &Path, url: &str, head: bool, req: Request) -> std::io::Result<()> {
    let Some(path) = resolve(root, url) else {
        debug!("rejected {url}");
        return not_found(req);
    };
    // Symlinks may still point outside the root.
    let Ok(real) = path.canonicalize() else {
        return not_found(req);
    };
    if !real.starts_with(root) || !real.is_file() {
        return not_found(req);
    }
    let ctype = header("Content-Type", content_type(&real));
    let nocache = header("Cache-Control", "no-cache");
    if head {
        let len = std::fs::metadata(&real)?.len() as usize;
        return req.respond(Response::empty(200).with_header(ctype).with_header(nocache).with_data(std::io::empty(), Some(len)));
    }
    let file = std::fs::File::open(&real)?;
    req.respond(Response::from_file(file).with_header(ctype).with_header(nocache))
}
