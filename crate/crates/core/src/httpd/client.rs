use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use url::Url;

use super::wire::{framing, read_headers, read_line, ChunkedReader, Framing, Headers, WireError};
use crate::markup::{parse_tree, MarkupNode, ParseOptions};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("bad URL {url:?}: {message}")]
    Url { url: String, message: String },
    #[error("timed out talking to {0}")]
    Timeout(String),
    #[error("{url} replied {status}")]
    Status { status: u16, url: String },
    #[error("too many redirects, last {0}")]
    TooManyRedirects(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("no handler for content type {0:?}")]
    UnsupportedMedia(String),
    #[error("content handler failed: {0}")]
    Content(String),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => ClientError::Timeout(e.to_string()),
            _ => ClientError::Io(e),
        }
    }
}

impl From<WireError> for ClientError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Io(e) => e.into(),
            WireError::Malformed(m) => ClientError::Malformed(m),
            WireError::TooLarge => ClientError::Malformed("reply too large".into()),
        }
    }
}

impl ClientError {
    /// HTTP status of a non-success reply.
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Connect and read timeout.
    pub timeout: Duration,
    pub max_redirects: usize,
    /// Extra request header fields.
    pub headers: Vec<(String, String)>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions { timeout: Duration::from_secs(30), max_redirects: 10, headers: Vec::new() }
    }
}

enum Body {
    Length(io::Take<BufReader<TcpStream>>),
    Chunked(ChunkedReader<BufReader<TcpStream>>),
    Close(BufReader<TcpStream>),
    Empty,
}

/// A reply whose body is read from the connection on demand.
pub struct Response {
    pub status: u16,
    pub headers: Headers,
    /// URL that produced this reply after redirects.
    pub url: Url,
    body: Body,
}

impl std::fmt::Debug for Response {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Response").field("status", &self.status).field("url", &self.url.as_str()).finish()
    }
}

impl Response {
    /// Media type without parameters, lowercased.
    pub fn media_type(&self) -> Option<String> {
        self.headers.get("content-type").map(|ct| ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase())
    }

    pub fn text(mut self) -> Result<String, ClientError> {
        let mut s = String::new();
        self.read_to_string(&mut s)?;
        Ok(s)
    }
}

impl Read for Response {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match &mut self.body {
            Body::Length(r) => {
                let n = r.read(buf)?;
                if n == 0 && r.limit() > 0 && !buf.is_empty() {
                    return Err(io::ErrorKind::UnexpectedEof.into());
                }
                Ok(n)
            }
            Body::Chunked(r) => r.read(buf),
            Body::Close(r) => r.read(buf),
            Body::Empty => Ok(0),
        }
    }
}

fn bad_url(url: &str, message: impl Into<String>) -> ClientError {
    ClientError::Url { url: url.to_string(), message: message.into() }
}

fn connect(url: &Url, timeout: Duration) -> Result<TcpStream, ClientError> {
    let host = url.host_str().ok_or_else(|| bad_url(url.as_str(), "no host"))?;
    let port = url.port_or_known_default().unwrap_or(80);
    let mut last = None;
    for addr in (host, port).to_socket_addrs()? {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => {
                s.set_read_timeout(Some(timeout))?;
                s.set_write_timeout(Some(timeout))?;
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.map(ClientError::from).unwrap_or_else(|| bad_url(url.as_str(), "host has no address")))
}

fn host_header(url: &Url) -> String {
    let host = url.host_str().unwrap_or("");
    match url.port() {
        Some(p) => format!("{host}:{p}"),
        None => host.to_string(),
    }
}

fn request_target(url: &Url) -> String {
    match url.query() {
        Some(q) => format!("{}?{q}", url.path()),
        None => url.path().to_string(),
    }
}

fn write_request(
    out: &mut impl Write,
    method: &str,
    url: &Url,
    headers: &[(String, String)],
    body: Option<(&[u8], &str)>,
    close: bool,
) -> io::Result<()> {
    let mut head = format!("{method} {} HTTP/1.1\r\nHost: {}\r\n", request_target(url), host_header(url));
    for (n, v) in headers {
        head.push_str(&format!("{n}: {v}\r\n"));
    }
    if let Some((data, content_type)) = body {
        head.push_str(&format!("Content-Type: {content_type}\r\nContent-Length: {}\r\n", data.len()));
    }
    if close {
        head.push_str("Connection: close\r\n");
    }
    head.push_str("\r\n");
    out.write_all(head.as_bytes())?;
    if let Some((data, _)) = body {
        out.write_all(data)?;
    }
    out.flush()
}

/// Reads a status line and headers, skipping interim 1xx replies.
fn read_status<R: BufRead>(r: &mut R) -> Result<(u16, Headers), ClientError> {
    loop {
        let line = read_line(r)?.ok_or_else(|| ClientError::Malformed("connection closed before reply".into()))?;
        let mut parts = line.splitn(3, ' ');
        let (Some(version), Some(code)) = (parts.next(), parts.next()) else {
            return Err(ClientError::Malformed(format!("bad status line {line:?}")));
        };
        if !version.starts_with("HTTP/1.") {
            return Err(ClientError::Malformed(format!("bad status line {line:?}")));
        }
        let status: u16 = code.parse().map_err(|_| ClientError::Malformed(format!("bad status {code:?}")))?;
        let headers = read_headers(r)?;
        if (100..200).contains(&status) {
            continue;
        }
        return Ok((status, headers));
    }
}

fn no_body(method: &str, status: u16) -> bool {
    method == "HEAD" || status == 204 || status == 304
}

/// Sends one request on a fresh connection.
fn exchange_once(
    method: &str,
    url: &Url,
    body: Option<(&[u8], &str)>,
    opts: &ClientOptions,
) -> Result<Response, ClientError> {
    let stream = connect(url, opts.timeout)?;
    write_request(&mut &stream, method, url, &opts.headers, body, true)?;
    let mut reader = BufReader::new(stream);
    let (status, headers) = read_status(&mut reader)?;
    let body = if no_body(method, status) {
        Body::Empty
    } else {
        match framing(&headers, true)? {
            Framing::Length(n) => Body::Length(reader.take(n)),
            Framing::Chunked => Body::Chunked(ChunkedReader::new(reader)),
            Framing::Close => Body::Close(reader),
        }
    };
    Ok(Response { status, headers, url: url.clone(), body })
}

/// Sends a request, following redirects. Non-2xx final replies are errors.
pub fn http_request(
    method: &str,
    url: &str,
    body: Option<(&[u8], &str)>,
    opts: &ClientOptions,
) -> Result<Response, ClientError> {
    let mut current = Url::parse(url).map_err(|e| bad_url(url, e.to_string()))?;
    let mut method = method.to_string();
    let mut body = body;
    for _ in 0..=opts.max_redirects {
        if current.scheme() != "http" {
            return Err(bad_url(current.as_str(), "only http URLs are supported"));
        }
        let response = exchange_once(&method, &current, body, opts)?;
        let status = response.status;
        if (200..300).contains(&status) {
            return Ok(response);
        }
        let location = response.headers.get("location").map(str::to_string);
        match (status, location) {
            (301 | 302 | 303 | 307 | 308, Some(loc)) => {
                current = current.join(&loc).map_err(|e| bad_url(&loc, e.to_string()))?;
                if status == 303 || (matches!(status, 301 | 302) && method == "POST") {
                    method = "GET".into();
                    body = None;
                }
            }
            _ => return Err(ClientError::Status { status, url: current.to_string() }),
        }
    }
    Err(ClientError::TooManyRedirects(current.to_string()))
}

/// Opens `url` with GET and returns the reply for streaming.
pub fn http_open(url: &str, opts: &ClientOptions) -> Result<Response, ClientError> {
    http_request("GET", url, None, opts)
}

/// Parsed reply content.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Text(String),
    Markup(Vec<MarkupNode>),
    Bytes(Vec<u8>),
}

pub type ContentHandler = dyn Fn(&mut dyn Read, &str) -> Result<Content, ClientError> + Send + Sync;

/// Content handlers by media type. Patterns are exact types or `type/*`;
/// exact matches win.
#[derive(Clone)]
pub struct ContentHandlers {
    handlers: Vec<(String, Arc<ContentHandler>)>,
}

fn read_text(r: &mut dyn Read) -> Result<String, ClientError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| ClientError::Content("body is not UTF-8".into()))
}

impl Default for ContentHandlers {
    /// `text/*` as text; `application/xml`, `text/xml` and `text/html` as
    /// markup trees.
    fn default() -> Self {
        let mut h = ContentHandlers::empty();
        h.register("text/*", |r, _| read_text(r).map(Content::Text));
        for xml in ["application/xml", "text/xml"] {
            h.register(xml, |r, _| {
                parse_tree(r, &ParseOptions::xml()).map(Content::Markup).map_err(|e| ClientError::Content(e.to_string()))
            });
        }
        h.register("text/html", |r, _| {
            parse_tree(r, &ParseOptions::html()).map(Content::Markup).map_err(|e| ClientError::Content(e.to_string()))
        });
        h
    }
}

impl ContentHandlers {
    pub fn empty() -> Self {
        ContentHandlers { handlers: Vec::new() }
    }

    pub fn register<F>(&mut self, pattern: &str, handler: F)
    where
        F: Fn(&mut dyn Read, &str) -> Result<Content, ClientError> + Send + Sync + 'static,
    {
        let pattern = pattern.to_ascii_lowercase();
        self.handlers.retain(|(p, _)| *p != pattern);
        self.handlers.push((pattern, Arc::new(handler)));
    }

    pub fn find(&self, media_type: &str) -> Option<Arc<ContentHandler>> {
        let exact = self.handlers.iter().find(|(p, _)| p == media_type);
        let wildcard = || {
            let major = media_type.split('/').next().unwrap_or("");
            self.handlers.iter().find(|(p, _)| p.strip_suffix("/*") == Some(major))
        };
        exact.or_else(wildcard).map(|(_, h)| h.clone())
    }

    /// Streams `response` into the handler for its content type.
    pub fn handle(&self, mut response: Response) -> Result<Content, ClientError> {
        let media = response.media_type().unwrap_or_else(|| "application/octet-stream".into());
        let handler = self.find(&media).ok_or(ClientError::UnsupportedMedia(media.clone()))?;
        handler(&mut response, &media)
    }
}

pub fn http_get(url: &str, handlers: &ContentHandlers, opts: &ClientOptions) -> Result<Content, ClientError> {
    handlers.handle(http_open(url, opts)?)
}

pub fn http_post(
    url: &str,
    body: &[u8],
    content_type: &str,
    handlers: &ContentHandlers,
    opts: &ClientOptions,
) -> Result<Content, ClientError> {
    handlers.handle(http_request("POST", url, Some((body, content_type)), opts)?)
}

/// A reply read in full from a [`HttpConnection`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullResponse {
    pub status: u16,
    pub headers: Headers,
    pub body: Vec<u8>,
}

impl FullResponse {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

/// One persistent connection that sends requests in turn. Redirects are
/// not followed and any status is returned.
pub struct HttpConnection {
    base: Url,
    stream: TcpStream,
    reader: BufReader<TcpStream>,
    closed: bool,
}

impl HttpConnection {
    /// Connects to the host of `base`.
    pub fn open(base: &str, timeout: Duration) -> Result<HttpConnection, ClientError> {
        let base = Url::parse(base).map_err(|e| bad_url(base, e.to_string()))?;
        let stream = connect(&base, timeout)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(HttpConnection { base, stream, reader, closed: false })
    }

    /// True once the server has announced it will close the connection.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn request(
        &mut self,
        method: &str,
        path: &str,
        headers: &[(String, String)],
        body: Option<(&[u8], &str)>,
    ) -> Result<FullResponse, ClientError> {
        if self.closed {
            return Err(ClientError::Io(io::Error::new(io::ErrorKind::NotConnected, "connection closed by server")));
        }
        let url = self.base.join(path).map_err(|e| bad_url(path, e.to_string()))?;
        write_request(&mut &self.stream, method, &url, headers, body, false)?;
        let (status, reply_headers) = read_status(&mut self.reader)?;
        let framing = if no_body(method, status) { Framing::Length(0) } else { framing(&reply_headers, true)? };
        let body = super::wire::read_body(&mut self.reader, framing, usize::MAX)?;
        if framing == Framing::Close || reply_headers.has_token("connection", "close") {
            self.closed = true;
        }
        Ok(FullResponse { status, headers: reply_headers, body })
    }

    pub fn get(&mut self, path: &str) -> Result<FullResponse, ClientError> {
        self.request("GET", path, &[], None)
    }
}
