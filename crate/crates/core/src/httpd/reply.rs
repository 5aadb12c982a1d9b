use std::io::{self, Write};
use std::sync::Arc;
use std::time::SystemTime;

use thiserror::Error;

use super::params::ParamError;
use super::request::{Request, Version};
use super::session::{Session, SessionManager};
use super::wire::{reason_phrase, Headers};
use crate::htmlgen::{page, render_to_string, tag, text};

/// Bodies up to this size are sent with `Content-Length`; larger ones are
/// streamed chunked.
pub const STREAM_THRESHOLD: usize = 64 * 1024;

/// A typed reply raised by a handler instead of a normal document.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReplyCondition {
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("moved to {0}")]
    Moved(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("server error: {0}")]
    ServerError(String),
}

impl ReplyCondition {
    pub fn status(&self) -> u16 {
        match self {
            ReplyCondition::Moved(_) => 301,
            ReplyCondition::BadRequest(_) => 400,
            ReplyCondition::Forbidden(_) => 403,
            ReplyCondition::NotFound(_) => 404,
            ReplyCondition::ServerError(_) => 500,
        }
    }

    fn message(&self) -> String {
        match self {
            ReplyCondition::Forbidden(u) => format!("You do not have permission to access {u}."),
            ReplyCondition::Moved(u) => format!("The document has moved to {u}."),
            ReplyCondition::NotFound(u) => format!("The requested URL {u} was not found on this server."),
            ReplyCondition::BadRequest(m) | ReplyCondition::ServerError(m) => m.clone(),
        }
    }
}

/// How a handler can end other than normally.
#[derive(Debug, Error)]
pub enum HandlerError {
    /// The handler has no answer for the request; replies 404.
    #[error("handler failed")]
    Failed,
    #[error(transparent)]
    Reply(#[from] ReplyCondition),
    /// Anything unexpected; replies 500.
    #[error(transparent)]
    Other(Box<dyn std::error::Error + Send + Sync>),
}

impl HandlerError {
    pub fn other(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        HandlerError::Other(e.into())
    }

    pub fn status(&self) -> u16 {
        match self {
            HandlerError::Failed => 404,
            HandlerError::Reply(c) => c.status(),
            HandlerError::Other(_) => 500,
        }
    }
}

impl From<io::Error> for HandlerError {
    fn from(e: io::Error) -> Self {
        HandlerError::Other(Box::new(e))
    }
}

impl From<ParamError> for HandlerError {
    fn from(e: ParamError) -> Self {
        match e {
            ParamError::InconsistentSpec { .. } => HandlerError::Reply(ReplyCondition::ServerError(e.to_string())),
            _ => HandlerError::Reply(ReplyCondition::BadRequest(e.to_string())),
        }
    }
}

/// The status a handler outcome maps to. Normal completion is 200 unless
/// the handler's output sets a `Status` header.
pub fn outcome_status(outcome: &Result<(), HandlerError>) -> u16 {
    match outcome {
        Ok(()) => 200,
        Err(e) => e.status(),
    }
}

/// HTML page for an error reply.
pub fn error_page(status: u16, message: &str) -> String {
    let title = format!("{status} {}", reason_phrase(status));
    let spec = page(&title, vec![tag("h1").child(text(reason_phrase(status))), tag("p").child(text(message))]);
    render_to_string(&spec).expect("error page uses fixed tag names")
}

/// Status and header fields a handler wrote before its first blank line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CgiHead {
    pub status: u16,
    pub headers: Headers,
}

/// Parses handler output up to the first blank line. `Ok(None)` when the
/// blank line has not been written yet.
pub(crate) fn parse_cgi_head(buf: &[u8]) -> Result<Option<(CgiHead, usize)>, String> {
    let mut headers = Headers::new();
    let mut status = None;
    let mut pos = 0;
    while let Some(nl) = buf[pos..].iter().position(|&b| b == b'\n') {
        let raw = &buf[pos..pos + nl];
        pos += nl + 1;
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if line.is_empty() {
            if status.is_none() && headers.contains("location") {
                status = Some(302);
            }
            return Ok(Some((CgiHead { status: status.unwrap_or(200), headers }, pos)));
        }
        let line = std::str::from_utf8(line).map_err(|_| "header line is not UTF-8".to_string())?;
        let (name, value) = line.split_once(':').ok_or_else(|| format!("bad header line {line:?}"))?;
        let (name, value) = (name.trim(), value.trim());
        if !super::wire::is_token(name) {
            return Err(format!("bad header name {name:?}"));
        }
        if name.eq_ignore_ascii_case("status") {
            let code = value.split(' ').next().unwrap_or("");
            match code.parse::<u16>() {
                Ok(c) if (100..600).contains(&c) => status = Some(c),
                _ => return Err(format!("bad Status header {value:?}")),
            }
        } else {
            headers.append(name, value);
        }
    }
    Ok(None)
}

enum State {
    Buffering,
    Streaming { chunked: bool },
    Done,
}

/// A request together with the output channel its handler writes to.
///
/// The handler writes CGI-style output: header lines, a blank line and the
/// body. A `Status: 404 Not Found` header sets the status. The framework
/// adds the status line, framing and connection headers.
pub struct Exchange<'a> {
    pub request: Request,
    out: &'a mut dyn Write,
    buf: Vec<u8>,
    state: State,
    keep_alive: bool,
    head_only: bool,
    framework_headers: Headers,
    sessions: Option<&'a SessionManager>,
    session: Option<Arc<Session>>,
}

impl<'a> Exchange<'a> {
    pub(crate) fn new(
        request: Request,
        out: &'a mut dyn Write,
        keep_alive: bool,
        sessions: Option<&'a SessionManager>,
    ) -> Exchange<'a> {
        let head_only = request.method == "HEAD";
        Exchange {
            request,
            out,
            buf: Vec::new(),
            state: State::Buffering,
            keep_alive,
            head_only,
            framework_headers: Headers::new(),
            sessions,
            session: None,
        }
    }

    /// The client's session, issuing a cookie for a new one. `None` when the
    /// server runs without sessions. Call before writing a large body: the
    /// cookie cannot be added once streaming has started.
    pub fn session(&mut self) -> Option<Arc<Session>> {
        if let Some(s) = &self.session {
            return Some(s.clone());
        }
        let manager = self.sessions?;
        let name = manager.options().cookie_name.clone();
        let (session, fresh) = manager.resolve(self.request.cookies(&name));
        if fresh {
            if !matches!(self.state, State::Buffering) {
                log::warn!("session cookie issued after the reply head was sent");
            }
            self.framework_headers.append("Set-Cookie", manager.set_cookie(&session));
        }
        self.session = Some(session.clone());
        Some(session)
    }

    /// Bytes written so far that are still buffered.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    fn write_head(&mut self, status: u16, mut headers: Headers, length: Option<usize>) -> io::Result<bool> {
        for h in ["content-length", "transfer-encoding", "connection"] {
            headers.remove(h);
        }
        let chunked = length.is_none() && self.request.version == Version::Http11;
        if length.is_none() && !chunked {
            self.keep_alive = false;
        }
        let mut head = format!("HTTP/1.1 {status} {}\r\n", reason_phrase(status));
        head.push_str(&format!("Date: {}\r\nServer: triplekit\r\n", httpdate::fmt_http_date(SystemTime::now())));
        for (n, v) in headers.iter().chain(self.framework_headers.iter()) {
            head.push_str(&format!("{n}: {v}\r\n"));
        }
        match length {
            Some(n) => head.push_str(&format!("Content-Length: {n}\r\n")),
            None if chunked => head.push_str("Transfer-Encoding: chunked\r\n"),
            None => {}
        }
        head.push_str(if self.keep_alive { "Connection: keep-alive\r\n\r\n" } else { "Connection: close\r\n\r\n" });
        self.out.write_all(head.as_bytes())?;
        Ok(chunked)
    }

    fn write_chunk(&mut self, data: &[u8], chunked: bool) -> io::Result<()> {
        if data.is_empty() || self.head_only {
            return Ok(());
        }
        if chunked {
            write!(self.out, "{:x}\r\n", data.len())?;
            self.out.write_all(data)?;
            self.out.write_all(b"\r\n")
        } else {
            self.out.write_all(data)
        }
    }

    fn start_streaming(&mut self) -> io::Result<()> {
        let (head, start) = match parse_cgi_head(&self.buf) {
            Ok(Some(h)) => h,
            Ok(None) => return Err(io::Error::new(io::ErrorKind::InvalidData, "handler header exceeds buffer")),
            Err(m) => return Err(io::Error::new(io::ErrorKind::InvalidData, m)),
        };
        let chunked = self.write_head(head.status, head.headers, None)?;
        let body = self.buf.split_off(start);
        self.buf.clear();
        self.write_chunk(&body, chunked)?;
        self.state = State::Streaming { chunked };
        Ok(())
    }

    fn send_complete(&mut self, status: u16, headers: Headers, body: &[u8]) -> io::Result<()> {
        self.write_head(status, headers, Some(body.len()))?;
        if !self.head_only {
            self.out.write_all(body)?;
        }
        Ok(())
    }

    fn send_error(&mut self, status: u16, location: Option<&str>, message: &str) -> io::Result<()> {
        let mut headers = Headers::new();
        headers.append("Content-Type", "text/html; charset=UTF-8");
        if let Some(l) = location {
            headers.append("Location", l);
        }
        let body = error_page(status, message);
        self.send_complete(status, headers, body.as_bytes())
    }

    /// Completes the reply for `outcome`. Returns the status sent and whether
    /// the connection may be reused.
    pub(crate) fn finish(&mut self, outcome: Result<(), HandlerError>) -> io::Result<(u16, bool)> {
        let state = std::mem::replace(&mut self.state, State::Done);
        let status = match (state, outcome) {
            (State::Buffering, Ok(())) => {
                let buf = std::mem::take(&mut self.buf);
                match parse_cgi_head(&buf) {
                    Ok(Some((head, start))) => {
                        self.send_complete(head.status, head.headers, &buf[start..])?;
                        head.status
                    }
                    Ok(None) => {
                        log::warn!("{} {}: handler output has no header", self.request.method, self.request.path);
                        self.send_error(500, None, "The handler produced no reply header.")?;
                        500
                    }
                    Err(m) => {
                        log::warn!("{} {}: {m}", self.request.method, self.request.path);
                        self.send_error(500, None, &format!("Malformed handler reply: {m}"))?;
                        500
                    }
                }
            }
            (State::Buffering, Err(e)) => {
                self.buf.clear();
                let status = e.status();
                let message = match &e {
                    HandlerError::Failed => ReplyCondition::NotFound(self.request.path.clone()).message(),
                    HandlerError::Reply(c) => c.message(),
                    HandlerError::Other(err) => {
                        log::warn!("{} {}: {err}", self.request.method, self.request.path);
                        format!("{err}")
                    }
                };
                let location = match &e {
                    HandlerError::Reply(ReplyCondition::Moved(u)) => Some(u.clone()),
                    _ => None,
                };
                self.send_error(status, location.as_deref(), &message)?;
                status
            }
            (State::Streaming { chunked }, Ok(())) => {
                let rest = std::mem::take(&mut self.buf);
                self.write_chunk(&rest, chunked)?;
                if chunked && !self.head_only {
                    self.out.write_all(b"0\r\n\r\n")?;
                }
                200
            }
            (State::Streaming { .. }, Err(e)) => {
                // The status line is gone; cutting the connection is the only
                // signal left.
                log::warn!("{} {}: failed while streaming: {e}", self.request.method, self.request.path);
                self.keep_alive = false;
                return Ok((500, false));
            }
            (State::Done, _) => return Ok((500, false)),
        };
        Ok((status, self.keep_alive))
    }
}

impl Write for Exchange<'_> {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        match self.state {
            State::Buffering => {
                self.buf.extend_from_slice(data);
                if self.buf.len() > STREAM_THRESHOLD {
                    self.start_streaming()?;
                }
            }
            State::Streaming { chunked } => {
                self.buf.extend_from_slice(data);
                if self.buf.len() >= STREAM_THRESHOLD / 4 {
                    let chunk = std::mem::take(&mut self.buf);
                    self.write_chunk(&chunk, chunked)?;
                }
            }
            State::Done => return Err(io::Error::other("reply already finished")),
        }
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(version: Version, method: &str, handler: impl FnOnce(&mut Exchange) -> Result<(), HandlerError>) -> (String, bool) {
        let mut out = Vec::new();
        let request = Request::new(method, "/x", version, Headers::new(), Vec::new());
        let mut ex = Exchange::new(request, &mut out, true, None);
        let outcome = handler(&mut ex);
        let (_, keep) = ex.finish(outcome).unwrap();
        (String::from_utf8(out).unwrap(), keep)
    }

    fn strip_date(s: &str) -> String {
        let start = s.find("Date: ").unwrap();
        let end = start + s[start..].find("\r\n").unwrap() + 2;
        format!("{}{}", &s[..start], &s[end..])
    }

    #[test]
    fn buffered_reply() {
        let (out, keep) = run(Version::Http11, "GET", |ex| {
            write!(ex, "Content-type: text/plain\n\nok")?;
            Ok(())
        });
        assert!(keep);
        assert_eq!(
            strip_date(&out),
            "HTTP/1.1 200 OK\r\nServer: triplekit\r\nContent-type: text/plain\r\nContent-Length: 2\r\n\
             Connection: keep-alive\r\n\r\nok"
        );
    }

    #[test]
    fn cgi_status_and_location() {
        let (out, _) = run(Version::Http11, "GET", |ex| {
            write!(ex, "Status: 418 Teapot\r\nContent-Length: 99\r\n\r\n")?;
            Ok(())
        });
        assert!(out.starts_with("HTTP/1.1 418 Unknown\r\n"));
        assert!(out.contains("Content-Length: 0\r\n"));
        assert!(!out.contains("99"));
        let (out, _) = run(Version::Http11, "GET", |ex| {
            write!(ex, "Location: /y\n\n")?;
            Ok(())
        });
        assert!(out.starts_with("HTTP/1.1 302 Found\r\n"));
    }

    #[test]
    fn error_outcomes() {
        let cases: Vec<(Box<dyn FnOnce(&mut Exchange) -> Result<(), HandlerError>>, u16)> = vec![
            (Box::new(|_| Err(HandlerError::Failed)), 404),
            (Box::new(|_| Err(ReplyCondition::Forbidden("/x".into()).into())), 403),
            (Box::new(|_| Err(ReplyCondition::Moved("/y".into()).into())), 301),
            (Box::new(|_| Err(ReplyCondition::BadRequest("no".into()).into())), 400),
            (Box::new(|_| Err(ReplyCondition::ServerError("oops".into()).into())), 500),
            (Box::new(|_| Err(HandlerError::other("boom"))), 500),
            (Box::new(|ex| {
                write!(ex, "partial output without header")?;
                Ok(())
            }), 500),
            (Box::new(|ex| {
                write!(ex, "Bad Header\n\n")?;
                Ok(())
            }), 500),
        ];
        for (handler, status) in cases {
            let (out, _) = run(Version::Http11, "GET", |ex| {
                let _ = write!(ex, "Content-type: text/plain\n\ndiscarded");
                ex.buf.clear();
                handler(ex)
            });
            assert!(out.starts_with(&format!("HTTP/1.1 {status} ")), "{out}");
            assert!(!out.contains("discarded"));
            let body = out.split("\r\n\r\n").nth(1).unwrap();
            crate::markup::parse_str(body, &crate::markup::ParseOptions::xml()).unwrap();
        }
        let (out, _) = run(Version::Http11, "GET", |_| Err(ReplyCondition::Moved("/y".into()).into()));
        assert!(out.contains("Location: /y\r\n"));
    }

    #[test]
    fn large_bodies_stream_chunked() {
        let body = "x".repeat(STREAM_THRESHOLD * 2 + 17);
        let (out, keep) = run(Version::Http11, "GET", |ex| {
            write!(ex, "Content-type: text/plain\n\n")?;
            for piece in body.as_bytes().chunks(1000) {
                ex.write_all(piece)?;
            }
            Ok(())
        });
        assert!(keep);
        assert!(out.contains("Transfer-Encoding: chunked\r\n"));
        assert!(!out.contains("Content-Length"));
        let raw = out.split_once("\r\n\r\n").unwrap().1;
        let mut r = std::io::BufReader::new(raw.as_bytes());
        let decoded = super::super::wire::read_body(&mut r, super::super::wire::Framing::Chunked, usize::MAX).unwrap();
        assert_eq!(decoded, body.as_bytes());

        let (out, keep) = run(Version::Http10, "GET", |ex| {
            write!(ex, "Content-type: text/plain\n\n{body}")?;
            Ok(())
        });
        assert!(!keep);
        assert!(out.ends_with(&body));
        assert!(out.contains("Connection: close\r\n"));
    }

    #[test]
    fn head_requests_have_no_body() {
        let (out, _) = run(Version::Http11, "HEAD", |ex| {
            write!(ex, "Content-type: text/plain\n\nhello")?;
            Ok(())
        });
        assert!(out.contains("Content-Length: 5\r\n"));
        assert!(out.ends_with("\r\n\r\n"));
    }

    #[test]
    fn failure_while_streaming_closes() {
        let (out, keep) = run(Version::Http11, "GET", |ex| {
            write!(ex, "Content-type: text/plain\n\n{}", "y".repeat(STREAM_THRESHOLD + 1))?;
            Err(HandlerError::other("late"))
        });
        assert!(!keep);
        assert!(out.starts_with("HTTP/1.1 200 OK"));
        assert!(!out.ends_with("0\r\n\r\n"));
    }
}
