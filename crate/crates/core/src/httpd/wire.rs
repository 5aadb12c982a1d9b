//! Message framing shared by the server and the client.

use std::io::{self, BufRead, Read};

/// Longest accepted request, status or header line.
pub(crate) const MAX_LINE: usize = 8 * 1024;
/// Most header fields accepted in one message.
pub(crate) const MAX_HEADERS: usize = 100;

/// Header fields in arrival order. Name lookups ignore case.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Headers(Vec<(String, String)>);

impl Headers {
    pub fn new() -> Self {
        Headers(Vec::new())
    }

    /// First value of `name`.
    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.0.iter().filter(move |(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn append(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.push((name.into(), value.into()));
    }

    /// Replaces every value of `name` with `value`.
    pub fn set(&mut self, name: &str, value: impl Into<String>) {
        self.remove(name);
        self.append(name, value);
    }

    pub fn remove(&mut self, name: &str) {
        self.0.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when a comma-separated header such as `Connection` lists `token`.
    pub fn has_token(&self, name: &str, token: &str) -> bool {
        self.get_all(name).flat_map(|v| v.split(',')).any(|t| t.trim().eq_ignore_ascii_case(token))
    }
}

/// Why a message could not be read.
#[derive(Debug)]
pub(crate) enum WireError {
    Io(io::Error),
    Malformed(String),
    TooLarge,
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        WireError::Io(e)
    }
}

fn malformed<T>(m: impl Into<String>) -> Result<T, WireError> {
    Err(WireError::Malformed(m.into()))
}

/// Reads one line without its terminator; `None` at end of input.
pub(crate) fn read_line<R: BufRead>(r: &mut R) -> Result<Option<String>, WireError> {
    let mut buf = Vec::new();
    let n = r.by_ref().take(MAX_LINE as u64 + 1).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        if buf.len() > MAX_LINE {
            return malformed("line too long");
        }
        return Err(WireError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed mid-line")));
    }
    buf.pop();
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    match String::from_utf8(buf) {
        Ok(s) => Ok(Some(s)),
        Err(_) => malformed("line is not UTF-8"),
    }
}

pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~".contains(&b))
}

/// Reads header lines up to and including the blank line.
pub(crate) fn read_headers<R: BufRead>(r: &mut R) -> Result<Headers, WireError> {
    let mut headers = Headers::new();
    loop {
        let line = match read_line(r)? {
            Some(l) => l,
            None => return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into())),
        };
        if line.is_empty() {
            return Ok(headers);
        }
        if line.starts_with([' ', '\t']) {
            return malformed("folded header line");
        }
        let Some((name, value)) = line.split_once(':') else {
            return malformed(format!("bad header line {line:?}"));
        };
        if !is_token(name) {
            return malformed(format!("bad header name {name:?}"));
        }
        if headers.len() == MAX_HEADERS {
            return malformed("too many header fields");
        }
        headers.append(name, value.trim());
    }
}

/// How a message body is delimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Framing {
    Length(u64),
    Chunked,
    /// Until the connection closes (responses only).
    Close,
}

pub(crate) fn framing(headers: &Headers, allow_close: bool) -> Result<Framing, WireError> {
    if let Some(te) = headers.get("transfer-encoding") {
        let last = te.rsplit(',').next().unwrap_or("").trim();
        if !last.eq_ignore_ascii_case("chunked") {
            return malformed(format!("unsupported transfer coding {te:?}"));
        }
        return Ok(Framing::Chunked);
    }
    let mut lengths = headers.get_all("content-length").flat_map(|v| v.split(',')).map(str::trim);
    match lengths.next() {
        Some(first) => {
            let n: u64 = match first.parse() {
                Ok(n) if first.bytes().all(|b| b.is_ascii_digit()) => n,
                _ => return malformed(format!("bad Content-Length {first:?}")),
            };
            if lengths.any(|l| l != first) {
                return malformed("conflicting Content-Length values");
            }
            Ok(Framing::Length(n))
        }
        None if allow_close => Ok(Framing::Close),
        None => Ok(Framing::Length(0)),
    }
}

/// Decodes a chunked body, leaving the reader after the trailer.
pub(crate) struct ChunkedReader<R> {
    inner: R,
    remaining: u64,
    done: bool,
}

impl<R: BufRead> ChunkedReader<R> {
    pub(crate) fn new(inner: R) -> Self {
        ChunkedReader { inner, remaining: 0, done: false }
    }

    fn next_chunk(&mut self) -> io::Result<()> {
        let to_io = |e: WireError| match e {
            WireError::Io(e) => e,
            WireError::Malformed(m) => io::Error::new(io::ErrorKind::InvalidData, m),
            WireError::TooLarge => io::Error::new(io::ErrorKind::InvalidData, "chunk too large"),
        };
        let line = read_line(&mut self.inner).map_err(to_io)?.ok_or(io::ErrorKind::UnexpectedEof)?;
        let size = line.split(';').next().unwrap_or("").trim();
        let size = u64::from_str_radix(size, 16)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad chunk size {line:?}")))?;
        if size == 0 {
            read_headers(&mut self.inner).map_err(to_io)?;
            self.done = true;
        }
        self.remaining = size;
        Ok(())
    }
}

impl<R: BufRead> Read for ChunkedReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.done || buf.is_empty() {
            return Ok(0);
        }
        if self.remaining == 0 {
            self.next_chunk()?;
            if self.done {
                return Ok(0);
            }
        }
        let want = buf.len().min(self.remaining as usize);
        let n = self.inner.read(&mut buf[..want])?;
        if n == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        self.remaining -= n as u64;
        if self.remaining == 0 {
            let mut crlf = [0u8; 2];
            self.inner.read_exact(&mut crlf)?;
            if &crlf != b"\r\n" {
                return Err(io::Error::new(io::ErrorKind::InvalidData, "chunk not followed by CRLF"));
            }
        }
        Ok(n)
    }
}

/// Reads a complete body of at most `max` bytes.
pub(crate) fn read_body<R: BufRead>(r: &mut R, framing: Framing, max: usize) -> Result<Vec<u8>, WireError> {
    let mut body = Vec::new();
    let limit = (max as u64).saturating_add(1);
    match framing {
        Framing::Length(n) if n > max as u64 => return Err(WireError::TooLarge),
        Framing::Length(n) => {
            body.reserve(n.min(1 << 20) as usize);
            let got = r.by_ref().take(n).read_to_end(&mut body)?;
            if got as u64 != n {
                return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into()));
            }
        }
        Framing::Chunked => {
            ChunkedReader::new(&mut *r).take(limit).read_to_end(&mut body).map_err(|e| {
                if e.kind() == io::ErrorKind::InvalidData {
                    WireError::Malformed(e.to_string())
                } else {
                    WireError::Io(e)
                }
            })?;
        }
        Framing::Close => {
            r.take(limit).read_to_end(&mut body)?;
        }
    }
    if body.len() > max {
        return Err(WireError::TooLarge);
    }
    Ok(body)
}

/// Standard reason phrase for the statuses this crate emits.
pub fn reason_phrase(status: u16) -> &'static str {
    match status {
        100 => "Continue",
        200 => "OK",
        201 => "Created",
        204 => "No Content",
        301 => "Moved Permanently",
        302 => "Found",
        303 => "See Other",
        304 => "Not Modified",
        307 => "Temporary Redirect",
        308 => "Permanent Redirect",
        400 => "Bad Request",
        403 => "Forbidden",
        404 => "Not Found",
        405 => "Method Not Allowed",
        413 => "Content Too Large",
        415 => "Unsupported Media Type",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        505 => "HTTP Version Not Supported",
        _ => "Unknown",
    }
}
