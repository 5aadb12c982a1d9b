use std::io::{BufRead, Cursor};
use std::net::SocketAddr;

use super::params::form_decode;
use super::wire::{framing, is_token, read_headers, read_line, Framing, Headers, WireError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Version {
    Http10,
    Http11,
}

impl Version {
    pub fn as_str(self) -> &'static str {
        match self {
            Version::Http10 => "HTTP/1.0",
            Version::Http11 => "HTTP/1.1",
        }
    }
}

/// A parsed request with its body read in full.
#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    /// Path without the query string, still percent-encoded.
    pub path: String,
    /// Raw query string without the `?`.
    pub query: String,
    pub version: Version,
    pub headers: Headers,
    pub peer: Option<SocketAddr>,
    body: Vec<u8>,
    params: Vec<(String, String)>,
}

impl Request {
    /// Builds a request and decodes its parameters: the query string, then
    /// a form-encoded body.
    pub fn new(method: &str, target: &str, version: Version, headers: Headers, body: Vec<u8>) -> Request {
        let (path, query) = match target.split_once('?') {
            Some((p, q)) => (p.to_string(), q.to_string()),
            None => (target.to_string(), String::new()),
        };
        let mut params = form_decode(&query);
        let is_form = headers
            .get("content-type")
            .and_then(|ct| ct.split(';').next())
            .is_some_and(|m| m.trim().eq_ignore_ascii_case("application/x-www-form-urlencoded"));
        if is_form {
            params.extend(form_decode(&String::from_utf8_lossy(&body)));
        }
        Request { method: method.to_string(), path, query, version, headers, peer: None, body, params }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name)
    }

    /// Media type of the body, lowercased and without parameters.
    pub fn content_type(&self) -> Option<String> {
        self.header("content-type").map(|ct| ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase())
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    pub fn body_reader(&self) -> Cursor<&[u8]> {
        Cursor::new(&self.body)
    }

    /// Decoded parameters in order; names may repeat.
    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    /// First value of parameter `name`.
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    /// Path with percent-escapes decoded.
    pub fn decoded_path(&self) -> String {
        percent_encoding::percent_decode_str(&self.path).decode_utf8_lossy().into_owned()
    }

    /// Whether the client allows the connection to stay open afterwards.
    pub fn wants_keep_alive(&self) -> bool {
        match self.version {
            Version::Http11 => !self.headers.has_token("connection", "close"),
            Version::Http10 => self.headers.has_token("connection", "keep-alive"),
        }
    }

    /// Values of the cookie `name` sent with this request.
    pub fn cookies<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.headers
            .get_all("cookie")
            .flat_map(|h| h.split(';'))
            .filter_map(|c| c.trim().split_once('='))
            .filter(move |(n, _)| *n == name)
            .map(|(_, v)| v.trim_matches('"'))
    }
}

/// Request line and headers, before the body is read.
#[derive(Debug)]
pub(crate) struct RequestHead {
    pub method: String,
    pub target: String,
    pub version: Version,
    pub headers: Headers,
}

impl RequestHead {
    pub fn framing(&self) -> Result<Framing, WireError> {
        framing(&self.headers, false)
    }

    pub fn expects_continue(&self) -> bool {
        self.version == Version::Http11 && self.headers.get("expect").is_some_and(|e| e.eq_ignore_ascii_case("100-continue"))
    }
}

fn malformed<T>(m: impl Into<String>) -> Result<T, WireError> {
    Err(WireError::Malformed(m.into()))
}

/// Reads the next request head; `None` when the peer closed cleanly.
pub(crate) fn read_head<R: BufRead>(r: &mut R) -> Result<Option<RequestHead>, WireError> {
    // Tolerate empty lines between pipelined requests.
    let line = loop {
        match read_line(r)? {
            None => return Ok(None),
            Some(l) if l.is_empty() => continue,
            Some(l) => break l,
        }
    };
    let mut parts = line.split(' ');
    let (Some(method), Some(target), Some(version), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return malformed(format!("bad request line {line:?}"));
    };
    if !is_token(method) {
        return malformed(format!("bad method {method:?}"));
    }
    let version = match version {
        "HTTP/1.1" => Version::Http11,
        "HTTP/1.0" => Version::Http10,
        _ => return malformed(format!("unsupported version {version:?}")),
    };
    let target = origin_form(target)?;
    let headers = read_headers(r)?;
    Ok(Some(RequestHead { method: method.to_string(), target, version, headers }))
}

/// Reduces absolute-form targets to their path and query.
fn origin_form(target: &str) -> Result<String, WireError> {
    if target.starts_with('/') || target == "*" {
        return Ok(target.to_string());
    }
    match url::Url::parse(target) {
        Ok(u) if u.scheme() == "http" => {
            let mut t = u.path().to_string();
            if let Some(q) = u.query() {
                t.push('?');
                t.push_str(q);
            }
            Ok(t)
        }
        _ => malformed(format!("bad request target {target:?}")),
    }
}

#[cfg(test)]
mod tests {
    use std::io::BufReader;

    use super::*;

    fn head(raw: &str) -> Result<Option<RequestHead>, WireError> {
        read_head(&mut BufReader::new(raw.as_bytes()))
    }

    #[test]
    fn request_lines() {
        let h = head("\r\nGET /a/b?x=1 HTTP/1.1\r\nHost: h\r\n\r\n").unwrap().unwrap();
        assert_eq!((h.method.as_str(), h.target.as_str(), h.version), ("GET", "/a/b?x=1", Version::Http11));
        let h = head("GET http://h:8/p?q HTTP/1.0\r\n\r\n").unwrap().unwrap();
        assert_eq!(h.target, "/p?q");
        assert!(head("").unwrap().is_none());
        for bad in [
            "GET /\r\n\r\n",
            "GET / HTTP/2.0\r\n\r\n",
            "GET  / HTTP/1.1\r\n\r\n",
            "G(T / HTTP/1.1\r\n\r\n",
            "GET ftp://x/ HTTP/1.1\r\n\r\n",
            "GET / HTTP/1.1 extra\r\n\r\n",
        ] {
            assert!(matches!(head(bad), Err(WireError::Malformed(_))), "{bad:?}");
        }
    }

    #[test]
    fn parameters_from_query_and_form() {
        let mut headers = Headers::new();
        headers.append("Content-Type", "application/x-www-form-urlencoded; charset=UTF-8");
        headers.append("Cookie", "a=1; sid=\"xyz\"");
        headers.append("Cookie", "sid=second");
        let r = Request::new("POST", "/f%20g?name=J+Doe&x=%26", Version::Http11, headers, b"age=3&name=other".to_vec());
        assert_eq!(r.param("name"), Some("J Doe"));
        assert_eq!(r.param("x"), Some("&"));
        assert_eq!(r.param("age"), Some("3"));
        assert_eq!(r.params().len(), 4);
        assert_eq!(r.decoded_path(), "/f g");
        assert_eq!(r.cookies("sid").collect::<Vec<_>>(), ["xyz", "second"]);
        let plain = Request::new("POST", "/", Version::Http11, Headers::new(), b"age=3".to_vec());
        assert_eq!(plain.param("age"), None);
    }

    #[test]
    fn keep_alive_defaults() {
        let mut h = Headers::new();
        assert!(Request::new("GET", "/", Version::Http11, h.clone(), vec![]).wants_keep_alive());
        assert!(!Request::new("GET", "/", Version::Http10, h.clone(), vec![]).wants_keep_alive());
        h.append("Connection", "Keep-Alive");
        assert!(Request::new("GET", "/", Version::Http10, h.clone(), vec![]).wants_keep_alive());
        h.set("Connection", "close");
        assert!(!Request::new("GET", "/", Version::Http11, h, vec![]).wants_keep_alive());
    }
}
