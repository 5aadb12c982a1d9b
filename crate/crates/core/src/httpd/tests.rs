use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::*;
use crate::markup::MarkupNode;

fn routes(ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
    let path = ex.request.path.clone();
    match path.as_str() {
        "/hello" => write!(ex, "Content-type: text/plain\n\nok")?,
        "/forbidden" => return Err(ReplyCondition::Forbidden(path).into()),
        "/fail" => return Err(HandlerError::Failed),
        "/error" => return Err(HandlerError::other("unexpected")),
        "/panic" => panic!("handler bug"),
        "/moved" => return Err(ReplyCondition::Moved("/hello".into()).into()),
        "/redirect" => write!(ex, "Status: 302 Found\nLocation: /moved\n\n")?,
        "/loop" => write!(ex, "Location: /loop\n\n")?,
        "/xml" => write!(ex, "Content-type: application/xml\n\n<doc><a x=\"1\">t</a></doc>")?,
        "/binary" => write!(ex, "Content-type: image/png\n\n\u{1}")?,
        "/echo" => {
            let ct = ex.request.header("content-type").unwrap_or("text/plain").to_string();
            let body = ex.request.body().to_vec();
            write!(ex, "Content-type: {ct}\n\n")?;
            ex.write_all(&body)?;
        }
        "/big" => {
            let n: usize = ex.request.param("n").and_then(|n| n.parse().ok()).unwrap_or(0);
            write!(ex, "Content-type: text/plain\n\n")?;
            for i in 0..n {
                writeln!(ex, "line {i}")?;
            }
        }
        "/person" => {
            let p = http_parameters(
                &ex.request,
                &[
                    ParamSpec::new("name").min_length(2),
                    ParamSpec::new("age").integer(),
                    ParamSpec::new("title").optional(),
                ],
            )?;
            write!(
                ex,
                "Content-type: text/plain\n\n{}|{}|{}",
                p.text("name").unwrap(),
                p.integer("age").unwrap() + 1,
                p.text("title").unwrap_or("-")
            )?;
        }
        "/count" => {
            let s = ex.session().ok_or(ReplyCondition::ServerError("no sessions".into()))?;
            let n = s.update("n", |v| Some((v.map_or(0, |v| v.parse::<u64>().unwrap()) + 1).to_string())).unwrap();
            write!(ex, "Content-type: text/plain\n\n{} {n}", s.id())?;
        }
        "/slow" => {
            thread::sleep(Duration::from_millis(200));
            write!(ex, "Content-type: text/plain\n\nslow")?;
        }
        _ => return Err(HandlerError::Failed),
    }
    Ok(())
}

fn start(options: ServerOptions) -> Server {
    serve("127.0.0.1:0", Arc::new(routes), options).unwrap()
}

fn raw(server: &Server, request: &str) -> String {
    let mut s = TcpStream::connect(server.local_addr()).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s.write_all(request.as_bytes()).unwrap();
    let mut out = String::new();
    let _ = s.read_to_string(&mut out);
    out
}

fn status_of(server: &Server, path: &str) -> u16 {
    let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    c.get(path).unwrap().status
}

#[test]
fn status_mapping() {
    let server = start(ServerOptions::default());
    for (path, status) in [
        ("/hello", 200),
        ("/forbidden", 403),
        ("/fail", 404),
        ("/nowhere", 404),
        ("/error", 500),
        ("/panic", 500),
        ("/moved", 301),
    ] {
        assert_eq!(status_of(&server, path), status, "{path}");
    }
    assert_eq!(server.workers_alive(), 4);
    let out = raw(&server, "GET /hello HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert!(out.starts_with("HTTP/1.1 200 OK\r\n"), "{out}");
    assert!(out.ends_with("\r\n\r\nok"));
    assert!(out.contains("Content-Length: 2\r\n"));
}

#[test]
fn parameters_over_get_and_post() {
    let server = start(ServerOptions::default());
    let opts = ClientOptions::default();
    let body = http_open(&server.url("/person?name=Ann&age=3"), &opts).unwrap().text().unwrap();
    assert_eq!(body, "Ann|4|-");
    let form = form_encode(&[("name", "Bo B"), ("age", "41"), ("title", "Dr & Co")]);
    let got = http_post(
        &server.url("/person"),
        form.as_bytes(),
        "application/x-www-form-urlencoded",
        &ContentHandlers::default(),
        &opts,
    )
    .unwrap();
    assert_eq!(got, Content::Text("Bo B|42|Dr & Co".into()));
    for bad in ["/person?name=A&age=3", "/person?name=Ann&age=x", "/person?age=3"] {
        assert_eq!(http_open(&server.url(bad), &opts).unwrap_err().status(), Some(400), "{bad}");
    }
}

#[test]
fn sessions_issue_replay_and_expire() {
    let server = start(ServerOptions {
        sessions: Some(SessionOptions { timeout: Duration::from_millis(300), ..Default::default() }),
        ..Default::default()
    });
    let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    let first = c.get("/count").unwrap();
    let cookie = first.headers.get("set-cookie").unwrap().to_string();
    assert!(cookie.starts_with("tk_session="));
    assert!(cookie.contains("Path=/"));
    let pair = cookie.split(';').next().unwrap().to_string();
    let id = pair.split_once('=').unwrap().1.to_string();
    assert_eq!(first.text(), format!("{id} 1"));

    let replay = |c: &mut HttpConnection| c.request("GET", "/count", &[("Cookie".into(), pair.clone())], None).unwrap();
    let second = replay(&mut c);
    assert!(second.headers.get("set-cookie").is_none());
    assert_eq!(second.text(), format!("{id} 2"));

    // A new connection may land on another worker; the session follows the cookie.
    let mut other = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    assert_eq!(replay(&mut other).text(), format!("{id} 3"));

    let tampered = c.request("GET", "/count", &[("Cookie".into(), "tk_session=forged".into())], None).unwrap();
    assert!(tampered.headers.get("set-cookie").is_some());
    assert!(tampered.text().ends_with(" 1"));

    thread::sleep(Duration::from_millis(450));
    let expired = replay(&mut c);
    assert!(expired.headers.get("set-cookie").is_some());
    let text = expired.text();
    assert!(!text.starts_with(&id));
    assert!(text.ends_with(" 1"), "{text}");
}

#[test]
fn concurrent_session_requests() {
    let server = start(ServerOptions { sessions: Some(SessionOptions::default()), ..Default::default() });
    let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    let first = c.get("/count").unwrap();
    let pair = first.headers.get("set-cookie").unwrap().split(';').next().unwrap().to_string();
    thread::scope(|scope| {
        for _ in 0..4 {
            let pair = pair.clone();
            let server = &server;
            scope.spawn(move || {
                let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
                for _ in 0..50 {
                    let r = c.request("GET", "/count", &[("Cookie".into(), pair.clone())], None).unwrap();
                    assert_eq!(r.status, 200);
                }
            });
        }
    });
    let last = c.request("GET", "/count", &[("Cookie".into(), pair)], None).unwrap();
    assert!(last.text().ends_with(" 202"), "{}", last.text());
}

#[test]
fn client_redirects_errors_and_content() {
    let server = start(ServerOptions::default());
    let opts = ClientOptions::default();
    let r = http_open(&server.url("/redirect"), &opts).unwrap();
    assert_eq!(r.url.path(), "/hello");
    assert_eq!(r.text().unwrap(), "ok");
    let e = http_open(&server.url("/nothing"), &opts).unwrap_err();
    assert_eq!(e.status(), Some(404));
    assert!(matches!(http_open(&server.url("/loop"), &opts), Err(ClientError::TooManyRedirects(_))));
    let no_follow = ClientOptions { max_redirects: 0, ..Default::default() };
    assert!(matches!(http_open(&server.url("/redirect"), &no_follow), Err(ClientError::TooManyRedirects(_))));

    let handlers = ContentHandlers::default();
    match http_get(&server.url("/xml"), &handlers, &opts).unwrap() {
        Content::Markup(nodes) => {
            let MarkupNode::Element(doc) = &nodes[0] else { panic!("{nodes:?}") };
            assert_eq!(doc.tag, "doc");
            assert_eq!(doc.elements().next().unwrap().text(), "t");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        http_get(&server.url("/binary"), &handlers, &opts),
        Err(ClientError::UnsupportedMedia(m)) if m == "image/png"
    ));
    let echoed = http_post(&server.url("/echo"), b"abc", "text/plain", &handlers, &opts).unwrap();
    assert_eq!(echoed, Content::Text("abc".into()));
    let mut custom = ContentHandlers::empty();
    custom.register("image/*", |r, media| {
        let mut b = Vec::new();
        r.read_to_end(&mut b)?;
        assert_eq!(media, "image/png");
        Ok(Content::Bytes(b))
    });
    assert_eq!(http_get(&server.url("/binary"), &custom, &opts).unwrap(), Content::Bytes(vec![1]));
    assert!(matches!(http_open("ftp://x/", &opts), Err(ClientError::Url { .. })));
}

#[test]
fn client_timeout() {
    let server = start(ServerOptions::default());
    let opts = ClientOptions { timeout: Duration::from_millis(50), ..Default::default() };
    assert!(matches!(http_open(&server.url("/slow"), &opts), Err(ClientError::Timeout(_))));
}

#[test]
fn streamed_replies_reach_the_client() {
    let server = start(ServerOptions::default());
    let n = 20_000;
    let r = http_open(&server.url(&format!("/big?n={n}")), &ClientOptions::default()).unwrap();
    assert_eq!(r.headers.get("transfer-encoding"), Some("chunked"));
    let lines: Vec<String> = BufReader::new(r).lines().map(Result::unwrap).collect();
    assert_eq!(lines.len(), n);
    assert_eq!(lines[n - 1], format!("line {}", n - 1));
    // The connection stays usable after a chunked reply.
    let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    assert!(c.get("/big?n=10000").unwrap().body.len() > STREAM_THRESHOLD);
    assert_eq!(c.get("/hello").unwrap().text(), "ok");
}

#[test]
fn request_framing_variants() {
    let server = start(ServerOptions::default());
    let out = raw(
        &server,
        "POST /echo HTTP/1.1\r\nHost: x\r\nTransfer-Encoding: chunked\r\nContent-Type: text/plain\r\nConnection: close\r\n\r\n\
         3\r\nabc\r\n2\r\nde\r\n0\r\n\r\n",
    );
    assert!(out.ends_with("\r\n\r\nabcde"), "{out}");
    let out = raw(
        &server,
        "POST /echo HTTP/1.1\r\nHost: x\r\nExpect: 100-continue\r\nContent-Length: 2\r\nConnection: close\r\n\r\nhi",
    );
    assert!(out.starts_with("HTTP/1.1 100 Continue\r\n\r\nHTTP/1.1 200 OK\r\n"), "{out}");
    // Two pipelined requests on one connection.
    let out = raw(&server, "GET /hello HTTP/1.1\r\nHost: x\r\n\r\nGET /hello HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(out.matches("HTTP/1.1 200 OK").count(), 2);
    // HTTP/1.0 closes by default.
    let out = raw(&server, "GET /hello HTTP/1.0\r\n\r\n");
    assert!(out.contains("Connection: close\r\n"));
    let out = raw(&server, "HEAD /hello HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert!(out.ends_with("Content-Length: 2\r\nConnection: close\r\n\r\n"), "{out}");
}

#[test]
fn body_limit() {
    let server = start(ServerOptions { max_body: 10, ..Default::default() });
    let out = raw(&server, "POST /echo HTTP/1.1\r\nHost: x\r\nContent-Length: 11\r\n\r\n01234567890");
    assert!(out.starts_with("HTTP/1.1 413 "), "{out}");
}

#[test]
fn malformed_requests_keep_the_pool() {
    let server = start(ServerOptions { workers: 3, timeout: Duration::from_millis(500), ..Default::default() });
    let junk = [
        "\r\n\r\n",
        "GARBAGE\r\n\r\n",
        "GET / HTTP/9.9\r\n\r\n",
        "GET / HTTP/1.1\r\nNo colon here\r\n\r\n",
        "GET / HTTP/1.1\r\nContent-Length: -1\r\n\r\n",
        "GET / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\nzz\r\n",
        "\u{0}\u{1}\u{2}\r\n",
        "GET /\u{7f}\u{80} HTTP/1.1\r\n",
    ];
    for j in junk {
        let out = raw(&server, j);
        assert!(out.is_empty() || out.starts_with("HTTP/1.1 400 "), "{j:?} -> {out}");
    }
    let long = format!("GET /{} HTTP/1.1\r\n\r\n", "a".repeat(20_000));
    assert!(raw(&server, &long).starts_with("HTTP/1.1 400 "));
    let mut rng_state = 12345u64;
    for _ in 0..200 {
        let len = (rng_state % 64) as usize;
        let bytes: Vec<u8> = (0..len)
            .map(|_| {
                rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (rng_state >> 56) as u8
            })
            .collect();
        let mut s = TcpStream::connect(server.local_addr()).unwrap();
        let _ = s.write_all(&bytes);
        let _ = s.shutdown(std::net::Shutdown::Write);
        let mut sink = Vec::new();
        let _ = s.read_to_end(&mut sink);
    }
    assert_eq!(server.workers_alive(), 3);
    assert_eq!(status_of(&server, "/hello"), 200);
}

#[test]
fn keep_alive_beats_reconnecting() {
    let server = start(ServerOptions::default());
    let n = 300;
    let time = |f: &dyn Fn()| {
        let t = std::time::Instant::now();
        f();
        t.elapsed()
    };
    let reuse = time(&|| {
        let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
        for _ in 0..n {
            assert_eq!(c.get("/hello").unwrap().status, 200);
        }
    });
    let reconnect = time(&|| {
        for _ in 0..n {
            let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
            let r = c.request("GET", "/hello", &[("Connection".into(), "close".into())], None).unwrap();
            assert_eq!(r.status, 200);
            assert!(c.is_closed());
        }
    });
    assert!(reuse < reconnect, "{reuse:?} vs {reconnect:?}");
}

#[test]
fn shutdown_closes_idle_connections() {
    let server = start(ServerOptions { timeout: Duration::from_secs(60), ..Default::default() });
    let mut c = HttpConnection::open(&server.url("/"), Duration::from_secs(5)).unwrap();
    assert_eq!(c.get("/hello").unwrap().status, 200);
    let t = std::time::Instant::now();
    server.shutdown();
    assert!(t.elapsed() < Duration::from_secs(5));
}
