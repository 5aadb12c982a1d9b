use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use parking_lot::Mutex;

use super::reply::{error_page, Exchange, HandlerError};
use super::request::{read_head, Request};
use super::session::{SessionManager, SessionOptions};
use super::wire::{read_body, reason_phrase, WireError};

/// Request handler run on a pool worker.
pub type Handler = dyn Fn(&mut Exchange<'_>) -> Result<(), HandlerError> + Send + Sync;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub workers: usize,
    /// Allow connections to serve more than one request.
    pub keep_alive: bool,
    /// Read timeout per connection; also bounds idle keep-alive connections.
    pub timeout: Duration,
    /// Accepted connections waiting for a worker.
    pub queue: usize,
    /// Largest accepted request body in bytes.
    pub max_body: usize,
    pub sessions: Option<SessionOptions>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            workers: 4,
            keep_alive: true,
            timeout: Duration::from_secs(30),
            queue: 64,
            max_body: 64 * 1024 * 1024,
            sessions: None,
        }
    }
}

struct Shared {
    handler: Arc<Handler>,
    options: ServerOptions,
    sessions: Option<SessionManager>,
    stopping: AtomicBool,
    live_workers: AtomicUsize,
    requests: AtomicU64,
    next_conn: AtomicU64,
    open: Mutex<HashMap<u64, TcpStream>>,
}

/// A running server. Dropping the handle stops it.
pub struct Server {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
    workers: Vec<JoinHandle<()>>,
}

/// Binds `addr` and serves each connection on a pool worker.
pub fn serve(addr: impl ToSocketAddrs, handler: Arc<Handler>, options: ServerOptions) -> io::Result<Server> {
    if options.workers == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "at least one worker is required"));
    }
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        handler,
        sessions: options.sessions.clone().map(SessionManager::new),
        options,
        stopping: AtomicBool::new(false),
        live_workers: AtomicUsize::new(0),
        requests: AtomicU64::new(0),
        next_conn: AtomicU64::new(0),
        open: Mutex::new(HashMap::new()),
    });
    let (tx, rx) = sync_channel::<TcpStream>(shared.options.queue);
    let rx = Arc::new(Mutex::new(rx));
    let mut workers = Vec::new();
    for i in 0..shared.options.workers {
        let (shared, rx) = (shared.clone(), rx.clone());
        shared.live_workers.fetch_add(1, Ordering::SeqCst);
        workers.push(thread::Builder::new().name(format!("httpd-worker-{i}")).spawn(move || worker(shared, rx))?);
    }
    let accept_shared = shared.clone();
    let acceptor = thread::Builder::new().name("httpd-accept".into()).spawn(move || {
        for conn in listener.incoming() {
            if accept_shared.stopping.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    if tx.send(stream).is_err() {
                        break;
                    }
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    })?;
    log::info!("listening on {addr} with {} workers", shared.options.workers);
    Ok(Server { addr, shared, acceptor: Some(acceptor), workers })
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port` followed by `path`.
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Worker threads still running.
    pub fn workers_alive(&self) -> usize {
        self.shared.live_workers.load(Ordering::SeqCst)
    }

    /// Requests completed so far.
    pub fn requests_served(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    pub fn sessions(&self) -> Option<&SessionManager> {
        self.shared.sessions.as_ref()
    }

    /// Stops accepting, closes open connections and joins all threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the acceptor so it sees the flag.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        for s in self.shared.open.lock().values() {
            let _ = s.shutdown(Shutdown::Both);
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop();
    }
}

fn worker(shared: Arc<Shared>, rx: Arc<Mutex<Receiver<TcpStream>>>) {
    loop {
        let next = rx.lock().recv();
        let Ok(stream) = next else { break };
        if shared.stopping.load(Ordering::SeqCst) {
            continue;
        }
        let id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
        if let Ok(clone) = stream.try_clone() {
            shared.open.lock().insert(id, clone);
        }
        let result = catch_unwind(AssertUnwindSafe(|| connection(&shared, stream)));
        shared.open.lock().remove(&id);
        match result {
            Ok(Err(e)) => log::debug!("connection ended: {e}"),
            Err(_) => log::error!("connection handler panicked"),
            Ok(Ok(())) => {}
        }
    }
    shared.live_workers.fetch_sub(1, Ordering::SeqCst);
}

/// A reply produced by the framework itself; always closes the connection.
fn plain_reply(out: &mut impl Write, status: u16, message: &str) -> io::Result<()> {
    let body = error_page(status, message);
    write!(
        out,
        "HTTP/1.1 {status} {}\r\nContent-Type: text/html; charset=UTF-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        reason_phrase(status),
        body.len()
    )?;
    out.flush()
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "handler panicked".into())
}

fn connection(shared: &Shared, stream: TcpStream) -> io::Result<()> {
    stream.set_read_timeout(Some(shared.options.timeout))?;
    stream.set_nodelay(true)?;
    let peer = stream.peer_addr().ok();
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(&stream);
    loop {
        if shared.stopping.load(Ordering::SeqCst) {
            return Ok(());
        }
        let head = match read_head(&mut reader) {
            Ok(Some(h)) => h,
            Ok(None) => return Ok(()),
            Err(WireError::Malformed(m)) => return plain_reply(&mut writer, 400, &m),
            Err(WireError::TooLarge) => return plain_reply(&mut writer, 413, "request too large"),
            Err(WireError::Io(e)) => return Err(e),
        };
        let framing = match head.framing() {
            Ok(f) => f,
            Err(WireError::Malformed(m)) => return plain_reply(&mut writer, 400, &m),
            Err(_) => return plain_reply(&mut writer, 400, "bad framing"),
        };
        if head.expects_continue() {
            writer.write_all(b"HTTP/1.1 100 Continue\r\n\r\n")?;
            writer.flush()?;
        }
        let body = match read_body(&mut reader, framing, shared.options.max_body) {
            Ok(b) => b,
            Err(WireError::TooLarge) => return plain_reply(&mut writer, 413, "request body too large"),
            Err(WireError::Malformed(m)) => return plain_reply(&mut writer, 400, &m),
            Err(WireError::Io(e)) => return Err(e),
        };
        let mut request = Request::new(&head.method, &head.target, head.version, head.headers, body);
        request.peer = peer;
        let keep = shared.options.keep_alive && request.wants_keep_alive();
        let (method, path) = (request.method.clone(), request.path.clone());
        let mut exchange = Exchange::new(request, &mut writer, keep, shared.sessions.as_ref());
        let outcome = catch_unwind(AssertUnwindSafe(|| (shared.handler)(&mut exchange)))
            .unwrap_or_else(|p| Err(HandlerError::other(panic_message(p.as_ref()))));
        let (status, keep) = exchange.finish(outcome)?;
        writer.flush()?;
        shared.requests.fetch_add(1, Ordering::SeqCst);
        log::debug!("{method} {path} -> {status}");
        if !keep {
            return Ok(());
        }
    }
}
