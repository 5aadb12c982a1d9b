//! HTTP/1.1 server and client.
//!
//! The server accepts connections on one thread and serves them on a fixed
//! pool of workers, reusing connections when the client allows it. A
//! handler writes CGI-style output to its [`Exchange`]: header lines, a
//! blank line, then the body. The framework adds the status line and
//! framing. Handlers end abnormally with a [`HandlerError`]: `Failed`
//! replies 404, a [`ReplyCondition`] replies its own status and anything
//! else replies 500.
//!
//! ```
//! use std::io::Write;
//! use std::sync::Arc;
//! use triplekit::httpd::{http_open, serve, ClientOptions, ServerOptions};
//!
//! let server = serve(
//!     "127.0.0.1:0",
//!     Arc::new(|ex: &mut triplekit::httpd::Exchange<'_>| {
//!         write!(ex, "Content-type: text/plain\n\nok")?;
//!         Ok(())
//!     }),
//!     ServerOptions::default(),
//! )?;
//! let body = http_open(&server.url("/"), &ClientOptions::default())?.text()?;
//! assert_eq!(body, "ok");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! Requests of one client may be served by different workers, so state
//! that outlives a request belongs in a [`Session`] or the store.

mod client;
mod params;
mod reply;
mod request;
mod server;
mod session;
mod wire;

pub use client::{
    http_get, http_open, http_post, http_request, ClientError, ClientOptions, Content, ContentHandler,
    ContentHandlers, FullResponse, HttpConnection, Response,
};
pub use params::{form_decode, form_encode, http_parameters, Constraint, ParamError, ParamSpec, ParamValue, Params};
pub use reply::{error_page, outcome_status, Exchange, HandlerError, ReplyCondition, STREAM_THRESHOLD};
pub use request::{Request, Version};
pub use server::{serve, Handler, Server, ServerOptions};
pub use session::{new_session_id, Session, SessionManager, SessionOptions};
pub use wire::{reason_phrase, Headers};

#[cfg(test)]
mod tests;
