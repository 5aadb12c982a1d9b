//! The assembled RDF server.
//!
//! | Endpoint | Parameters | Reply |
//! |---|---|---|
//! | `POST /load` | `source`, RDF/XML body or form field `data`, optional `base`, `return` | `<load source=".." triples=".."/>` |
//! | `POST /unload` | `source`, optional `return` | `<unload source=".." removed=".."/>` |
//! | `POST /query` | `query`, optional `entailment`, `format` = `xml`, `rdfxml` or `html` | result table |
//! | `GET /statistics` | | `<statistics ..>` |
//! | `GET /admin/...` | | HTML pages |
//!
//! A `return` path turns a successful form post into a redirect to that
//! page. Errors are XML `<error>` documents, or HTML pages for `format=html`
//! and form posts.

mod admin;

pub use admin::admin_paths;

use std::collections::BTreeSet;
use std::io::Write;
use std::net::ToSocketAddrs;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::Mutex;
use thiserror::Error;

use crate::httpd::{
    error_page, http_parameters, serve, Exchange, HandlerError, ParamSpec, ReplyCondition, Server, ServerOptions,
    SessionOptions,
};
use crate::markup::quote_attribute;
use crate::persist::{PersistError, Persistence};
use crate::query::{QTerm, QueryEngine, QueryError, QueryPlan, ResultTable};
use crate::rdfio::{process_rdf_with, write_rdf_xml, RdfOptions, Triple};
use crate::store::{Statistics, Store, StoreError};

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub workers: usize,
    /// Persistence directory; the store is memory-only without one.
    pub db: Option<PathBuf>,
    pub entailment: String,
    pub admin: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 3020,
            workers: 4,
            db: None,
            entailment: "rdfs".into(),
            admin: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Store, query engine and optional persistence behind the HTTP endpoints.
pub struct Service {
    store: Store,
    engine: QueryEngine,
    persistence: Mutex<Option<Persistence>>,
    admin: bool,
}

/// A service bound to a port.
pub struct RunningService {
    pub server: Server,
    pub service: Arc<Service>,
}

impl RunningService {
    pub fn url(&self, path: &str) -> String {
        self.server.url(path)
    }

    pub fn shutdown(self) {
        self.server.shutdown();
        self.service.close();
    }
}

/// Validates `config`, restores the store and serves on its port.
pub fn start(config: &ServiceConfig) -> Result<RunningService, ServiceError> {
    if config.port == 0 {
        return Err(ServiceError::Config("port must be in 1..65535".into()));
    }
    start_on((config.host.as_str(), config.port), config)
}

/// Like [`start`] but binds `addr`, which may use port 0.
pub fn start_on(addr: impl ToSocketAddrs, config: &ServiceConfig) -> Result<RunningService, ServiceError> {
    let service = Arc::new(Service::new(config)?);
    let handler_service = service.clone();
    let server = serve(
        addr,
        Arc::new(move |ex: &mut Exchange<'_>| handler_service.handle(ex)),
        ServerOptions { workers: config.workers, sessions: Some(SessionOptions::default()), ..Default::default() },
    )?;
    Ok(RunningService { server, service })
}

/// Reply format of an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Xml,
    RdfXml,
    Html,
}

fn store_error(e: StoreError) -> HandlerError {
    HandlerError::other(e)
}

impl Service {
    pub fn new(config: &ServiceConfig) -> Result<Service, ServiceError> {
        if config.workers == 0 {
            return Err(ServiceError::Config("at least one worker is required".into()));
        }
        let engine = QueryEngine::new().with_default_entailment(&config.entailment);
        engine.registry().get(&config.entailment).map_err(|e| ServiceError::Config(e.to_string()))?;
        let store = Store::new();
        let persistence = match &config.db {
            Some(dir) => Some(Persistence::attach(&store, dir)?),
            None => None,
        };
        Ok(Service { store, engine, persistence: Mutex::new(persistence), admin: config.admin })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn engine(&self) -> &QueryEngine {
        &self.engine
    }

    /// Detaches persistence; later changes are not journalled.
    pub fn close(&self) {
        if let Some(mut p) = self.persistence.lock().take() {
            p.detach();
        }
    }

    /// Routes one request.
    pub fn handle(&self, ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
        let method = ex.request.method.clone();
        let path = ex.request.path.clone();
        let allowed: &[&str] = match path.as_str() {
            "/load" | "/unload" => &["POST"],
            "/query" => &["GET", "POST"],
            "/statistics" | "/session" | "/private" => &["GET", "HEAD"],
            p if p == "/admin" || p.starts_with("/admin/") => {
                if !self.admin {
                    return Err(HandlerError::Failed);
                }
                &["GET", "HEAD"]
            }
            _ => return Err(HandlerError::Failed),
        };
        if !allowed.contains(&method.as_str()) {
            write!(ex, "Status: 405\nAllow: {}\nContent-type: text/plain\n\nmethod not allowed\n", allowed.join(", "))?;
            return Ok(());
        }
        match path.as_str() {
            "/load" => self.load(ex),
            "/unload" => self.unload(ex),
            "/query" => self.query(ex),
            "/statistics" => self.statistics(ex),
            "/session" => session_demo(ex),
            "/private" => Err(ReplyCondition::Forbidden(path).into()),
            _ => admin::serve_page(self, ex, &path),
        }
    }

    fn load(&self, ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
        let form = is_form(ex);
        let p = http_parameters(
            &ex.request,
            &[ParamSpec::new("source").min_length(1), ParamSpec::new("base").optional(), ParamSpec::new("return").optional()],
        )?;
        let source = p.text("source").unwrap_or_default().to_string();
        let html = form || p.text("return").is_some();
        let data: Vec<u8> = if form {
            match ex.request.param("data") {
                Some(d) => d.as_bytes().to_vec(),
                None => return reply_error(ex, html, 400, None, "missing parameter \"data\""),
            }
        } else {
            ex.request.body().to_vec()
        };
        let mut opts = RdfOptions::new(&source);
        match p.text("base") {
            Some(b) => opts = opts.base(b),
            None if url::Url::parse(&source).is_ok() => opts = opts.base(&source),
            None => {}
        }
        let outcome = self.store.transaction(|txn| {
            txn.begin_load(&source)?;
            let mut count = 0usize;
            process_rdf_with(&data[..], &opts, |triples, loc| {
                count += triples.len();
                for t in triples {
                    txn.assert(t, &source, loc.line as u32)?;
                }
                Ok(())
            })
            .map_err(LoadError::Rdf)?;
            txn.end_load(&source)?;
            Ok::<_, LoadError>(count)
        });
        let count = match outcome {
            Ok(n) => n,
            Err(LoadError::Rdf(e)) => return reply_error(ex, html, 400, None, &e.to_string()),
            Err(LoadError::Store(e)) => return Err(store_error(e)),
        };
        log::info!("loaded {count} triples from {source}");
        if let Some(back) = p.text("return") {
            return redirect(ex, back);
        }
        write!(
            ex,
            "Content-type: application/xml; charset=UTF-8\n\n{XML_DECL}<load source=\"{}\" triples=\"{count}\"/>\n",
            quote_attribute(&source)
        )?;
        Ok(())
    }

    fn unload(&self, ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
        let p = http_parameters(&ex.request, &[ParamSpec::new("source"), ParamSpec::new("return").optional()])?;
        let source = p.text("source").unwrap_or_default().to_string();
        let removed = self.store.transaction(|txn| txn.retract_source(&source)).map_err(store_error)?;
        if let Some(back) = p.text("return") {
            return redirect(ex, back);
        }
        write!(
            ex,
            "Content-type: application/xml; charset=UTF-8\n\n{XML_DECL}<unload source=\"{}\" removed=\"{removed}\"/>\n",
            quote_attribute(&source)
        )?;
        Ok(())
    }

    /// Runs a query; the error carries the status and position to report.
    pub fn run_query(&self, text: &str, entailment: Option<&str>) -> Result<(ResultTable, QueryPlan), QueryError> {
        self.engine.run_with(&self.store, text, entailment)
    }

    /// Triples matched by the patterns of `text`, one set per solution,
    /// merged.
    pub fn construct(&self, text: &str, entailment: Option<&str>) -> Result<Vec<Triple>, QueryError> {
        let mut query = self.engine.parse(text)?;
        query.projection = query.variables.clone();
        query.distinct = false;
        let view = self.store.read();
        let plan = self.engine.plan(&view, &query, entailment)?;
        let (table, _) = self.engine.execute(&view, &query, &plan)?;
        let mut out = BTreeSet::new();
        for row in &table.rows {
            let value = |t: &QTerm| match t {
                QTerm::Const(c) => c.clone(),
                QTerm::Var(v) => row[query.variables.iter().position(|x| x == v).expect("pattern variable")].clone(),
            };
            for p in &query.patterns {
                out.insert(Triple::new(value(&p.subject), value(&p.predicate), value(&p.object)));
            }
        }
        Ok(out.into_iter().collect())
    }

    fn query(&self, ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
        let p = http_parameters(
            &ex.request,
            &[
                ParamSpec::new("query"),
                ParamSpec::new("entailment").optional(),
                ParamSpec::new("format").one_of(["xml", "rdfxml", "html"]).default("xml"),
            ],
        );
        let html_requested = ex.request.param("format") == Some("html");
        let p = match p {
            Ok(p) => p,
            Err(e) => return reply_error(ex, html_requested, 400, None, &e.to_string()),
        };
        let text = p.text("query").unwrap_or_default().to_string();
        let entailment = p.text("entailment").filter(|e| !e.is_empty()).map(str::to_string);
        let format = match p.text("format") {
            Some("rdfxml") => Format::RdfXml,
            Some("html") => Format::Html,
            _ => Format::Xml,
        };
        let html = format == Format::Html;
        let query_error = |ex: &mut Exchange<'_>, e: QueryError| match e {
            QueryError::Syntax { line, column, message } => reply_error(ex, html, 400, Some((line, column)), &message),
            QueryError::Store(e) => Err(store_error(e)),
            other => reply_error(ex, html, 400, None, &other.to_string()),
        };
        match format {
            Format::RdfXml => {
                let triples = match self.construct(&text, entailment.as_deref()) {
                    Ok(t) => t,
                    Err(e) => return query_error(ex, e),
                };
                let mut doc = Vec::new();
                write_rdf_xml(&mut doc, &triples).map_err(HandlerError::other)?;
                write!(ex, "Content-type: application/rdf+xml; charset=UTF-8\n\n")?;
                ex.write_all(&doc)?;
            }
            Format::Xml | Format::Html => {
                let (table, plan) = match self.run_query(&text, entailment.as_deref()) {
                    Ok(r) => r,
                    Err(e) => return query_error(ex, e),
                };
                if format == Format::Xml {
                    write!(ex, "Content-type: application/xml; charset=UTF-8\n\n")?;
                    ex.write_all(table.to_xml().as_bytes())?;
                } else {
                    let page = admin::results_page(&text, &plan.entailment, &table).map_err(HandlerError::other)?;
                    write!(ex, "Content-type: text/html; charset=UTF-8\n\n{page}")?;
                }
            }
        }
        Ok(())
    }

    fn statistics(&self, ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
        let view = self.store.read();
        let xml = statistics_xml(&view.statistics(), &view.sources());
        drop(view);
        write!(ex, "Content-type: application/xml; charset=UTF-8\n\n{xml}")?;
        Ok(())
    }
}

#[derive(Debug, Error)]
enum LoadError {
    #[error(transparent)]
    Rdf(crate::rdfio::RdfError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn is_form(ex: &Exchange<'_>) -> bool {
    ex.request.content_type().as_deref() == Some("application/x-www-form-urlencoded")
}

/// Redirects to a local path after a form post.
fn redirect(ex: &mut Exchange<'_>, to: &str) -> Result<(), HandlerError> {
    if !to.starts_with('/') || to.starts_with("//") {
        return Err(ReplyCondition::BadRequest(format!("return path {to:?} is not local")).into());
    }
    write!(ex, "Status: 303 See Other\nLocation: {to}\nContent-type: text/plain\n\nsee {to}\n")?;
    Ok(())
}

/// Writes an error document with `status`.
fn reply_error(
    ex: &mut Exchange<'_>,
    html: bool,
    status: u16,
    position: Option<(usize, usize)>,
    message: &str,
) -> Result<(), HandlerError> {
    if html {
        let text = match position {
            Some((l, c)) => format!("line {l}, column {c}: {message}"),
            None => message.to_string(),
        };
        write!(ex, "Status: {status}\nContent-type: text/html; charset=UTF-8\n\n{}", error_page(status, &text))?;
    } else {
        let pos = position.map(|(l, c)| format!(" line=\"{l}\" column=\"{c}\"")).unwrap_or_default();
        write!(
            ex,
            "Status: {status}\nContent-type: application/xml; charset=UTF-8\n\n{XML_DECL}<error status=\"{status}\"{pos}>{}</error>\n",
            crate::markup::quote_text(message)
        )?;
    }
    Ok(())
}

/// The statistics document.
pub fn statistics_xml(stats: &Statistics, sources: &[(String, usize)]) -> String {
    let mut out = format!(
        "{XML_DECL}<statistics triples=\"{}\" subjects=\"{}\" objects=\"{}\" literals=\"{}\" resources=\"{}\" sources=\"{}\">\n",
        stats.triples, stats.distinct_subjects, stats.distinct_objects, stats.literals, stats.resources, stats.sources
    );
    for (p, n) in &stats.per_predicate {
        out.push_str(&format!("<predicate iri=\"{}\" triples=\"{n}\"/>\n", quote_attribute(p)));
    }
    for (s, n) in sources {
        out.push_str(&format!("<source name=\"{}\" triples=\"{n}\"/>\n", quote_attribute(s)));
    }
    out.push_str("</statistics>\n");
    out
}

/// Counts visits per client session.
fn session_demo(ex: &mut Exchange<'_>) -> Result<(), HandlerError> {
    let session = ex.session().ok_or_else(|| ReplyCondition::ServerError("sessions are disabled".into()))?;
    let visits = session
        .update("visits", |v| Some((v.and_then(|v| v.parse::<u64>().ok()).unwrap_or(0) + 1).to_string()))
        .unwrap_or_default();
    write!(ex, "Content-type: text/plain\n\nsession {} visits {visits}\n", session.id())?;
    Ok(())
}
