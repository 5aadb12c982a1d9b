//! Administration pages. Every form posts to a machine endpoint.

use std::io::Write;

use super::Service;
use crate::htmlgen::{page, render_to_string, tag, text, HtmlError, HtmlSpec};
use crate::httpd::{Exchange, HandlerError};
use crate::query::ResultTable;

const PAGES: [(&str, &str); 4] = [
    ("/admin/sources", "Sources"),
    ("/admin/load", "Load"),
    ("/admin/query", "Query"),
    ("/admin/statistics", "Statistics"),
];

fn nav() -> HtmlSpec {
    tag("ul")
        .attr("class", "nav")
        .child(tag("li").child(tag("a").attr("href", "/admin").child(text("Home"))))
        .children(PAGES.iter().map(|(href, label)| tag("li").child(tag("a").attr("href", *href).child(text(*label)))))
}

fn admin_page(title: &str, body: Vec<HtmlSpec>) -> Result<String, HtmlError> {
    let mut content = vec![nav(), tag("h1").child(text(title))];
    content.extend(body);
    render_to_string(&page(title, content))
}

fn hidden(name: &str, value: &str) -> HtmlSpec {
    tag("input").attr("type", "hidden").attr("name", name).attr("value", value)
}

fn field(label: &str, input: HtmlSpec) -> HtmlSpec {
    tag("p").child(tag("label").child(text(format!("{label} "))).child(input))
}

fn table(header: &[&str], rows: Vec<Vec<HtmlSpec>>) -> HtmlSpec {
    tag("table")
        .child(tag("tr").children(header.iter().map(|h| tag("th").child(text(*h)))))
        .children(rows.into_iter().map(|r| tag("tr").children(r.into_iter().map(|c| tag("td").child(c)))))
}

fn home() -> Result<String, HtmlError> {
    admin_page("Triple store administration", vec![tag("p").child(text("Choose a page above."))])
}

fn sources(service: &Service) -> Result<String, HtmlError> {
    let listed = service.store().read().sources();
    let rows = listed
        .iter()
        .map(|(name, count)| {
            let unload = tag("form")
                .attr("method", "post")
                .attr("action", "/unload")
                .child(hidden("source", name))
                .child(hidden("return", "/admin/sources"))
                .child(tag("input").attr("type", "submit").attr("value", "Unload"));
            vec![text(name.clone()), text(count.to_string()), unload]
        })
        .collect();
    admin_page(
        "Sources",
        vec![
            tag("p").child(text(format!("{} sources loaded.", listed.len()))),
            table(&["Source", "Triples", ""], rows).attr("class", "sources"),
        ],
    )
}

fn load_form() -> Result<String, HtmlError> {
    let form = tag("form")
        .attr("method", "post")
        .attr("action", "/load")
        .attr("enctype", "application/x-www-form-urlencoded")
        .child(hidden("return", "/admin/sources"))
        .child(field("Source", tag("input").attr("type", "text").attr("name", "source").attr("size", 60i64)))
        .child(field("Base IRI", tag("input").attr("type", "text").attr("name", "base").attr("size", 60i64)))
        .child(field("RDF/XML", tag("textarea").attr("name", "data").attr("rows", 20i64).attr("cols", 80i64)))
        .child(tag("p").child(tag("input").attr("type", "submit").attr("value", "Load")));
    admin_page("Load a document", vec![form])
}

fn query_form(service: &Service) -> Result<String, HtmlError> {
    let options = service.engine().registry().names().into_iter().map(|n| tag("option").attr("value", n.as_str()).child(text(n)));
    let form = tag("form")
        .attr("method", "post")
        .attr("action", "/query")
        .child(hidden("format", "html"))
        .child(field("Query", tag("textarea").attr("name", "query").attr("rows", 8i64).attr("cols", 80i64)))
        .child(field(
            "Entailment",
            tag("select").attr("name", "entailment").child(tag("option").attr("value", "").child(text("default"))).children(options),
        ))
        .child(tag("p").child(tag("input").attr("type", "submit").attr("value", "Run")));
    admin_page("Query", vec![form])
}

fn statistics(service: &Service) -> Result<String, HtmlError> {
    let stats = service.store().statistics();
    let summary = [
        ("Triples", stats.triples),
        ("Distinct subjects", stats.distinct_subjects),
        ("Distinct objects", stats.distinct_objects),
        ("Literals", stats.literals),
        ("Resources", stats.resources),
        ("Sources", stats.sources),
    ]
    .into_iter()
    .map(|(k, v)| vec![text(k), text(v.to_string())])
    .collect();
    let predicates = stats.per_predicate.iter().map(|(p, n)| vec![text(p.clone()), text(n.to_string())]).collect();
    admin_page(
        "Statistics",
        vec![
            table(&["Measure", "Value"], summary).attr("class", "summary"),
            tag("h2").child(text("Predicates")),
            table(&["Predicate", "Triples"], predicates).attr("class", "predicates"),
        ],
    )
}

/// Page showing a query and its result table.
pub(super) fn results_page(query: &str, entailment: &str, table: &ResultTable) -> Result<String, HtmlError> {
    admin_page(
        "Query results",
        vec![
            tag("pre").attr("class", "query").child(text(query)),
            tag("p").child(text(format!("{} rows under {entailment} entailment.", table.rows.len()))),
            table.to_html(),
        ],
    )
}

pub(super) fn serve_page(service: &Service, ex: &mut Exchange<'_>, path: &str) -> Result<(), HandlerError> {
    let html = match path.trim_end_matches('/') {
        "/admin" => home(),
        "/admin/sources" => sources(service),
        "/admin/load" => load_form(),
        "/admin/query" => query_form(service),
        "/admin/statistics" => statistics(service),
        _ => return Err(HandlerError::Failed),
    }
    .map_err(HandlerError::other)?;
    write!(ex, "Content-type: text/html; charset=UTF-8\n\n{html}")?;
    Ok(())
}

/// Paths of all administration pages.
pub fn admin_paths() -> Vec<&'static str> {
    std::iter::once("/admin").chain(PAGES.iter().map(|(p, _)| *p)).collect()
}
