use std::collections::HashMap;
use std::io::Read;
use std::rc::Rc;

use url::Url;

use super::{Location, RdfError, RdfOptions, Term, Triple};
use crate::markup::{
    parse_events, parse_tree, AttrValue, Control, Element, EventHandler, HandlerError, MarkupError, MarkupNode,
    ParseOptions,
};
use crate::vocab::{RDF_NS, RDF_TYPE};

const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

/// Namespace bindings, language and base in effect for an element.
#[derive(Clone, Default)]
struct Scope {
    ns: Rc<HashMap<String, String>>,
    lang: Option<String>,
    base: Option<String>,
}

fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, _)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

fn is_whitespace(s: &str) -> bool {
    s.chars().all(char::is_whitespace)
}

enum AttrKind {
    /// `xmlns`, `xml:*`: consumed by scoping.
    Scoping,
    Rdf(String),
    Property(String),
}

struct Interp<'a> {
    source: &'a str,
    next_bnode: u64,
    node_ids: HashMap<String, String>,
    line: Option<usize>,
}

impl<'a> Interp<'a> {
    fn new(source: &'a str) -> Self {
        Interp { source, next_bnode: 0, node_ids: HashMap::new(), line: None }
    }

    fn fresh(&mut self) -> Term {
        self.next_bnode += 1;
        Term::BNode(format!("__{}#{}", self.source, self.next_bnode))
    }

    fn named_bnode(&mut self, id: &str) -> Term {
        if let Some(b) = self.node_ids.get(id) {
            return Term::BNode(b.clone());
        }
        let Term::BNode(b) = self.fresh() else { unreachable!() };
        self.node_ids.insert(id.to_string(), b.clone());
        Term::BNode(b)
    }

    fn syntax(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax { message: message.into(), line: self.line }
    }

    fn unsupported(&self, element: &str, construct: impl Into<String>) -> RdfError {
        RdfError::Unsupported { element: element.to_string(), construct: construct.into(), line: self.line }
    }

    fn enter(&self, outer: &Scope, attributes: &[(String, AttrValue)]) -> Result<Scope, RdfError> {
        let mut scope = outer.clone();
        for (name, value) in attributes {
            let value = value.text();
            if name == "xmlns" {
                Rc::make_mut(&mut scope.ns).insert(String::new(), value.into_owned());
            } else if let Some(prefix) = name.strip_prefix("xmlns:") {
                Rc::make_mut(&mut scope.ns).insert(prefix.to_string(), value.into_owned());
            } else if name == "xml:lang" {
                scope.lang = (!value.is_empty()).then(|| value.to_lowercase());
            } else if name == "xml:base" {
                scope.base = Some(self.resolve_iri(&value, outer)?);
            }
        }
        Ok(scope)
    }

    fn expand(&self, qname: &str, scope: &Scope) -> Result<String, RdfError> {
        let (prefix, local) = qname.split_once(':').unwrap_or(("", qname));
        if prefix == "xml" {
            return Ok(format!("{XML_NS}{local}"));
        }
        match scope.ns.get(prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None if prefix.is_empty() => Err(self.syntax(format!("`{qname}` is not in a namespace"))),
            None => Err(self.syntax(format!("undeclared namespace prefix `{prefix}`"))),
        }
    }

    fn resolve_iri(&self, iri: &str, scope: &Scope) -> Result<String, RdfError> {
        if is_absolute_iri(iri) {
            return Ok(iri.to_string());
        }
        let Some(base) = &scope.base else {
            return Err(RdfError::RelativeIri { iri: iri.to_string(), line: self.line });
        };
        Url::parse(base)
            .and_then(|b| b.join(iri))
            .map(String::from)
            .map_err(|e| self.syntax(format!("cannot resolve `{iri}` against `{base}`: {e}")))
    }

    fn classify(&self, name: &str, scope: &Scope) -> Result<AttrKind, RdfError> {
        if name == "xmlns" || name.starts_with("xmlns:") || name.starts_with("xml:") {
            return Ok(AttrKind::Scoping);
        }
        let iri = self.expand(name, scope)?;
        Ok(match iri.strip_prefix(RDF_NS) {
            Some(local) => AttrKind::Rdf(local.to_string()),
            None => AttrKind::Property(iri),
        })
    }

    fn literal(&self, text: String, scope: &Scope) -> Term {
        match &scope.lang {
            Some(lang) => Term::lang(lang, text),
            None => Term::plain(text),
        }
    }

    fn node_element(
        &mut self,
        e: &Element,
        outer: &Scope,
        link: Option<(&Term, &Term)>,
        out: &mut Vec<Triple>,
    ) -> Result<Term, RdfError> {
        let scope = self.enter(outer, &e.attributes)?;
        let class = self.expand(&e.tag, &scope)?;
        match class.strip_prefix(RDF_NS) {
            Some("li") => return Err(self.unsupported(&e.tag, "rdf:li")),
            Some("RDF") => return Err(self.syntax("nested rdf:RDF")),
            _ => {}
        }

        let mut subject = None;
        let mut properties = Vec::new();
        for (name, value) in &e.attributes {
            let value = value.text();
            match self.classify(name, &scope)? {
                AttrKind::Scoping => {}
                AttrKind::Rdf(local) => match local.as_str() {
                    "about" | "nodeID" if subject.is_some() => {
                        return Err(self.syntax(format!("<{}> has both rdf:about and rdf:nodeID", e.tag)))
                    }
                    "about" => subject = Some(Term::Iri(self.resolve_iri(&value, &scope)?)),
                    "nodeID" => subject = Some(self.named_bnode(&value)),
                    "type" => properties.push((RDF_TYPE.to_string(), Term::Iri(self.resolve_iri(&value, &scope)?))),
                    "ID" | "bagID" | "li" | "resource" | "datatype" | "parseType" => {
                        return Err(self.unsupported(&e.tag, format!("rdf:{local}")))
                    }
                    _ => properties.push((format!("{RDF_NS}{local}"), self.literal(value.into_owned(), &scope))),
                },
                AttrKind::Property(p) => properties.push((p, self.literal(value.into_owned(), &scope))),
            }
        }
        let subject = match subject {
            Some(s) => s,
            None => self.fresh(),
        };

        if let Some((s, p)) = link {
            out.push(Triple::new(s.clone(), p.clone(), subject.clone()));
        }
        if class != format!("{RDF_NS}Description") {
            out.push(Triple::new(subject.clone(), Term::iri(RDF_TYPE), Term::Iri(class)));
        }
        for (p, o) in properties {
            out.push(Triple::new(subject.clone(), Term::Iri(p), o));
        }
        for child in &e.children {
            match child {
                MarkupNode::Element(prop) => self.property_element(prop, &scope, &subject, out)?,
                MarkupNode::Text(t) if !is_whitespace(t) => {
                    return Err(self.syntax(format!("text directly inside node element <{}>", e.tag)))
                }
                _ => {}
            }
        }
        Ok(subject)
    }

    fn property_element(
        &mut self,
        e: &Element,
        outer: &Scope,
        subject: &Term,
        out: &mut Vec<Triple>,
    ) -> Result<(), RdfError> {
        let scope = self.enter(outer, &e.attributes)?;
        let predicate = self.expand(&e.tag, &scope)?;
        if predicate == format!("{RDF_NS}li") {
            return Err(self.unsupported(&e.tag, "rdf:li"));
        }
        let predicate = Term::Iri(predicate);

        let mut resource = None;
        let mut datatype = None;
        let mut parse_type = None;
        let mut properties = Vec::new();
        for (name, value) in &e.attributes {
            let value = value.text();
            match self.classify(name, &scope)? {
                AttrKind::Scoping => {}
                AttrKind::Rdf(local) => match local.as_str() {
                    "resource" | "nodeID" if resource.is_some() => {
                        return Err(self.syntax(format!("<{}> has both rdf:resource and rdf:nodeID", e.tag)))
                    }
                    "resource" => resource = Some(Term::Iri(self.resolve_iri(&value, &scope)?)),
                    "nodeID" => resource = Some(self.named_bnode(&value)),
                    "datatype" => datatype = Some(self.resolve_iri(&value, &scope)?),
                    "parseType" => parse_type = Some(value.into_owned()),
                    "type" => properties.push((RDF_TYPE.to_string(), Term::Iri(self.resolve_iri(&value, &scope)?))),
                    "ID" | "bagID" | "about" | "li" => return Err(self.unsupported(&e.tag, format!("rdf:{local}"))),
                    _ => properties.push((format!("{RDF_NS}{local}"), self.literal(value.into_owned(), &scope))),
                },
                AttrKind::Property(p) => properties.push((p, self.literal(value.into_owned(), &scope))),
            }
        }

        let elements: Vec<&Element> = e.elements().collect();
        let text = e.text();
        let conflict = |what: &str| self.syntax(format!("<{}> combines {what}", e.tag));

        if let Some(pt) = parse_type {
            if pt != "Resource" {
                return Err(self.unsupported(&e.tag, format!("rdf:parseType=\"{pt}\"")));
            }
            if resource.is_some() || datatype.is_some() || !properties.is_empty() {
                return Err(conflict("rdf:parseType with other attributes"));
            }
            if !is_whitespace(&text) {
                return Err(conflict("rdf:parseType=\"Resource\" with text"));
            }
            let object = self.fresh();
            out.push(Triple::new(subject.clone(), predicate, object.clone()));
            for prop in elements {
                self.property_element(prop, &scope, &object, out)?;
            }
            return Ok(());
        }

        if !elements.is_empty() {
            if elements.len() > 1 {
                return Err(conflict("several node elements"));
            }
            if !is_whitespace(&text) {
                return Err(conflict("text and a node element"));
            }
            if resource.is_some() || datatype.is_some() || !properties.is_empty() {
                return Err(conflict("a node element with object attributes"));
            }
            self.node_element(elements[0], &scope, Some((subject, &predicate)), out)?;
            return Ok(());
        }

        if resource.is_some() || !properties.is_empty() {
            if !text.is_empty() {
                return Err(conflict("text with an object reference"));
            }
            if datatype.is_some() {
                return Err(conflict("rdf:datatype with an object reference"));
            }
            let object = match resource {
                Some(r) => r,
                None => self.fresh(),
            };
            out.push(Triple::new(subject.clone(), predicate, object.clone()));
            for (p, o) in properties {
                out.push(Triple::new(object.clone(), Term::Iri(p), o));
            }
            return Ok(());
        }

        let object = match datatype {
            Some(dt) => Term::typed(dt, text),
            None => self.literal(text, &scope),
        };
        out.push(Triple::new(subject.clone(), predicate, object));
        Ok(())
    }

    /// Attributes allowed on `rdf:RDF` are namespace and xml declarations.
    fn check_rdf_root(&self, e_tag: &str, attributes: &[(String, AttrValue)], scope: &Scope) -> Result<(), RdfError> {
        for (name, _) in attributes {
            if !matches!(self.classify(name, scope)?, AttrKind::Scoping) {
                return Err(self.syntax(format!("unexpected attribute `{name}` on <{e_tag}>")));
            }
        }
        Ok(())
    }
}

fn initial_scope(opts: &RdfOptions) -> Scope {
    Scope { base: opts.base.clone(), ..Scope::default() }
}

fn markup_options(opts: &RdfOptions) -> ParseOptions {
    ParseOptions::xml().source_name(opts.source_name.clone())
}

/// Parses a whole document and returns its triples in document order.
pub fn load_rdf<R: Read>(source: R, source_name: &str) -> Result<Vec<Triple>, RdfError> {
    load_rdf_with(source, &RdfOptions::new(source_name))
}

pub fn load_rdf_with<R: Read>(source: R, opts: &RdfOptions) -> Result<Vec<Triple>, RdfError> {
    let nodes = parse_tree(source, &markup_options(opts))?;
    let mut roots = nodes.iter().filter_map(|n| match n {
        MarkupNode::Element(e) => Some(e),
        _ => None,
    });
    let root = roots.next().ok_or_else(|| RdfError::Syntax { message: "no root element".into(), line: None })?;

    let mut interp = Interp::new(&opts.source_name);
    let mut out = Vec::new();
    let scope = initial_scope(opts);
    let root_scope = interp.enter(&scope, &root.attributes)?;
    if interp.expand(&root.tag, &root_scope)? == format!("{RDF_NS}RDF") {
        interp.check_rdf_root(&root.tag, &root.attributes, &root_scope)?;
        for child in &root.children {
            match child {
                MarkupNode::Element(e) => {
                    interp.node_element(e, &root_scope, None, &mut out)?;
                }
                MarkupNode::Text(t) if !is_whitespace(t) => return Err(interp.syntax("text directly inside rdf:RDF")),
                _ => {}
            }
        }
    } else {
        interp.node_element(root, &scope, None, &mut out)?;
    }
    Ok(out)
}

struct Streamer<'a, F> {
    interp: Interp<'a>,
    scope: Scope,
    depth: usize,
    action: F,
    error: Option<RdfError>,
}

#[derive(Debug)]
struct Stashed;

impl std::fmt::Display for Stashed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("rdf error")
    }
}

impl std::error::Error for Stashed {}

impl<F> Streamer<'_, F> {
    fn fail(&mut self, e: RdfError) -> HandlerError {
        self.error = Some(e);
        Box::new(Stashed)
    }
}

impl<F> EventHandler for Streamer<'_, F>
where
    F: FnMut(Vec<Triple>, &Location) -> Result<(), HandlerError>,
{
    fn on_begin(&mut self, tag: &str, attributes: &[(String, AttrValue)], line: usize) -> Result<Control, HandlerError> {
        if self.depth > 0 {
            return Ok(Control::Subtree);
        }
        self.interp.line = Some(line);
        let scoped = self.interp.enter(&self.scope, attributes).and_then(|s| {
            let is_rdf = self.interp.expand(tag, &s)? == format!("{RDF_NS}RDF");
            if is_rdf {
                self.interp.check_rdf_root(tag, attributes, &s)?;
            }
            Ok((s, is_rdf))
        });
        match scoped {
            Ok((s, true)) => {
                self.scope = s;
                self.depth = 1;
                Ok(Control::Descend)
            }
            Ok((_, false)) => Ok(Control::Subtree),
            Err(e) => Err(self.fail(e)),
        }
    }

    fn on_end(&mut self, _tag: &str) -> Result<(), HandlerError> {
        self.depth -= 1;
        Ok(())
    }

    fn on_text(&mut self, text: &str) -> Result<(), HandlerError> {
        if is_whitespace(text) {
            Ok(())
        } else {
            let e = self.interp.syntax("text directly inside rdf:RDF");
            Err(self.fail(e))
        }
    }

    fn on_subtree(&mut self, element: Element, line: usize) -> Result<(), HandlerError> {
        self.interp.line = Some(line);
        let mut batch = Vec::new();
        if let Err(e) = self.interp.node_element(&element, &self.scope, None, &mut batch) {
            return Err(self.fail(e));
        }
        let location = Location { source: self.interp.source.to_string(), line };
        (self.action)(batch, &location).map_err(|e| self.fail(RdfError::Callback(e)))
    }
}

/// Streams a document, calling `action` once per top-level description
/// with its triples and start location. Only one description is held in
/// memory at a time. An error from `action` stops the parse.
pub fn process_rdf<R, F>(source: R, source_name: &str, action: F) -> Result<(), RdfError>
where
    R: Read,
    F: FnMut(Vec<Triple>, &Location) -> Result<(), HandlerError>,
{
    process_rdf_with(source, &RdfOptions::new(source_name), action)
}

pub fn process_rdf_with<R, F>(source: R, opts: &RdfOptions, action: F) -> Result<(), RdfError>
where
    R: Read,
    F: FnMut(Vec<Triple>, &Location) -> Result<(), HandlerError>,
{
    let mut streamer = Streamer {
        interp: Interp::new(&opts.source_name),
        scope: initial_scope(opts),
        depth: 0,
        action,
        error: None,
    };
    match parse_events(source, &markup_options(opts), &mut streamer) {
        Ok(()) => Ok(()),
        Err(MarkupError::Handler(h)) => Err(streamer.error.take().unwrap_or(RdfError::Callback(h))),
        Err(e) => Err(e.into()),
    }
}
