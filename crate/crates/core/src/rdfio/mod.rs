//! RDF/XML input and output for a practical subset of the syntax.
//!
//! Supported: an `rdf:RDF` root or a single node element, `rdf:Description`
//! and typed node elements, `rdf:about`, `rdf:nodeID`, `rdf:resource`,
//! `rdf:datatype`, `rdf:parseType="Resource"`, nested node elements, property
//! attributes, and inherited `xml:lang` and `xml:base`. `rdf:ID`, `rdf:li`,
//! `rdf:bagID` and other parse types are rejected.
//!
//! Blank nodes are named `__<source>#<n>` with `n` counting from 1 in each
//! parse.
//!
//! ```
//! use triplekit::rdfio::{load_rdf, Term};
//!
//! let doc = r#"<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
//!                       xmlns:ex="http://example.org/">
//!   <rdf:Description rdf:about="http://example.org/a">
//!     <ex:name>Anna</ex:name>
//!   </rdf:Description>
//! </rdf:RDF>"#;
//! let triples = load_rdf(doc.as_bytes(), "doc").unwrap();
//! assert_eq!(triples[0].object, Term::plain("Anna"));
//! ```

mod iso;
mod parse;
mod write;

use std::fmt;

use thiserror::Error;

use crate::markup::{HandlerError, MarkupError};

pub use iso::isomorphic;
pub use parse::{load_rdf, load_rdf_with, process_rdf, process_rdf_with};
pub use write::{rdf_xml_string, write_rdf_xml};

#[derive(Debug, Error)]
pub enum RdfError {
    #[error(transparent)]
    Markup(MarkupError),
    #[error("{}unsupported construct {construct} in <{element}>", at(*.line))]
    Unsupported { element: String, construct: String, line: Option<usize> },
    #[error("{}{message}", at(*.line))]
    Syntax { message: String, line: Option<usize> },
    #[error("{}cannot resolve relative IRI `{iri}` without a base", at(*.line))]
    RelativeIri { iri: String, line: Option<usize> },
    #[error("{0}")]
    Role(String),
    #[error("callback failed: {0}")]
    Callback(HandlerError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl From<MarkupError> for RdfError {
    fn from(e: MarkupError) -> Self {
        match e {
            MarkupError::Io(io) => RdfError::Io(io),
            other => RdfError::Markup(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Plain(String),
    /// Language tags are stored lowercase.
    Lang { lang: String, text: String },
    Typed { datatype: String, text: String },
}

impl Literal {
    pub fn text(&self) -> &str {
        match self {
            Literal::Plain(t) | Literal::Lang { text: t, .. } | Literal::Typed { text: t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    BNode(String),
    Literal(Literal),
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Term {
        Term::Iri(s.into())
    }

    pub fn bnode(s: impl Into<String>) -> Term {
        Term::BNode(s.into())
    }

    pub fn plain(s: impl Into<String>) -> Term {
        Term::Literal(Literal::Plain(s.into()))
    }

    pub fn lang(lang: &str, text: impl Into<String>) -> Term {
        Term::Literal(Literal::Lang { lang: lang.to_lowercase(), text: text.into() })
    }

    pub fn typed(datatype: impl Into<String>, text: impl Into<String>) -> Term {
        Term::Literal(Literal::Typed { datatype: datatype.into(), text: text.into() })
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    pub fn is_bnode(&self) -> bool {
        matches!(self, Term::BNode(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }
}

fn escape_ntriples(s: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for c in s.chars() {
        match c {
            '\\' => f.write_str("\\\\")?,
            '"' => f.write_str("\\\"")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    Ok(())
}

/// N-Triples style: `<iri>`, `_:id`, `"text"`, `"text"@lang`,
/// `"text"^^<datatype>`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(i) => write!(f, "<{i}>"),
            Term::BNode(b) => write!(f, "_:{b}"),
            Term::Literal(l) => {
                f.write_str("\"")?;
                escape_ntriples(l.text(), f)?;
                f.write_str("\"")?;
                match l {
                    Literal::Plain(_) => Ok(()),
                    Literal::Lang { lang, .. } => write!(f, "@{lang}"),
                    Literal::Typed { datatype, .. } => write!(f, "^^<{datatype}>"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple { subject, predicate, object }
    }

    /// Subjects must be IRIs or blank nodes and predicates IRIs.
    pub fn check_roles(&self) -> Result<(), RdfError> {
        if self.subject.is_literal() {
            return Err(RdfError::Role(format!("literal {} used as subject", self.subject)));
        }
        if !matches!(self.predicate, Term::Iri(_)) {
            return Err(RdfError::Role(format!("{} used as predicate", self.predicate)));
        }
        Ok(())
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// Where a description started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub source: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.line)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RdfOptions {
    pub source_name: String,
    /// Base IRI for relative references. Without one they are an error.
    pub base: Option<String>,
}

impl RdfOptions {
    pub fn new(source_name: impl Into<String>) -> Self {
        RdfOptions { source_name: source_name.into(), base: None }
    }

    pub fn base(mut self, base: impl Into<String>) -> Self {
        self.base = Some(base.into());
        self
    }
}
