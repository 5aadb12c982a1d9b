//! Tokenizer and recursive-descent parser for the query language.

use std::collections::HashMap;

use super::{CompareOp, Filter, QTerm, Query, QueryError, TriplePatternExpr};
use crate::rdfio::Term;
use crate::vocab::{RDFS_NS, RDF_NS, XSD_NS};

const KEYWORDS: &[&str] = &["SELECT", "WHERE", "FILTER", "DISTINCT", "LIMIT", "USING", "ENTAILMENT"];

/// Lowercase names that resolve into the RDF and RDFS vocabularies
/// without a prefix.
const VOCABULARY: &[(&str, &str)] = &[
    ("type", RDF_NS),
    ("subClassOf", RDFS_NS),
    ("subPropertyOf", RDFS_NS),
    ("domain", RDFS_NS),
    ("range", RDFS_NS),
    ("label", RDFS_NS),
    ("comment", RDFS_NS),
    ("seeAlso", RDFS_NS),
    ("isDefinedBy", RDFS_NS),
];

/// Namespace for unprefixed names that are not vocabulary words, unless
/// the query declares one with `USING <iri>`.
pub const DEFAULT_NAMESPACE: &str = "http://example.org/";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(&'static str),
    Var(String),
    Name(String),
    Prefixed(String, String),
    Iri(String),
    Str(String),
    Number(String),
    Punct(&'static str),
    Lang(String),
    Carets,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Keyword(k) => k.to_string(),
            Tok::Var(v) | Tok::Name(v) => v.clone(),
            Tok::Prefixed(p, l) => format!("{p}:{l}"),
            Tok::Iri(i) => format!("<{i}>"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Number(n) => n.clone(),
            Tok::Punct(p) => p.to_string(),
            Tok::Lang(l) => format!("@{l}"),
            Tok::Carets => "^^".into(),
            Tok::End => "end of query".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| Err(QueryError::Syntax { line, column, message });
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (i, line, col);
        let tok = match c {
            '(' | ')' | ',' | '*' => {
                i += 1;
                Tok::Punct(match c {
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    _ => "*",
                })
            }
            '=' => {
                i += 1;
                Tok::Punct("=")
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                i += 2;
                Tok::Punct("!=")
            }
            '<' if chars.get(i + 1) == Some(&'=') => {
                i += 2;
                Tok::Punct("<=")
            }
            '>' if chars.get(i + 1) == Some(&'=') => {
                i += 2;
                Tok::Punct(">=")
            }
            '>' => {
                i += 1;
                Tok::Punct(">")
            }
            '<' => {
                // An IRI when a closing '>' follows without whitespace.
                let end = chars[i + 1..].iter().position(|c| *c == '>' || c.is_whitespace());
                match end {
                    Some(n) if chars[i + 1 + n] == '>' => {
                        let iri: String = chars[i + 1..i + 1 + n].iter().collect();
                        i += n + 2;
                        Tok::Iri(iri)
                    }
                    _ => {
                        i += 1;
                        Tok::Punct("<")
                    }
                }
            }
            '^' if chars.get(i + 1) == Some(&'^') => {
                i += 2;
                Tok::Carets
            }
            '@' => {
                i += 1;
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '-') {
                    i += 1;
                }
                if s == i {
                    return err(line, col, "expected a language tag after '@'".into());
                }
                Tok::Lang(chars[s..i].iter().collect())
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return err(start.1, start.2, "unterminated string".into()),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let e = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                _ => return err(line, col + (i - start.0), "bad escape in string".into()),
                            };
                            s.push(e);
                            i += 2;
                        }
                        Some(c) => {
                            s.push(*c);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let s = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let n: String = chars[s..i].iter().collect();
                if n.ends_with('.') || n.matches('.').count() > 1 {
                    return err(line, col, format!("bad number {n}"));
                }
                Tok::Number(n)
            }
            c if c.is_alphabetic() || c == '_' => {
                let s = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[s..i].iter().collect();
                if chars.get(i) == Some(&':') {
                    i += 1;
                    let ls = i;
                    while i < chars.len() && (is_name_char(chars[i]) || chars[i] == '.') {
                        i += 1;
                    }
                    while i > ls && chars[i - 1] == '.' {
                        i -= 1;
                    }
                    Tok::Prefixed(word, chars[ls..i].iter().collect())
                } else if let Some(k) = KEYWORDS.iter().find(|k| **k == word) {
                    Tok::Keyword(k)
                } else if c.is_uppercase() {
                    Tok::Var(word)
                } else {
                    Tok::Name(word)
                }
            }
            c => return err(line, col, format!("unexpected character {c:?}")),
        };
        col += i - start.0;
        out.push(Spanned { tok, line: start.1, column: start.2 });
    }
    out.push(Spanned { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: HashMap<String, String>,
    default_ns: String,
    hidden: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, QueryError> {
        let t = &self.toks[self.pos];
        Err(QueryError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("expected {expected}, found {}", t.tok.describe()),
        })
    }

    fn keyword(&mut self, k: &str) -> bool {
        if *self.peek() == Tok::Keyword(KEYWORDS.iter().find(|x| **x == k).expect("keyword")) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(x) if *x == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), QueryError> {
        if self.punct(p) {
            Ok(())
        } else {
            self.fail(&format!("'{p}'"))
        }
    }

    fn iri_of_name(&self, name: &str) -> String {
        match VOCABULARY.iter().find(|(n, _)| *n == name) {
            Some((n, ns)) => format!("{ns}{n}"),
            None => format!("{}{name}", self.default_ns),
        }
    }

    fn prefixed(&self, prefix: &str, local: &str) -> Result<String, QueryError> {
        match self.prefixes.get(prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => {
                let t = &self.toks[self.pos - 1];
                Err(QueryError::Syntax {
                    line: t.line,
                    column: t.column,
                    message: format!("undeclared prefix {prefix}"),
                })
            }
        }
    }

    fn resource(&mut self) -> Result<Option<String>, QueryError> {
        Ok(Some(match self.peek().clone() {
            Tok::Iri(i) => {
                self.pos += 1;
                i
            }
            Tok::Prefixed(p, l) => {
                self.pos += 1;
                self.prefixed(&p, &l)?
            }
            Tok::Name(n) => {
                self.pos += 1;
                self.iri_of_name(&n)
            }
            _ => return Ok(None),
        }))
    }

    /// A term in a pattern or filter. Numbers come back as plain literals
    /// flagged as numeric.
    fn term(&mut self) -> Result<Option<(QTerm, bool)>, QueryError> {
        if let Some(iri) = self.resource()? {
            return Ok(Some((QTerm::Const(Term::Iri(iri)), false)));
        }
        match self.peek().clone() {
            Tok::Var(v) => {
                self.pos += 1;
                Ok(Some((QTerm::Var(v), false)))
            }
            Tok::Number(n) => {
                self.pos += 1;
                Ok(Some((QTerm::Const(Term::plain(n)), true)))
            }
            Tok::Str(s) => {
                self.pos += 1;
                match self.peek().clone() {
                    Tok::Lang(l) => {
                        self.pos += 1;
                        Ok(Some((QTerm::Const(Term::lang(&l, s)), false)))
                    }
                    Tok::Carets => {
                        self.pos += 1;
                        match self.resource()? {
                            Some(dt) => Ok(Some((QTerm::Const(Term::typed(dt, s)), false))),
                            None => self.fail("a datatype IRI"),
                        }
                    }
                    _ => Ok(Some((QTerm::Const(Term::plain(s)), false))),
                }
            }
            _ => Ok(None),
        }
    }

    fn pattern(&mut self, filters: &mut Vec<Filter>) -> Result<TriplePatternExpr, QueryError> {
        let open = self.toks[self.pos].clone();
        self.expect_punct("(")?;
        let mut parts = Vec::new();
        for i in 0..3 {
            if i > 0 {
                self.expect_punct(",")?;
            }
            let at = self.toks[self.pos].clone();
            let Some((term, numeric)) = self.term()? else { return self.fail("a term") };
            let literal = matches!(&term, QTerm::Const(Term::Literal(_)));
            if i < 2 && literal {
                return Err(QueryError::Syntax {
                    line: at.line,
                    column: at.column,
                    message: format!("a literal cannot be the {}", if i == 0 { "subject" } else { "predicate" }),
                });
            }
            if numeric {
                // Numbers match any literal with the same numeric value.
                self.hidden += 1;
                let var = format!("_n{}", self.hidden);
                filters.push(Filter { left: QTerm::Var(var.clone()), op: CompareOp::Eq, right: term });
                parts.push(QTerm::Var(var));
            } else {
                parts.push(term);
            }
        }
        self.expect_punct(")")?;
        let object = parts.pop().expect("three parts");
        let predicate = parts.pop().expect("three parts");
        let subject = parts.pop().expect("three parts");
        Ok(TriplePatternExpr { subject, predicate, object, line: open.line, column: open.column })
    }

    fn filter(&mut self) -> Result<Filter, QueryError> {
        let Some((left, _)) = self.term()? else { return self.fail("a variable or value") };
        let op = match self.peek() {
            Tok::Punct("=") => CompareOp::Eq,
            Tok::Punct("!=") => CompareOp::Ne,
            Tok::Punct("<") => CompareOp::Lt,
            Tok::Punct("<=") => CompareOp::Le,
            Tok::Punct(">") => CompareOp::Gt,
            Tok::Punct(">=") => CompareOp::Ge,
            _ => return self.fail("a comparison operator"),
        };
        self.pos += 1;
        let Some((right, _)) = self.term()? else { return self.fail("a variable or value") };
        Ok(Filter { left, op, right })
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        while self.keyword("USING") {
            match self.next().tok {
                Tok::Iri(ns) => self.default_ns = ns,
                Tok::Name(prefix) => {
                    self.expect_punct("=")?;
                    match self.next().tok {
                        Tok::Iri(ns) => {
                            self.prefixes.insert(prefix, ns);
                        }
                        _ => {
                            self.pos -= 1;
                            return self.fail("a namespace IRI");
                        }
                    }
                }
                _ => {
                    self.pos -= 1;
                    return self.fail("a prefix name or namespace IRI");
                }
            }
        }
        if !self.keyword("SELECT") {
            return self.fail("SELECT");
        }
        let mut distinct = self.keyword("DISTINCT");
        let mut projection = Vec::new();
        let star = self.punct("*");
        if !star {
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        self.pos += 1;
                        if !projection.contains(&v) {
                            projection.push(v);
                        }
                    }
                    _ => return self.fail("a variable"),
                }
                if !self.punct(",") {
                    break;
                }
            }
        }
        if !self.keyword("WHERE") {
            return self.fail("WHERE");
        }
        let mut filters = Vec::new();
        let mut patterns = vec![self.pattern(&mut filters)?];
        while self.punct(",") {
            patterns.push(self.pattern(&mut filters)?);
        }
        while self.keyword("FILTER") {
            filters.push(self.filter()?);
        }
        distinct |= self.keyword("DISTINCT");
        let mut limit = None;
        if self.keyword("LIMIT") {
            match self.next().tok {
                Tok::Number(n) if n.parse::<usize>().is_ok() => limit = n.parse().ok(),
                _ => {
                    self.pos -= 1;
                    return self.fail("a non-negative integer");
                }
            }
        }
        let mut entailment = None;
        if self.keyword("ENTAILMENT") {
            match self.next().tok {
                Tok::Name(n) => entailment = Some(n),
                _ => {
                    self.pos -= 1;
                    return self.fail("an entailment name");
                }
            }
        }
        if *self.peek() != Tok::End {
            return self.fail("end of query");
        }

        let mut vars: Vec<String> = Vec::new();
        for p in &patterns {
            for t in [&p.subject, &p.predicate, &p.object] {
                if let QTerm::Var(v) = t {
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
        }
        if star {
            projection = vars.iter().filter(|v| !v.starts_with('_')).cloned().collect();
        }
        for v in projection.iter().chain(filters.iter().flat_map(|f| f.variables())) {
            if !vars.contains(v) {
                return Err(QueryError::UnboundVariable(v.clone()));
            }
        }
        Ok(Query { projection, patterns, filters, distinct, limit, entailment, variables: vars })
    }
}

pub(super) fn parse(text: &str) -> Result<Query, QueryError> {
    let prefixes = [("rdf", RDF_NS), ("rdfs", RDFS_NS), ("xsd", XSD_NS)]
        .into_iter()
        .map(|(p, n)| (p.to_string(), n.to_string()))
        .collect();
    let mut p = Parser { toks: tokenize(text)?, pos: 0, prefixes, default_ns: DEFAULT_NAMESPACE.into(), hidden: 0 };
    p.query()
}
