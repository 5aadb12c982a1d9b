//! Journal records, one per line:
//!
//! ```text
//! begin(7,1760000000.25).
//! assert(iri("http://x/s"),iri("http://x/p"),literal(lang("en"),"hi"),3).
//! retract(bnode("b1"),iri("http://x/p"),iri("http://x/o")).
//! update(triple(..),triple(..)).
//! end(7).
//! ```
//!
//! Terms are `iri(S)`, `bnode(S)`, `literal(S)`, `literal(lang(L),S)` and
//! `literal(type(D),S)`. Strings are double quoted with `\\`, `\"`, `\n`,
//! `\r`, `\t` and `\u{hex}` escapes.

use std::fmt::{self, Write as _};

use crate::rdfio::{Literal, Term, Triple};

#[derive(Debug, Clone, PartialEq)]
pub enum JournalRecord {
    Begin { id: u64, time: f64 },
    Assert { triple: Triple, line: u32 },
    Retract(Triple),
    Update { old: Triple, new: Triple },
    End { id: u64 },
}

fn write_str(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c if c.is_control() => write!(f, "\\u{{{:x}}}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

struct T<'a>(&'a Term);

impl fmt::Display for T<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Term::Iri(i) => {
                f.write_str("iri(")?;
                write_str(f, i)?;
            }
            Term::BNode(b) => {
                f.write_str("bnode(")?;
                write_str(f, b)?;
            }
            Term::Literal(Literal::Plain(s)) => {
                f.write_str("literal(")?;
                write_str(f, s)?;
            }
            Term::Literal(Literal::Lang { lang, text }) => {
                f.write_str("literal(lang(")?;
                write_str(f, lang)?;
                f.write_str("),")?;
                write_str(f, text)?;
            }
            Term::Literal(Literal::Typed { datatype, text }) => {
                f.write_str("literal(type(")?;
                write_str(f, datatype)?;
                f.write_str("),")?;
                write_str(f, text)?;
            }
        }
        f.write_char(')')
    }
}

struct Spo<'a>(&'a Triple);

impl fmt::Display for Spo<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", T(&self.0.subject), T(&self.0.predicate), T(&self.0.object))
    }
}

/// The record's line, without the trailing newline.
impl fmt::Display for JournalRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JournalRecord::Begin { id, time } => write!(f, "begin({id},{time:?})."),
            JournalRecord::Assert { triple, line } => write!(f, "assert({},{line}).", Spo(triple)),
            JournalRecord::Retract(t) => write!(f, "retract({}).", Spo(t)),
            JournalRecord::Update { old, new } => write!(f, "update(triple({}),triple({})).", Spo(old), Spo(new)),
            JournalRecord::End { id } => write!(f, "end({id})."),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Num(String),
    Compound(String, Vec<Value>),
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: &str) -> Result<T, String> {
        Err(format!("{msg} at column {}", self.pos + 1))
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> Result<(), String> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.err(&format!("expected '{c}'"))
        }
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            Some('"') => self.string().map(Value::Str),
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
                    self.pos += 1;
                }
                Ok(Value::Num(self.s[start..self.pos].to_string()))
            }
            Some(c) if c.is_ascii_lowercase() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_lowercase()) {
                    self.pos += 1;
                }
                let name = self.s[start..self.pos].to_string();
                self.eat('(')?;
                let mut args = vec![self.value()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    args.push(self.value()?);
                }
                self.eat(')')?;
                Ok(Value::Compound(name, args))
            }
            _ => self.err("expected a value"),
        }
    }

    fn string(&mut self) -> Result<String, String> {
        self.eat('"')?;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else { return self.err("unterminated string") };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else { return self.err("unterminated escape") };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        'r' => out.push('\r'),
                        't' => out.push('\t'),
                        '"' | '\\' => out.push(e),
                        'u' => {
                            self.eat('{')?;
                            let start = self.pos;
                            while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                                self.pos += 1;
                            }
                            let code = u32::from_str_radix(&self.s[start..self.pos], 16).ok().and_then(char::from_u32);
                            let Some(ch) = code else { return self.err("bad \\u escape") };
                            self.eat('}')?;
                            out.push(ch);
                        }
                        _ => return self.err("unknown escape"),
                    }
                }
                c => out.push(c),
            }
        }
    }
}

fn term(v: &Value) -> Result<Term, String> {
    let Value::Compound(name, args) = v else { return Err(format!("expected a term, found {v:?}")) };
    match (name.as_str(), args.as_slice()) {
        ("iri", [Value::Str(s)]) => Ok(Term::Iri(s.clone())),
        ("bnode", [Value::Str(s)]) => Ok(Term::BNode(s.clone())),
        ("literal", [Value::Str(s)]) => Ok(Term::Literal(Literal::Plain(s.clone()))),
        ("literal", [Value::Compound(kind, a), Value::Str(text)]) => match (kind.as_str(), a.as_slice()) {
            ("lang", [Value::Str(lang)]) => Ok(Term::Literal(Literal::Lang { lang: lang.clone(), text: text.clone() })),
            ("type", [Value::Str(dt)]) => {
                Ok(Term::Literal(Literal::Typed { datatype: dt.clone(), text: text.clone() }))
            }
            _ => Err(format!("bad literal qualifier {kind}")),
        },
        _ => Err(format!("bad term {name}/{}", args.len())),
    }
}

fn triple(args: &[Value]) -> Result<Triple, String> {
    match args {
        [s, p, o] => Ok(Triple::new(term(s)?, term(p)?, term(o)?)),
        _ => Err("expected subject, predicate and object".into()),
    }
}

fn number<T: std::str::FromStr>(v: &Value) -> Result<T, String> {
    match v {
        Value::Num(n) => n.parse().map_err(|_| format!("bad number {n}")),
        _ => Err(format!("expected a number, found {v:?}")),
    }
}

fn wrapped(v: &Value) -> Result<Triple, String> {
    match v {
        Value::Compound(name, args) if name == "triple" => triple(args),
        _ => Err("expected triple(..)".into()),
    }
}

impl JournalRecord {
    pub fn parse(line: &str) -> Result<JournalRecord, String> {
        let mut p = Parser { s: line, pos: 0 };
        let v = p.value()?;
        p.eat('.')?;
        if p.pos != line.len() {
            return p.err("trailing text");
        }
        let Value::Compound(name, args) = v else { return Err("expected a record".into()) };
        match (name.as_str(), args.as_slice()) {
            ("begin", [id, time]) => Ok(JournalRecord::Begin { id: number(id)?, time: number(time)? }),
            ("end", [id]) => Ok(JournalRecord::End { id: number(id)? }),
            ("assert", [s, p, o, line]) => {
                Ok(JournalRecord::Assert { triple: triple(&[s.clone(), p.clone(), o.clone()])?, line: number(line)? })
            }
            ("retract", args) => Ok(JournalRecord::Retract(triple(args)?)),
            ("update", [old, new]) => Ok(JournalRecord::Update { old: wrapped(old)?, new: wrapped(new)? }),
            _ => Err(format!("unknown record {name}/{}", args.len())),
        }
    }
}

/// Journal lines grouped into transactions.
#[derive(Debug, Default)]
pub struct JournalContents {
    pub transactions: Vec<Vec<JournalRecord>>,
    pub last_id: u64,
    /// A final transaction without `end`, or an unterminated last line.
    pub partial: bool,
}

/// Splits journal text into complete transactions. Errors carry the
/// 1-based line number.
pub fn read_journal(text: &str) -> Result<JournalContents, (usize, String)> {
    let mut out = JournalContents::default();
    let mut current: Option<(u64, Vec<JournalRecord>)> = None;
    let mut lines = text.split_inclusive('\n').enumerate();
    while let Some((i, raw)) = lines.next() {
        let Some(line) = raw.strip_suffix('\n') else {
            // Unterminated last line: a write cut short.
            out.partial = true;
            break;
        };
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let record = JournalRecord::parse(line).map_err(|e| (i + 1, e))?;
        match (record, &mut current) {
            (JournalRecord::Begin { id, .. }, None) => {
                current = Some((id, Vec::new()));
                out.last_id = out.last_id.max(id);
            }
            (JournalRecord::Begin { .. }, Some(_)) => return Err((i + 1, "begin inside a transaction".into())),
            (JournalRecord::End { id }, Some((open, records))) => {
                if id != *open {
                    return Err((i + 1, format!("end({id}) does not close transaction {open}")));
                }
                out.transactions.push(std::mem::take(records));
                current = None;
            }
            (JournalRecord::End { .. }, None) => return Err((i + 1, "end outside a transaction".into())),
            (r, Some((_, records))) => records.push(r),
            (_, None) => return Err((i + 1, "change outside a transaction".into())),
        }
    }
    if current.is_some() {
        out.partial = true;
    }
    Ok(out)
}
