//! Binary snapshot format.
//!
//! ```text
//! "TKQL"  u16 LE version
//! varint n, then n strings (varint byte length + UTF-8); string 0 is the source
//! records: tag u8, subject ref, predicate index, object, line (varint)
//! 0x00    u64 LE record count
//! ```
//!
//! A resource ref is `index << 1 | is_bnode`. Objects by tag: 1 resource
//! ref; 2 text index; 3 language index, text index; 4 datatype index,
//! text index. All other fields are varints.

use std::collections::HashMap;

use rustc_hash::FxHashMap;

use crate::rdfio::{Literal, Term};
use crate::store::{BulkLoad, StoredTriple};

pub const MAGIC: &[u8; 4] = b"TKQL";
pub const VERSION: u16 = 1;

const TAG_END: u8 = 0;
const TAG_RESOURCE: u8 = 1;
const TAG_PLAIN: u8 = 2;
const TAG_LANG: u8 = 3;
const TAG_TYPED: u8 = 4;

/// Decoding failure at a byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotError {
    pub offset: usize,
    pub message: String,
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

#[derive(Default)]
struct Strings<'a> {
    index: HashMap<&'a str, u32>,
    list: Vec<&'a str>,
}

impl<'a> Strings<'a> {
    fn add(&mut self, s: &'a str) -> u32 {
        *self.index.entry(s).or_insert_with(|| {
            self.list.push(s);
            self.list.len() as u32 - 1
        })
    }
}

fn resource_ref<'a>(strings: &mut Strings<'a>, t: &'a Term) -> u64 {
    match t {
        Term::Iri(i) => (strings.add(i) as u64) << 1,
        Term::BNode(b) => (strings.add(b) as u64) << 1 | 1,
        Term::Literal(_) => unreachable!("literal in resource position"),
    }
}

/// Encodes the triples of `source`. Triples from other sources are a bug
/// in the caller and are written as given.
pub fn encode_snapshot(source: &str, triples: &[StoredTriple]) -> Vec<u8> {
    let mut strings = Strings::default();
    strings.add(source);
    let mut body = Vec::with_capacity(triples.len() * 8);
    for st in triples {
        let t = &st.triple;
        let s = resource_ref(&mut strings, &t.subject);
        let p = resource_ref(&mut strings, &t.predicate) >> 1;
        match &t.object {
            Term::Literal(Literal::Plain(text)) => {
                body.push(TAG_PLAIN);
                put_varint(&mut body, s);
                put_varint(&mut body, p);
                put_varint(&mut body, strings.add(text) as u64);
            }
            Term::Literal(Literal::Lang { lang, text }) => {
                body.push(TAG_LANG);
                put_varint(&mut body, s);
                put_varint(&mut body, p);
                put_varint(&mut body, strings.add(lang) as u64);
                put_varint(&mut body, strings.add(text) as u64);
            }
            Term::Literal(Literal::Typed { datatype, text }) => {
                body.push(TAG_TYPED);
                put_varint(&mut body, s);
                put_varint(&mut body, p);
                put_varint(&mut body, strings.add(datatype) as u64);
                put_varint(&mut body, strings.add(text) as u64);
            }
            o => {
                body.push(TAG_RESOURCE);
                put_varint(&mut body, s);
                put_varint(&mut body, p);
                put_varint(&mut body, resource_ref(&mut strings, o));
            }
        }
        put_varint(&mut body, st.line as u64);
    }
    body.push(TAG_END);
    body.extend_from_slice(&(triples.len() as u64).to_le_bytes());

    let mut out = Vec::with_capacity(body.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_varint(&mut out, strings.list.len() as u64);
    for s in &strings.list {
        put_varint(&mut out, s.len() as u64);
        out.extend_from_slice(s.as_bytes());
    }
    out.extend_from_slice(&body);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SnapshotError> {
        Err(SnapshotError { offset: self.pos, message: message.into() })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.bytes.len() - self.pos < n {
            return self.fail("unexpected end of file");
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn byte(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }

    /// A varint whose value, shifted right by `shift`, must be below `n`.
    fn index(&mut self, n: u64, shift: u32) -> Result<u64, SnapshotError> {
        let start = self.pos;
        let v = self.varint()?;
        if v >> shift >= n {
            self.pos = start;
            return self.fail(format!("string index {} out of range", v >> shift));
        }
        Ok(v)
    }

    fn varint(&mut self) -> Result<u64, SnapshotError> {
        let start = self.pos;
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        self.pos = start;
        self.fail("varint too long")
    }
}

/// Interns decoded terms so that each distinct term appears once in the
/// resulting [`BulkLoad`].
struct TermTable<'s> {
    strings: &'s [String],
    terms: Vec<Term>,
    seen: FxHashMap<(u8, u64, u64), u32>,
}

impl TermTable<'_> {
    fn get(&mut self, key: (u8, u64, u64)) -> u32 {
        if let Some(i) = self.seen.get(&key) {
            return *i;
        }
        let s = |i: u64| self.strings[i as usize].clone();
        let term = match key {
            (TAG_RESOURCE, r, _) if r & 1 == 1 => Term::BNode(s(r >> 1)),
            (TAG_RESOURCE, r, _) => Term::Iri(s(r >> 1)),
            (TAG_PLAIN, t, _) => Term::Literal(Literal::Plain(s(t))),
            (TAG_LANG, l, t) => Term::Literal(Literal::Lang { lang: s(l), text: s(t) }),
            (_, d, t) => Term::Literal(Literal::Typed { datatype: s(d), text: s(t) }),
        };
        let i = self.terms.len() as u32;
        self.terms.push(term);
        self.seen.insert(key, i);
        i
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<BulkLoad, SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        r.pos = 0;
        return r.fail("bad magic");
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("two bytes"));
    if version != VERSION {
        r.pos -= 2;
        return r.fail(format!("unsupported version {version}"));
    }
    let n = r.varint()?;
    if n == 0 {
        return r.fail("empty string table");
    }
    if n > bytes.len() as u64 {
        return r.fail("string table larger than file");
    }
    let mut strings = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = r.varint()?;
        if len > (bytes.len() - r.pos) as u64 {
            return r.fail("string runs past end of file");
        }
        let start = r.pos;
        let raw = r.take(len as usize)?;
        match std::str::from_utf8(raw) {
            Ok(s) => strings.push(s.to_string()),
            Err(_) => {
                r.pos = start;
                return r.fail("string is not UTF-8");
            }
        }
    }

    let mut table = TermTable { strings: &strings, terms: Vec::new(), seen: FxHashMap::default() };
    let mut triples = Vec::new();
    loop {
        let tag = r.byte()?;
        if tag == TAG_END {
            break;
        }
        if !(TAG_RESOURCE..=TAG_TYPED).contains(&tag) {
            r.pos -= 1;
            return r.fail(format!("unknown record tag {tag}"));
        }
        let s = r.index(n, 1)?;
        let p = r.index(n, 0)?;
        let o = match tag {
            TAG_RESOURCE => (TAG_RESOURCE, r.index(n, 1)?, 0),
            TAG_PLAIN => (TAG_PLAIN, r.index(n, 0)?, 0),
            _ => {
                let a = r.index(n, 0)?;
                (tag, a, r.index(n, 0)?)
            }
        };
        let line = r.varint()?;
        let line = u32::try_from(line).or_else(|_| r.fail("line number out of range"))?;
        let s = table.get((TAG_RESOURCE, s, 0));
        let p = table.get((TAG_RESOURCE, p << 1, 0));
        let o = table.get(o);
        triples.push([s, p, o, line]);
    }
    let count = u64::from_le_bytes(r.take(8)?.try_into().expect("eight bytes"));
    if count != triples.len() as u64 {
        r.pos -= 8;
        return r.fail(format!("record count {count} does not match {} records", triples.len()));
    }
    if r.pos != bytes.len() {
        return r.fail("trailing bytes after record count");
    }
    let source = strings[0].clone();
    Ok(BulkLoad { source, terms: table.terms, triples })
}
