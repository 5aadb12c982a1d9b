use std::collections::HashMap;
use std::io::Write;

use super::{Literal, RdfError, Term, Triple};
use crate::markup::{quote_attribute, quote_text};
use crate::vocab::RDF_NS;

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_alphanumeric() || c == '-' || c == '.'
}

/// Splits an IRI into a namespace and the longest suffix usable as an
/// element local name.
fn split_iri(iri: &str) -> Option<(&str, &str)> {
    let mut start = iri.len();
    for (i, c) in iri.char_indices().rev() {
        if !is_name_char(c) {
            break;
        }
        start = i;
    }
    let local = iri[start..].trim_start_matches(|c: char| !is_name_start(c));
    let split = iri.len() - local.len();
    (!local.is_empty() && split > 0).then(|| iri.split_at(split))
}

struct Names {
    prefixes: Vec<(String, String)>,
    by_ns: HashMap<String, usize>,
    bnodes: HashMap<String, usize>,
}

impl Names {
    fn qname(&self, iri: &str) -> String {
        let (ns, local) = split_iri(iri).expect("checked before writing");
        if ns == RDF_NS {
            format!("rdf:{local}")
        } else {
            format!("{}:{local}", self.prefixes[self.by_ns[ns]].0)
        }
    }

    fn bnode(&self, id: &str) -> String {
        format!("b{}", self.bnodes[id])
    }
}

/// Writes triples as an RDF/XML document with one `rdf:Description` per
/// subject. Blank nodes are written with `rdf:nodeID`.
pub fn write_rdf_xml<W: Write>(sink: &mut W, triples: &[Triple]) -> Result<(), RdfError> {
    let mut names = Names { prefixes: Vec::new(), by_ns: HashMap::new(), bnodes: HashMap::new() };
    let mut subjects: Vec<&Term> = Vec::new();
    let mut grouped: HashMap<&Term, Vec<&Triple>> = HashMap::new();
    for t in triples {
        t.check_roles()?;
        let p = t.predicate.as_iri().expect("role checked");
        let (ns, _) = split_iri(p).ok_or_else(|| RdfError::Role(format!("predicate <{p}> has no XML local name")))?;
        if ns != RDF_NS && !names.by_ns.contains_key(ns) {
            names.by_ns.insert(ns.to_string(), names.prefixes.len());
            names.prefixes.push((format!("ns{}", names.prefixes.len()), ns.to_string()));
        }
        for term in [&t.subject, &t.object] {
            if let Term::BNode(b) = term {
                let n = names.bnodes.len() + 1;
                names.bnodes.entry(b.clone()).or_insert(n);
            }
        }
        let group = grouped.entry(&t.subject).or_default();
        if group.is_empty() {
            subjects.push(&t.subject);
        }
        group.push(t);
    }

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<rdf:RDF xmlns:rdf=\"{RDF_NS}\""));
    for (prefix, ns) in &names.prefixes {
        out.push_str(&format!(" xmlns:{prefix}=\"{}\"", quote_attribute(ns)));
    }
    out.push_str(">\n");
    for subject in subjects {
        match subject {
            Term::Iri(i) => out.push_str(&format!("  <rdf:Description rdf:about=\"{}\">\n", quote_attribute(i))),
            Term::BNode(b) => out.push_str(&format!("  <rdf:Description rdf:nodeID=\"{}\">\n", names.bnode(b))),
            Term::Literal(_) => unreachable!("role checked"),
        }
        for t in &grouped[subject] {
            let q = names.qname(t.predicate.as_iri().expect("role checked"));
            match &t.object {
                Term::Iri(i) => out.push_str(&format!("    <{q} rdf:resource=\"{}\"/>\n", quote_attribute(i))),
                Term::BNode(b) => out.push_str(&format!("    <{q} rdf:nodeID=\"{}\"/>\n", names.bnode(b))),
                Term::Literal(l) => {
                    let attr = match l {
                        Literal::Plain(_) => String::new(),
                        Literal::Lang { lang, .. } => format!(" xml:lang=\"{}\"", quote_attribute(lang)),
                        Literal::Typed { datatype, .. } => format!(" rdf:datatype=\"{}\"", quote_attribute(datatype)),
                    };
                    out.push_str(&format!("    <{q}{attr}>{}</{q}>\n", quote_text(l.text())));
                }
            }
        }
        out.push_str("  </rdf:Description>\n");
    }
    out.push_str("</rdf:RDF>\n");
    sink.write_all(out.as_bytes())?;
    Ok(())
}

pub fn rdf_xml_string(triples: &[Triple]) -> Result<String, RdfError> {
    let mut buf = Vec::new();
    write_rdf_xml(&mut buf, triples)?;
    Ok(String::from_utf8(buf).expect("writer emits UTF-8"))
}
