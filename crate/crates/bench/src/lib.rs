//! Synthetic data for the benchmarks in `benches/`.

use triplekit::rdfio::{Term, Triple};

pub const EX: &str = "http://bench.example/";

/// `n` people, each with a name, an age and a link to another person.
pub fn people(n: usize) -> Vec<Triple> {
    let mut out = Vec::with_capacity(n * 3);
    for i in 0..n {
        let s = Term::iri(format!("{EX}p{i}"));
        out.push(Triple::new(s.clone(), Term::iri(format!("{EX}name")), Term::plain(format!("Person {i}"))));
        out.push(Triple::new(s.clone(), Term::iri(format!("{EX}age")), Term::plain((i % 90).to_string())));
        out.push(Triple::new(s, Term::iri(format!("{EX}knows")), Term::iri(format!("{EX}p{}", (i * 7 + 1) % n))));
    }
    out
}

/// RDF/XML document with one description per person.
pub fn people_rdf_xml(n: usize) -> String {
    let mut doc = format!(
        "<?xml version=\"1.0\"?>\n<rdf:RDF xmlns:rdf=\"http://www.w3.org/1999/02/22-rdf-syntax-ns#\" xmlns:ex=\"{EX}\">\n"
    );
    for i in 0..n {
        doc.push_str(&format!(
            "<rdf:Description rdf:about=\"{EX}p{i}\"><ex:name>Person {i}</ex:name><ex:age>{}</ex:age><ex:knows rdf:resource=\"{EX}p{}\"/></rdf:Description>\n",
            i % 90,
            (i * 7 + 1) % n
        ));
    }
    doc.push_str("</rdf:RDF>\n");
    doc
}
